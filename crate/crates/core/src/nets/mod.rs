//! Dense rectifier networks with hand-written reverse-mode gradients.
//!
//! Parameters of every layer live in one flat buffer (`W_0, b_0, W_1, b_1,
//! ...`, weights row-major with shape `out × in`), which keeps the optimizer,
//! norm clipping and Polyak averaging simple slice operations. Batched
//! forward and backward passes go through `matrixmultiply`'s GEMM kernels.

mod optim;
mod policy;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::{Rng, RngExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use optim::{adam_step, clip_global_norm, clip_gradient_norm, polyak_update, AdamState};
pub use policy::{GaussianPolicy, PolicySample, LOG_STD_INIT, LOG_STD_MAX, LOG_STD_MIN};

/// Floating-point element type of a network.
pub trait Scalar:
    Float
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Default
    + Debug
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;

    /// `C ← α·A·B + β·C` with arbitrary strides.
    ///
    /// # Safety
    /// The pointers must address matrices of the given shapes and strides.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

// Below this size in any dimension the GEMM packing overhead dominates and
// plain dot / axpy loops are faster.
const SMALL: usize = 4;

fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let xc = x.chunks_exact(8);
    let yc = y.chunks_exact(8);
    let tail: T = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| *a * *b).sum();
    for (a, b) in xc.zip(yc) {
        for i in 0..8 {
            acc[i] += a[i] * b[i];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * *x;
    }
}

fn scale<T: Scalar>(beta: T, c: &mut [T]) {
    if beta == T::zero() {
        c.iter_mut().for_each(|v| *v = T::zero());
    } else if beta != T::one() {
        c.iter_mut().for_each(|v| *v *= beta);
    }
}

/// Row-major `C (m×n) ← A·Bᵀ + β·C` where `A` is `m×k` and `B` is `n×k`.
fn matmul_nt<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m <= SMALL || n <= SMALL {
        for i in 0..m {
            let ai = &a[i * k..(i + 1) * k];
            for j in 0..n {
                let prev = if beta == T::zero() { T::zero() } else { beta * c[i * n + j] };
                c[i * n + j] = prev + dot(ai, &b[j * k..(j + 1) * k]);
            }
        }
        return;
    }
    // SAFETY: shapes checked above; B is read transposed through its strides.
    unsafe {
        T::gemm(
            m, k, n, T::one(), a.as_ptr(), k as isize, 1, b.as_ptr(), 1, k as isize, beta,
            c.as_mut_ptr(), n as isize, 1,
        )
    }
}

/// Row-major `C (m×n) ← Aᵀ·B + β·C` where `A` is `k×m` and `B` is `k×n`.
fn matmul_tn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m <= SMALL || k <= SMALL {
        scale(beta, &mut c[..m * n]);
        for r in 0..k {
            let br = &b[r * n..(r + 1) * n];
            for i in 0..m {
                axpy(a[r * m + i], br, &mut c[i * n..(i + 1) * n]);
            }
        }
        return;
    }
    // SAFETY: shapes checked above; A is read transposed through its strides.
    unsafe {
        T::gemm(
            m, k, n, T::one(), a.as_ptr(), 1, m as isize, b.as_ptr(), n as isize, 1, beta,
            c.as_mut_ptr(), n as isize, 1,
        )
    }
}

/// Row-major `C (m×n) ← A·B` where `A` is `m×k` and `B` is `k×n`.
fn matmul_nn<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m <= SMALL || k <= SMALL {
        scale(T::zero(), &mut c[..m * n]);
        for i in 0..m {
            let ci = &mut c[i * n..(i + 1) * n];
            for r in 0..k {
                axpy(a[i * k + r], &b[r * n..(r + 1) * n], ci);
            }
        }
        return;
    }
    // SAFETY: shapes checked above.
    unsafe {
        T::gemm(
            m, k, n, T::one(), a.as_ptr(), k as isize, 1, b.as_ptr(), n as isize, 1, T::zero(),
            c.as_mut_ptr(), n as isize, 1,
        )
    }
}

/// Parameters of a fully connected network: rectifier on hidden layers,
/// identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    layer_dims: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<T>,
}

/// Gradients share the parameter layout.
pub type MlpGrads<T> = MlpParams<T>;

fn layout(dims: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(dims.len());
    let mut at = 0;
    offsets.push(0);
    for w in dims.windows(2) {
        at += w[0] * w[1] + w[1];
        offsets.push(at);
    }
    offsets
}

impl<T: Scalar> MlpParams<T> {
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "layer dims {layer_dims:?} need at least two positive entries"
            )));
        }
        let offsets = layout(layer_dims);
        let total = *offsets.last().unwrap();
        Ok(MlpParams {
            layer_dims: layer_dims.to_vec(),
            offsets,
            data: vec![T::zero(); total],
        })
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn init_uniform<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(layer_dims)?;
        for l in 0..p.num_layers() {
            let bound = 1.0 / (p.layer_dims[l] as f64).sqrt();
            let (start, end) = (p.offsets[l], p.offsets[l + 1]);
            for v in &mut p.data[start..end] {
                *v = T::of(rng.random_range(-bound..bound));
            }
        }
        Ok(p)
    }

    /// Builds a network from per-layer row-major weights and biases.
    pub fn from_layers(layer_dims: &[usize], weights: &[Vec<T>], biases: &[Vec<T>]) -> Result<Self> {
        let mut p = Self::zeros(layer_dims)?;
        if weights.len() != p.num_layers() || biases.len() != p.num_layers() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} layers, got {} weight and {} bias tensors",
                p.num_layers(),
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..p.num_layers() {
            if weights[l].len() != p.weights(l).len() || biases[l].len() != p.bias(l).len() {
                return Err(Error::ShapeMismatch(format!("layer {l} tensor sizes do not match {layer_dims:?}")));
            }
            p.weights_mut(l).copy_from_slice(&weights[l]);
            p.bias_mut(l).copy_from_slice(&biases[l]);
        }
        Ok(p)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let s = self.offsets[l];
        s..s + self.layer_dims[l] * self.layer_dims[l + 1]
    }

    fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        self.weight_range(l).end..self.offsets[l + 1]
    }

    /// Layer `l` weights, shape `(dims[l+1], dims[l])` row-major.
    pub fn weights(&self, l: usize) -> &[T] {
        &self.data[self.weight_range(l)]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [T] {
        let r = self.weight_range(l);
        &mut self.data[r]
    }

    pub fn bias(&self, l: usize) -> &[T] {
        &self.data[self.bias_range(l)]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [T] {
        let r = self.bias_range(l);
        &mut self.data[r]
    }

    /// `(name, values)` for every weight and bias tensor.
    pub fn tensors(&self) -> impl Iterator<Item = (String, &[T])> + '_ {
        (0..self.num_layers()).flat_map(move |l| {
            [
                (format!("layer {l} weights"), self.weights(l)),
                (format!("layer {l} bias"), self.bias(l)),
            ]
        })
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layer_dims == other.layer_dims
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn cast<U: Scalar>(&self) -> MlpParams<U> {
        MlpParams {
            layer_dims: self.layer_dims.clone(),
            offsets: self.offsets.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut cache = ForwardCache::default();
        Ok(self.forward_batch(input, 1, &mut cache).to_vec())
    }

    /// Forward pass over a row-major `batch × input_dim` matrix. The returned
    /// slice (`batch × output_dim`) borrows from `cache`, which also keeps the
    /// activations needed by [`MlpParams::backward`].
    pub fn forward_batch<'c>(&self, input: &[T], batch: usize, cache: &'c mut ForwardCache<T>) -> &'c [T] {
        assert_eq!(input.len(), batch * self.input_dim(), "input shape");
        cache.batch = batch;
        cache.acts.resize_with(self.layer_dims.len(), Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        let last = self.num_layers() - 1;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let x = &before[l];
            let y = &mut after[0];
            y.clear();
            y.resize(batch * fan_out, T::zero());
            let b = self.bias(l);
            for row in y.chunks_exact_mut(fan_out) {
                row.copy_from_slice(b);
            }
            matmul_nt(batch, fan_in, fan_out, x, self.weights(l), T::one(), y);
            if l != last {
                for v in y.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
        }
        &cache.acts[self.num_layers()]
    }

    /// Reverse pass for the scalar `Σ upstream ⊙ output` of the most recent
    /// [`MlpParams::forward_batch`] call on `cache`.
    ///
    /// Parameter gradients are written into `grads` (overwriting). When
    /// `input_grad` is given it receives the gradient with respect to the
    /// network input, shape `batch × input_dim`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        upstream: &[T],
        grads: &mut MlpGrads<T>,
        input_grad: Option<&mut Vec<T>>,
    ) {
        assert!(self.same_shape(grads), "gradient buffer shape");
        self.backprop(cache, upstream, Some(grads), input_grad);
    }

    /// Gradient of `Σ upstream ⊙ output` with respect to the input only.
    pub fn input_gradient(&self, cache: &ForwardCache<T>, upstream: &[T]) -> Vec<T> {
        let mut out = Vec::new();
        self.backprop(cache, upstream, None, Some(&mut out));
        out
    }

    fn backprop(
        &self,
        cache: &ForwardCache<T>,
        upstream: &[T],
        mut grads: Option<&mut MlpGrads<T>>,
        input_grad: Option<&mut Vec<T>>,
    ) {
        let batch = cache.batch;
        assert_eq!(upstream.len(), batch * self.output_dim(), "upstream shape");
        let mut delta = upstream.to_vec();
        let mut next = Vec::new();
        let last = self.num_layers() - 1;
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            if l != last {
                for (d, a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d = if *a > T::zero() { *d } else { T::zero() };
                }
            }
            if let Some(grads) = grads.as_deref_mut() {
                let x = &cache.acts[l];
                matmul_tn(fan_out, batch, fan_in, &delta, x, T::zero(), grads.weights_mut(l));
                let gb = grads.bias_mut(l);
                gb.iter_mut().for_each(|v| *v = T::zero());
                for row in delta.chunks_exact(fan_out) {
                    for (g, d) in gb.iter_mut().zip(row) {
                        *g += *d;
                    }
                }
            }
            if l > 0 || input_grad.is_some() {
                next.clear();
                next.resize(batch * fan_in, T::zero());
                matmul_nn(batch, fan_out, fan_in, &delta, self.weights(l), &mut next);
                std::mem::swap(&mut delta, &mut next);
            }
        }
        if let Some(out) = input_grad {
            out.clear();
            out.extend_from_slice(&delta);
        }
    }
}

/// Activations saved by a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T> {
    batch: usize,
    acts: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[T] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn mlp_forward<T: Scalar>(params: &MlpParams<T>, input: &[T]) -> Result<Vec<T>> {
    params.forward(input)
}

/// Gradients of `upstream · f(input)` with respect to every parameter.
pub fn mlp_gradients<T: Scalar>(params: &MlpParams<T>, input: &[T], upstream: &[T]) -> Result<MlpGrads<T>> {
    if input.len() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: input.len(),
        });
    }
    if upstream.len() != params.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.output_dim(),
            got: upstream.len(),
        });
    }
    let mut cache = ForwardCache::default();
    params.forward_batch(input, 1, &mut cache);
    let mut grads = MlpParams::zeros(params.layer_dims())?;
    params.backward(&cache, upstream, &mut grads, None);
    Ok(grads)
}

/// Serialized form: per-layer row-major weights and biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecord {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl<T: Scalar> From<&MlpParams<T>> for MlpRecord {
    fn from(p: &MlpParams<T>) -> Self {
        MlpRecord {
            layer_dims: p.layer_dims.clone(),
            weights: (0..p.num_layers())
                .map(|l| p.weights(l).iter().map(|v| v.f64()).collect())
                .collect(),
            biases: (0..p.num_layers())
                .map(|l| p.bias(l).iter().map(|v| v.f64()).collect())
                .collect(),
        }
    }
}

impl MlpRecord {
    pub fn to_params<T: Scalar>(&self) -> Result<MlpParams<T>> {
        let conv = |v: &Vec<Vec<f64>>| -> Vec<Vec<T>> {
            v.iter().map(|l| l.iter().map(|&x| T::of(x)).collect()).collect()
        };
        MlpParams::from_layers(&self.layer_dims, &conv(&self.weights), &conv(&self.biases))
    }
}
