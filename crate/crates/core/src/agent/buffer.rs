use std::collections::VecDeque;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::nets::Scalar;

/// One `(s, a, r, s', done)` experience tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO of transitions: once full, every push evicts the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform minibatch, drawn with replacement.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Batch<T> {
        assert!(!self.is_empty(), "sampling from an empty replay buffer");
        let picked: Vec<&Transition> = (0..size)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect();
        Batch::from_transitions(&picked)
    }
}

/// Minibatch laid out as row-major matrices in network precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub size: usize,
    pub dim: usize,
    pub states: Vec<T>,
    /// `[s | a]` rows, the critic input.
    pub state_actions: Vec<T>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<T>,
    pub done: Vec<f64>,
}

impl<T: Scalar> Batch<T> {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        assert!(!ts.is_empty(), "empty batch");
        let dim = ts[0].state.len();
        let mut b = Batch {
            size: ts.len(),
            dim,
            states: Vec::with_capacity(ts.len() * dim),
            state_actions: Vec::with_capacity(ts.len() * 2 * dim),
            rewards: Vec::with_capacity(ts.len()),
            next_states: Vec::with_capacity(ts.len() * dim),
            done: Vec::with_capacity(ts.len()),
        };
        for t in ts {
            b.states.extend(t.state.iter().map(|&v| T::of(v)));
            b.state_actions.extend(t.state.iter().chain(&t.action).map(|&v| T::of(v)));
            b.rewards.push(t.reward);
            b.next_states.extend(t.next_state.iter().map(|&v| T::of(v)));
            b.done.push(if t.terminal { 1.0 } else { 0.0 });
        }
        b
    }
}
