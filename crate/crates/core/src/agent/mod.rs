//! Replay buffer, soft actor-critic updates, the training loop and policy
//! evaluation.

pub mod buffer;
pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod sac;
pub mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use buffer::{Batch, ReplayBuffer, Transition};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::{AgentConfig, AlphaMode, Precision};
pub use eval::{
    align_at_maxima, barrier_estimate, evaluate, run_episode, BarrierEstimate, BarrierSummary, FnPolicy, Policy,
    Stats, Trajectory,
};
pub use sac::{action_noise, apply_noise, perturb_action, ActionMode, Sac, UpdateCounters, UpdateReport};
pub use train::{train, train_with_progress, EpisodeRecord, EvalRecord, LossSummary, MetricRecord, TrainMetrics};

/// Generator for stream `stream` of a run seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
