//! A2C training with the valid-action auxiliary task, plus evaluation,
//! metrics, checkpoints, and run configuration.

mod checkpoint;
mod config;
mod eval;
mod losses;
mod metrics;
mod rollout;
mod train;
mod update;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use config::{parse_kv, TrainConfig, KEYS};
pub use eval::{evaluate, run_episode, EpisodeLimits, EvalPolicy, StepRecord};
pub use losses::{bce, bce_value, compute_q_advantage, neg_entropy, total_loss, LossTerms, LossWeights, BCE_EPS};
pub use metrics::{read_metrics, MetricRow, MetricsWriter, MovingAverage, METRICS_HEADER, WINDOW};
pub use rollout::{rollout_collect, valid_action_labels, worker_seed, EnvWorker, FinishedEpisode, RolloutBatch, Transition};
pub use train::{train_run, TrainEvent, TrainSummary, Trainer, CHECKPOINT_FILE, FAILURE_FILE, METRICS_FILE};
pub use update::{batch_gradients, batch_loss, transition_loss, LossContext};
