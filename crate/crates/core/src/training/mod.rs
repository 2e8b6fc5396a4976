//! Negative sampling, the training loop and filtered-ranking evaluation.

mod eval;
mod negatives;
mod trainer;

pub use eval::{count_messages, evaluate, rank_of, EvalOutput, RankingReport};
pub use negatives::{sample_negatives, NegativeSample, MAX_RESAMPLES};
pub use trainer::{train_epoch, EpochReport, PriorityProvider, TrainConfig};
