//! Scorers, objectives and the training loop.

pub mod features;
pub mod objective;
pub mod scorer;
pub mod train;

use thiserror::Error;

pub use features::{FeatureExtractor, TOKEN_DIM};
pub use objective::{
    anneal_probability, loss, loss_and_grad, loss_and_score_grad, select_loss, selected_index, AnnealDirection,
    LossKind, Objective,
};
pub use scorer::{CandidateDistribution, Design, Prepared, ScoreError, Scorer, ScorerKind, TAG_COUNT};
pub use train::{train, StepRecord, TrainConfig, TrainInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("empty solution set")]
    EmptySolutionSet,
    #[error("example `{0}` has an empty solution set")]
    EmptySolutionSetFor(String),
    #[error("solution index {index} out of range for {candidates} candidates")]
    SolutionIndexOutOfRange { index: usize, candidates: usize },
    #[error("non-finite loss on example `{example_id}` at step {step}")]
    NonFiniteLoss { example_id: String, step: u64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}
