//! Weakly supervised question answering as discrete latent-variable learning.
//!
//! Each example is turned into a precomputed solution set `Z`: the candidate
//! derivations (document spans, arithmetic equations or SQL queries) whose
//! execution yields the gold answer. Scorers assign `P(z | x; θ)` over the
//! candidates and are trained with First-Only, maximum marginal likelihood
//! or hard-EM objectives.

pub mod arithmetic;
pub mod fixtures;
pub mod learning;
pub mod metrics;
pub mod span_match;
pub mod sqlgen;
pub mod synthetic;
pub mod tasks;
pub mod text;
pub mod types;

pub use types::{canonical_order, Context, Example, Solution, SolutionSet, TaskKind, Token};
