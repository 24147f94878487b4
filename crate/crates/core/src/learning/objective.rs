//! Training objectives over a candidate distribution and a solution set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scorer::{argmax, log_sum_exp, Prepared};
use super::LearningError;

/// Objective requested for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    FirstOnly,
    Mml,
    Hard,
    AnnealedHard,
}

/// Which objective the annealing probability `min(t/τ, 1)` selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnealDirection {
    /// MML with probability `min(t/τ, 1)`, hard otherwise.
    #[default]
    PaperLiteral,
    /// Hard with probability `min(t/τ, 1)`, MML otherwise.
    Inverted,
}

/// Objective actually applied at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    FirstOnly,
    Mml,
    Hard,
}

macro_rules! str_enum {
    ($ty:ident { $($var:ident => $name:literal $(| $alias:literal)*),* $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$var => $name),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().replace('-', "_").as_str() {
                    $($name $(| $alias)* => Ok($ty::$var),)*
                    other => Err(format!("unknown {} `{other}`", stringify!($ty))),
                }
            }
        }
    };
}

str_enum!(Objective {
    FirstOnly => "first_only" | "firstonly",
    Mml => "mml",
    Hard => "hard",
    AnnealedHard => "annealed_hard" | "annealed",
});
str_enum!(AnnealDirection {
    PaperLiteral => "literal" | "paper_literal",
    Inverted => "inverted",
});
str_enum!(LossKind {
    FirstOnly => "first_only",
    Mml => "mml",
    Hard => "hard",
});

/// `min(t/τ, 1)`.
pub fn anneal_probability(t: u64, tau: u64) -> f64 {
    assert!(tau >= 1, "tau must be at least 1");
    (t as f64 / tau as f64).min(1.0)
}

/// Resolves the per-step loss; `u` is a uniform draw in `[0, 1)` and is only
/// consulted by `AnnealedHard`.
pub fn select_loss(objective: Objective, t: u64, tau: u64, direction: AnnealDirection, u: f64) -> LossKind {
    match objective {
        Objective::FirstOnly => LossKind::FirstOnly,
        Objective::Mml => LossKind::Mml,
        Objective::Hard => LossKind::Hard,
        Objective::AnnealedHard => {
            let hit = u < anneal_probability(t, tau);
            match (direction, hit) {
                (AnnealDirection::PaperLiteral, true) | (AnnealDirection::Inverted, false) => LossKind::Mml,
                _ => LossKind::Hard,
            }
        }
    }
}

/// Index of the candidate a single-target loss trains on: the first member
/// of Z for First-Only, the most likely member for Hard (ties to the
/// canonically first). `None` for MML.
pub fn selected_index(log_probs: &[f64], z_idx: &[usize], kind: LossKind) -> Option<usize> {
    match kind {
        LossKind::Mml => None,
        LossKind::FirstOnly => z_idx.iter().copied().min(),
        LossKind::Hard => {
            let mut z: Vec<usize> = z_idx.to_vec();
            z.sort_unstable();
            let sub: Vec<f64> = z.iter().map(|&i| log_probs[i]).collect();
            z.get(argmax(&sub)).copied()
        }
    }
}

/// Loss and its gradient with respect to the raw candidate scores `u`,
/// where `log_probs = u − logsumexp(u)`.
pub fn loss_and_score_grad(
    log_probs: &[f64],
    z_idx: &[usize],
    kind: LossKind,
) -> Result<(f64, Vec<f64>), LearningError> {
    if z_idx.is_empty() {
        return Err(LearningError::EmptySolutionSet);
    }
    if let Some(&bad) = z_idx.iter().find(|&&i| i >= log_probs.len()) {
        return Err(LearningError::SolutionIndexOutOfRange {
            index: bad,
            candidates: log_probs.len(),
        });
    }
    let mut grad: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
    let loss = match selected_index(log_probs, z_idx, kind) {
        Some(k) => {
            grad[k] -= 1.0;
            -log_probs[k]
        }
        None => {
            let mut z: Vec<usize> = z_idx.to_vec();
            z.sort_unstable();
            z.dedup();
            let zl: Vec<f64> = z.iter().map(|&i| log_probs[i]).collect();
            let marginal = log_sum_exp(&zl);
            for (&i, &l) in z.iter().zip(&zl) {
                grad[i] -= (l - marginal).exp();
            }
            (-marginal).max(0.0)
        }
    };
    Ok((loss, grad))
}

/// Loss only.
pub fn loss(log_probs: &[f64], z_idx: &[usize], kind: LossKind) -> Result<f64, LearningError> {
    loss_and_score_grad(log_probs, z_idx, kind).map(|(l, _)| l)
}

/// Loss and gradient with respect to every scorer parameter.
pub fn loss_and_grad(
    prepared: &Prepared,
    params: &[f64],
    z_idx: &[usize],
    kind: LossKind,
) -> Result<(f64, Vec<f64>), LearningError> {
    let log_probs = prepared.design.log_probs(params);
    let (loss, score_grad) = loss_and_score_grad(&log_probs, z_idx, kind)?;
    let mut grad = vec![0.0; params.len()];
    prepared.design.accumulate(&score_grad, &mut grad);
    Ok((loss, grad))
}
