//! Mini-batch SGD with global-norm clipping.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{loss_and_grad, select_loss, AnnealDirection, LossKind, Objective};
use super::scorer::{Prepared, Scorer};
use super::LearningError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    /// Annealing horizon in steps.
    pub tau: u64,
    pub anneal_direction: AnnealDirection,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: u64,
    pub rng_seed: u64,
    /// Global-norm bound on the averaged gradient; `0` disables clipping.
    pub gradient_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Mml,
            tau: 1,
            anneal_direction: AnnealDirection::PaperLiteral,
            learning_rate: 0.5,
            batch_size: 16,
            max_steps: 200,
            rng_seed: 0,
            gradient_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |m: &str| Err(LearningError::InvalidConfig(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive and finite");
        }
        if self.tau == 0 {
            return bad("tau must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.gradient_clip >= 0.0 && self.gradient_clip.is_finite()) {
            return bad("gradient_clip must be finite and non-negative");
        }
        Ok(())
    }
}

/// One example ready for training: compiled candidates and the indices of
/// its solution set among them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainInstance {
    pub id: String,
    pub prepared: Prepared,
    pub z_idx: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub objective: LossKind,
    pub loss: f64,
}

/// Cycles through seeded permutations of `0..n`.
struct BatchSampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = BatchSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            cursor: n,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    fn draw(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Trains `scorer` in place and returns the per-step log. Steps are numbered
/// from 1. Batches and annealing draws come from independent streams of the
/// same seed, so the batch sequence does not depend on the objective.
pub fn train(scorer: &mut Scorer, instances: &[TrainInstance], cfg: &TrainConfig) -> Result<Vec<StepRecord>, LearningError> {
    cfg.validate()?;
    if cfg.max_steps == 0 {
        return Ok(Vec::new());
    }
    if instances.is_empty() {
        return Err(LearningError::InvalidConfig("no training instances".into()));
    }
    if let Some(bad) = instances.iter().find(|i| i.z_idx.is_empty()) {
        return Err(LearningError::EmptySolutionSetFor(bad.id.clone()));
    }
    let batch = cfg.batch_size.min(instances.len());
    let mut sampler = BatchSampler::new(instances.len(), cfg.rng_seed);
    let mut anneal_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    anneal_rng.set_stream(1);
    let mut log = Vec::with_capacity(cfg.max_steps as usize);

    for step in 1..=cfg.max_steps {
        let u: f64 = anneal_rng.gen();
        let kind = select_loss(cfg.objective, step, cfg.tau, cfg.anneal_direction, u);
        let idx = sampler.draw(batch);
        let params = &scorer.params;
        let results: Vec<Result<(f64, Vec<f64>), LearningError>> = idx
            .par_iter()
            .map(|&i| {
                let inst = &instances[i];
                loss_and_grad(&inst.prepared, params, &inst.z_idx, kind)
            })
            .collect();

        let mut total_loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for (&i, r) in idx.iter().zip(results) {
            let (l, g) = r?;
            if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(LearningError::NonFiniteLoss {
                    example_id: instances[i].id.clone(),
                    step,
                });
            }
            total_loss += l;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let scale = 1.0 / idx.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        if cfg.gradient_clip > 0.0 {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.gradient_clip {
                let c = cfg.gradient_clip / norm;
                grad.iter_mut().for_each(|g| *g *= c);
            }
        }
        for (p, g) in scorer.params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        log.push(StepRecord {
            step,
            objective: kind,
            loss: total_loss * scale,
        });
    }
    Ok(log)
}
