//! Criteria 6, 7 and 8 on the planted-solution benchmark.
//!
//! "Hard" throughout is hard-EM with inverted annealing over the first 20% of
//! steps; "MML" is plain maximum marginal likelihood. Both see the same data,
//! batches and step budget.

use hardem::learning::Objective;
use hardem::synthetic::{
    benchmark_train_config, generate, mean_sparsity, recovery_rate, train_and_evaluate, PlantedConfig, PlantedOutcome,
};
use rayon::prelude::*;

use crate::Verdict;

const TRAIN: usize = 2000;
const TEST: usize = 500;
const MIN_RECOVERY: f64 = 0.9;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Distractor multiplier for the noisier solution sets.
const NOISY_SCALE: f64 = 1.65;
/// Seeds out of five that must agree for a majority.
const MAJORITY: usize = 3;

fn run(cfg: &PlantedConfig, objective: Objective) -> Vec<PlantedOutcome> {
    let data = generate(&PlantedConfig {
        n_examples: TRAIN + TEST,
        ..cfg.clone()
    });
    let (train_set, test_set) = data.split_at(TRAIN);
    train_and_evaluate(train_set, test_set, &benchmark_train_config(objective, cfg.seed))
        .expect("benchmark training succeeds")
        .1
}

pub fn recovery_and_sparsity() -> Verdict {
    let cfg = PlantedConfig {
        seed: 11,
        ..Default::default()
    };
    let (hard, mml) = rayon::join(|| run(&cfg, Objective::AnnealedHard), || run(&cfg, Objective::Mml));
    let acc = recovery_rate(&hard, |_| true).unwrap();
    let (sh, sm) = (mean_sparsity(&hard, 0), mean_sparsity(&mml, 0));
    Verdict::new(
        acc >= MIN_RECOVERY && sh > sm,
        format!("hard recovery {acc:.3} >= 0.9; sparsity@1e-3 hard {sh:.3} > mml {sm:.3}"),
    )
}

/// The four trained runs of one seed: (objective, scale) pairs.
struct SeedRuns {
    hard: Vec<PlantedOutcome>,
    mml: Vec<PlantedOutcome>,
    hard_noisy: Vec<PlantedOutcome>,
    mml_noisy: Vec<PlantedOutcome>,
}

/// Both comparisons use 0 to 30 distractors so that the |Z| <= 3 bucket is
/// populated.
fn seed_runs(seed: u64) -> SeedRuns {
    let base = PlantedConfig {
        min_distractors: 0,
        seed,
        ..Default::default()
    };
    let noisy = PlantedConfig {
        distractor_scale: NOISY_SCALE,
        ..base.clone()
    };
    let ((hard, mml), (hard_noisy, mml_noisy)) = rayon::join(
        || rayon::join(|| run(&base, Objective::AnnealedHard), || run(&base, Objective::Mml)),
        || rayon::join(|| run(&noisy, Objective::AnnealedHard), || run(&noisy, Objective::Mml)),
    );
    SeedRuns {
        hard,
        mml,
        hard_noisy,
        mml_noisy,
    }
}

fn all_seed_runs() -> &'static [SeedRuns] {
    static RUNS: std::sync::OnceLock<Vec<SeedRuns>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| SEEDS.par_iter().map(|&s| seed_runs(s)).collect())
}

fn acc(o: &[PlantedOutcome]) -> f64 {
    recovery_rate(o, |_| true).unwrap()
}

pub fn breakdown() -> Verdict {
    let mut wins = 0;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(all_seed_runs()) {
        let small = |o: &PlantedOutcome| o.z_size <= 3;
        let big = |o: &PlantedOutcome| o.z_size > 3;
        let gap = |keep: &dyn Fn(&PlantedOutcome) -> bool| -> Option<f64> {
            Some(recovery_rate(&r.hard, keep)? - recovery_rate(&r.mml, keep)?)
        };
        match (gap(&small), gap(&big)) {
            (Some(s), Some(b)) => {
                wins += usize::from(b >= s);
                parts.push(format!("s{seed} {b:+.3}/{s:+.3}"));
            }
            _ => parts.push(format!("s{seed} empty bucket")),
        }
    }
    Verdict::new(
        wins >= MAJORITY,
        format!("gap |Z|>3 / |Z|<=3: {}; {wins}/5 seeds", parts.join(", ")),
    )
}

pub fn noisy_z() -> Verdict {
    let mut wins = 0;
    let mut parts = Vec::new();
    for (seed, r) in SEEDS.iter().zip(all_seed_runs()) {
        let hard_drop = acc(&r.hard) - acc(&r.hard_noisy);
        let mml_drop = acc(&r.mml) - acc(&r.mml_noisy);
        wins += usize::from(hard_drop < mml_drop);
        parts.push(format!("s{seed} {hard_drop:+.3}/{mml_drop:+.3}"));
    }
    Verdict::new(
        wins >= MAJORITY,
        format!("accuracy drop at x1.65 hard / mml: {}; {wins}/5 seeds", parts.join(", ")),
    )
}
