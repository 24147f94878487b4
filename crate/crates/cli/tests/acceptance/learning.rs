//! Criteria 1, 2 and 9: objectives, gradients and annealing.

use hardem::arithmetic::{candidate_equations, ArithmeticConfig, SpecialNumbers};
use hardem::learning::scorer::log_softmax;
use hardem::learning::{
    anneal_probability, loss, loss_and_grad, train, AnnealDirection, FeatureExtractor, LossKind, Objective, Prepared,
    Scorer, ScorerKind, TrainConfig,
};
use hardem::span_match::enumerate_spans;
use hardem::synthetic::{generate, PlantedConfig};
use hardem::tasks::{build_instances, TaskConfig};
use hardem::text::tokenize;
use hardem::{Context, Example, Solution, TaskKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const IDENTITY_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;
const FD_MAX_REL_ERR: f64 = 1e-4;
/// Hard-EM instances whose top two members of Z are closer than this are
/// redrawn: the loss is not differentiable at ties.
const HARD_MIN_MARGIN: f64 = 1e-3;

pub fn objective_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = Vec::new();
    for trial in 0..1000 {
        let n = rng.gen_range(1..=30);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let lp = log_softmax(&scores);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let k = rng.gen_range(1..=n);
        let z = &idx[..k];

        let mml = loss(&lp, z, LossKind::Mml).unwrap();
        let hard = loss(&lp, z, LossKind::Hard).unwrap();
        let sup_min = z.iter().map(|&i| -lp[i]).fold(f64::INFINITY, f64::min);
        if hard < mml {
            violations.push(format!("#{trial}: hard {hard} < mml {mml}"));
        }
        if (hard == mml) != (k == 1) {
            violations.push(format!("#{trial}: |Z|={k} but hard==mml is {}", hard == mml));
        }
        if (hard - sup_min).abs() > IDENTITY_TOL {
            violations.push(format!("#{trial}: hard {hard} vs min J_sup {sup_min}"));
        }
        let all: Vec<usize> = (0..n).collect();
        let full = loss(&lp, &all, LossKind::Mml).unwrap();
        if full.abs() > IDENTITY_TOL {
            violations.push(format!("#{trial}: mml over all candidates {full}"));
        }
    }
    Verdict::new(
        violations.is_empty(),
        match violations.first() {
            None => "1000 instances, tol 1e-12".to_owned(),
            Some(v) => format!("{} violations, first {v}", violations.len()),
        },
    )
}

const WORDS: [&str; 12] = [
    "the", "river", "Stone", "kept", "which", "town", "north", "of", "grain", "Harbor", "old", "we",
];

fn random_doc(rng: &mut ChaCha8Rng, len: usize, numbers: usize) -> String {
    let mut words: Vec<String> = (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    for _ in 0..numbers {
        let at = rng.gen_range(0..words.len());
        words[at] = rng.gen_range(1..60).to_string();
    }
    words.join(" ")
}

fn instance(kind: ScorerKind, rng: &mut ChaCha8Rng) -> (Scorer, Prepared, Vec<usize>) {
    let (ex, cands) = match kind {
        ScorerKind::FactorizedTag { .. } => {
            let len = rng.gen_range(4..9);
            let ex = Example {
                id: "g".into(),
                question: tokenize("how many more than 3"),
                context: Context::Document(tokenize(&random_doc(rng, len, 2))),
                answers: vec!["4".into()],
                task: TaskKind::Arithmetic,
            };
            let cfg = ArithmeticConfig {
                specials: SpecialNumbers(vec![1.0, 100.0]),
                ..Default::default()
            };
            let c: Vec<Solution> = candidate_equations(&ex, &cfg).into_iter().map(Solution::Equation).collect();
            (ex, c)
        }
        _ => {
            let len = rng.gen_range(3..10);
            let ex = Example {
                id: "g".into(),
                question: tokenize("which town is north of the river"),
                context: Context::Document(tokenize(&random_doc(rng, len, 1))),
                answers: vec!["x".into()],
                task: TaskKind::SpanExtraction,
            };
            let c: Vec<Solution> = enumerate_spans(len, 3).into_iter().map(Solution::Span).collect();
            (ex, c)
        }
    };
    let mut scorer = Scorer::new(kind);
    for p in scorer.params.iter_mut() {
        *p = rng.gen_range(-1.0..1.0);
    }
    let prepared = scorer.prepare(&ex, cands).unwrap();
    let n = prepared.candidates.len();
    let mut z: Vec<usize> = (0..n).collect();
    z.shuffle(rng);
    z.truncate(rng.gen_range(1..=n.min(5)));
    (scorer, prepared, z)
}

fn hard_margin(prepared: &Prepared, params: &[f64], z: &[usize]) -> f64 {
    let lp = prepared.design.log_probs(params);
    let mut v: Vec<f64> = z.iter().map(|&i| lp[i]).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    if v.len() < 2 {
        f64::INFINITY
    } else {
        v[0] - v[1]
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Worst relative error of analytic against central-difference gradients.
fn worst_gradient_error(kind: ScorerKind, seed: u64, loss_kind: LossKind, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let (scorer, prepared, z) = instance(kind, &mut rng);
        if loss_kind == LossKind::Hard && hard_margin(&prepared, &scorer.params, &z) < HARD_MIN_MARGIN {
            continue;
        }
        let (_, analytic) = loss_and_grad(&prepared, &scorer.params, &z, loss_kind).unwrap();
        let mut p = scorer.params.clone();
        let numeric: Vec<f64> = (0..p.len())
            .map(|j| {
                let orig = p[j];
                p[j] = orig + FD_STEP;
                let up = loss(&prepared.design.log_probs(&p), &z, loss_kind).unwrap();
                p[j] = orig - FD_STEP;
                let down = loss(&prepared.design.log_probs(&p), &z, loss_kind).unwrap();
                p[j] = orig;
                (up - down) / (2.0 * FD_STEP)
            })
            .collect();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-8));
        done += 1;
    }
    worst
}

pub fn gradient_checks() -> Verdict {
    let kinds = [
        ScorerKind::Tabular { slots: 40 },
        ScorerKind::LogLinear {
            extractor: FeatureExtractor::SpanBasic,
        },
        ScorerKind::FactorizedSpan,
        ScorerKind::FactorizedTag { specials: 2 },
    ];
    let mut worst: (f64, String) = (0.0, String::new());
    for (k, kind) in kinds.iter().enumerate() {
        for (l, loss_kind) in [LossKind::Mml, LossKind::Hard, LossKind::FirstOnly].into_iter().enumerate() {
            let e = worst_gradient_error(*kind, 100 + (k * 3 + l) as u64, loss_kind, 100);
            if e >= worst.0 {
                worst = (e, format!("{} {loss_kind}", kind.name()));
            }
        }
    }
    Verdict::new(
        worst.0 < FD_MAX_REL_ERR,
        format!("4 kinds x 3 losses x 100, worst rel err {:.2e} ({}) < 1e-4", worst.0, worst.1),
    )
}

pub fn annealing() -> Verdict {
    let mut problems = Vec::new();
    for tau in [1u64, 7, 200] {
        if anneal_probability(0, tau) != 0.0 {
            problems.push(format!("p(0; {tau}) != 0"));
        }
        for t in [tau, tau + 1, 10 * tau] {
            if anneal_probability(t, tau) != 1.0 {
                problems.push(format!("p({t}; {tau}) != 1"));
            }
        }
    }

    let data = generate(&PlantedConfig {
        n_examples: 200,
        seed: 9,
        ..Default::default()
    });
    let task = TaskConfig {
        span: PlantedConfig::matcher(),
        ..Default::default()
    };
    let kind = ScorerKind::LogLinear {
        extractor: FeatureExtractor::SpanBasic,
    };
    let run = |objective: Objective| {
        let mut scorer = Scorer::new(kind);
        let (inst, _) = build_instances(&scorer, data.iter().map(|p| (&p.example, &p.solution_set)), &task).unwrap();
        let cfg = TrainConfig {
            objective,
            tau: 1,
            anneal_direction: AnnealDirection::PaperLiteral,
            max_steps: 150,
            rng_seed: 4,
            ..Default::default()
        };
        let log = train(&mut scorer, &inst, &cfg).unwrap();
        (log, scorer.params)
    };
    let (annealed_log, annealed_params) = run(Objective::AnnealedHard);
    let (mml_log, mml_params) = run(Objective::Mml);
    if annealed_log != mml_log {
        problems.push("step logs differ".into());
    }
    if annealed_params != mml_params {
        problems.push("final parameters differ".into());
    }
    if annealed_log.first().map(|r| r.step) != Some(1) {
        problems.push("log does not start at step 1".into());
    }
    Verdict::new(
        problems.is_empty(),
        if problems.is_empty() {
            format!("endpoints exact; tau=1 literal == MML over {} steps", mml_log.len())
        } else {
            problems.join("; ")
        },
    )
}
