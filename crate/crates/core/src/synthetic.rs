//! Planted-solution benchmark for span extraction.
//!
//! Each document mentions the capitalized answer once right after a cue word
//! from the question (the planted solution) and several more times elsewhere
//! (distractors with the same denotation). Only the planted mention follows a
//! question word, except for two noise sources:
//!
//! - any mention, planted or not, may be followed by a question word, which
//!   makes "next token is in the question" predictive of membership in Z;
//! - a few documents repeat the cue before an unrelated capitalized name, a
//!   non-Z token that looks like the planted solution.
//!
//! A likelihood that spreads mass over Z is pushed away from the cue feature
//! by the decoys and toward the trailing-question feature; a model that
//! commits to one solution keeps the cue.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::learning::{
    train, AnnealDirection, FeatureExtractor, LearningError, Objective, ScoreError, Scorer, ScorerKind, TrainConfig,
};
use crate::metrics::sparsity;
use crate::span_match::{enumerate_spans, span_solution_set, MatchMetric, Span, SpanMatcher};
use crate::tasks::{build_instances, TaskConfig};
use crate::text::tokenize;
use crate::types::{Context, Example, Solution, SolutionSet, TaskKind};

const CUES: [&str; 12] = [
    "northern", "ancient", "coastal", "hidden", "frozen", "sacred", "eastern", "sunken", "golden", "silent", "upper",
    "lower",
];

const FILLERS: [&str; 40] = [
    "river", "stone", "walked", "across", "under", "bright", "morning", "village", "traders", "carried", "salt",
    "along", "road", "built", "walls", "later", "many", "people", "settled", "near", "hills", "during", "winter",
    "market", "grew", "quickly", "after", "war", "bridge", "tower", "farmers", "planted", "grain", "fields", "where",
    "boats", "arrived", "every", "spring", "lanterns",
];

const SYLLABLES: [&str; 16] = [
    "zor", "van", "kel", "dra", "mos", "tir", "bel", "qua", "ryn", "hal", "gor", "vex", "lun", "pri", "sud", "oth",
];

/// Question template words; none of them occur in documents.
const QUESTION: [&str; 5] = ["which", "place", "did", "they", "mention"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_examples: usize,
    /// Inclusive range of distractor counts before scaling.
    pub min_distractors: usize,
    pub max_distractors: usize,
    /// Multiplier on the drawn distractor count (rounded).
    pub distractor_scale: f64,
    /// Probability that an answer mention is capitalized.
    pub answer_cap_rate: f64,
    /// Probability that a filler slot holds an unrelated capitalized name.
    pub other_name_rate: f64,
    /// Probability that a question word directly follows an answer mention.
    pub trailing_cue_rate: f64,
    /// Probability that the document also contains the cue followed by an
    /// unrelated capitalized name.
    pub decoy_rate: f64,
    pub min_filler: usize,
    pub max_filler: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_examples: 2000,
            min_distractors: 3,
            max_distractors: 30,
            distractor_scale: 1.0,
            answer_cap_rate: 1.0,
            other_name_rate: 0.0,
            trailing_cue_rate: 0.06,
            decoy_rate: 0.02,
            min_filler: 30,
            max_filler: 60,
            seed: 0,
        }
    }
}

impl PlantedConfig {
    /// Span matcher that yields the intended solution sets: single tokens,
    /// exact match.
    pub fn matcher() -> SpanMatcher {
        SpanMatcher {
            metric: MatchMetric::ExactMatch,
            max_span_len: 1,
            noisy_rank_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedExample {
    pub example: Example,
    pub question_text: String,
    pub document_text: String,
    pub planted: Span,
    pub solution_set: SolutionSet,
}

fn name(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=3);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn other_name(rng: &mut ChaCha8Rng, answer: &str) -> String {
    loop {
        let other = name(rng);
        if other != answer {
            return other;
        }
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

enum Segment {
    Planted,
    Decoy,
    Distractor,
    Filler(String),
}

/// Generates `cfg.n_examples` examples deterministically from `cfg.seed`.
pub fn generate(cfg: &PlantedConfig) -> Vec<PlantedExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let matcher = PlantedConfig::matcher();
    (0..cfg.n_examples)
        .map(|i| one_example(cfg, &matcher, &mut rng, i))
        .collect()
}

fn one_example(cfg: &PlantedConfig, matcher: &SpanMatcher, rng: &mut ChaCha8Rng, i: usize) -> PlantedExample {
    let cue = *CUES.choose(rng).unwrap();
    let answer = name(rng);
    let drawn = rng.gen_range(cfg.min_distractors..=cfg.max_distractors);
    let distractors = (drawn as f64 * cfg.distractor_scale).round() as usize;
    let n_filler = rng.gen_range(cfg.min_filler..=cfg.max_filler);

    let mut segments = vec![Segment::Planted];
    segments.extend((0..distractors).map(|_| Segment::Distractor));
    if rng.gen_bool(cfg.decoy_rate) {
        segments.push(Segment::Decoy);
    }
    for _ in 0..n_filler {
        let w = if rng.gen_bool(cfg.other_name_rate) {
            capitalize(&other_name(rng, &answer))
        } else {
            FILLERS.choose(rng).unwrap().to_string()
        };
        segments.push(Segment::Filler(w));
    }
    segments.shuffle(rng);

    let mention = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(cfg.answer_cap_rate) {
            capitalize(&answer)
        } else {
            answer.clone()
        }
    };
    let mut words: Vec<String> = Vec::new();
    let mut planted = 0;
    for seg in segments {
        match seg {
            Segment::Planted => {
                words.push(cue.to_owned());
                planted = words.len();
                words.push(mention(rng));
            }
            Segment::Distractor => words.push(mention(rng)),
            Segment::Decoy => {
                words.push(cue.to_owned());
                words.push(capitalize(&other_name(rng, &answer)));
                continue;
            }
            Segment::Filler(w) => {
                words.push(w);
                continue;
            }
        }
        // The filler keeps a following mention from inheriting the cue feature.
        if rng.gen_bool(cfg.trailing_cue_rate) {
            words.push(QUESTION[rng.gen_range(1..QUESTION.len())].to_owned());
            words.push(FILLERS.choose(rng).unwrap().to_string());
        }
    }
    let question_text = format!("{} {} {} {} {} {}", QUESTION[0], cue, QUESTION[1], QUESTION[2], QUESTION[3], QUESTION[4]);
    let document_text = words.join(" ");
    let example = Example {
        id: format!("planted-{}-{i:05}", cfg.seed),
        question: tokenize(&question_text),
        context: Context::Document(tokenize(&document_text)),
        answers: vec![capitalize(&answer)],
        task: TaskKind::SpanExtraction,
    };
    let solution_set = span_solution_set(&example, matcher);
    PlantedExample {
        example,
        question_text,
        document_text,
        planted: Span::new(planted, planted),
        solution_set,
    }
}

/// Outcome of scoring one planted example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedOutcome {
    pub z_size: usize,
    pub recovered: bool,
    /// Sparsity of the model distribution over Z at each requested ε.
    pub sparsity: [f64; 2],
}

/// Top-1 recovery (argmax over all candidates equals the planted span) and
/// Z-sparsity at `eps` for every example.
pub fn evaluate_planted(scorer: &Scorer, examples: &[PlantedExample], eps: [f64; 2]) -> Result<Vec<PlantedOutcome>, ScoreError> {
    let matcher = PlantedConfig::matcher();
    examples
        .par_iter()
        .map(|p| {
            let n = p.example.document().map_or(0, <[_]>::len);
            let cands: Vec<Solution> = enumerate_spans(n, matcher.max_span_len)
                .into_iter()
                .map(Solution::Span)
                .collect();
            let dist = scorer.score_candidates(&p.example, cands)?;
            let probs = dist.probs();
            let z_probs: Vec<f64> = p.solution_set.indices_in(&dist.candidates).iter().map(|&i| probs[i]).collect();
            Ok(PlantedOutcome {
                z_size: p.solution_set.len(),
                recovered: dist.candidates[dist.argmax()] == Solution::Span(p.planted),
                sparsity: eps.map(|e| sparsity(&z_probs, e)),
            })
        })
        .collect()
}

/// Training setup used by the benchmark: 1000 SGD steps, annealing over the
/// first 20% of them with hard-EM taking over (`Inverted`).
pub fn benchmark_train_config(objective: Objective, seed: u64) -> TrainConfig {
    let max_steps = 1000;
    TrainConfig {
        objective,
        tau: max_steps / 5,
        anneal_direction: AnnealDirection::Inverted,
        learning_rate: 0.5,
        batch_size: 32,
        max_steps,
        rng_seed: seed,
        gradient_clip: 5.0,
    }
}

/// Trains a `span-basic` log-linear scorer on `train_set` and evaluates it on
/// `test_set`.
pub fn train_and_evaluate(
    train_set: &[PlantedExample],
    test_set: &[PlantedExample],
    cfg: &TrainConfig,
) -> Result<(Scorer, Vec<PlantedOutcome>), LearningError> {
    let mut scorer = Scorer::new(ScorerKind::LogLinear {
        extractor: FeatureExtractor::SpanBasic,
    });
    let task = TaskConfig {
        span: PlantedConfig::matcher(),
        ..Default::default()
    };
    let pairs = train_set.iter().map(|p| (&p.example, &p.solution_set));
    let (instances, _) = build_instances(&scorer, pairs, &task)?;
    train(&mut scorer, &instances, cfg)?;
    let outcomes = evaluate_planted(&scorer, test_set, [1e-3, 1e-4])?;
    Ok((scorer, outcomes))
}

/// Fraction of outcomes accepted by `keep` whose planted span was recovered;
/// `None` when `keep` accepts nothing.
pub fn recovery_rate(outcomes: &[PlantedOutcome], keep: impl Fn(&PlantedOutcome) -> bool) -> Option<f64> {
    let kept: Vec<_> = outcomes.iter().filter(|o| keep(o)).collect();
    if kept.is_empty() {
        return None;
    }
    Some(kept.iter().filter(|o| o.recovered).count() as f64 / kept.len() as f64)
}

/// Mean sparsity at the `which`-th ε over all outcomes.
pub fn mean_sparsity(outcomes: &[PlantedOutcome], which: usize) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(|o| o.sparsity[which]).sum::<f64>() / outcomes.len() as f64
}
