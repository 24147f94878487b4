//! Scorers `P(z | x; θ)` over a candidate list.
//!
//! Every scorer here has candidate log-scores that are linear in θ once
//! per-position normalizers cancel under renormalization, so each example is
//! compiled once into a sparse design matrix `A` with `u = Aθ` and
//! `logp = u − logsumexp(u)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{question_vocab, sequence_features, FeatureExtractor, TOKEN_DIM};
use crate::arithmetic::NumberSource;
use crate::types::{Example, Solution, TaskKind};

/// Number of tags per position: none, +, −, ×0.01.
pub const TAG_COUNT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    FeatureDimensionMismatch { expected: usize, got: usize },
    #[error("empty candidate list for example `{0}`")]
    EmptyCandidates(String),
    #[error("scorer {scorer} cannot score {task} candidates")]
    TaskMismatch { scorer: &'static str, task: TaskKind },
    #[error("example `{0}` lacks the context this scorer needs")]
    MissingContext(String),
    #[error("operand position {0} outside the tagged sequence")]
    PositionOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerKind {
    /// One parameter per candidate index.
    Tabular { slots: usize },
    /// `θ·φ(x, z)` with a named feature extractor.
    LogLinear { extractor: FeatureExtractor },
    /// Independent start and end token softmaxes.
    FactorizedSpan,
    /// 4-way tag softmax per input token and per special number.
    FactorizedTag { specials: usize },
}

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::Tabular { .. } => "tabular",
            ScorerKind::LogLinear { .. } => "log_linear",
            ScorerKind::FactorizedSpan => "factorized_span",
            ScorerKind::FactorizedTag { .. } => "factorized_tag",
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            ScorerKind::Tabular { slots } => slots,
            ScorerKind::LogLinear { extractor } => extractor.dim(),
            ScorerKind::FactorizedSpan => 2 * TOKEN_DIM,
            ScorerKind::FactorizedTag { specials } => TAG_COUNT * TOKEN_DIM * (1 + specials),
        }
    }

    pub fn supports(&self, task: TaskKind) -> bool {
        match *self {
            ScorerKind::Tabular { .. } => true,
            ScorerKind::LogLinear { extractor } => matches!(
                (extractor, task),
                (FeatureExtractor::SpanBasic | FeatureExtractor::SpanLexical, TaskKind::SpanExtraction)
                    | (FeatureExtractor::EquationBasic, TaskKind::Arithmetic)
                    | (FeatureExtractor::SqlBasic, TaskKind::SqlGeneration)
            ),
            ScorerKind::FactorizedSpan => task == TaskKind::SpanExtraction,
            ScorerKind::FactorizedTag { .. } => task == TaskKind::Arithmetic,
        }
    }
}

/// Sparse row-major matrix mapping parameters to candidate scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    offsets: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Design {
    fn with_rows(n: usize) -> Self {
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        Design {
            offsets,
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    fn push(&mut self, col: usize, val: f64) {
        if val != 0.0 {
            self.cols.push(col as u32);
            self.vals.push(val);
        }
    }

    fn end_row(&mut self) {
        self.offsets.push(self.cols.len());
    }

    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Raw scores `u = Aθ`.
    pub fn scores(&self, params: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|r| {
                let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
                self.cols[lo..hi]
                    .iter()
                    .zip(&self.vals[lo..hi])
                    .map(|(&c, &v)| params[c as usize] * v)
                    .sum()
            })
            .collect()
    }

    /// `grad += Aᵀ g` for a gradient `g` over candidate scores.
    pub fn accumulate(&self, score_grad: &[f64], grad: &mut [f64]) {
        for (r, &g) in score_grad.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let (lo, hi) = (self.offsets[r], self.offsets[r + 1]);
            for (&c, &v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                grad[c as usize] += g * v;
            }
        }
    }

    pub fn log_probs(&self, params: &[f64]) -> Vec<f64> {
        log_softmax(&self.scores(params))
    }
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(x);
    x.iter().map(|v| v - z).collect()
}

/// Candidates of one example compiled for a given scorer kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub candidates: Vec<Solution>,
    pub design: Design,
}

/// A normalized distribution over an ordered candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDistribution {
    pub candidates: Vec<Solution>,
    pub log_probs: Vec<f64>,
}

impl CandidateDistribution {
    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    /// Most likely candidate index; ties go to the canonically first.
    pub fn argmax(&self) -> usize {
        argmax(&self.log_probs)
    }
}

/// First index of the maximum.
pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub kind: ScorerKind,
    pub params: Vec<f64>,
}

/// Token features of the tagged sequence `Q : [SEP] : P` and its max-pool.
struct TagInput {
    tokens: Vec<[f64; TOKEN_DIM]>,
    pooled: [f64; TOKEN_DIM],
    question_len: usize,
}

impl TagInput {
    fn new(ex: &Example) -> Result<Self, ScoreError> {
        let doc = ex.document().ok_or_else(|| ScoreError::MissingContext(ex.id.clone()))?;
        let vocab = question_vocab(&ex.question);
        let mut tokens = sequence_features(&ex.question, &vocab, true);
        tokens.push([0.0; TOKEN_DIM]);
        tokens.extend(sequence_features(doc, &vocab, false));
        let mut pooled = [f64::NEG_INFINITY; TOKEN_DIM];
        for t in &tokens {
            for (p, v) in pooled.iter_mut().zip(t) {
                *p = p.max(*v);
            }
        }
        Ok(TagInput {
            tokens,
            pooled,
            question_len: ex.question.len(),
        })
    }

    fn position(&self, source: NumberSource) -> Option<usize> {
        match source {
            NumberSource::Question(i) => Some(i),
            NumberSource::Document(i) => Some(self.question_len + 1 + i),
            NumberSource::Special(_) | NumberSource::Zero => None,
        }
    }
}

fn tag_param(d: usize, tag: usize) -> usize {
    d * TAG_COUNT + tag
}

fn special_param(j: usize, d: usize, tag: usize) -> usize {
    TAG_COUNT * TOKEN_DIM + (j * TOKEN_DIM + d) * TAG_COUNT + tag
}

impl Scorer {
    /// A scorer with all-zero parameters (uniform over any candidate list).
    pub fn new(kind: ScorerKind) -> Self {
        Scorer {
            params: vec![0.0; kind.num_params()],
            kind,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Compiles candidates into a design matrix. Candidates must be
    /// canonically ordered and match `ex.task`.
    pub fn prepare(&self, ex: &Example, candidates: Vec<Solution>) -> Result<Prepared, ScoreError> {
        if self.params.len() != self.kind.num_params() {
            return Err(ScoreError::FeatureDimensionMismatch {
                expected: self.kind.num_params(),
                got: self.params.len(),
            });
        }
        if candidates.is_empty() {
            return Err(ScoreError::EmptyCandidates(ex.id.clone()));
        }
        let mismatch = ScoreError::TaskMismatch {
            scorer: self.kind.name(),
            task: ex.task,
        };
        if !self.kind.supports(ex.task) || candidates.iter().any(|z| z.task() != ex.task) {
            return Err(mismatch);
        }
        let mut design = Design::with_rows(candidates.len());
        match self.kind {
            ScorerKind::Tabular { slots } => {
                if candidates.len() > slots {
                    return Err(ScoreError::FeatureDimensionMismatch {
                        expected: slots,
                        got: candidates.len(),
                    });
                }
                for i in 0..candidates.len() {
                    design.push(i, 1.0);
                    design.end_row();
                }
            }
            ScorerKind::LogLinear { extractor } => {
                let ctx = extractor.context(ex);
                for z in &candidates {
                    let phi = extractor.features(ex, &ctx, z).ok_or(mismatch.clone())?;
                    if phi.len() != self.params.len() {
                        return Err(ScoreError::FeatureDimensionMismatch {
                            expected: self.params.len(),
                            got: phi.len(),
                        });
                    }
                    for (c, v) in phi.into_iter().enumerate() {
                        design.push(c, v);
                    }
                    design.end_row();
                }
            }
            ScorerKind::FactorizedSpan => {
                let doc = ex.document().ok_or_else(|| ScoreError::MissingContext(ex.id.clone()))?;
                let feats = sequence_features(doc, &question_vocab(&ex.question), false);
                for z in &candidates {
                    let Solution::Span(s) = z else { return Err(mismatch) };
                    if s.end >= feats.len() {
                        return Err(ScoreError::PositionOutOfRange(s.end));
                    }
                    for (d, v) in feats[s.start].iter().enumerate() {
                        design.push(d, *v);
                    }
                    for (d, v) in feats[s.end].iter().enumerate() {
                        design.push(TOKEN_DIM + d, *v);
                    }
                    design.end_row();
                }
            }
            ScorerKind::FactorizedTag { specials } => {
                let input = TagInput::new(ex)?;
                for z in &candidates {
                    let Solution::Equation(eq) = z else { return Err(mismatch) };
                    for (op, n) in [(eq.o1, eq.n1), (eq.o2, eq.n2)] {
                        let tag = op.tag();
                        match (n.source, input.position(n.source)) {
                            (_, Some(pos)) => {
                                let phi = input.tokens.get(pos).ok_or(ScoreError::PositionOutOfRange(pos))?;
                                for (d, v) in phi.iter().enumerate() {
                                    design.push(tag_param(d, tag), *v);
                                    design.push(tag_param(d, 0), -*v);
                                }
                            }
                            (NumberSource::Special(j), None) => {
                                if j >= specials {
                                    return Err(ScoreError::FeatureDimensionMismatch {
                                        expected: specials,
                                        got: j + 1,
                                    });
                                }
                                for (d, v) in input.pooled.iter().enumerate() {
                                    design.push(special_param(j, d, tag), *v);
                                    design.push(special_param(j, d, 0), -*v);
                                }
                            }
                            _ => {}
                        }
                    }
                    design.end_row();
                }
            }
        }
        Ok(Prepared { candidates, design })
    }

    /// Log-probabilities of `prepared` under the current parameters.
    pub fn log_probs(&self, prepared: &Prepared) -> Vec<f64> {
        prepared.design.log_probs(&self.params)
    }

    pub fn score_candidates(&self, ex: &Example, candidates: Vec<Solution>) -> Result<CandidateDistribution, ScoreError> {
        let prepared = self.prepare(ex, candidates)?;
        let log_probs = self.log_probs(&prepared);
        Ok(CandidateDistribution {
            candidates: prepared.candidates,
            log_probs,
        })
    }

    /// Unrenormalized factorized log-probability of `z`, computed directly
    /// from the per-position softmaxes: `log p_start[s] + log p_end[e]` for
    /// spans and the sum of tag log-probabilities over every input position
    /// and special number for equations. `None` for other scorer kinds.
    pub fn factorized_log_prob(&self, ex: &Example, z: &Solution) -> Option<f64> {
        let dot = |w: &[f64], phi: &[f64; TOKEN_DIM]| -> f64 { w.iter().zip(phi).map(|(a, b)| a * b).sum() };
        match (self.kind, z) {
            (ScorerKind::FactorizedSpan, Solution::Span(s)) => {
                let doc = ex.document()?;
                let feats = sequence_features(doc, &question_vocab(&ex.question), false);
                let (ws, we) = self.params.split_at(TOKEN_DIM);
                let start = log_softmax(&feats.iter().map(|f| dot(ws, f)).collect::<Vec<_>>());
                let end = log_softmax(&feats.iter().map(|f| dot(we, f)).collect::<Vec<_>>());
                Some(start.get(s.start)? + end.get(s.end)?)
            }
            (ScorerKind::FactorizedTag { specials }, Solution::Equation(eq)) => {
                let input = TagInput::new(ex).ok()?;
                let mut input_tags = vec![0usize; input.tokens.len()];
                let mut special_tags = vec![0usize; specials];
                for (op, n) in [(eq.o1, eq.n1), (eq.o2, eq.n2)] {
                    match (n.source, input.position(n.source)) {
                        (_, Some(pos)) => *input_tags.get_mut(pos)? = op.tag(),
                        (NumberSource::Special(j), None) => *special_tags.get_mut(j)? = op.tag(),
                        _ => {}
                    }
                }
                let mut total = 0.0;
                for (phi, &tag) in input.tokens.iter().zip(&input_tags) {
                    let logits: Vec<f64> = (0..TAG_COUNT)
                        .map(|a| (0..TOKEN_DIM).map(|d| self.params[tag_param(d, a)] * phi[d]).sum())
                        .collect();
                    total += log_softmax(&logits)[tag];
                }
                for (j, &tag) in special_tags.iter().enumerate() {
                    let logits: Vec<f64> = (0..TAG_COUNT)
                        .map(|a| {
                            (0..TOKEN_DIM)
                                .map(|d| self.params[special_param(j, d, a)] * input.pooled[d])
                                .sum()
                        })
                        .collect();
                    total += log_softmax(&logits)[tag];
                }
                Some(total)
            }
            _ => None,
        }
    }
}
