//! Hand-built token and candidate features.
//!
//! Token features stand in for contextual encoder states: a bias, a position
//! bucket, overlap with the question around the token, and surface flags.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::arithmetic::{parse_number, Equation, NumberSource};
use crate::span_match::Span;
use crate::sqlgen::{ColumnKind, CondOp, SqlQuery};
use crate::text::normalize_text;
use crate::types::{Example, Solution, Token};

const POSITION_BUCKETS: usize = 8;

/// Width of a per-token feature vector.
pub const TOKEN_DIM: usize = 1 + POSITION_BUCKETS + 7;

fn position_bucket(i: usize) -> usize {
    match i {
        0..=3 => i,
        4..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        _ => 7,
    }
}

/// Set of normalized question words, used for overlap features.
pub fn question_vocab(question: &[Token]) -> HashSet<String> {
    question
        .iter()
        .map(|t| normalize_text(&t.text))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Features of token `i` of `tokens`. `in_question` marks tokens of the
/// question segment itself (used by the tagging scorer).
pub fn token_features(
    tokens: &[Token],
    i: usize,
    vocab: &HashSet<String>,
    in_question: bool,
) -> [f64; TOKEN_DIM] {
    let mut f = [0.0; TOKEN_DIM];
    let overlaps = |j: usize| vocab.contains(&normalize_text(&tokens[j].text));
    f[0] = 1.0;
    f[1 + position_bucket(i)] = 1.0;
    let base = 1 + POSITION_BUCKETS;
    let text = &tokens[i].text;
    f[base] = overlaps(i) as u8 as f64;
    f[base + 1] = (i > 0 && overlaps(i - 1)) as u8 as f64;
    f[base + 2] = (i + 1 < tokens.len() && overlaps(i + 1)) as u8 as f64;
    f[base + 3] = parse_number(text).is_some() as u8 as f64;
    f[base + 4] = text.chars().next().is_some_and(char::is_uppercase) as u8 as f64;
    let lo = i.saturating_sub(3);
    let hi = (i + 4).min(tokens.len());
    let window = (lo..hi).filter(|&j| j != i && overlaps(j)).count();
    f[base + 5] = window as f64 / 6.0;
    f[base + 6] = in_question as u8 as f64;
    f
}

/// Per-token features for a whole sequence.
pub fn sequence_features(tokens: &[Token], vocab: &HashSet<String>, in_question: bool) -> Vec<[f64; TOKEN_DIM]> {
    (0..tokens.len())
        .map(|i| token_features(tokens, i, vocab, in_question))
        .collect()
}

/// Candidate feature extractors for the log-linear scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureExtractor {
    #[serde(rename = "span-basic")]
    SpanBasic,
    #[serde(rename = "equation-basic")]
    EquationBasic,
    #[serde(rename = "sql-basic")]
    SqlBasic,
    /// `span-basic` plus hashed word identities of the boundary tokens.
    #[serde(rename = "span-lexical")]
    SpanLexical,
}

/// Hash buckets per lexical identity block.
pub const LEXICAL_BUCKETS: usize = 512;

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn lexical_bucket(word: &str) -> usize {
    (fnv1a(&normalize_text(word)) % LEXICAL_BUCKETS as u64) as usize
}

const SPAN_LEN_BUCKETS: usize = 5;
const SOURCE_KINDS: usize = 4;
const SQL_DIM: usize = 1 + 6 + 4 + 3 + 6;

impl FeatureExtractor {
    pub fn id(self) -> &'static str {
        match self {
            FeatureExtractor::SpanBasic => "span-basic",
            FeatureExtractor::EquationBasic => "equation-basic",
            FeatureExtractor::SqlBasic => "sql-basic",
            FeatureExtractor::SpanLexical => "span-lexical",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        [Self::SpanBasic, Self::EquationBasic, Self::SqlBasic, Self::SpanLexical]
            .into_iter()
            .find(|e| e.id() == id)
    }

    pub fn dim(self) -> usize {
        match self {
            FeatureExtractor::SpanBasic => 2 * TOKEN_DIM + SPAN_LEN_BUCKETS,
            FeatureExtractor::EquationBasic => 9 + 2 * (SOURCE_KINDS + TOKEN_DIM),
            FeatureExtractor::SqlBasic => SQL_DIM,
            FeatureExtractor::SpanLexical => 2 * TOKEN_DIM + SPAN_LEN_BUCKETS + 2 * LEXICAL_BUCKETS,
        }
    }

    /// Per-example state reused across candidates.
    pub fn context(self, ex: &Example) -> ExtractorContext {
        let vocab = question_vocab(&ex.question);
        let doc = ex
            .document()
            .map(|d| sequence_features(d, &vocab, false))
            .unwrap_or_default();
        let question = sequence_features(&ex.question, &vocab, true);
        let lexical = match self {
            FeatureExtractor::SpanLexical => ex
                .document()
                .map(|d| d.iter().map(|t| lexical_bucket(&t.text)).collect())
                .unwrap_or_default(),
            _ => Vec::new(),
        };
        ExtractorContext {
            vocab,
            doc,
            question,
            lexical,
        }
    }

    /// Feature vector `φ(x, z)`; `None` when the solution variant does not
    /// fit this extractor.
    pub fn features(self, ex: &Example, ctx: &ExtractorContext, z: &Solution) -> Option<Vec<f64>> {
        match (self, z) {
            (FeatureExtractor::SpanBasic, Solution::Span(s)) => Some(span_features(ctx, s)),
            (FeatureExtractor::EquationBasic, Solution::Equation(e)) => Some(equation_features(ctx, e)),
            (FeatureExtractor::SqlBasic, Solution::Sql(q)) => Some(sql_features(ex, ctx, q)),
            (FeatureExtractor::SpanLexical, Solution::Span(s)) => {
                let mut f = span_features(ctx, s);
                let base = f.len();
                f.resize(self.dim(), 0.0);
                f[base + ctx.lexical[s.start]] = 1.0;
                f[base + LEXICAL_BUCKETS + ctx.lexical[s.end]] = 1.0;
                Some(f)
            }
            _ => None,
        }
    }
}

pub struct ExtractorContext {
    vocab: HashSet<String>,
    doc: Vec<[f64; TOKEN_DIM]>,
    question: Vec<[f64; TOKEN_DIM]>,
    lexical: Vec<usize>,
}

fn span_features(ctx: &ExtractorContext, s: &Span) -> Vec<f64> {
    let mut f = Vec::with_capacity(2 * TOKEN_DIM + SPAN_LEN_BUCKETS);
    f.extend_from_slice(&ctx.doc[s.start]);
    f.extend_from_slice(&ctx.doc[s.end]);
    let bucket = match s.len() {
        1 => 0,
        2 => 1,
        3 => 2,
        4 | 5 => 3,
        _ => 4,
    };
    let mut len = [0.0; SPAN_LEN_BUCKETS];
    len[bucket] = 1.0;
    f.extend_from_slice(&len);
    f
}

fn equation_features(ctx: &ExtractorContext, e: &Equation) -> Vec<f64> {
    let mut f = vec![0.0; 9];
    f[3 * (e.o1.tag() - 1) + (e.o2.tag() - 1)] = 1.0;
    for n in [&e.n1, &e.n2] {
        let mut kind = [0.0; SOURCE_KINDS];
        let tok = match n.source {
            NumberSource::Document(i) => {
                kind[0] = 1.0;
                ctx.doc.get(i).copied()
            }
            NumberSource::Question(i) => {
                kind[1] = 1.0;
                ctx.question.get(i).copied()
            }
            NumberSource::Special(_) => {
                kind[2] = 1.0;
                None
            }
            NumberSource::Zero => {
                kind[3] = 1.0;
                None
            }
        };
        f.extend_from_slice(&kind);
        f.extend_from_slice(&tok.unwrap_or([0.0; TOKEN_DIM]));
    }
    f
}

fn header_overlap(ex: &Example, ctx: &ExtractorContext, column: usize) -> f64 {
    let Some(col) = ex.table().and_then(|t| t.schema.columns.get(column)) else {
        return 0.0;
    };
    let words: Vec<String> = col
        .tokens
        .iter()
        .map(|t| normalize_text(&t.text))
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return 0.0;
    }
    words.iter().filter(|w| ctx.vocab.contains(*w)).count() as f64 / words.len() as f64
}

fn sql_features(ex: &Example, ctx: &ExtractorContext, q: &SqlQuery) -> Vec<f64> {
    let mut f = vec![0.0; SQL_DIM];
    f[0] = 1.0;
    f[1 + q.agg.index()] = 1.0;
    f[7 + q.conditions.len().min(3)] = 1.0;
    for c in &q.conditions {
        let k = match c.op {
            CondOp::Eq => 0,
            CondOp::Lt => 1,
            CondOp::Gt => 2,
        };
        f[11 + k] += 1.0;
    }
    let base = 14;
    f[base] = header_overlap(ex, ctx, q.sel);
    f[base + 1] = ex
        .table()
        .and_then(|t| t.schema.columns.get(q.sel))
        .is_some_and(|c| c.kind == ColumnKind::Numeric) as u8 as f64;
    if !q.conditions.is_empty() {
        let n = q.conditions.len() as f64;
        f[base + 2] = q.conditions.iter().map(|c| header_overlap(ex, ctx, c.column)).sum::<f64>() / n;
        f[base + 3] = q
            .conditions
            .iter()
            .map(|c| (c.value.end - c.value.start + 1) as f64)
            .sum::<f64>()
            / n;
        f[base + 4] = q.conditions.iter().any(|c| c.column == q.sel) as u8 as f64;
    }
    f[base + 5] = ex.question.len().min(32) as f64 / 32.0;
    f
}
