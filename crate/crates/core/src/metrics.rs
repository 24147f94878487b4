//! Answer scoring, sparsity and |Z|-bucketed breakdowns.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arithmetic::parse_number;
use crate::text::{normalize_text, normalized_tokens};

pub use crate::span_match::{rouge_l, rouge_l_text};

/// Tolerance for numeric-equivalence exact match.
pub const NUMERIC_TOL: f64 = 1e-6;

/// Default sparsity thresholds.
pub const DEFAULT_EPSILONS: [f64; 2] = [1e-3, 1e-4];

fn as_number(s: &str) -> Option<f64> {
    parse_number(s.trim()).or_else(|| parse_number(&normalize_text(s)))
}

/// 1 when the normalized prediction equals a normalized gold. With `numeric`
/// set, two strings that both parse as numbers also match when their values
/// agree within [`NUMERIC_TOL`].
pub fn exact_match(pred: &str, golds: &[String], numeric: bool) -> f64 {
    let p = normalize_text(pred);
    let pn = if numeric { as_number(pred) } else { None };
    let hit = golds.iter().any(|g| {
        normalize_text(g) == p
            || match (pn, numeric.then(|| as_number(g)).flatten()) {
                (Some(a), Some(b)) => (a - b).abs() <= NUMERIC_TOL,
                _ => false,
            }
    });
    hit as u8 as f64
}

fn f1_pair(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return (pred.is_empty() && gold.is_empty()) as u8 as f64;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut common = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Bag-of-tokens F1, maximized over golds.
pub fn token_f1(pred: &str, golds: &[String]) -> f64 {
    let p = normalized_tokens(pred);
    golds
        .iter()
        .map(|g| f1_pair(&p, &normalized_tokens(g)))
        .fold(0.0, f64::max)
}

/// ROUGE-L F1 over normalized tokens, maximized over golds.
pub fn answer_rouge_l(pred: &str, golds: &[String]) -> f64 {
    golds.iter().map(|g| rouge_l_text(pred, g)).fold(0.0, f64::max)
}

/// Fraction of solution-set members whose model probability is below `eps`.
/// `z_probs` are probabilities under the full candidate distribution.
pub fn sparsity(z_probs: &[f64], eps: f64) -> f64 {
    if z_probs.is_empty() {
        return 0.0;
    }
    z_probs.iter().filter(|&&p| p < eps).count() as f64 / z_probs.len() as f64
}

/// Inclusive |Z| range; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZBucket {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl ZBucket {
    pub fn contains(&self, n: usize) -> bool {
        n >= self.lo && self.hi.is_none_or(|h| n <= h)
    }
}

impl Serialize for ZBucket {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for ZBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) if h == self.lo => write!(f, "{h}"),
            Some(h) => write!(f, "{}-{h}", self.lo),
            None => write!(f, "{}+", self.lo),
        }
    }
}

impl FromStr for ZBucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad bucket `{s}`"));
        if let Some(lo) = s.strip_suffix('+') {
            return Ok(ZBucket { lo: num(lo)?, hi: None });
        }
        let (lo, hi) = match s.split_once('-') {
            Some((a, b)) => (num(a)?, num(b)?),
            None => (num(s)?, num(s)?),
        };
        if hi < lo {
            return Err(format!("bad bucket `{s}`"));
        }
        Ok(ZBucket { lo, hi: Some(hi) })
    }
}

/// Parses a comma-separated bucket list such as `1,2-3,4+`.
pub fn parse_buckets(s: &str) -> Result<Vec<ZBucket>, String> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

pub const DEFAULT_BUCKETS: &str = "0,1,2,3,4-10,11-30,31+";

/// One evaluated example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub prediction: String,
    pub answer: String,
    pub em: f64,
    pub f1: f64,
    pub rouge_l: f64,
    pub z_size: usize,
    /// Sparsity per configured ε, in the same order; `None` when |Z| = 0.
    pub sparsity: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub epsilons: Vec<f64>,
    pub records: Vec<EvalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub count: usize,
    pub em: f64,
    pub f1: f64,
    pub rouge_l: f64,
    /// Per-ε mean sparsity over examples with |Z| ≥ 1.
    pub sparsity: Vec<f64>,
    pub sparsity_count: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl EvalResult {
    pub fn aggregate(&self) -> Aggregate {
        let r = &self.records;
        let sparsity = (0..self.epsilons.len())
            .map(|k| mean(r.iter().filter_map(|x| x.sparsity.get(k).copied().flatten())))
            .collect();
        Aggregate {
            count: r.len(),
            em: mean(r.iter().map(|x| x.em)),
            f1: mean(r.iter().map(|x| x.f1)),
            rouge_l: mean(r.iter().map(|x| x.rouge_l)),
            sparsity,
            sparsity_count: r.iter().filter(|x| x.z_size > 0).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    pub bucket: ZBucket,
    pub count: usize,
    pub em: f64,
}

/// Per-bucket example counts and mean EM. Each record goes to the first
/// bucket containing its |Z|; uncovered records are reported as an error.
pub fn breakdown_by_z(records: &[EvalRecord], buckets: &[ZBucket]) -> Result<Vec<BucketRow>, usize> {
    let mut sums = vec![(0usize, 0.0f64); buckets.len()];
    for r in records {
        let b = buckets.iter().position(|b| b.contains(r.z_size)).ok_or(r.z_size)?;
        sums[b].0 += 1;
        sums[b].1 += r.em;
    }
    Ok(buckets
        .iter()
        .zip(sums)
        .map(|(&bucket, (count, em))| BucketRow {
            bucket,
            count,
            em: if count == 0 { 0.0 } else { em / count as f64 },
        })
        .collect())
}
