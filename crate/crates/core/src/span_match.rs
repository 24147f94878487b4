//! Solution sets for multi-mention reading comprehension.
//!
//! Every document span up to `max_span_len` tokens is scored against the
//! gold answers with a string-match function `g` (exact match or ROUGE-L).
//! `Z` keeps the spans attaining the maximum score `g_max`; the noisy variant
//! keeps every span at or above the k-th highest distinct score.

use serde::{Deserialize, Serialize};

use crate::text::{normalize_text, normalized_tokens};
use crate::types::{Example, Solution, SolutionSet, Token};

/// A document span with inclusive, 0-based token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    #[serde(rename = "s")]
    pub start: usize,
    #[serde(rename = "e")]
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn text(&self, doc: &[Token]) -> String {
        crate::text::join_tokens(&doc[self.start..=self.end])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMetric {
    ExactMatch,
    RougeL,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanMatcher {
    pub metric: MatchMetric,
    pub max_span_len: usize,
    pub noisy_rank_k: Option<usize>,
}

impl Default for SpanMatcher {
    fn default() -> Self {
        SpanMatcher {
            metric: MatchMetric::ExactMatch,
            max_span_len: 10,
            noisy_rank_k: None,
        }
    }
}

impl SpanMatcher {
    pub fn new(metric: MatchMetric) -> Self {
        SpanMatcher {
            metric,
            ..Default::default()
        }
    }
}

/// Length of the longest common subsequence of `a` and `b`.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        extend_lcs_row(&mut row, x, b);
    }
    row[b.len()]
}

// Advances one LCS DP row by one more candidate element.
fn extend_lcs_row<T: PartialEq>(row: &mut [usize], x: &T, reference: &[T]) {
    let mut diag = 0;
    for (j, y) in reference.iter().enumerate() {
        let up = row[j + 1];
        row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
        diag = up;
    }
}

fn lcs_f1(lcs: usize, cand_len: usize, ref_len: usize) -> f64 {
    if lcs == 0 || cand_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = lcs as f64 / cand_len as f64;
    let r = lcs as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

/// ROUGE-L F1 between two (already normalized) token sequences.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    lcs_f1(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// ROUGE-L between two raw strings, normalizing both first.
pub fn rouge_l_text(candidate: &str, reference: &str) -> f64 {
    rouge_l(&normalized_tokens(candidate), &normalized_tokens(reference))
}

/// Every span within the length bound with its score `g`, in canonical order.
/// Spans scoring zero are included.
pub fn score_spans(doc: &[Token], answers: &[String], m: &SpanMatcher) -> Vec<(Span, f64)> {
    let max_len = m.max_span_len.max(1);
    // Each document token contributes zero or more normalized tokens.
    let doc_norm: Vec<Vec<String>> = doc.iter().map(|t| normalized_tokens(&t.text)).collect();
    let golds: Vec<Vec<String>> = answers.iter().map(|a| normalized_tokens(a)).collect();

    let mut out = Vec::with_capacity(doc.len() * max_len);
    for s in 0..doc.len() {
        let last = (s + max_len).min(doc.len());
        match m.metric {
            MatchMetric::ExactMatch => {
                let mut flat: Vec<&str> = Vec::new();
                for (e, toks) in doc_norm.iter().enumerate().take(last).skip(s) {
                    flat.extend(toks.iter().map(String::as_str));
                    let hit = golds.iter().any(|g| {
                        !g.is_empty() && g.len() == flat.len() && g.iter().zip(&flat).all(|(a, b)| a == b)
                    });
                    out.push((Span::new(s, e), if hit { 1.0 } else { 0.0 }));
                }
            }
            MatchMetric::RougeL => {
                let mut rows: Vec<Vec<usize>> = golds.iter().map(|g| vec![0; g.len() + 1]).collect();
                let mut cand_len = 0;
                for (e, toks) in doc_norm.iter().enumerate().take(last).skip(s) {
                    for tok in toks {
                        cand_len += 1;
                        for (row, g) in rows.iter_mut().zip(&golds) {
                            extend_lcs_row(row, tok, g);
                        }
                    }
                    let score = rows
                        .iter()
                        .zip(&golds)
                        .map(|(row, g)| lcs_f1(row[g.len()], cand_len, g.len()))
                        .fold(0.0, f64::max);
                    out.push((Span::new(s, e), score));
                }
            }
        }
    }
    out
}

fn to_set(spans: Vec<Span>, candidate_count: usize) -> SolutionSet {
    SolutionSet::new(
        String::new(),
        spans.into_iter().map(Solution::Span).collect(),
        candidate_count,
    )
}

/// All spans attaining `g_max`; empty when `g_max` is zero.
pub fn find_matching_spans(doc: &[Token], answers: &[String], m: &SpanMatcher) -> SolutionSet {
    let scored = score_spans(doc, answers, m);
    let g_max = scored.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    let spans = if g_max > 0.0 {
        scored.iter().filter(|(_, g)| *g == g_max).map(|(s, _)| *s).collect()
    } else {
        Vec::new()
    };
    to_set(spans, scored.len())
}

/// All spans scoring at least the k-th highest distinct positive score.
/// Ties at the threshold are all admitted; zero-score spans never are.
pub fn find_noisy_spans(doc: &[Token], answers: &[String], m: &SpanMatcher) -> SolutionSet {
    let k = m.noisy_rank_k.unwrap_or(1).max(1);
    let scored = score_spans(doc, answers, m);
    let mut distinct: Vec<f64> = scored.iter().map(|(_, g)| *g).filter(|g| *g > 0.0).collect();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let spans = match distinct.get(k - 1).or(distinct.last()) {
        Some(&threshold) => scored
            .iter()
            .filter(|(_, g)| *g > 0.0 && *g >= threshold)
            .map(|(s, _)| *s)
            .collect(),
        None => Vec::new(),
    };
    to_set(spans, scored.len())
}

/// Solution set for a span-extraction example, honoring `noisy_rank_k`.
pub fn span_solution_set(ex: &Example, m: &SpanMatcher) -> SolutionSet {
    let doc = ex.document().unwrap_or(&[]);
    let set = if m.noisy_rank_k.is_some() {
        find_noisy_spans(doc, &ex.answers, m)
    } else {
        find_matching_spans(doc, &ex.answers, m)
    };
    set.with_id(ex.id.clone())
}

/// Z_tot for spans: every span of at most `max_span_len` tokens, canonically ordered.
pub fn enumerate_spans(doc_len: usize, max_span_len: usize) -> Vec<Span> {
    let max_len = max_span_len.max(1);
    (0..doc_len)
        .flat_map(|s| (s..(s + max_len).min(doc_len)).map(move |e| Span::new(s, e)))
        .collect()
}

/// Normalized answer text of a span.
pub fn span_answer(doc: &[Token], span: &Span) -> String {
    normalize_text(&span.text(doc))
}
