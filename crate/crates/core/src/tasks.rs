//! Task dispatch: candidate enumeration, solution sets and answer rendering
//! for any example.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::{arithmetic_solution_set, candidate_equations, execute_equation, format_number, ArithmeticConfig, ArithmeticError};
use crate::learning::{Scorer, TrainInstance};
use crate::learning::ScoreError;
use crate::metrics::{answer_rouge_l, exact_match, token_f1};
use crate::span_match::{enumerate_spans, span_solution_set, SpanMatcher};
use crate::sqlgen::{denotation_matches, enumerate_queries, execute_query, sql_solution_set, SqlError, SqlLimits};
use crate::types::{Example, Solution, SolutionSet, TaskKind};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskConfig {
    pub span: SpanMatcher,
    pub arithmetic: ArithmeticConfig,
    pub sql: SqlLimits,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("example `{0}`: context does not match its task")]
    ContextMismatch(String),
    #[error("solution variant does not match task {0}")]
    VariantMismatch(TaskKind),
}

/// Z_tot of an example, canonically ordered.
pub fn candidates(ex: &Example, cfg: &TaskConfig) -> Vec<Solution> {
    match ex.task {
        TaskKind::SpanExtraction => {
            let n = ex.document().map_or(0, <[_]>::len);
            enumerate_spans(n, cfg.span.max_span_len)
                .into_iter()
                .map(Solution::Span)
                .collect()
        }
        TaskKind::Arithmetic => candidate_equations(ex, &cfg.arithmetic)
            .into_iter()
            .map(Solution::Equation)
            .collect(),
        TaskKind::SqlGeneration => match ex.table() {
            Some(t) => {
                let mut v: Vec<Solution> = enumerate_queries(&ex.question, t, &cfg.sql).map(Solution::Sql).collect();
                v.sort();
                v
            }
            None => Vec::new(),
        },
    }
}

pub fn solution_set(ex: &Example, cfg: &TaskConfig) -> Result<SolutionSet, TaskError> {
    match ex.task {
        TaskKind::SpanExtraction => {
            ex.document().ok_or_else(|| TaskError::ContextMismatch(ex.id.clone()))?;
            Ok(span_solution_set(ex, &cfg.span))
        }
        TaskKind::Arithmetic => Ok(arithmetic_solution_set(ex, &cfg.arithmetic)?),
        TaskKind::SqlGeneration => {
            ex.table().ok_or_else(|| TaskError::ContextMismatch(ex.id.clone()))?;
            Ok(sql_solution_set(ex, &cfg.sql))
        }
    }
}

/// Extracted or executed answer of a solution, as a list of answer strings
/// (one for spans and equations, the denotation for SQL).
pub fn answer_of(ex: &Example, z: &Solution) -> Result<Vec<String>, TaskError> {
    match (z, &ex.context) {
        (Solution::Span(s), crate::types::Context::Document(doc)) if s.end < doc.len() => Ok(vec![s.text(doc)]),
        (Solution::Equation(e), _) if ex.task == TaskKind::Arithmetic => Ok(vec![format_number(execute_equation(e))]),
        (Solution::Sql(q), crate::types::Context::Table(t)) => Ok(execute_query(t, q)?),
        _ => Err(TaskError::VariantMismatch(ex.task)),
    }
}

/// Scores of a predicted answer against the golds: (em, f1, rouge_l).
/// Arithmetic answers use numeric-equivalence EM; SQL denotations are
/// correct when they match the gold multiset.
pub fn score_answer(ex: &Example, answer: &[String]) -> (f64, f64, f64) {
    let joined = answer.join(", ");
    let em = match ex.task {
        TaskKind::SqlGeneration => denotation_matches(answer, &ex.answers) as u8 as f64,
        TaskKind::Arithmetic => exact_match(&joined, &ex.answers, true),
        TaskKind::SpanExtraction => exact_match(&joined, &ex.answers, false),
    };
    let golds: Vec<String> = match ex.task {
        TaskKind::SqlGeneration => vec![ex.answers.join(", ")],
        _ => ex.answers.clone(),
    };
    (em, token_f1(&joined, &golds), answer_rouge_l(&joined, &golds))
}

/// Compiles examples with non-empty solution sets into training instances.
/// Returns the instances and the number of examples skipped for empty Z.
pub fn build_instances<'a>(
    scorer: &Scorer,
    pairs: impl IntoIterator<Item = (&'a Example, &'a SolutionSet)>,
    cfg: &TaskConfig,
) -> Result<(Vec<TrainInstance>, usize), ScoreError> {
    let mut out = Vec::new();
    let mut skipped = 0;
    for (ex, set) in pairs {
        let cands = candidates(ex, cfg);
        let z_idx = set.indices_in(&cands);
        if z_idx.is_empty() {
            skipped += 1;
            continue;
        }
        out.push(TrainInstance {
            id: ex.id.clone(),
            prepared: scorer.prepare(ex, cands)?,
            z_idx,
        });
    }
    Ok((out, skipped))
}
