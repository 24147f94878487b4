//! Shared domain types: tokens, examples, solutions and solution sets.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arithmetic::Equation;
use crate::span_match::Span;
use crate::sqlgen::{SqlQuery, Table};

/// A whitespace-free token and its byte offset in the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    SpanExtraction,
    Arithmetic,
    SqlGeneration,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::SpanExtraction => "span",
            TaskKind::Arithmetic => "arithmetic",
            TaskKind::SqlGeneration => "sql",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "span" | "span_extraction" => Ok(TaskKind::SpanExtraction),
            "arithmetic" => Ok(TaskKind::Arithmetic),
            "sql" | "sql_generation" => Ok(TaskKind::SqlGeneration),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Context {
    Document(Vec<Token>),
    Table(Table),
}

/// One weak-supervision instance: question, context and gold answer strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub question: Vec<Token>,
    pub context: Context,
    pub answers: Vec<String>,
    pub task: TaskKind,
}

impl Example {
    pub fn document(&self) -> Option<&[Token]> {
        match &self.context {
            Context::Document(d) => Some(d),
            Context::Table(_) => None,
        }
    }

    pub fn table(&self) -> Option<&Table> {
        match &self.context {
            Context::Table(t) => Some(t),
            Context::Document(_) => None,
        }
    }

    /// Checks the structural invariants: non-empty question and answers,
    /// context kind consistent with the task.
    pub fn validate(&self) -> Result<(), String> {
        if self.question.is_empty() {
            return Err(format!("example `{}`: empty question", self.id));
        }
        if self.answers.is_empty() {
            return Err(format!("example `{}`: no answers", self.id));
        }
        match (&self.context, self.task) {
            (Context::Document(d), TaskKind::SpanExtraction | TaskKind::Arithmetic) => {
                if d.is_empty() {
                    return Err(format!("example `{}`: empty document", self.id));
                }
            }
            (Context::Table(t), TaskKind::SqlGeneration) => {
                if t.schema.columns.is_empty() {
                    return Err(format!("example `{}`: table has no columns", self.id));
                }
            }
            _ => {
                return Err(format!(
                    "example `{}`: context kind does not match task {}",
                    self.id, self.task
                ))
            }
        }
        Ok(())
    }
}

/// A latent derivation `z`: a document span, an equation or a SQL query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Solution {
    Span(Span),
    Equation(Equation),
    Sql(SqlQuery),
}

impl Solution {
    fn variant_rank(&self) -> u8 {
        match self {
            Solution::Span(_) => 0,
            Solution::Equation(_) => 1,
            Solution::Sql(_) => 2,
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Solution::Span(_) => TaskKind::SpanExtraction,
            Solution::Equation(_) => TaskKind::Arithmetic,
            Solution::Sql(_) => TaskKind::SqlGeneration,
        }
    }
}

impl Ord for Solution {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_order(self, other)
    }
}

impl PartialOrd for Solution {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical total order used for First-Only supervision, argmax tie-breaks
/// and serialization. Comparing different variants is a contract violation;
/// it is caught in debug builds and otherwise ordered by variant.
pub fn canonical_order(a: &Solution, b: &Solution) -> Ordering {
    match (a, b) {
        (Solution::Span(x), Solution::Span(y)) => x.cmp(y),
        (Solution::Equation(x), Solution::Equation(y)) => x.cmp(y),
        (Solution::Sql(x), Solution::Sql(y)) => x.cmp(y),
        _ => {
            debug_assert!(false, "canonical_order on mismatched solution variants");
            a.variant_rank().cmp(&b.variant_rank())
        }
    }
}

/// The precomputed solution set `Z` of one example.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub example_id: String,
    pub solutions: Vec<Solution>,
    /// Number of candidates actually enumerated (|Z_tot|).
    pub candidate_count: usize,
}

impl SolutionSet {
    /// Sorts canonically and drops duplicates.
    pub fn new(example_id: impl Into<String>, mut solutions: Vec<Solution>, candidate_count: usize) -> Self {
        solutions.sort();
        solutions.dedup();
        debug_assert!(candidate_count >= solutions.len());
        SolutionSet {
            example_id: example_id.into(),
            solutions,
            candidate_count,
        }
    }

    pub fn empty(example_id: impl Into<String>, candidate_count: usize) -> Self {
        Self::new(example_id, Vec::new(), candidate_count)
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.example_id = id.into();
        self
    }

    /// Indices of this set's members within a canonically sorted candidate list.
    /// Members missing from `candidates` are skipped.
    pub fn indices_in(&self, candidates: &[Solution]) -> Vec<usize> {
        self.solutions
            .iter()
            .filter_map(|z| candidates.binary_search(z).ok())
            .collect()
    }
}
