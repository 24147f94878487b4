//! Bounded SQL query space over a question and a table.
//!
//! Queries are non-nested `SELECT agg(col) WHERE c1 AND c2 AND c3` with at
//! most three conditions; condition values are contiguous question spans.
//! Denotations are computed against an in-memory table and compared to the
//! gold answers as multisets of normalized strings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::{format_number, parse_numeric_literal};
use crate::text::{join_tokens, normalize_text, tokenize};
use crate::types::{Example, Solution, SolutionSet, Token};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SqlError {
    #[error("{agg:?} needs a numeric column, column {column} is text")]
    AggregationTypeError { column: usize, agg: Aggregation },
    #[error("column {0} out of range")]
    ColumnOutOfRange(usize),
    #[error("table has no columns")]
    NoColumns,
    #[error("column {0} has an empty header")]
    EmptyHeader(usize),
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Text,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub title: String,
    pub tokens: Vec<Token>,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSchema {
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub text: String,
    pub normalized: String,
    pub number: Option<f64>,
}

impl Cell {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        Cell {
            normalized: normalize_text(&text),
            number: parse_numeric_literal(&text),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: TableSchema,
    pub data: TableData,
}

impl Table {
    /// Builds a table, inferring a column as numeric when it has at least one
    /// row and every cell parses as a number.
    pub fn new(headers: Vec<String>, rows: Vec<Vec<String>>) -> Result<Table, SqlError> {
        if headers.is_empty() {
            return Err(SqlError::NoColumns);
        }
        let width = headers.len();
        if let Some(i) = headers.iter().position(|h| h.trim().is_empty()) {
            return Err(SqlError::EmptyHeader(i));
        }
        for (row, cells) in rows.iter().enumerate() {
            if cells.len() != width {
                return Err(SqlError::RaggedRow {
                    row,
                    expected: width,
                    got: cells.len(),
                });
            }
        }
        let rows: Vec<Vec<Cell>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(Cell::new).collect())
            .collect();
        let columns = headers
            .into_iter()
            .enumerate()
            .map(|(c, title)| {
                let numeric = !rows.is_empty() && rows.iter().all(|r| r[c].number.is_some());
                Column {
                    tokens: tokenize(&title),
                    title,
                    kind: if numeric { ColumnKind::Numeric } else { ColumnKind::Text },
                }
            })
            .collect();
        Ok(Table {
            schema: TableSchema { columns },
            data: TableData { rows },
        })
    }

    pub fn n_columns(&self) -> usize {
        self.schema.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.data.rows.len()
    }

    pub fn headers(&self) -> Vec<String> {
        self.schema.columns.iter().map(|c| c.title.clone()).collect()
    }

    pub fn raw_rows(&self) -> Vec<Vec<String>> {
        self.data
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.text.clone()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CondOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

impl CondOp {
    pub const ALL: [CondOp; 3] = [CondOp::Eq, CondOp::Lt, CondOp::Gt];

    pub fn symbol(self) -> &'static str {
        match self {
            CondOp::Eq => "=",
            CondOp::Lt => "<",
            CondOp::Gt => ">",
        }
    }
}

/// A contiguous question span `[start, end]` (inclusive) and its text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuestionSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    pub column: usize,
    pub op: CondOp,
    pub value: QuestionSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    None,
    Sum,
    Mean,
    Max,
    Min,
    Count,
}

impl Aggregation {
    pub const ALL: [Aggregation; 6] = [
        Aggregation::None,
        Aggregation::Sum,
        Aggregation::Mean,
        Aggregation::Max,
        Aggregation::Min,
        Aggregation::Count,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::None => "none",
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Min => "min",
            Aggregation::Count => "count",
        }
    }

    fn needs_numeric(self) -> bool {
        matches!(self, Aggregation::Sum | Aggregation::Mean)
    }
}

/// `SELECT agg(sel) WHERE conditions...`, conditions in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SqlQuery {
    pub sel: usize,
    pub agg: Aggregation,
    pub conditions: Vec<Condition>,
}

impl SqlQuery {
    pub fn render(&self, table: &Table) -> String {
        let col = |i: usize| {
            table
                .schema
                .columns
                .get(i)
                .map(|c| c.title.as_str())
                .unwrap_or("?")
        };
        let mut out = match self.agg {
            Aggregation::None => format!("SELECT {}", col(self.sel)),
            agg => format!("SELECT {}({})", agg.name(), col(self.sel)),
        };
        for (i, c) in self.conditions.iter().enumerate() {
            out.push_str(if i == 0 { " WHERE " } else { " AND " });
            out.push_str(&format!("{} {} {}", col(c.column), c.op.symbol(), c.value.text));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    /// Every question span is a candidate value for every column and operator.
    Exhaustive,
    /// Eq values must match a cell of the column; Lt/Gt values must be numbers.
    ColumnGrounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlLimits {
    pub max_conditions: usize,
    pub max_value_len: usize,
    pub pruning: Pruning,
}

impl Default for SqlLimits {
    fn default() -> Self {
        SqlLimits {
            max_conditions: 3,
            max_value_len: 8,
            pruning: Pruning::ColumnGrounded,
        }
    }
}

pub type Denotation = Vec<String>;

/// All contiguous question spans of at most `max_len` tokens, ordered by (start, end).
pub fn question_spans(question: &[Token], max_len: usize) -> Vec<QuestionSpan> {
    let max_len = max_len.max(1);
    let mut out = Vec::new();
    for start in 0..question.len() {
        for end in start..(start + max_len).min(question.len()) {
            out.push(QuestionSpan {
                start,
                end,
                text: join_tokens(&question[start..=end]),
            });
        }
    }
    out
}

fn condition_holds(cell: &Cell, op: CondOp, value_norm: &str, value_num: Option<f64>) -> bool {
    match op {
        CondOp::Eq => cell.normalized == value_norm,
        CondOp::Lt => matches!((cell.number, value_num), (Some(c), Some(v)) if c < v),
        CondOp::Gt => matches!((cell.number, value_num), (Some(c), Some(v)) if c > v),
    }
}

struct PreparedCondition {
    column: usize,
    op: CondOp,
    norm: String,
    number: Option<f64>,
}

impl PreparedCondition {
    fn new(c: &Condition) -> Self {
        PreparedCondition {
            column: c.column,
            op: c.op,
            norm: normalize_text(&c.value.text),
            number: parse_numeric_literal(&c.value.text),
        }
    }

    fn holds(&self, row: &[Cell]) -> bool {
        condition_holds(&row[self.column], self.op, &self.norm, self.number)
    }
}

/// Denotation of `agg(sel)` over the given surviving rows.
fn denote(table: &Table, sel: usize, agg: Aggregation, rows: &[usize]) -> Result<Denotation, SqlError> {
    let column = table.schema.columns.get(sel).ok_or(SqlError::ColumnOutOfRange(sel))?;
    let cells = || rows.iter().map(|&r| &table.data.rows[r][sel]);
    let numeric = column.kind == ColumnKind::Numeric;
    if agg.needs_numeric() && !numeric {
        return Err(SqlError::AggregationTypeError { column: sel, agg });
    }
    let numbers = || cells().filter_map(|c| c.number);
    Ok(match agg {
        Aggregation::None => cells().map(|c| c.text.clone()).collect(),
        Aggregation::Count => vec![rows.len().to_string()],
        Aggregation::Sum => vec![format_number(numbers().sum())],
        Aggregation::Mean => {
            if rows.is_empty() {
                Vec::new()
            } else {
                vec![format_number(numbers().sum::<f64>() / rows.len() as f64)]
            }
        }
        Aggregation::Max | Aggregation::Min => {
            let want_max = agg == Aggregation::Max;
            if numeric {
                let best = numbers().reduce(|a, b| match (want_max, b > a, b < a) {
                    (true, true, _) | (false, _, true) => b,
                    _ => a,
                });
                best.map(format_number).into_iter().collect()
            } else {
                let best = cells().reduce(|a, b| {
                    let better = if want_max {
                        b.normalized > a.normalized
                    } else {
                        b.normalized < a.normalized
                    };
                    if better {
                        b
                    } else {
                        a
                    }
                });
                best.map(|c| c.text.clone()).into_iter().collect()
            }
        }
    })
}

/// Runs a query against the table.
pub fn execute_query(table: &Table, z: &SqlQuery) -> Result<Denotation, SqlError> {
    if let Some(c) = z.conditions.iter().find(|c| c.column >= table.n_columns()) {
        return Err(SqlError::ColumnOutOfRange(c.column));
    }
    let prepared: Vec<PreparedCondition> = z.conditions.iter().map(PreparedCondition::new).collect();
    let rows: Vec<usize> = (0..table.n_rows())
        .filter(|&r| prepared.iter().all(|c| c.holds(&table.data.rows[r])))
        .collect();
    denote(table, z.sel, z.agg, &rows)
}

/// Multiset equality of normalized strings.
pub fn denotation_matches(denotation: &[String], golds: &[String]) -> bool {
    if denotation.len() != golds.len() {
        return false;
    }
    let mut a: Vec<String> = denotation.iter().map(|s| normalize_text(s)).collect();
    let mut b: Vec<String> = golds.iter().map(|s| normalize_text(s)).collect();
    a.sort();
    b.sort();
    a == b
}

/// The candidate condition set C, canonically sorted.
pub fn candidate_conditions(question: &[Token], table: &Table, limits: &SqlLimits) -> Vec<Condition> {
    let spans = question_spans(question, limits.max_value_len);
    let span_norms: Vec<String> = spans.iter().map(|s| normalize_text(&s.text)).collect();
    let mut out = Vec::new();
    for column in 0..table.n_columns() {
        for op in CondOp::ALL {
            for (span, norm) in spans.iter().zip(&span_norms) {
                let keep = match (limits.pruning, op) {
                    (Pruning::Exhaustive, _) => true,
                    (Pruning::ColumnGrounded, CondOp::Eq) => {
                        !norm.is_empty() && table.data.rows.iter().any(|r| &r[column].normalized == norm)
                    }
                    (Pruning::ColumnGrounded, _) => parse_numeric_literal(&span.text).is_some(),
                };
                if keep {
                    out.push(Condition {
                        column,
                        op,
                        value: span.clone(),
                    });
                }
            }
        }
    }
    out
}

/// Lexicographic enumeration of index subsets of size at most `max_len`,
/// in increasing index order: [], [0], [0,1], [0,1,2], [0,2], [1], ...
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    max_len: usize,
    current: Vec<usize>,
    started: bool,
}

impl Combinations {
    pub fn new(n: usize, max_len: usize) -> Self {
        Combinations {
            n,
            max_len,
            current: Vec::new(),
            started: false,
        }
    }

    fn advance(&mut self) -> bool {
        if self.current.len() < self.max_len {
            let next = self.current.last().map_or(0, |x| x + 1);
            if next < self.n {
                self.current.push(next);
                return true;
            }
        }
        while let Some(x) = self.current.pop() {
            if x + 1 < self.n {
                self.current.push(x + 1);
                return true;
            }
        }
        false
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if !self.started {
            self.started = true;
            return Some(Vec::new());
        }
        self.advance().then(|| self.current.clone())
    }
}

/// (sel, agg) pairs admitted by the column types, in canonical order.
fn select_heads(table: &Table) -> Vec<(usize, Aggregation)> {
    let mut heads = Vec::new();
    for (sel, col) in table.schema.columns.iter().enumerate() {
        for agg in Aggregation::ALL {
            if agg.needs_numeric() && col.kind != ColumnKind::Numeric {
                continue;
            }
            heads.push((sel, agg));
        }
    }
    heads
}

/// Streams Z_tot in canonical (sel, agg, conditions) order. Sum/Mean over
/// text columns are skipped.
pub fn enumerate_queries(
    question: &[Token],
    table: &Table,
    limits: &SqlLimits,
) -> impl Iterator<Item = SqlQuery> {
    let conds = candidate_conditions(question, table, limits);
    let max_conditions = limits.max_conditions;
    select_heads(table).into_iter().flat_map(move |(sel, agg)| {
        let conds = conds.clone();
        Combinations::new(conds.len(), max_conditions).map(move |combo| SqlQuery {
            sel,
            agg,
            conditions: combo.iter().map(|&i| conds[i].clone()).collect(),
        })
    })
}

/// Number of queries `enumerate_queries` yields, without materializing them.
pub fn count_queries(question: &[Token], table: &Table, limits: &SqlLimits) -> usize {
    let n = candidate_conditions(question, table, limits).len();
    let combos: usize = (0..=limits.max_conditions.min(n)).map(|k| binomial(n, k)).sum();
    combos * select_heads(table).len()
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

type RowMask = Vec<u64>;

fn full_mask(rows: usize) -> RowMask {
    let mut mask = vec![u64::MAX; rows.div_ceil(64)];
    if !rows.is_multiple_of(64) {
        if let Some(last) = mask.last_mut() {
            *last = (1u64 << (rows % 64)) - 1;
        }
    }
    mask
}

fn mask_rows(mask: &RowMask) -> Vec<usize> {
    let mut rows = Vec::new();
    for (w, bits) in mask.iter().enumerate() {
        let mut b = *bits;
        while b != 0 {
            let t = b.trailing_zeros() as usize;
            rows.push(w * 64 + t);
            b &= b - 1;
        }
    }
    rows
}

/// Z for a table question: every enumerated query whose denotation matches
/// the gold answers. Row filters are evaluated once per distinct row subset.
pub fn sql_solution_set(ex: &Example, limits: &SqlLimits) -> SolutionSet {
    let Some(table) = ex.table() else {
        return SolutionSet::empty(ex.id.clone(), 0);
    };
    let conds = candidate_conditions(&ex.question, table, limits);
    let heads = select_heads(table);
    let cond_masks: Vec<RowMask> = conds
        .iter()
        .map(|c| {
            let p = PreparedCondition::new(c);
            let mut mask = vec![0u64; table.n_rows().div_ceil(64)];
            for (r, row) in table.data.rows.iter().enumerate() {
                if p.holds(row) {
                    mask[r / 64] |= 1 << (r % 64);
                }
            }
            mask
        })
        .collect();

    let mut memo: HashMap<RowMask, Vec<bool>> = HashMap::new();
    let mut z = Vec::new();
    let mut total = 0;
    for combo in Combinations::new(conds.len(), limits.max_conditions) {
        let mut mask = full_mask(table.n_rows());
        for &i in &combo {
            for (m, c) in mask.iter_mut().zip(&cond_masks[i]) {
                *m &= c;
            }
        }
        let hits = memo.entry(mask).or_insert_with_key(|mask| {
            let rows = mask_rows(mask);
            heads
                .iter()
                .map(|&(sel, agg)| {
                    denote(table, sel, agg, &rows)
                        .map(|d| denotation_matches(&d, &ex.answers))
                        .unwrap_or(false)
                })
                .collect()
        });
        total += heads.len();
        for (&(sel, agg), _) in heads.iter().zip(hits.iter()).filter(|(_, hit)| **hit) {
            z.push(Solution::Sql(SqlQuery {
                sel,
                agg,
                conditions: combo.iter().map(|&i| conds[i].clone()).collect(),
            }));
        }
    }
    SolutionSet::new(ex.id.clone(), z, total)
}
