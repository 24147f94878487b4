//! File formats.
//!
//! Examples (JSON Lines, one object per line, blank lines ignored):
//!
//! ```text
//! span, arithmetic: {"id", "question", "document", "answers": [..]}
//! sql:              {"id", "question", "table": {"header": [..], "rows": [[..]]}, "answers": [..]}
//! ```
//!
//! Solutions (JSON Lines): `{"id", "candidate_count", "solutions": [..]}`
//! where each solution carries a `type` tag:
//!
//! ```text
//! {"type": "span", "s", "e"}                      inclusive token indices
//! {"type": "equation", "o1", "n1", "o2", "n2"}    operands {"source", "index", "value"}
//! {"type": "sql", "sel", "agg", "conds": [{"col", "op", "value_start", "value_end", "value_text"}]}
//! ```
//!
//! Checkpoint (binary):
//!
//! ```text
//! 8 bytes   magic "HARDEMCK"
//! u64 LE    header length in bytes
//! header    JSON: format version, scorer kind, task, dims, step, config hash, config
//! dims × 8  parameters as little-endian f64
//! ```
//!
//! Every artifact is written to a temporary file in the target directory and
//! renamed into place, so a failed command never leaves a partial file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use hardem::arithmetic::{Equation, NumberMention, NumberSource, Operator};
use hardem::learning::{Scorer, ScorerKind};
use hardem::span_match::Span;
use hardem::sqlgen::{Aggregation, CondOp, Condition, QuestionSpan, SqlQuery, Table};
use hardem::text::tokenize;
use hardem::{Context, Example, Solution, SolutionSet, TaskKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HARDEMCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let ctx = || format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(ctx(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(ctx(), e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

/// Parses non-blank lines as JSON records, reporting 1-based line numbers.
fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|r| (i + 1, r))
                .map_err(|e| CliError::schema(i + 1, e.to_string()))
        })
        .collect()
}

fn to_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableRecord>,
    pub answers: Vec<String>,
}

impl ExampleRecord {
    pub fn to_example(&self, task: TaskKind) -> Result<Example, String> {
        let context = match (task, &self.document, &self.table) {
            (TaskKind::SqlGeneration, None, Some(t)) => {
                Context::Table(Table::new(t.header.clone(), t.rows.clone()).map_err(|e| e.to_string())?)
            }
            (TaskKind::SqlGeneration, _, _) => return Err("sql examples need `table` and no `document`".into()),
            (_, Some(d), None) => Context::Document(tokenize(d)),
            _ => return Err(format!("{task} examples need `document` and no `table`")),
        };
        let ex = Example {
            id: self.id.clone(),
            question: tokenize(&self.question),
            context,
            answers: self.answers.clone(),
            task,
        };
        ex.validate()?;
        Ok(ex)
    }
}

pub fn parse_example_records(text: &str) -> Result<Vec<(usize, ExampleRecord)>, CliError> {
    let records = parse_jsonl::<ExampleRecord>(text)?;
    let mut seen = HashSet::new();
    for (line, r) in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(CliError::schema(*line, format!("duplicate id `{}`", r.id)));
        }
    }
    Ok(records)
}

pub fn read_examples(path: &Path, task: TaskKind) -> Result<Vec<Example>, CliError> {
    parse_example_records(&read_text(path)?)?
        .into_iter()
        .map(|(line, r)| r.to_example(task).map_err(|m| CliError::schema(line, m)))
        .collect()
}

pub fn write_example_records(path: &Path, records: &[ExampleRecord]) -> Result<(), CliError> {
    write_atomic(path, &to_jsonl(records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperandJson {
    pub source: String,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondJson {
    pub col: usize,
    pub op: CondOp,
    pub value_start: usize,
    pub value_end: usize,
    pub value_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolutionJson {
    Span {
        s: usize,
        e: usize,
    },
    Equation {
        o1: Operator,
        n1: OperandJson,
        o2: Operator,
        n2: OperandJson,
    },
    Sql {
        sel: usize,
        agg: Aggregation,
        conds: Vec<CondJson>,
    },
}

fn operand_json(n: &NumberMention) -> OperandJson {
    let (source, index) = match n.source {
        NumberSource::Document(i) => ("document", i),
        NumberSource::Question(i) => ("question", i),
        NumberSource::Special(i) => ("special", i),
        NumberSource::Zero => ("zero", 0),
    };
    OperandJson {
        source: source.to_owned(),
        index,
        value: n.value,
    }
}

fn operand(j: &OperandJson) -> Result<NumberMention, String> {
    let source = match j.source.as_str() {
        "document" => NumberSource::Document(j.index),
        "question" => NumberSource::Question(j.index),
        "special" => NumberSource::Special(j.index),
        "zero" => NumberSource::Zero,
        other => return Err(format!("unknown operand source `{other}`")),
    };
    if !j.value.is_finite() {
        return Err("operand value must be finite".into());
    }
    Ok(NumberMention { value: j.value, source })
}

impl SolutionJson {
    pub fn from_solution(z: &Solution) -> Self {
        match z {
            Solution::Span(s) => SolutionJson::Span { s: s.start, e: s.end },
            Solution::Equation(eq) => SolutionJson::Equation {
                o1: eq.o1,
                n1: operand_json(&eq.n1),
                o2: eq.o2,
                n2: operand_json(&eq.n2),
            },
            Solution::Sql(q) => SolutionJson::Sql {
                sel: q.sel,
                agg: q.agg,
                conds: q
                    .conditions
                    .iter()
                    .map(|c| CondJson {
                        col: c.column,
                        op: c.op,
                        value_start: c.value.start,
                        value_end: c.value.end,
                        value_text: c.value.text.clone(),
                    })
                    .collect(),
            },
        }
    }

    pub fn to_solution(&self) -> Result<Solution, String> {
        Ok(match self {
            SolutionJson::Span { s, e } => {
                if e < s {
                    return Err(format!("span end {e} before start {s}"));
                }
                Solution::Span(Span::new(*s, *e))
            }
            SolutionJson::Equation { o1, n1, o2, n2 } => Solution::Equation(Equation {
                o1: *o1,
                n1: operand(n1)?,
                o2: *o2,
                n2: operand(n2)?,
            }),
            SolutionJson::Sql { sel, agg, conds } => Solution::Sql(SqlQuery {
                sel: *sel,
                agg: *agg,
                conditions: conds
                    .iter()
                    .map(|c| Condition {
                        column: c.col,
                        op: c.op,
                        value: QuestionSpan {
                            start: c.value_start,
                            end: c.value_end,
                            text: c.value_text.clone(),
                        },
                    })
                    .collect(),
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionRecord {
    pub id: String,
    pub candidate_count: usize,
    pub solutions: Vec<SolutionJson>,
}

impl SolutionRecord {
    pub fn from_set(set: &SolutionSet) -> Self {
        SolutionRecord {
            id: set.example_id.clone(),
            candidate_count: set.candidate_count,
            solutions: set.solutions.iter().map(SolutionJson::from_solution).collect(),
        }
    }

    pub fn to_set(&self) -> Result<SolutionSet, String> {
        let solutions = self
            .solutions
            .iter()
            .map(SolutionJson::to_solution)
            .collect::<Result<Vec<_>, _>>()?;
        if solutions.len() > self.candidate_count {
            return Err(format!(
                "{} solutions exceed candidate_count {}",
                solutions.len(),
                self.candidate_count
            ));
        }
        if let Some(w) = solutions.windows(2).find(|w| w[0].task() != w[1].task()) {
            return Err(format!("mixed solution kinds: {} and {}", w[0].task(), w[1].task()));
        }
        Ok(SolutionSet::new(self.id.clone(), solutions, self.candidate_count))
    }
}

pub fn write_solutions(path: &Path, sets: &[SolutionSet]) -> Result<(), CliError> {
    let records: Vec<SolutionRecord> = sets.iter().map(SolutionRecord::from_set).collect();
    write_atomic(path, &to_jsonl(&records))
}

/// Reads a solutions file into a map from example id to solution set.
pub fn read_solutions(path: &Path) -> Result<BTreeMap<String, SolutionSet>, CliError> {
    let mut out = BTreeMap::new();
    for (line, r) in parse_jsonl::<SolutionRecord>(&read_text(path)?)? {
        let set = r.to_set().map_err(|m| CliError::schema(line, m))?;
        if out.insert(r.id.clone(), set).is_some() {
            return Err(CliError::schema(line, format!("duplicate id `{}`", r.id)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub kind: ScorerKind,
    pub task: TaskKind,
    pub dims: usize,
    pub step: u64,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn scorer(&self) -> Scorer {
        Scorer {
            kind: self.header.kind,
            params: self.params.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::schema_msg(format!("checkpoint: {m}"));
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("missing magic bytes"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated"))?;
        let header_bytes = body.get(..len).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(header_bytes).map_err(|e| bad(&e.to_string()))?;
        if header.version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {}", header.version)));
        }
        let block = &body[len..];
        if header.dims != header.kind.num_params() || block.len() != 8 * header.dims {
            return Err(bad("parameter block does not match the declared dimensions"));
        }
        let params: Vec<f64> = block
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(Checkpoint { header, params })
    }
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CliError> {
    write_atomic(path, &ck.to_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    Checkpoint::from_bytes(&bytes)
}

/// One line of `predictions.jsonl`: the evaluation record plus the model
/// probabilities of the members of Z, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(flatten)]
    pub record: hardem::metrics::EvalRecord,
    pub z_probs: Vec<f64>,
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), CliError> {
    write_atomic(path, &to_jsonl(records))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    Ok(parse_jsonl(&read_text(path)?)?.into_iter().map(|(_, r)| r).collect())
}

/// Renders rows as CSV. Fields never contain commas, quotes or newlines.
pub fn csv(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out.into_bytes()
}
