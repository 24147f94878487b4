//! Equation space for discrete-reasoning reading comprehension.
//!
//! A solution is `(o1, n1, o2, n2)` with operators drawn from
//! {+, -, %} and operands drawn from the numbers of the document, the
//! question and a fixed list of special numbers. Execution is the signed sum
//! `u(o1, n1) + u(o2, n2)` where `%` scales its operand by 0.01.

use std::cmp::Ordering;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Example, Solution, SolutionSet, Token};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ArithmeticError {
    #[error("example `{0}`: no gold answer parses as a number")]
    NonNumericAnswer(String),
    #[error("example `{0}`: arithmetic examples need a document context")]
    MissingDocument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "%")]
    Percent,
}

impl Operator {
    pub const ALL: [Operator; 3] = [Operator::Plus, Operator::Minus, Operator::Percent];

    pub fn apply(self, n: f64) -> f64 {
        match self {
            Operator::Plus => n,
            Operator::Minus => -n,
            Operator::Percent => 0.01 * n,
        }
    }

    /// Tag index used by the sequence-tagging scorer (0 is "no tag").
    pub fn tag(self) -> usize {
        match self {
            Operator::Plus => 1,
            Operator::Minus => 2,
            Operator::Percent => 3,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Plus => "+",
            Operator::Minus => "-",
            Operator::Percent => "%",
        }
    }
}

/// Where an operand comes from. Ordered document < question < special < zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NumberSource {
    Document(usize),
    Question(usize),
    Special(usize),
    /// The implicit zero operand of a copy solution `(+, n, +, 0)`.
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct NumberMention {
    pub value: f64,
    pub source: NumberSource,
}

impl PartialEq for NumberMention {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.value.to_bits() == other.value.to_bits()
    }
}

impl Eq for NumberMention {}

impl Hash for NumberMention {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.source.hash(state);
        self.value.to_bits().hash(state);
    }
}

impl Ord for NumberMention {
    fn cmp(&self, other: &Self) -> Ordering {
        self.source
            .cmp(&other.source)
            .then_with(|| self.value.total_cmp(&other.value))
    }
}

impl PartialOrd for NumberMention {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Equation {
    pub o1: Operator,
    pub n1: NumberMention,
    pub o2: Operator,
    pub n2: NumberMention,
}

impl Ord for Equation {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n1
            .cmp(&other.n1)
            .then_with(|| self.n2.cmp(&other.n2))
            .then_with(|| self.o1.cmp(&other.o1))
            .then_with(|| self.o2.cmp(&other.o2))
    }
}

impl PartialOrd for Equation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Equation {
    pub fn execute(&self) -> f64 {
        execute_equation(self)
    }
}

impl std::fmt::Display for Equation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{} {}{}",
            self.o1.symbol(),
            format_number(self.n1.value),
            self.o2.symbol(),
            format_number(self.n2.value)
        )
    }
}

/// The predefined special numbers available as operands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialNumbers(pub Vec<f64>);

impl Default for SpecialNumbers {
    fn default() -> Self {
        SpecialNumbers(vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 12.0, 100.0, 1000.0])
    }
}

impl SpecialNumbers {
    pub fn none() -> Self {
        SpecialNumbers(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_duplicates(&self) -> bool {
        let mut v = self.0.clone();
        v.sort_by(f64::total_cmp);
        v.windows(2).any(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArithmeticConfig {
    pub specials: SpecialNumbers,
    pub tol: f64,
    /// Adds `(+, n, +, 0)` copy solutions for every operand.
    pub allow_copy: bool,
}

impl Default for ArithmeticConfig {
    fn default() -> Self {
        ArithmeticConfig {
            specials: SpecialNumbers::default(),
            tol: 1e-6,
            allow_copy: false,
        }
    }
}

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

/// Parses a digit literal: `37`, `3.5`, `2,582,322`, `-4`.
pub fn parse_numeric_literal(s: &str) -> Option<f64> {
    let s = s.trim();
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit() || b == b',') {
        return None;
    }
    if let Some(f) = frac_part {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    if int_part.contains(',') {
        let groups: Vec<&str> = int_part.split(',').collect();
        let first_ok = (1..=3).contains(&groups[0].len());
        if !first_ok || groups[1..].iter().any(|g| g.len() != 3) {
            return None;
        }
    }
    s.replace(',', "").parse().ok()
}

/// Parses a digit literal or one of the words zero through ten.
pub fn parse_number(s: &str) -> Option<f64> {
    parse_numeric_literal(s).or_else(|| {
        let lower = s.trim().to_lowercase();
        NUMBER_WORDS.iter().position(|w| *w == lower).map(|i| i as f64)
    })
}

/// Integers print without a decimal point; anything else uses the shortest
/// round-trip representation.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Number mentions of the document followed by those of the question.
pub fn extract_numbers(question: &[Token], doc: &[Token]) -> Vec<NumberMention> {
    let from = |tokens: &[Token], make: fn(usize) -> NumberSource| -> Vec<NumberMention> {
        tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                parse_number(&t.text).map(|value| NumberMention {
                    value,
                    source: make(i),
                })
            })
            .collect()
    };
    let mut out = from(doc, NumberSource::Document);
    out.extend(from(question, NumberSource::Question));
    out
}

pub fn execute_equation(z: &Equation) -> f64 {
    z.o1.apply(z.n1.value) + z.o2.apply(z.n2.value)
}

fn operands(mentions: &[NumberMention], specials: &SpecialNumbers) -> Vec<NumberMention> {
    let mut ops: Vec<NumberMention> = mentions.to_vec();
    ops.extend(specials.0.iter().enumerate().map(|(i, &value)| NumberMention {
        value,
        source: NumberSource::Special(i),
    }));
    ops.sort();
    ops.dedup();
    ops
}

/// Streams Z_tot in canonical order: every `(o1, n1, o2, n2)` over two
/// distinct operands, 9·m·(m−1) equations for m operands.
pub fn enumerate_equations(
    mentions: &[NumberMention],
    specials: &SpecialNumbers,
) -> impl Iterator<Item = Equation> {
    let ops = operands(mentions, specials);
    let m = ops.len();
    (0..m).flat_map(move |i| {
        let ops = ops.clone();
        (0..m).filter(move |&j| j != i).flat_map(move |j| {
            let (n1, n2) = (ops[i], ops[j]);
            Operator::ALL.into_iter().flat_map(move |o1| {
                Operator::ALL
                    .into_iter()
                    .map(move |o2| Equation { o1, n1, o2, n2 })
            })
        })
    })
}

fn copy_solutions(mentions: &[NumberMention], specials: &SpecialNumbers) -> Vec<Equation> {
    let zero = NumberMention {
        value: 0.0,
        source: NumberSource::Zero,
    };
    operands(mentions, specials)
        .into_iter()
        .map(|n| Equation {
            o1: Operator::Plus,
            n1: n,
            o2: Operator::Plus,
            n2: zero,
        })
        .collect()
}

/// Z_tot of an example as a canonically sorted candidate list.
pub fn candidate_equations(ex: &Example, cfg: &ArithmeticConfig) -> Vec<Equation> {
    let doc = ex.document().unwrap_or(&[]);
    let mentions = extract_numbers(&ex.question, doc);
    let mut all: Vec<Equation> = enumerate_equations(&mentions, &cfg.specials).collect();
    if cfg.allow_copy {
        all.extend(copy_solutions(&mentions, &cfg.specials));
        all.sort();
    }
    all
}

pub fn gold_numbers(ex: &Example) -> Result<Vec<f64>, ArithmeticError> {
    let golds: Vec<f64> = ex.answers.iter().filter_map(|a| parse_number(a)).collect();
    if golds.is_empty() {
        return Err(ArithmeticError::NonNumericAnswer(ex.id.clone()));
    }
    Ok(golds)
}

/// Z: every enumerated equation executing within `tol` of a gold answer.
pub fn arithmetic_solution_set(ex: &Example, cfg: &ArithmeticConfig) -> Result<SolutionSet, ArithmeticError> {
    if ex.document().is_none() {
        return Err(ArithmeticError::MissingDocument(ex.id.clone()));
    }
    let golds = gold_numbers(ex)?;
    let candidates = candidate_equations(ex, cfg);
    let total = candidates.len();
    let z: Vec<Solution> = candidates
        .into_iter()
        .filter(|eq| {
            let v = execute_equation(eq);
            golds.iter().any(|g| (v - g).abs() <= cfg.tol)
        })
        .map(Solution::Equation)
        .collect();
    Ok(SolutionSet::new(ex.id.clone(), z, total))
}
