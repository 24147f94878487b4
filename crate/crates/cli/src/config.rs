//! Run configuration: a flat `key = value` file plus command-line overrides.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys and unparsable values are schema errors. The canonical
//! rendering lists every key in a fixed order; its SHA-256 identifies the
//! configuration inside checkpoints.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use hardem::arithmetic::SpecialNumbers;
use hardem::learning::{AnnealDirection, FeatureExtractor, Objective, ScorerKind, TrainConfig};
use hardem::metrics::{parse_buckets, ZBucket, DEFAULT_BUCKETS, DEFAULT_EPSILONS};
use hardem::span_match::MatchMetric;
use hardem::sqlgen::Pruning;
use hardem::tasks::TaskConfig;
use hardem::TaskKind;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Scorer family; `Auto` picks the default for the task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerChoice {
    Auto,
    Tabular,
    LogLinear,
    FactorizedSpan,
    FactorizedTag,
}

impl ScorerChoice {
    fn as_str(self) -> &'static str {
        match self {
            ScorerChoice::Auto => "auto",
            ScorerChoice::Tabular => "tabular",
            ScorerChoice::LogLinear => "log_linear",
            ScorerChoice::FactorizedSpan => "factorized_span",
            ScorerChoice::FactorizedTag => "factorized_tag",
        }
    }
}

impl FromStr for ScorerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            ScorerChoice::Auto,
            ScorerChoice::Tabular,
            ScorerChoice::LogLinear,
            ScorerChoice::FactorizedSpan,
            ScorerChoice::FactorizedTag,
        ]
        .into_iter()
        .find(|c| c.as_str() == s.replace('-', "_"))
        .ok_or_else(|| format!("unknown scorer `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: TaskKind,
    pub scorer: ScorerChoice,
    /// `None` selects the task's default extractor.
    pub extractor: Option<FeatureExtractor>,
    pub tabular_slots: usize,
    pub tasks: TaskConfig,
    pub train: TrainConfig,
    pub epsilons: Vec<f64>,
    pub buckets: Vec<ZBucket>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: TaskKind::SpanExtraction,
            scorer: ScorerChoice::Auto,
            extractor: None,
            tabular_slots: 4096,
            tasks: TaskConfig::default(),
            train: TrainConfig::default(),
            epsilons: DEFAULT_EPSILONS.to_vec(),
            buckets: parse_buckets(DEFAULT_BUCKETS).expect("default buckets parse"),
        }
    }
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| format!("`{key}`: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse::<f64>(key, v.trim())).collect()
}

fn metric_str(m: MatchMetric) -> &'static str {
    match m {
        MatchMetric::ExactMatch => "exact_match",
        MatchMetric::RougeL => "rouge_l",
    }
}

fn pruning_str(p: Pruning) -> &'static str {
    match p {
        Pruning::Exhaustive => "exhaustive",
        Pruning::ColumnGrounded => "column_grounded",
    }
}

pub fn parse_pruning(s: &str) -> Result<Pruning, String> {
    match s.replace('-', "_").as_str() {
        "exhaustive" => Ok(Pruning::Exhaustive),
        "column_grounded" => Ok(Pruning::ColumnGrounded),
        other => Err(format!("unknown pruning mode `{other}`")),
    }
}

impl RunConfig {
    /// Sets one key. Keys mirror the fields of the configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "task" => self.task = parse(key, v)?,
            "scorer" => self.scorer = parse(key, v)?,
            "extractor" => {
                self.extractor = match v {
                    "auto" => None,
                    id => Some(FeatureExtractor::from_id(id).ok_or_else(|| format!("unknown extractor `{id}`"))?),
                }
            }
            "tabular_slots" => self.tabular_slots = parse(key, v)?,
            "match_metric" => {
                self.tasks.span.metric = match v {
                    "exact_match" => MatchMetric::ExactMatch,
                    "rouge_l" => MatchMetric::RougeL,
                    other => return Err(format!("unknown match metric `{other}`")),
                }
            }
            "max_span_len" => self.tasks.span.max_span_len = parse(key, v)?,
            "noisy_rank_k" => {
                self.tasks.span.noisy_rank_k = match v {
                    "none" => None,
                    k => Some(parse(key, k)?),
                }
            }
            "specials" => self.tasks.arithmetic.specials = SpecialNumbers(parse_list(key, v)?),
            "numeric_tol" => self.tasks.arithmetic.tol = parse(key, v)?,
            "allow_copy" => self.tasks.arithmetic.allow_copy = parse(key, v)?,
            "max_conditions" => self.tasks.sql.max_conditions = parse(key, v)?,
            "max_value_len" => self.tasks.sql.max_value_len = parse(key, v)?,
            "pruning" => self.tasks.sql.pruning = parse_pruning(v)?,
            "objective" => self.train.objective = parse(key, v)?,
            "tau" => self.train.tau = parse(key, v)?,
            "anneal_direction" => self.train.anneal_direction = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "max_steps" => self.train.max_steps = parse(key, v)?,
            "seed" => self.train.rng_seed = parse(key, v)?,
            "gradient_clip" => self.train.gradient_clip = parse(key, v)?,
            "epsilons" => self.epsilons = parse_list(key, v)?,
            "buckets" => self.buckets = parse_buckets(v)?,
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::schema(n + 1, format!("expected `key = value`, got `{line}`")))?;
            self.set(k, v).map_err(|e| CliError::schema(n + 1, e))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err(CliError::Config("epsilons must lie in (0, 1)".into()));
        }
        if self.tasks.span.max_span_len == 0 {
            return Err(CliError::Config("max_span_len must be at least 1".into()));
        }
        if self.tasks.arithmetic.specials.has_duplicates() {
            return Err(CliError::Config("special numbers must be distinct".into()));
        }
        Ok(())
    }

    /// Every key with its current value, in canonical order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        vec![
            ("task", self.task.to_string()),
            ("scorer", self.scorer.as_str().to_owned()),
            ("extractor", self.extractor.map_or("auto", |e| e.id()).to_owned()),
            ("tabular_slots", self.tabular_slots.to_string()),
            ("match_metric", metric_str(self.tasks.span.metric).to_owned()),
            ("max_span_len", self.tasks.span.max_span_len.to_string()),
            ("noisy_rank_k", self.tasks.span.noisy_rank_k.map_or("none".to_owned(), |k| k.to_string())),
            ("specials", join(&self.tasks.arithmetic.specials.0)),
            ("numeric_tol", self.tasks.arithmetic.tol.to_string()),
            ("allow_copy", self.tasks.arithmetic.allow_copy.to_string()),
            ("max_conditions", self.tasks.sql.max_conditions.to_string()),
            ("max_value_len", self.tasks.sql.max_value_len.to_string()),
            ("pruning", pruning_str(self.tasks.sql.pruning).to_owned()),
            ("objective", t.objective.to_string()),
            ("tau", t.tau.to_string()),
            ("anneal_direction", t.anneal_direction.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("max_steps", t.max_steps.to_string()),
            ("seed", t.rng_seed.to_string()),
            ("gradient_clip", t.gradient_clip.to_string()),
            ("epsilons", join(&self.epsilons)),
            ("buckets", join(&self.buckets)),
        ]
    }

    pub fn pairs_map(&self) -> BTreeMap<String, String> {
        self.pairs().into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    /// Canonical `key = value` text; parsing it reproduces `self`.
    pub fn render(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        for (k, v) in pairs {
            c.set(k, v).map_err(CliError::Config)?;
        }
        Ok(c)
    }

    /// The scorer kind this configuration trains.
    pub fn scorer_kind(&self) -> Result<ScorerKind, CliError> {
        let default_extractor = match self.task {
            TaskKind::SpanExtraction => FeatureExtractor::SpanBasic,
            TaskKind::Arithmetic => FeatureExtractor::EquationBasic,
            TaskKind::SqlGeneration => FeatureExtractor::SqlBasic,
        };
        let choice = match (self.scorer, self.task) {
            (ScorerChoice::Auto, TaskKind::Arithmetic) => ScorerChoice::FactorizedTag,
            (ScorerChoice::Auto, _) => ScorerChoice::LogLinear,
            (c, _) => c,
        };
        let kind = match choice {
            ScorerChoice::Tabular => ScorerKind::Tabular {
                slots: self.tabular_slots,
            },
            ScorerChoice::LogLinear => ScorerKind::LogLinear {
                extractor: self.extractor.unwrap_or(default_extractor),
            },
            ScorerChoice::FactorizedSpan => ScorerKind::FactorizedSpan,
            ScorerChoice::FactorizedTag | ScorerChoice::Auto => ScorerKind::FactorizedTag {
                specials: self.tasks.arithmetic.specials.len(),
            },
        };
        if !kind.supports(self.task) {
            return Err(CliError::Config(format!("scorer {} cannot score task {}", kind.name(), self.task)));
        }
        Ok(kind)
    }
}

/// Objective and annealing overrides shared by several subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub task: Option<TaskKind>,
    pub seed: Option<u64>,
    pub objective: Option<Objective>,
    pub tau: Option<u64>,
    pub anneal_direction: Option<AnnealDirection>,
    pub pruning: Option<Pruning>,
    pub set: Vec<(String, String)>,
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) -> Result<(), CliError> {
        for (k, v) in &self.set {
            c.set(k, v).map_err(CliError::Config)?;
        }
        if let Some(t) = self.task {
            c.task = t;
        }
        if let Some(s) = self.seed {
            c.train.rng_seed = s;
        }
        if let Some(o) = self.objective {
            c.train.objective = o;
        }
        if let Some(t) = self.tau {
            c.train.tau = t;
        }
        if let Some(d) = self.anneal_direction {
            c.train.anneal_direction = d;
        }
        if let Some(p) = self.pruning {
            c.tasks.sql.pruning = p;
        }
        Ok(())
    }
}
