//! The four pipeline stages. Every output lists examples in input order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hardem::arithmetic::ArithmeticError;
use hardem::learning::{train as run_training, LearningError, Scorer, StepRecord};
use hardem::metrics::{breakdown_by_z, sparsity, EvalRecord, EvalResult, ZBucket};
use hardem::tasks::{answer_of, build_instances, candidates, score_answer, solution_set, TaskConfig, TaskError};
use hardem::{Example, SolutionSet};
use rayon::prelude::*;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::io::{self, Checkpoint, CheckpointHeader, PredictionRecord, CHECKPOINT_VERSION};

/// Thresholds reported by `analyze` in addition to the configured ones.
pub const ANALYZE_EPSILONS: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Builds a configuration from an optional file plus overrides.
pub fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut c = RunConfig::default();
    if let Some(p) = path {
        c.apply_text(&io::read_text(p)?)?;
    }
    ov.apply(&mut c)?;
    c.validate()?;
    Ok(c)
}

fn task_error(e: TaskError) -> CliError {
    CliError::schema_msg(e.to_string())
}

/// Z for one example. A non-numeric gold on an arithmetic example leaves Z
/// empty rather than failing the run.
fn compute_set(ex: &Example, cfg: &TaskConfig) -> Result<SolutionSet, CliError> {
    match solution_set(ex, cfg) {
        Ok(s) => Ok(s),
        Err(TaskError::Arithmetic(ArithmeticError::NonNumericAnswer(_))) => {
            Ok(SolutionSet::empty(ex.id.clone(), candidates(ex, cfg).len()))
        }
        Err(e) => Err(task_error(e)),
    }
}

fn compute_sets(examples: &[Example], cfg: &TaskConfig) -> Result<Vec<SolutionSet>, CliError> {
    examples.par_iter().map(|ex| compute_set(ex, cfg)).collect()
}

/// Solution sets aligned with `examples`, from a file when given.
fn resolve_sets(examples: &[Example], solutions: Option<&Path>, cfg: &TaskConfig) -> Result<Vec<SolutionSet>, CliError> {
    let Some(path) = solutions else {
        return compute_sets(examples, cfg);
    };
    let mut map = io::read_solutions(path)?;
    examples
        .iter()
        .map(|ex| {
            map.remove(&ex.id)
                .ok_or_else(|| CliError::schema_msg(format!("{}: no solution set for example `{}`", path.display(), ex.id)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeSummary {
    pub examples: usize,
    pub empty_z: usize,
    pub mean_z: f64,
    pub median_z: f64,
}

impl PrecomputeSummary {
    fn new(sets: &[SolutionSet]) -> Self {
        let mut sizes: Vec<usize> = sets.iter().map(SolutionSet::len).collect();
        sizes.sort_unstable();
        let n = sizes.len();
        let median_z = match n {
            0 => 0.0,
            _ if n % 2 == 1 => sizes[n / 2] as f64,
            _ => (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0,
        };
        PrecomputeSummary {
            examples: n,
            empty_z: sizes.iter().filter(|&&s| s == 0).count(),
            mean_z: if n == 0 { 0.0 } else { sizes.iter().sum::<usize>() as f64 / n as f64 },
            median_z,
        }
    }
}

impl fmt::Display for PrecomputeSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "examples={} empty_z={} mean_z={:.3} median_z={}",
            self.examples, self.empty_z, self.mean_z, self.median_z
        )
    }
}

pub fn precompute(input: &Path, out: &Path, cfg: &RunConfig) -> Result<PrecomputeSummary, CliError> {
    let examples = io::read_examples(input, cfg.task)?;
    let sets = compute_sets(&examples, &cfg.tasks)?;
    io::write_solutions(out, &sets)?;
    Ok(PrecomputeSummary::new(&sets))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub instances: usize,
    pub skipped: usize,
    pub steps: u64,
    pub final_loss: Option<f64>,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instances={} skipped_empty_z={} steps={}", self.instances, self.skipped, self.steps)?;
        match self.final_loss {
            Some(l) => write!(f, " final_loss={l:.6}"),
            None => Ok(()),
        }
    }
}

fn learning_error(e: LearningError) -> CliError {
    match e {
        LearningError::InvalidConfig(m) => CliError::Config(m),
        other => CliError::TrainingAbort(other.to_string()),
    }
}

/// Path of the per-step log written next to a checkpoint.
pub fn steps_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".steps.csv");
    PathBuf::from(s)
}

fn steps_csv(log: &[StepRecord]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = log
        .iter()
        .map(|r| vec![r.step.to_string(), r.objective.to_string(), format!("{:.12e}", r.loss)])
        .collect();
    io::csv(&["step".into(), "objective".into(), "loss".into()], &rows)
}

pub fn train(input: &Path, solutions: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let kind = cfg.scorer_kind()?;
    let examples = io::read_examples(input, cfg.task)?;
    let sets = resolve_sets(&examples, solutions, &cfg.tasks)?;
    let mut scorer = Scorer::new(kind);
    let (instances, skipped) =
        build_instances(&scorer, examples.iter().zip(&sets), &cfg.tasks).map_err(|e| CliError::schema_msg(e.to_string()))?;
    if instances.is_empty() {
        return Err(CliError::TrainingAbort("every example has an empty solution set".into()));
    }
    let log = run_training(&mut scorer, &instances, &cfg.train).map_err(learning_error)?;
    let ck = Checkpoint {
        header: CheckpointHeader {
            version: CHECKPOINT_VERSION,
            kind,
            task: cfg.task,
            dims: kind.num_params(),
            step: log.len() as u64,
            config_hash: cfg.hash(),
            config: cfg.pairs_map(),
        },
        params: scorer.params,
    };
    io::write_checkpoint(out, &ck)?;
    io::write_atomic(&steps_path(out), &steps_csv(&log))?;
    Ok(TrainSummary {
        instances: instances.len(),
        skipped,
        steps: log.len() as u64,
        final_loss: log.last().map(|r| r.loss),
    })
}

/// Scores one example: the prediction is the argmax over all candidates.
fn evaluate_one(
    ex: &Example,
    set: &SolutionSet,
    scorer: &Scorer,
    cfg: &RunConfig,
) -> Result<PredictionRecord, CliError> {
    let cands = candidates(ex, &cfg.tasks);
    let z_idx = set.indices_in(&cands);
    let (answer, z_probs) = if cands.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let dist = scorer
            .score_candidates(ex, cands)
            .map_err(|e| CliError::schema_msg(e.to_string()))?;
        let answer = answer_of(ex, &dist.candidates[dist.argmax()]).map_err(task_error)?;
        let z_probs = z_idx.iter().map(|&i| dist.log_probs[i].exp()).collect();
        (answer, z_probs)
    };
    let (em, f1, rouge_l) = score_answer(ex, &answer);
    let sparsity = cfg
        .epsilons
        .iter()
        .map(|&e| (!z_idx.is_empty()).then(|| sparsity(&z_probs, e)))
        .collect();
    Ok(PredictionRecord {
        record: EvalRecord {
            id: ex.id.clone(),
            prediction: answer.join(", "),
            answer: ex.answers.join(" | "),
            em,
            f1,
            rouge_l,
            z_size: z_idx.len(),
            sparsity,
        },
        z_probs,
    })
}

fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

fn breakdown_rows(records: &[EvalRecord], buckets: &[ZBucket]) -> Result<Vec<hardem::metrics::BucketRow>, CliError> {
    breakdown_by_z(records, buckets).map_err(|z| CliError::Config(format!("no bucket covers |Z| = {z}")))
}

pub fn eval(
    input: &Path,
    checkpoint: &Path,
    solutions: Option<&Path>,
    out_dir: &Path,
    config: Option<&Path>,
    ov: &Overrides,
) -> Result<hardem::metrics::Aggregate, CliError> {
    let ck = io::read_checkpoint(checkpoint)?;
    let mut cfg = RunConfig::from_pairs(&ck.header.config)?;
    if let Some(p) = config {
        cfg.apply_text(&io::read_text(p)?)?;
    }
    ov.apply(&mut cfg)?;
    cfg.validate()?;
    if cfg.task != ck.header.task {
        return Err(CliError::Config(format!(
            "checkpoint was trained on task {}, not {}",
            ck.header.task, cfg.task
        )));
    }
    let scorer = ck.scorer();
    let examples = io::read_examples(input, cfg.task)?;
    let sets = resolve_sets(&examples, solutions, &cfg.tasks)?;
    let preds: Vec<PredictionRecord> = examples
        .par_iter()
        .zip(&sets)
        .map(|(ex, set)| evaluate_one(ex, set, &scorer, &cfg))
        .collect::<Result<_, _>>()?;

    let result = EvalResult {
        epsilons: cfg.epsilons.clone(),
        records: preds.iter().map(|p| p.record.clone()).collect(),
    };
    let agg = result.aggregate();
    let buckets = breakdown_rows(&result.records, &cfg.buckets)?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
    io::write_predictions(&out_dir.join("predictions.jsonl"), &preds)?;

    let mut metrics = vec![
        vec!["count".to_owned(), agg.count.to_string()],
        vec!["em".to_owned(), fmt_f(agg.em)],
        vec!["f1".to_owned(), fmt_f(agg.f1)],
        vec!["rouge_l".to_owned(), fmt_f(agg.rouge_l)],
        vec!["sparsity_count".to_owned(), agg.sparsity_count.to_string()],
    ];
    for (e, s) in cfg.epsilons.iter().zip(&agg.sparsity) {
        metrics.push(vec![format!("sparsity@{e:e}"), fmt_f(*s)]);
    }
    io::write_atomic(&out_dir.join("metrics.csv"), &io::csv(&["metric".into(), "value".into()], &metrics))?;

    let rows: Vec<Vec<String>> = buckets
        .iter()
        .map(|b| vec![b.bucket.to_string(), b.count.to_string(), fmt_f(b.em)])
        .collect();
    io::write_atomic(
        &out_dir.join("breakdown.csv"),
        &io::csv(&["bucket".into(), "count".into(), "em".into()], &rows),
    )?;
    Ok(agg)
}

fn label_of(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
        .replace(',', "_")
}

/// Thresholds for `analyze`: the fixed grid plus configured values, sorted
/// from largest to smallest without duplicates.
pub fn analyze_epsilons(configured: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = ANALYZE_EPSILONS.iter().chain(configured).copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

/// Per-example mean sparsity over examples with a non-empty Z.
fn mean_sparsity(preds: &[PredictionRecord], eps: f64) -> f64 {
    let vals: Vec<f64> = preds
        .iter()
        .filter(|p| !p.z_probs.is_empty())
        .map(|p| sparsity(&p.z_probs, eps))
        .collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

/// Compares evaluation directories side by side.
pub fn analyze(inputs: &[PathBuf], out_dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Config("analyze needs at least one evaluation directory".into()));
    }
    let mut runs: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for dir in inputs {
        let label = label_of(dir);
        let preds = io::read_predictions(&dir.join("predictions.jsonl"))?;
        if runs.insert(label.clone(), preds).is_some() {
            return Err(CliError::Config(format!("two evaluation directories share the label `{label}`")));
        }
        order.push(label);
    }

    let mut header = vec!["bucket".to_owned()];
    for l in &order {
        header.push(format!("{l}_count"));
        header.push(format!("{l}_em"));
    }
    let per_run: Vec<Vec<hardem::metrics::BucketRow>> = order
        .iter()
        .map(|l| {
            let records: Vec<EvalRecord> = runs[l].iter().map(|p| p.record.clone()).collect();
            breakdown_rows(&records, &cfg.buckets)
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<Vec<String>> = cfg
        .buckets
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut row = vec![b.to_string()];
            for r in &per_run {
                row.push(r[i].count.to_string());
                row.push(fmt_f(r[i].em));
            }
            row
        })
        .collect();

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(format!("creating {}", out_dir.display()), e))?;
    io::write_atomic(&out_dir.join("breakdown.csv"), &io::csv(&header, &rows))?;

    let mut header = vec!["epsilon".to_owned()];
    header.extend(order.iter().cloned());
    let rows: Vec<Vec<String>> = analyze_epsilons(&cfg.epsilons)
        .into_iter()
        .map(|e| {
            let mut row = vec![format!("{e:e}")];
            row.extend(order.iter().map(|l| fmt_f(mean_sparsity(&runs[l], e))));
            row
        })
        .collect();
    io::write_atomic(&out_dir.join("sparsity.csv"), &io::csv(&header, &rows))
}
