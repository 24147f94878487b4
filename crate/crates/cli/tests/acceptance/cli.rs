//! Criterion 10: every subcommand, run twice on the same inputs, writes the
//! same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use hardem::fixtures;
use hardem::synthetic::{generate, PlantedConfig};
use hardem::Example;
use hardem_cli::io::{write_example_records, ExampleRecord, TableRecord};

use crate::Verdict;

fn record(ex: &Example) -> ExampleRecord {
    let join = |t: &[hardem::Token]| t.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    ExampleRecord {
        id: ex.id.clone(),
        question: join(&ex.question),
        document: ex.document().map(join),
        table: ex.table().map(|t| TableRecord {
            header: t.headers(),
            rows: t.raw_rows(),
        }),
        answers: ex.answers.clone(),
    }
}

fn hardem(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hardem"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("hardem {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Runs the whole pipeline for every task under `root`; returns stdout.
fn pipeline(inputs: &Path, root: &Path) -> Result<String, String> {
    let mut stdout = String::new();
    let span_set = ["--set", "max_span_len=1", "--set", "max_steps=60", "--set", "batch_size=8"];
    for (task, extra) in [
        ("span", &span_set[..]),
        ("arithmetic", &["--set", "max_steps=20"][..]),
        ("sql", &["--set", "max_steps=20"][..]),
    ] {
        let ex = inputs.join(format!("{task}.jsonl"));
        let dir = root.join(task);
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let sol = dir.join("solutions.jsonl");
        let common = |v: &mut Vec<String>| {
            v.extend(["--task".to_owned(), task.to_owned()]);
            v.extend(extra.iter().map(|s| s.to_string()));
        };
        let mut args: Vec<String> = vec!["precompute".into(), "--in".into(), p(&ex).into(), "--out".into(), p(&sol).into()];
        common(&mut args);
        stdout += &hardem(&args.iter().map(String::as_str).collect::<Vec<_>>())?;

        let mut evals = Vec::new();
        for (objective, anneal) in [("annealed_hard", "inverted"), ("mml", "literal")] {
            let ck = dir.join(format!("{objective}.ck"));
            let mut args: Vec<String> = vec![
                "train".into(),
                "--in".into(),
                p(&ex).into(),
                "--solutions".into(),
                p(&sol).into(),
                "--out".into(),
                p(&ck).into(),
                "--seed".into(),
                "7".into(),
                "--objective".into(),
                objective.into(),
                "--tau".into(),
                "10".into(),
                "--anneal-direction".into(),
                anneal.into(),
            ];
            common(&mut args);
            stdout += &hardem(&args.iter().map(String::as_str).collect::<Vec<_>>())?;

            let out = dir.join(format!("eval_{objective}"));
            stdout += &hardem(&["eval", "--in", p(&ex), "--checkpoint", p(&ck), "--out", p(&out)])?;
            evals.push(out);
        }
        stdout += &hardem(&["analyze", "--in", p(&evals[0]), "--in", p(&evals[1]), "--out", p(&dir.join("analysis"))])?;
    }
    Ok(stdout)
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

pub fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = tmp.path().join("inputs");
    fs::create_dir_all(&inputs).unwrap();
    let planted: Vec<ExampleRecord> = generate(&PlantedConfig {
        n_examples: 80,
        seed: 2,
        ..Default::default()
    })
    .iter()
    .map(|p| record(&p.example))
    .collect();
    write_example_records(&inputs.join("span.jsonl"), &planted).unwrap();
    write_example_records(&inputs.join("arithmetic.jsonl"), &[record(&fixtures::field_goals())]).unwrap();
    write_example_records(&inputs.join("sql.jsonl"), &[record(&fixtures::roster())]).unwrap();

    let (a, b) = (tmp.path().join("run_a"), tmp.path().join("run_b"));
    let outs = pipeline(&inputs, &a).and_then(|sa| pipeline(&inputs, &b).map(|sb| (sa, sb)));
    let (sa, sb) = match outs {
        Ok(x) => x,
        Err(e) => return Verdict::new(false, e),
    };
    let (fa, fb) = (snapshot(&a), snapshot(&b));
    let differing: Vec<String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    Verdict::new(
        differing.is_empty() && sa == sb && !fa.is_empty(),
        if differing.is_empty() {
            format!("{} artifacts from 3 tasks x 4 commands byte-identical; stdout identical: {}", fa.len(), sa == sb)
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    )
}
