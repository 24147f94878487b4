//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod cli;
mod learning;
mod oracles;
mod planted;

use std::time::{Duration, Instant};

/// Outcome of one criterion: whether it holds and a short measurement.
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    /// Wall-clock bound; `None` when the criterion sets none.
    limit: Option<Duration>,
    run: fn() -> Verdict,
}

const CRITERIA: [Criterion; 10] = [
    Criterion {
        id: 1,
        name: "objective identities",
        limit: Some(Duration::from_secs(1)),
        run: learning::objective_identities,
    },
    Criterion {
        id: 2,
        name: "gradient checks",
        limit: Some(Duration::from_secs(30)),
        run: learning::gradient_checks,
    },
    Criterion {
        id: 3,
        name: "arithmetic oracle",
        limit: Some(Duration::from_secs(10)),
        run: oracles::arithmetic,
    },
    Criterion {
        id: 4,
        name: "sql oracle",
        limit: Some(Duration::from_secs(60)),
        run: oracles::sql,
    },
    Criterion {
        id: 5,
        name: "rouge-l oracle",
        limit: Some(Duration::from_secs(5)),
        run: oracles::rouge,
    },
    Criterion {
        id: 6,
        name: "planted benchmark",
        limit: Some(Duration::from_secs(120)),
        run: planted::recovery_and_sparsity,
    },
    Criterion {
        id: 7,
        name: "|Z| breakdown",
        limit: None,
        run: planted::breakdown,
    },
    Criterion {
        id: 8,
        name: "noisy-Z robustness",
        limit: None,
        run: planted::noisy_z,
    },
    Criterion {
        id: 9,
        name: "annealing schedule",
        limit: None,
        run: learning::annealing,
    },
    Criterion {
        id: 10,
        name: "CLI determinism",
        limit: None,
        run: cli::determinism,
    },
];

fn main() {
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for c in CRITERIA.iter().filter(|c| only.is_none_or(|o| o == c.id)) {
        let start = Instant::now();
        let v = (c.run)();
        let took = start.elapsed();
        let in_time = c.limit.is_none_or(|l| took < l);
        let pass = v.pass && in_time;
        let limit = c.limit.map_or(String::new(), |l| format!(" < {}s", l.as_secs()));
        println!(
            "criterion {:>2} {:<22} {}  {} [{:.2}s{}]",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            limit
        );
        if !pass {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
