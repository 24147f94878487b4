//! Criteria 3, 4 and 5: enumeration and metric code against brute-force
//! reimplementations that share nothing with the library beyond its types.

use std::collections::BTreeSet;

use hardem::arithmetic::{NumberSource, Operator};
use hardem::fixtures;
use hardem::span_match::rouge_l;
use hardem::sqlgen::{execute_query, Aggregation, CondOp, Condition, Pruning, QuestionSpan, SqlLimits, SqlQuery, Table};
use hardem::tasks::{solution_set, TaskConfig};
use hardem::text::tokenize;
use hardem::{Context, Example, Solution, TaskKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Verdict;

const ROUGE_TOL: f64 = 1e-12;
const NUMERIC_TOL: f64 = 1e-6;

// ---------------------------------------------------------------- arithmetic

const PASSAGE_WORDS: [&str; 10] = ["yards", "game", "field", "goal", "pass", "quarter", "kicked", "scored", "team", "lead"];

type EqKey = (Operator, NumberSource, Operator, NumberSource);

/// Brute force over all 9·m·(m−1) equations of the given operands.
fn brute_force_z(operands: &[(NumberSource, f64)], gold: f64) -> (BTreeSet<EqKey>, usize) {
    let ops = [(Operator::Plus, 1.0), (Operator::Minus, -1.0), (Operator::Percent, 0.01)];
    let mut z = BTreeSet::new();
    let mut total = 0;
    for (i, &(s1, v1)) in operands.iter().enumerate() {
        for (j, &(s2, v2)) in operands.iter().enumerate() {
            if i == j {
                continue;
            }
            for (o1, c1) in ops {
                for (o2, c2) in ops {
                    total += 1;
                    if (c1 * v1 + c2 * v2 - gold).abs() <= NUMERIC_TOL {
                        z.insert((o1, s1, o2, s2));
                    }
                }
            }
        }
    }
    (z, total)
}

pub fn arithmetic() -> Verdict {
    let specials = [1.0, 100.0];
    let cfg = TaskConfig {
        arithmetic: hardem::arithmetic::ArithmeticConfig {
            specials: hardem::arithmetic::SpecialNumbers(specials.to_vec()),
            ..Default::default()
        },
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut nonempty = 0;
    for p in 0..200 {
        let doc_len = rng.gen_range(5..25);
        let mut doc: Vec<String> = (0..doc_len).map(|_| PASSAGE_WORDS.choose(&mut rng).unwrap().to_string()).collect();
        let mut question = vec!["how".to_owned(), "many".to_owned(), "yards".to_owned()];
        let n_numbers = rng.gen_range(0..=10);
        let mut operands = Vec::new();
        for _ in 0..n_numbers {
            let v = rng.gen_range(0..60) as f64;
            if rng.gen_bool(0.8) {
                let at = rng.gen_range(0..doc.len());
                doc[at] = format!("{v}");
            } else {
                question.push(format!("{v}"));
            }
        }
        for (i, w) in doc.iter().enumerate() {
            if let Ok(v) = w.parse::<f64>() {
                operands.push((NumberSource::Document(i), v));
            }
        }
        for (i, w) in question.iter().enumerate() {
            if let Ok(v) = w.parse::<f64>() {
                operands.push((NumberSource::Question(i), v));
            }
        }
        operands.extend(specials.iter().enumerate().map(|(i, &v)| (NumberSource::Special(i), v)));

        // Half the golds are reachable by construction.
        let gold = if operands.len() >= 2 && rng.gen_bool(0.5) {
            let pick: Vec<_> = operands.choose_multiple(&mut rng, 2).collect();
            pick[0].1 - pick[1].1
        } else {
            rng.gen_range(0..80) as f64
        };
        let ex = Example {
            id: format!("a{p}"),
            question: tokenize(&question.join(" ")),
            context: Context::Document(tokenize(&doc.join(" "))),
            answers: vec![format!("{gold}")],
            task: TaskKind::Arithmetic,
        };
        let got = solution_set(&ex, &cfg).unwrap();
        let got_keys: BTreeSet<EqKey> = got
            .solutions
            .iter()
            .map(|s| match s {
                Solution::Equation(e) => (e.o1, e.n1.source, e.o2, e.n2.source),
                other => panic!("unexpected solution {other:?}"),
            })
            .collect();
        let (want, total) = brute_force_z(&operands, gold);
        let m = operands.len();
        if got_keys != want || got.len() != want.len() || got.candidate_count != total || total != 9 * m * (m - 1) {
            mismatches += 1;
        }
        nonempty += usize::from(!want.is_empty());
    }

    let fg = fixtures::field_goals();
    let z = solution_set(&fg, &TaskConfig::default()).unwrap();
    let count = |a: f64, b: f64| {
        z.solutions
            .iter()
            .filter(|s| match s {
                Solution::Equation(e) => {
                    e.o1 == Operator::Plus
                        && e.o2 == Operator::Minus
                        && e.n1.value == a
                        && e.n2.value == b
                        && matches!(e.n1.source, NumberSource::Document(_))
                        && matches!(e.n2.source, NumberSource::Document(_))
                }
                _ => false,
            })
            .count()
    };
    let fixture = (count(41.0, 37.0), count(40.0, 36.0), count(10.0, 6.0));
    let fixture_ok = fixture == (2, 1, 1);
    Verdict::new(
        mismatches == 0 && fixture_ok,
        format!(
            "200 passages ({nonempty} with non-empty Z), {mismatches} mismatches; fixture 41-37 x{}, 40-36 x{}, 10-6 x{}",
            fixture.0, fixture.1, fixture.2
        ),
    )
}

// ----------------------------------------------------------------------- sql

const CELL_WORDS: [&str; 6] = ["red", "blue", "green", "gray", "north", "south"];

/// A random rectangular table. Columns are all-integer, all-word or mixed.
fn random_table(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let rows = rng.gen_range(0..=max_rows);
    let cols = rng.gen_range(1..=max_cols);
    let kinds: Vec<u8> = (0..cols).map(|_| rng.gen_range(0..3)).collect();
    let header = (0..cols).map(|c| format!("col{c}")).collect();
    let data = (0..rows)
        .map(|_| {
            kinds
                .iter()
                .map(|&k| match k {
                    0 => rng.gen_range(0..6).to_string(),
                    1 => CELL_WORDS.choose(rng).unwrap().to_string(),
                    _ if rng.gen_bool(0.5) => rng.gen_range(0..6).to_string(),
                    _ => CELL_WORDS.choose(rng).unwrap().to_string(),
                })
                .collect()
        })
        .collect();
    (header, data)
}

fn as_num(s: &str) -> Option<f64> {
    s.parse::<i64>().ok().map(|v| v as f64)
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Row-scan reference executor over raw strings. `None` for type errors.
fn reference_execute(rows: &[Vec<String>], sel: usize, agg: Aggregation, conds: &[(usize, CondOp, String)]) -> Option<Vec<String>> {
    let numeric = !rows.is_empty() && rows.iter().all(|r| as_num(&r[sel]).is_some());
    if matches!(agg, Aggregation::Sum | Aggregation::Mean) && !numeric {
        return None;
    }
    let mut kept: Vec<&String> = Vec::new();
    for row in rows {
        let ok = conds.iter().all(|(c, op, v)| match op {
            CondOp::Eq => row[*c].to_lowercase() == v.to_lowercase(),
            CondOp::Lt => matches!((as_num(&row[*c]), as_num(v)), (Some(a), Some(b)) if a < b),
            CondOp::Gt => matches!((as_num(&row[*c]), as_num(v)), (Some(a), Some(b)) if a > b),
        });
        if ok {
            kept.push(&row[sel]);
        }
    }
    let nums = || kept.iter().map(|s| as_num(s).unwrap());
    Some(match agg {
        Aggregation::None => kept.iter().map(|s| s.to_string()).collect(),
        Aggregation::Count => vec![kept.len().to_string()],
        Aggregation::Sum => vec![fmt_num(nums().sum())],
        Aggregation::Mean if kept.is_empty() => vec![],
        Aggregation::Mean => vec![fmt_num(nums().sum::<f64>() / kept.len() as f64)],
        Aggregation::Max | Aggregation::Min => {
            let max = agg == Aggregation::Max;
            let mut best: Option<&String> = None;
            for s in &kept {
                let better = match best {
                    None => true,
                    Some(b) if numeric => {
                        let (x, y) = (as_num(s).unwrap(), as_num(b).unwrap());
                        if max { x > y } else { x < y }
                    }
                    Some(b) => {
                        let (x, y) = (s.to_lowercase(), b.to_lowercase());
                        if max { x > y } else { x < y }
                    }
                };
                if better {
                    best = Some(s);
                }
            }
            match best {
                Some(b) if numeric => vec![fmt_num(as_num(b).unwrap())],
                Some(b) => vec![b.clone()],
                None => vec![],
            }
        }
    })
}

fn multiset_eq(a: &[String], b: &[String]) -> bool {
    let mut a: Vec<String> = a.iter().map(|s| s.to_lowercase()).collect();
    let mut b: Vec<String> = b.iter().map(|s| s.to_lowercase()).collect();
    a.sort();
    b.sort();
    a == b
}

fn random_value(rng: &mut ChaCha8Rng, rows: &[Vec<String>], col: usize) -> String {
    match rng.gen_range(0..3) {
        0 if !rows.is_empty() => rows.choose(rng).unwrap()[col].clone(),
        1 => rng.gen_range(0..6).to_string(),
        _ => CELL_WORDS.choose(rng).unwrap().to_string(),
    }
}

/// execute_query against the row scan on random queries.
fn executor_mismatches(rng: &mut ChaCha8Rng, pairs: usize) -> usize {
    let mut bad = 0;
    for _ in 0..pairs {
        let (header, rows) = random_table(rng, 5, 5);
        let table = Table::new(header, rows.clone()).unwrap();
        let cols = table.n_columns();
        let sel = rng.gen_range(0..cols);
        let agg = *Aggregation::ALL.choose(rng).unwrap();
        let conds: Vec<(usize, CondOp, String)> = (0..rng.gen_range(0..=3))
            .map(|_| {
                let c = rng.gen_range(0..cols);
                (c, *CondOp::ALL.choose(rng).unwrap(), random_value(rng, &rows, c))
            })
            .collect();
        let q = SqlQuery {
            sel,
            agg,
            conditions: conds
                .iter()
                .map(|(c, op, v)| Condition {
                    column: *c,
                    op: *op,
                    value: QuestionSpan {
                        start: 0,
                        end: 0,
                        text: v.clone(),
                    },
                })
                .collect(),
        };
        let got = execute_query(&table, &q).ok();
        let want = reference_execute(&rows, sel, agg, &conds);
        if got != want {
            bad += 1;
        }
    }
    bad
}

type QueryKey = (usize, Aggregation, Vec<(usize, CondOp, usize, usize)>);

/// Exhaustive Z by filtering every query of the grammar: any column and
/// aggregation, up to `max_conditions` conditions over every question span.
fn brute_force_sql_z(question: &[String], rows: &[Vec<String>], cols: usize, answers: &[String], limits: &SqlLimits) -> BTreeSet<QueryKey> {
    let mut conds = Vec::new();
    for c in 0..cols {
        for op in CondOp::ALL {
            for s in 0..question.len() {
                for e in s..question.len().min(s + limits.max_value_len) {
                    conds.push((c, op, s, e));
                }
            }
        }
    }
    let mut subsets: Vec<Vec<usize>> = vec![vec![]];
    for k in 1..=limits.max_conditions {
        let mut next = Vec::new();
        for sub in subsets.iter().filter(|s| s.len() == k - 1) {
            let from = sub.last().map_or(0, |x| x + 1);
            for i in from..conds.len() {
                let mut s = sub.clone();
                s.push(i);
                next.push(s);
            }
        }
        subsets.extend(next);
    }
    let mut z = BTreeSet::new();
    for sub in &subsets {
        let chosen: Vec<(usize, CondOp, String)> = sub
            .iter()
            .map(|&i| {
                let (c, op, s, e) = conds[i];
                (c, op, question[s..=e].join(" "))
            })
            .collect();
        for sel in 0..cols {
            for agg in Aggregation::ALL {
                if let Some(d) = reference_execute(rows, sel, agg, &chosen) {
                    if multiset_eq(&d, answers) {
                        z.insert((sel, agg, sub.iter().map(|&i| conds[i]).collect()));
                    }
                }
            }
        }
    }
    z
}

fn key_of(q: &SqlQuery) -> QueryKey {
    (
        q.sel,
        q.agg,
        q.conditions
            .iter()
            .map(|c| (c.column, c.op, c.value.start, c.value.end))
            .collect(),
    )
}

fn solution_set_mismatches(rng: &mut ChaCha8Rng, tables: usize) -> (usize, usize) {
    let limits = SqlLimits {
        pruning: Pruning::Exhaustive,
        ..Default::default()
    };
    let cfg = TaskConfig {
        sql: limits.clone(),
        ..Default::default()
    };
    let (mut bad, mut total_z) = (0, 0);
    let mut done = 0;
    while done < tables {
        let (header, rows) = random_table(rng, 4, 4);
        if rows.is_empty() {
            continue;
        }
        let cols = header.len();
        let question: Vec<String> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let c = rng.gen_range(0..cols);
                random_value(rng, &rows, c)
            })
            .collect();
        let sel = rng.gen_range(0..cols);
        let answers = reference_execute(&rows, sel, Aggregation::None, &[]).unwrap();
        let ex = Example {
            id: format!("s{done}"),
            question: tokenize(&question.join(" ")),
            context: Context::Table(Table::new(header, rows.clone()).unwrap()),
            answers: answers.clone(),
            task: TaskKind::SqlGeneration,
        };
        let got: BTreeSet<QueryKey> = solution_set(&ex, &cfg)
            .unwrap()
            .solutions
            .iter()
            .map(|s| match s {
                Solution::Sql(q) => key_of(q),
                other => panic!("unexpected solution {other:?}"),
            })
            .collect();
        let want = brute_force_sql_z(&question, &rows, cols, &answers, &limits);
        total_z += want.len();
        if got != want {
            bad += 1;
        }
        done += 1;
    }
    (bad, total_z)
}

const ROSTER_Z: [&str; 5] = [
    "SELECT Player WHERE Position = guard AND Year in Toronto = 1996-97",
    "SELECT max(Player) WHERE Position = guard AND Year in Toronto = 1996-97",
    "SELECT min(Player) WHERE Position = guard",
    "SELECT min(Player) WHERE Year in Toronto = 1996-97",
    "SELECT min(Player) WHERE Position = guard AND Year in Toronto = 1996-97",
];

pub fn sql() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let exec_bad = executor_mismatches(&mut rng, 1000);
    let (set_bad, total_z) = solution_set_mismatches(&mut rng, 40);

    let roster = fixtures::roster();
    let table = roster.table().unwrap();
    let rendered: BTreeSet<String> = solution_set(&roster, &TaskConfig::default())
        .unwrap()
        .solutions
        .iter()
        .map(|s| match s {
            Solution::Sql(q) => q.render(table),
            other => panic!("unexpected solution {other:?}"),
        })
        .collect();
    let expected: BTreeSet<String> = ROSTER_Z.iter().map(|s| s.to_string()).collect();
    let roster_ok = rendered == expected;
    Verdict::new(
        exec_bad == 0 && set_bad == 0 && roster_ok,
        format!(
            "executor {exec_bad}/1000 mismatches; exhaustive Z {set_bad}/40 tables differ ({total_z} members); roster |Z|={}{}",
            rendered.len(),
            if roster_ok { " as listed" } else { " NOT as listed" }
        ),
    )
}

// ------------------------------------------------------------------- rouge-l

fn lcs_table(a: &[u8], b: &[u8]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

fn reference_rouge(a: &[u8], b: &[u8]) -> f64 {
    let l = lcs_table(a, b) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, r) = (l / a.len() as f64, l / b.len() as f64);
    2.0 * p * r / (p + r)
}

pub fn rouge() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut special_bad = 0;
    for _ in 0..1000 {
        let seq = |rng: &mut ChaCha8Rng, lo: u8, hi: u8| -> Vec<u8> {
            (0..rng.gen_range(0..=20)).map(|_| rng.gen_range(lo..hi)).collect()
        };
        let a = seq(&mut rng, 0, 6);
        let b = seq(&mut rng, 0, 6);
        worst = worst.max((rouge_l(&a, &b) - reference_rouge(&a, &b)).abs());
        if !a.is_empty() && rouge_l(&a, &a) != 1.0 {
            special_bad += 1;
        }
        let disjoint = seq(&mut rng, 6, 12);
        if rouge_l(&a, &disjoint) != 0.0 {
            special_bad += 1;
        }
    }
    Verdict::new(
        worst <= ROUGE_TOL && special_bad == 0,
        format!("1000 pairs, max |diff| {worst:.1e} <= 1e-12; identity/disjoint failures {special_bad}"),
    )
}
