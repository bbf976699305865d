//! Side-by-side summaries of result files with trend gates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::run::{ResultRow, RESULT_COLUMNS};
use crate::{Result, SenseError};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    /// Allowed dip in mean correlation between consecutive `T`.
    pub monotone_tolerance: f64,
    /// Pairs `(a, b)` that must satisfy `mean(a) >= mean(b) - ordering_tolerance` at every shared `T`.
    pub orderings: Vec<(String, String)>,
    pub ordering_tolerance: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            monotone_tolerance: 0.01,
            orderings: vec![("mecs_sgda".into(), "mm_unconstrained".into())],
            ordering_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendFailure {
    /// e.g. `monotone_in_T[mecs_sgda]` or `ordering[mecs_sgda>=mm_unconstrained]`.
    pub name: String,
    pub file: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub markdown: String,
    pub failures: Vec<TrendFailure>,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Reads a results CSV, checking the header before parsing rows.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let headers = r.headers()?.clone();
    for col in RESULT_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(SenseError::MissingColumn(format!("{} in {}", col, path.as_ref().display())));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let row: ResultRow = rec.map_err(|e| SenseError::parse(i + 2, e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

type Means = BTreeMap<(String, usize), f64>;

fn mean_correlation(rows: &[ResultRow]) -> Means {
    let mut acc: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.algorithm.clone(), r.t)).or_default();
        e.0 += r.correlation;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn t_values(means: &Means, alg: &str) -> Vec<(usize, f64)> {
    means
        .iter()
        .filter(|((a, _), _)| a == alg)
        .map(|((_, t), v)| (*t, *v))
        .collect()
}

fn table(out: &mut String, means: &Means) {
    let algs: BTreeSet<&str> = means.keys().map(|(a, _)| a.as_str()).collect();
    let ts: BTreeSet<usize> = means.keys().map(|(_, t)| *t).collect();
    let _ = write!(out, "| algorithm |");
    for t in &ts {
        let _ = write!(out, " T={t} |");
    }
    let _ = write!(out, "\n|---|");
    for _ in &ts {
        let _ = write!(out, "---|");
    }
    out.push('\n');
    for a in algs {
        let _ = write!(out, "| {a} |");
        for t in &ts {
            match means.get(&(a.to_string(), *t)) {
                Some(v) => {
                    let _ = write!(out, " {v:.4} |");
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
}

/// Markdown report of mean correlation per file, deltas against the first
/// file, configured algorithm deltas, and the trend checks.
pub fn compare_report<P: AsRef<Path>>(paths: &[P], opts: &CompareOptions) -> Result<CompareReport> {
    if paths.is_empty() {
        return Err(SenseError::invalid("no result files given"));
    }
    let mut files = Vec::new();
    for p in paths {
        let rows = read_results(p)?;
        files.push((p.as_ref().display().to_string(), mean_correlation(&rows)));
    }

    let mut md = String::from("# Mean correlation\n");
    let mut failures = Vec::new();
    for (name, means) in &files {
        let _ = write!(md, "\n## {name}\n\n");
        table(&mut md, means);

        for (a, b) in &opts.orderings {
            let ta: BTreeMap<usize, f64> = t_values(means, a).into_iter().collect();
            let tb: BTreeMap<usize, f64> = t_values(means, b).into_iter().collect();
            let shared: Vec<usize> = ta.keys().filter(|t| tb.contains_key(t)).copied().collect();
            if shared.is_empty() {
                continue;
            }
            let _ = write!(md, "\n{a} - {b}:");
            for t in shared {
                let d = ta[&t] - tb[&t];
                let _ = write!(md, " T={t}: {d:+.4}");
                if d < -opts.ordering_tolerance {
                    failures.push(TrendFailure {
                        name: format!("ordering[{a}>={b}]"),
                        file: name.clone(),
                        detail: format!("T={t}: {:.4} < {:.4}", ta[&t], tb[&t]),
                    });
                }
            }
            md.push('\n');
        }

        let algs: BTreeSet<&str> = means.keys().map(|(a, _)| a.as_str()).collect();
        for alg in algs {
            let series = t_values(means, alg);
            for w in series.windows(2) {
                let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                if v1 < v0 - opts.monotone_tolerance {
                    failures.push(TrendFailure {
                        name: format!("monotone_in_T[{alg}]"),
                        file: name.clone(),
                        detail: format!("T={t0}: {v0:.4} -> T={t1}: {v1:.4}"),
                    });
                }
            }
        }
    }

    if files.len() > 1 {
        let (base_name, base) = &files[0];
        for (name, means) in &files[1..] {
            let _ = write!(md, "\n## {name} vs {base_name}\n\n");
            let deltas: Means = means
                .iter()
                .filter_map(|(k, v)| base.get(k).map(|b| (k.clone(), v - b)))
                .collect();
            table(&mut md, &deltas);
        }
    }

    md.push_str("\n## Trend checks\n\n");
    if failures.is_empty() {
        md.push_str("all passed\n");
    } else {
        for f in &failures {
            let _ = writeln!(md, "- FAIL {} ({}): {}", f.name, f.file, f.detail);
        }
    }
    Ok(CompareReport { markdown: md, failures })
}
