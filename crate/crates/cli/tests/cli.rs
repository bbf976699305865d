//! Runs the `sense` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
seed = 3
trials = 3
draws = 1
t_values = 1, 2
algorithms = type1_baseline, mm_unconstrained, mecs_sgda
array_h = 2
array_v = 1
basis_dim = 3
type2_beams = none
";

const HEADER: &str = "algorithm,T,trial,seed,correlation,nmse_r,violations_count,violation_total,mecs_size,wall_time_s";

fn sense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sense")).args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.cfg", CONFIG);
    let out = dir.path().join("out");
    let o = sense(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("mecs_sgda") && stdout.contains("wrote 15 rows"), "{stdout}");

    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(HEADER));
    assert_eq!(csv.lines().count(), 16);
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.starts_with('{') && summary.contains("\"groups\""));

    // Same seed, same rows (apart from wall time).
    let again = dir.path().join("again");
    let o = sense(&["run", "--config", &cfg, "--out", again.to_str().unwrap(), "--threads", "1"]);
    assert!(o.status.success());
    let strip = |s: &str| -> Vec<String> {
        s.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    assert_eq!(strip(&csv), strip(&std::fs::read_to_string(again.join("results.csv")).unwrap()));

    // --seed overrides the config.
    let other = dir.path().join("other");
    let o = sense(&["run", "--config", &cfg, "--out", other.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    assert_ne!(strip(&csv), strip(&std::fs::read_to_string(other.join("results.csv")).unwrap()));
}

fn rows(spec: &[(&str, usize, f64)]) -> String {
    let mut s = format!("{HEADER}\n");
    for (trial, &(alg, t, corr)) in spec.iter().enumerate() {
        s += &format!("{alg},{t},{trial},1,{corr},0.5,0,0,,0.01\n");
    }
    s
}

#[test]
fn compare_passes_on_consistent_trends() {
    let dir = tempfile::tempdir().unwrap();
    let good = rows(&[
        ("mm_unconstrained", 1, 0.70),
        ("mm_unconstrained", 2, 0.80),
        ("mecs_sgda", 1, 0.75),
        ("mecs_sgda", 2, 0.85),
    ]);
    let a = write(dir.path(), "a.csv", &good);
    let b = write(dir.path(), "b.csv", &good);
    let o = sense(&["compare", &a, &b]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let md = text(&o.stdout);
    assert!(md.contains("mecs_sgda") && md.contains("Trend checks"), "{md}");
}

#[test]
fn compare_fails_with_the_broken_trend_named() {
    let dir = tempfile::tempdir().unwrap();
    let bad = rows(&[
        ("mm_unconstrained", 1, 0.70),
        ("mm_unconstrained", 2, 0.80),
        ("mecs_sgda", 1, 0.90),
        ("mecs_sgda", 2, 0.75),
    ]);
    let p = write(dir.path(), "bad.csv", &bad);
    let o = sense(&["compare", &p]);
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(err.contains("monotone_in_T[mecs_sgda]"), "{err}");
    assert!(err.contains("ordering[mecs_sgda>=mm_unconstrained]"), "{err}");

    // A looser tolerance and a custom ordering make the same file pass.
    let o = sense(&["compare", &p, "--monotone-tolerance", "0.2", "--order", "mecs_sgda>=mecs_sgda"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
}

#[test]
fn compare_reports_missing_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "short.csv", "algorithm,T\nmecs_sgda,1\n");
    let o = sense(&["compare", &p]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).starts_with("error:"));
}

#[test]
fn generated_scenario_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.cfg", CONFIG);
    let data = dir.path().join("scenario.csv");
    let o = sense(&["gen-scenario", "--config", &cfg, "--seed", "4", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));

    let o = sense(&["validate-dataset", data.to_str().unwrap(), "--config", &cfg]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(text(&o.stdout).starts_with("ok: 11 users, 4 antennas"), "{}", text(&o.stdout));

    let broken = write(dir.path(), "broken.csv", "not,a,dataset\n");
    let o = sense(&["validate-dataset", &broken]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("invalid dataset"));
}
