use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use sense_core::channel::{gen_scenario, load_csi_dataset, save_csi_dataset};
use sense_core::harness::{compare_report, run_experiment, CompareOptions, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sense", version, about = "CSI sensing from Type-I PMI/CQI feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write results.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarise result files; exits non-zero when a trend check fails.
    Compare {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Allowed dip in mean correlation between consecutive T.
        #[arg(long, default_value_t = 0.01)]
        monotone_tolerance: f64,
        /// Ordering checks as `a>=b`; replaces the default `mecs_sgda>=mm_unconstrained`.
        #[arg(long = "order")]
        orderings: Vec<String>,
    },
    /// Generate a synthetic scenario and save it as a CSI dataset.
    GenScenario {
        /// Config file; only the scenario keys are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that a CSI dataset file parses.
    ValidateDataset {
        file: PathBuf,
        /// Config whose array geometry the dataset must match.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn parse_order(s: &str) -> anyhow::Result<(String, String)> {
    match s.split_once(">=") {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim().into(), b.trim().into())),
        _ => bail!("ordering must look like `a>=b`, got `{s}`"),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, threads, seed } => {
            let mut cfg = load_config(Some(&config))?;
            if threads.is_some() {
                cfg.threads = threads;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let res = run_experiment(&cfg, Some(&out))?;
            for g in &res.summary.groups {
                println!(
                    "{:<22} T={:<3} n={:<4} corr={:.4} nmse_r={:.2} dB viol={:.2}",
                    g.algorithm, g.t, g.count, g.mean_correlation, g.mean_nmse_r_db, g.mean_violations_count
                );
            }
            println!("wrote {} rows to {}", res.rows.len(), out.join("results.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { csv, monotone_tolerance, orderings } => {
            let mut opts = CompareOptions { monotone_tolerance, ..CompareOptions::default() };
            if !orderings.is_empty() {
                opts.orderings = orderings.iter().map(|s| parse_order(s)).collect::<anyhow::Result<_>>()?;
            }
            let rep = compare_report(&csv, &opts)?;
            print!("{}", rep.markdown);
            if rep.passed() {
                return Ok(ExitCode::SUCCESS);
            }
            for f in &rep.failures {
                eprintln!("trend check failed: {} in {}: {}", f.name, f.file, f.detail);
            }
            Ok(ExitCode::from(2))
        }
        Command::GenScenario { config, seed, out } => {
            let cfg = load_config(config.as_ref())?;
            let sc = gen_scenario(&cfg.scenario, seed)?;
            save_csi_dataset(&sc, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote target + {} reference users ({} antennas, {} carriers) to {}",
                sc.rus.len(),
                sc.tu.channel.ports(),
                sc.tu.channel.carriers(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateDataset { file, config } => {
            let geometry = match &config {
                Some(_) => Some(*load_config(config.as_ref())?.geometry()),
                None => None,
            };
            let sc = load_csi_dataset(&file, geometry).with_context(|| format!("invalid dataset {}", file.display()))?;
            println!(
                "ok: {} users, {} antennas, {} carriers",
                sc.rus.len() + 1,
                sc.tu.channel.ports(),
                sc.tu.channel.carriers()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
