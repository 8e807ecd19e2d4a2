use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use snn_rl::harness::{self, RunConfig};
use snn_rl::profile;
use snn_rl::verify;

#[derive(Parser)]
#[command(
    name = "snn-rl",
    about = "Spiking actor-critic RL with feedback-modulated TD-STDP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeds and write per-episode CSV plus JSON summaries.
    Train {
        /// Builtin profile name (cartpole-default, cartpole-bio) or a TOML path.
        #[arg(long, default_value = "cartpole-default")]
        profile: String,
        #[arg(long, default_value_t = 400)]
        episodes: usize,
        /// Number of consecutive seeds to run.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Replace the feedback-gated trace with the plain eligibility trace.
        #[arg(long)]
        ablate_feedback: bool,
    },
    /// Run the numerical certification suite for the learning rules.
    Verify,
    /// Recompute and aggregate metrics from CSV logs in a directory.
    Metrics {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            profile,
            episodes,
            seeds,
            seed,
            out,
            ablate_feedback,
        } => train(&profile, episodes, seed, seeds, &out, ablate_feedback),
        Command::Verify => run_verify(),
        Command::Metrics { input } => metrics(&input),
    }
}

fn train(
    profile_name: &str,
    episodes: usize,
    first_seed: u64,
    seeds: u64,
    out: &PathBuf,
    ablate_feedback: bool,
) -> Result<()> {
    let profile = profile::load(profile_name)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut t_f_values = Vec::new();
    let mut t_s_values = Vec::new();
    for seed in first_seed..first_seed + seeds {
        let cfg = RunConfig {
            profile: profile.clone(),
            episodes,
            seed,
            ablate_feedback,
        };
        let (logs, summary) = harness::train(&cfg)?;
        harness::export_csv(&logs, &out.join(format!("episodes_seed{seed}.csv")))?;
        harness::export_summary(&summary, &out.join(format!("summary_seed{seed}.json")))?;
        println!(
            "seed {seed}: t_f={} t_s={} final_steps={}",
            opt(summary.t_f),
            opt(summary.t_s),
            logs.last().map_or(0, |l| l.steps)
        );
        if let Some(v) = summary.t_f {
            t_f_values.push(v as f64);
        }
        if let Some(v) = summary.t_s {
            t_s_values.push(v as f64);
        }
    }
    if seeds > 1 {
        println!(
            "aggregate over {seeds} seeds: T_f {} ({}/{seeds} reached), T_s {} ({}/{seeds} solved)",
            agg(&t_f_values),
            t_f_values.len(),
            agg(&t_s_values),
            t_s_values.len()
        );
    }
    Ok(())
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

fn agg(values: &[f64]) -> String {
    if values.is_empty() {
        return "-".into();
    }
    let (mean, std) = harness::mean_std(values);
    format!("{mean:.2} +/- {std:.2}")
}

fn run_verify() -> Result<()> {
    let checks = verify::run_all();
    let mut failures = Vec::new();
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} (max_err {:.3e}, tol {:.0e})",
            c.name, c.max_err, c.tol
        );
        if !c.passed() {
            failures.push(c.name);
        }
    }
    if !failures.is_empty() {
        bail!("verification failures: {}", failures.join(", "));
    }
    Ok(())
}

fn metrics(dir: &PathBuf) -> Result<()> {
    let mut t_f_values = Vec::new();
    let mut t_s_values = Vec::new();
    let mut runs = 0u64;
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("episodes_") && n.ends_with(".csv"))
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("no episodes_*.csv files in {}", dir.display());
    }
    for path in entries {
        let logs = harness::load_csv(&path)?;
        let steps: Vec<usize> = logs.iter().map(|l| l.steps).collect();
        let (t_f, t_s) = harness::compute_metrics(&steps, 500);
        println!(
            "{}: episodes={} t_f={} t_s={}",
            path.file_name().unwrap().to_string_lossy(),
            logs.len(),
            opt(t_f),
            opt(t_s)
        );
        runs += 1;
        if let Some(v) = t_f {
            t_f_values.push(v as f64);
        }
        if let Some(v) = t_s {
            t_s_values.push(v as f64);
        }
    }
    println!(
        "aggregate over {runs} runs: T_f {} ({}/{runs} reached), T_s {} ({}/{runs} solved)",
        agg(&t_f_values),
        t_f_values.len(),
        agg(&t_s_values),
        t_s_values.len()
    );
    Ok(())
}
