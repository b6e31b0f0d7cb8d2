use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use muon_flow::harness::checks::run_checks;
use muon_flow::harness::{parse_kv, resolve, run_preset, Preset, RunReport};
use muon_flow::Error;

/// Regularized Muon experiments and oracle checks.
#[derive(Debug, Parser)]
#[command(name = "muon-flow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment preset and write CSV, summary and SVG outputs.
    Run {
        /// One of exp1, exp2, eps_sweep, chaos (or custom with --config).
        #[arg(long)]
        preset: Option<String>,
        /// Flat `key = value` file; its values override the preset defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Record every K-th step.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the spectral, force and rate oracle suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const EXIT_USAGE: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_IO: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::NonFiniteState { .. } => EXIT_INVARIANT,
        _ => EXIT_USAGE,
    }
}

fn print_report(report: &RunReport) {
    for s in &report.settings {
        println!("{} -> {}", s.config.label(), s.dir.display());
        for c in &s.cells {
            if let Some(last) = c.final_record() {
                println!("  {:<32} final J {:.3e}  final H {:.3e}  steps {}", c.rule.to_string(), last.J, last.H, last.step);
            }
        }
    }
    for (eps, d) in &report.divergence {
        println!("  eps {eps:e}: max divergence from hard Muon {d:.3e}");
    }
    if let Some(c) = &report.chaos {
        for (n, e) in &c.errors {
            println!("  N = {n:>5}: coupled error {e:.3e}");
        }
        println!("  slope {:.3}, C_poc {:.3}", c.slope, c.c_poc);
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    preset: Option<String>,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    stride: Option<usize>,
    iters: Option<usize>,
    threads: Option<usize>,
) -> Result<RunReport, Error> {
    let mut pairs = match &config {
        Some(path) => parse_kv(&std::fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    let file_preset = pairs.iter().rev().find(|(k, _)| k == "preset").map(|(_, v)| v.clone());
    let name = preset
        .or(file_preset)
        .ok_or_else(|| Error::InvalidConfig("pass --preset or set `preset` in the config file".into()))?;
    let preset: Preset = name.parse()?;
    let flags = [
        ("seed", seed.map(|v| v.to_string())),
        ("out_dir", out_dir.map(|v| v.display().to_string())),
        ("record_stride", stride.map(|v| v.to_string())),
        ("iters", iters.map(|v| v.to_string())),
        ("threads", threads.map(|v| v.to_string())),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    let configs = resolve(preset, &pairs)?;
    run_preset(&configs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { preset, config, seed, out_dir, stride, iters, threads } => {
            match run(preset, config, seed, out_dir, stride, iters, threads) {
                Ok(report) => {
                    print_report(&report);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
        Command::Check { seed } => match run_checks(seed) {
            Ok(outcomes) => {
                let mut failed = 0;
                for c in &outcomes {
                    println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    failed += usize::from(!c.passed);
                }
                println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
                if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_INVARIANT)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e).max(EXIT_INVARIANT))
            }
        },
    }
}
