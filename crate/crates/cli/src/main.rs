use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hfbkin::config::RunConfig;
use hfbkin::pipeline::{dump_kernels, oracle_diff, run_pipeline, RunOutcome, Stage};
use hfbkin::qbe::HMode;

#[derive(Parser)]
#[command(name = "hfbkin", version, about = "Renormalized HFB dynamics and quantum-Boltzmann collision integrals on a momentum lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Frozen,
    Selfconsistent,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the HFB system and write observables.
    Simulate { config: PathBuf },
    /// HFB plus the collision integrals, moments and totals.
    Qbe {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        enable_q4: bool,
        #[arg(long, value_name = "k")]
        sample_stride: Option<usize>,
    },
    /// Dump B12 and B03 on the full index set (d = 1, M ≤ 4).
    Kernels {
        /// `dump <config>` or just `<config>`.
        first: PathBuf,
        second: Option<PathBuf>,
    },
    /// Every stage with its checks; exit code 0 iff all pass.
    Verify { config: PathBuf },
    /// Compare the optimized accumulators with brute-force sums.
    OracleDiff { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HFBKIN_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("HFBKIN_THREADS = `{v}` is not a nonnegative integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().map_err(|e| e.to_string())
}

fn finish(out: RunOutcome) -> ExitCode {
    let r = &out.report;
    for c in &r.checks {
        let tag = if c.pass { "ok  " } else { "FAIL" };
        println!("{tag} {:<32} {:>12.4e}  (limit {:.1e})", c.name, c.value, c.limit);
    }
    match r.first_failure() {
        None => ExitCode::SUCCESS,
        Some(c) => {
            let detail = c.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default();
            eprintln!("check failed: {}{detail}", c.name);
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    init_threads()?;
    let err = |e: hfbkin::Error| e.to_string();
    match cli.command {
        Command::Simulate { config } => Ok(finish(run_pipeline(&load(&config)?, Stage::Simulate).map_err(err)?)),
        Command::Qbe { config, mode, enable_q4, sample_stride } => {
            let mut cfg = load(&config)?;
            if let Some(m) = mode {
                cfg.qbe.mode = match m {
                    Mode::Frozen => HMode::Frozen,
                    Mode::Selfconsistent => HMode::SelfConsistent,
                };
            }
            cfg.qbe.enable_q4 |= enable_q4;
            if let Some(k) = sample_stride {
                cfg.time.sample_stride = k;
            }
            cfg.validate().map_err(err)?;
            Ok(finish(run_pipeline(&cfg, Stage::Qbe).map_err(err)?))
        }
        Command::Kernels { first, second } => {
            let config = match second {
                None => first,
                Some(c) if first.as_os_str() == "dump" => c,
                Some(_) => return Err(format!("expected `kernels [dump] <config>`, got action `{}`", first.display())),
            };
            let cfg = load(&config)?;
            dump_kernels(&cfg).map_err(err)?;
            println!("wrote kernels_B12.csv, kernels_B03.csv to {}", cfg.output.directory.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config } => Ok(finish(run_pipeline(&load(&config)?, Stage::Verify).map_err(err)?)),
        Command::OracleDiff { config } => {
            let d = oracle_diff(&load(&config)?).map_err(err)?;
            println!("{}", hfbkin::pipeline::to_json(&d).map_err(err)?);
            Ok(if d.worst.passes(1e-12) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
