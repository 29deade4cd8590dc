//! `robust-lqg`: identification, robust synthesis and evaluation from the
//! command line.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.

use clap::{Parser, Subcommand, ValueEnum};
use lqg_core::evaluation::robust_stability_check;
use lqg_core::lti::FirTm;
use lqg_core::pipeline::{identify, run_records, selftest::run_selftest, sweep_scaling_threads, ExperimentConfig, RecordArtifacts, RunReport};
use lqg_core::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "robust-lqg", version, about = "Robust LQG control from one identified trajectory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads across (seed, N) records.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one trajectory and fit the FIR model.
    Identify,
    /// Identify, then run the robust synthesis.
    Synthesize,
    /// Identify, synthesize and evaluate one record on the true plant.
    Evaluate,
    /// Every (seed, N) record; writes the run report and the record CSV.
    Pipeline,
    /// Pipeline plus per-N medians and log-log slopes.
    Sweep,
    /// Fast invariant suites.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum CliError {
    Usage(String),
    Numerical(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Res<T> = Result<T, CliError>;

fn load_config(cli: &Cli) -> Res<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Usage("--config <path> is required for this command".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, text: &str) -> Res<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn fir_csv(g: &FirTm) -> String {
    let mut s = String::from("k,i,j,value\n");
    for (k, c) in g.coeffs().iter().enumerate() {
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                s.push_str(&format!("{k},{i},{j},{:?}\n", c[(i, j)]));
            }
        }
    }
    s
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// First seed and first N only.
fn single_record(mut cfg: ExperimentConfig, trials: Option<usize>) -> Res<(RunReport, RecordArtifacts, ExperimentConfig)> {
    cfg.seeds.truncate(1);
    cfg.n_list.truncate(1);
    if let Some(t) = trials {
        cfg.robustness_trials = t;
    }
    let (report, mut arts) = run_records(&cfg, 1)?;
    let art = arts.pop().expect("one record");
    if let Some(e) = art.error.clone() {
        return Err(e.into());
    }
    Ok((report, art, cfg))
}

fn run(cli: &Cli) -> Res<()> {
    match cli.command {
        Command::Identify => {
            let cfg = load_config(cli)?;
            let r = identify(&cfg, cfg.seeds[0], cfg.n_list[0])?;
            eprintln!("T = {}, H-inf error {:.6e} (FIR part {:.6e}, tail {:.3e})", r.window, r.error.oracle, r.error.fir_part, r.error.tail);
            match cli.format {
                Format::Json => write(&cli.out, "identify.json", &to_json(&r)),
                Format::Csv => write(&cli.out, "g_hat.csv", &fir_csv(&r.g_hat)),
            }
        }
        Command::Synthesize => {
            let (report, art, _) = single_record(load_config(cli)?, Some(0))?;
            let syn = art.synthesis.expect("synthesized");
            eprintln!("gamma* = {:.6}, ||U||_inf <= {:.6}, certified cost {:.6}", syn.gamma_star, syn.u_hinf, syn.certified_bound);
            match cli.format {
                Format::Json => {
                    let v = serde_json::json!({ "record": report.records[0], "synthesis": syn, "controller": art.controller });
                    write(&cli.out, "synthesis.json", &to_json(&v))
                }
                Format::Csv => write(&cli.out, "u.csv", &fir_csv(syn.u())),
            }
        }
        Command::Evaluate => {
            let (report, art, cfg) = single_record(load_config(cli)?, None)?;
            let rec = &report.records[0];
            let sub = rec.subopt.as_ref().expect("evaluated");
            eprintln!("J* = {:.6}, J_hat = {:.6}, gap {:.3e}, bound {:.3e} (applicable: {})", sub.j_star, sub.j_hat, sub.relative_gap, sub.bound_rhs, sub.bound_applicable);
            let rob = match (&art.g_hat, &art.controller, rec.eps) {
                (Some(g), Some(k), Some(eps)) if cfg.robustness_trials > 0 => Some(robust_stability_check(g, k, eps, cfg.robustness_trials, rec.seed ^ 0x9e37_79b9_7f4a_7c15)?),
                _ => None,
            };
            match cli.format {
                Format::Json => {
                    let v = serde_json::json!({ "record": rec, "baseline": report.baseline, "robustness": rob });
                    write(&cli.out, "evaluate.json", &to_json(&v))
                }
                Format::Csv => {
                    write(&cli.out, "evaluate.csv", &report.to_csv())?;
                    match rob {
                        Some(r) => write(&cli.out, "robustness.csv", &r.to_csv()),
                        None => Ok(()),
                    }
                }
            }
        }
        Command::Pipeline => {
            let cfg = load_config(cli)?;
            let (report, _) = run_records(&cfg, cli.threads)?;
            write(&cli.out, &cfg.output.run_report, &report.to_json())?;
            write(&cli.out, &cfg.output.scaling_csv, &report.to_csv())?;
            eprintln!("{} records, {} failed", report.records.len(), report.failures);
            Ok(())
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let (report, summary) = sweep_scaling_threads(&cfg, cli.threads)?;
            write(&cli.out, &cfg.output.run_report, &report.to_json())?;
            write(&cli.out, &cfg.output.scaling_csv, &report.to_csv())?;
            match cli.format {
                Format::Json => write(&cli.out, "sweep_summary.json", &summary.to_json())?,
                Format::Csv => write(&cli.out, "sweep_summary.csv", &summary.to_csv())?,
            }
            if let Some(f) = summary.id_error_fit {
                eprintln!("identification error slope {:.3} +- {:.3}", f.slope, f.half_width);
            }
            if let Some(f) = summary.rel_gap_fit {
                eprintln!("relative gap slope {:.3} +- {:.3}", f.slope, f.half_width);
            }
            if summary.insufficient {
                eprintln!("warning: too few successful records for reliable slopes");
            }
            Ok(())
        }
        Command::Selftest => {
            let checks = run_selftest(cli.seed.unwrap_or(0));
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                Ok(())
            } else {
                Err(CliError::Numerical("selftest failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
