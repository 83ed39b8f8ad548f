//! Command-line front end: reads JSON configs, runs the verifier and the
//! experiment drivers from the `prechannel` crate, and writes CSV/JSON
//! results with a manifest describing each run.
//!
//! Exit codes are a stable contract: 0 on success, 1 when a verification
//! check fails, 2 for usage, config, or I/O problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use prechannel::config::{self, EnsembleFile, ExperimentConfig, GeneratorSpec, VerifyConfig};
use prechannel::experiments::{
    conjecture_probe, run_lln_sweep, verify_diagonal_identity, verify_lemma_suite, LemmaMode,
    SweepRecord, DIAGONAL_TOLERANCE,
};
use prechannel::families;
use prechannel::semigroup::chernoff_error;

/// Lowest-priority seed source; the config file and `--seed` both beat it.
const SEED_ENV: &str = "PRECHANNEL_LLN_SEED";

#[derive(Parser)]
#[command(name = "prechannel", version, about = "Deterministic experiments on random pre-channel products")]
struct Cli {
    /// Root seed; overrides the config file and the PRECHANNEL_LLN_SEED variable.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for trial evaluation (default: all available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Replace the configured time grid with this many uniform points on [0, T].
    #[arg(long, global = true)]
    grid_points: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an ensemble file from a named family.
    GenEnsemble {
        /// Family name: two-point, ginibre, lindblad-like, or uniform-atoms.
        #[arg(long)]
        family: String,
        /// Family parameters as a JSON object.
        #[arg(long, default_value = "{}")]
        params: String,
        /// Directory for ensemble.json and its manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact-identity suite and print a residual table.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Optional directory for the JSON report and its manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sup-over-time deviation statistics across the factor-count schedule.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Directory for sweep.csv, sweep.json, and the manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact distance between the limit semigroup and powers of the mean step.
    Chernoff {
        #[arg(long)]
        config: PathBuf,
        /// Directory for chernoff.csv, chernoff.json, and the manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Schatten-p deviation medians for p <= 2; reported as evidence only.
    ProbeConjecture {
        #[arg(long)]
        config: PathBuf,
        /// Directory for probe.csv, probe.json, and the manifest.
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    /// A residual check failed; outputs were still written.
    Verification,
    /// Bad arguments, unreadable or invalid config, or an I/O problem.
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure::Usage(err)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(workers) = cli.workers {
        pool = pool.num_threads(workers);
    }
    if let Err(err) = pool.build_global() {
        eprintln!("error: configuring the worker pool: {err}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Usage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::GenEnsemble { family, params, out } => {
            cmd_gen_ensemble(cli, family, params, out).map_err(Failure::from)
        }
        Command::Verify { config, out } => cmd_verify(cli, config, out.as_deref()),
        Command::Sweep { config, out } => cmd_sweep(cli, config, out).map_err(Failure::from),
        Command::Chernoff { config, out } => cmd_chernoff(cli, config, out).map_err(Failure::from),
        Command::ProbeConjecture { config, out } => {
            cmd_probe(cli, config, out).map_err(Failure::from)
        }
    }
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .with_context(|| format!("{SEED_ENV} must be an unsigned 64-bit integer, got {raw:?}")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(anyhow::Error::new(err).context(format!("reading {SEED_ENV}"))),
    }
}

/// Anchor for paths inside a config file: its own directory.
fn config_base(config_path: &Path) -> PathBuf {
    match config_path.parent() {
        Some(parent) if parent != Path::new("") => parent.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn load_experiment(cli: &Cli, config_path: &Path) -> anyhow::Result<prechannel::experiments::Experiment> {
    let cfg: ExperimentConfig = config::read_json(config_path).context("loading the config")?;
    cfg.resolve(&config_base(config_path), cli.seed, env_seed()?, cli.grid_points)
        .context("resolving the config")
}

/// All floats in CSV output carry 17 significant digits, enough for an exact
/// f64 round trip.
fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<String>,
    resolved_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
    /// Every data file this run emitted, relative to the manifest.
    outputs: Vec<&'a str>,
    duration_seconds: f64,
    version: &'a str,
}

#[allow(clippy::too_many_arguments)]
fn write_manifest(
    dir: &Path,
    command: &str,
    config: Option<&Path>,
    seed: u64,
    hash: Option<&str>,
    outputs: &[&str],
    started: Instant,
) -> anyhow::Result<()> {
    let manifest = RunManifest {
        command,
        config: config.map(|p| p.display().to_string()),
        resolved_seed: seed,
        config_hash: hash,
        outputs: outputs.to_vec(),
        duration_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn cmd_gen_ensemble(cli: &Cli, family: &str, params: &str, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let params: serde_json::Value =
        serde_json::from_str(params).context("parsing --params as JSON")?;
    let seed = config::resolve_seed(cli.seed, None, env_seed()?);
    let ensemble = families::generate(family, &params, seed).context("generating the ensemble")?;
    let spec = GeneratorSpec { family: family.to_string(), params, seed: Some(seed) };
    let file = EnsembleFile::from_ensemble(&ensemble, Some(spec))
        .context("certifying the atom norms")?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("ensemble.json"), &file)?;
    write_manifest(out, "gen-ensemble", None, seed, None, &["ensemble.json"], started)?;
    println!(
        "wrote {} ({} atoms, dim {}, seed {seed})",
        out.join("ensemble.json").display(),
        ensemble.support(),
        ensemble.dim()
    );
    Ok(())
}

#[derive(Serialize)]
struct CheckRow {
    check: String,
    residual: f64,
    threshold: f64,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    pass: bool,
    checks: Vec<CheckRow>,
}

fn cmd_verify(cli: &Cli, config_path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let started = Instant::now();
    let cfg: VerifyConfig = config::read_json(config_path).context("loading the config")?;
    let plan = cfg
        .resolve(&config_base(config_path), cli.seed, env_seed()?)
        .context("resolving the config")?;

    let mut checks = Vec::new();
    for mode in LemmaMode::ALL {
        // The conjugation identity assumes a centered middle factor; every
        // other check runs on the ensemble as configured.
        let (label, report) = match mode {
            LemmaMode::SuperOp => (
                "superop (centered)".to_string(),
                verify_lemma_suite(&plan.ensemble.centered(), &plan.companion, mode),
            ),
            _ => (mode.name().to_string(), verify_lemma_suite(&plan.ensemble, &plan.companion, mode)),
        };
        let report = report.context("running the lemma suite")?;
        checks.push(CheckRow {
            check: label,
            residual: report.residual,
            threshold: report.threshold,
            pass: report.pass,
        });
    }
    for &n in &plan.n {
        for &t in &plan.t {
            let report = verify_diagonal_identity(&plan.ensemble, n, t)
                .context("enumerating the product second moment")?;
            checks.push(CheckRow {
                check: format!("diagonal n={n} t={t}"),
                residual: report.residual,
                threshold: DIAGONAL_TOLERANCE,
                pass: report.residual <= DIAGONAL_TOLERANCE,
            });
            if let Some(cross) = report.max_cross_term {
                checks.push(CheckRow {
                    check: format!("cross terms n={n} t={t}"),
                    residual: cross,
                    threshold: DIAGONAL_TOLERANCE,
                    pass: cross <= DIAGONAL_TOLERANCE,
                });
            }
        }
    }

    let all_pass = checks.iter().all(|c| c.pass);
    println!("{:<24} {:>14} {:>10} {:>7}", "check", "residual", "threshold", "status");
    for row in &checks {
        println!(
            "{:<24} {:>14.4e} {:>10.1e} {:>7}",
            row.check,
            row.residual,
            row.threshold,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if all_pass {
        println!("all {} checks passed (seed {})", checks.len(), plan.seed);
    } else {
        println!("{failed} of {} checks FAILED (seed {})", checks.len(), plan.seed);
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(Failure::from)?;
        let report = VerifyReport { seed: plan.seed, pass: all_pass, checks };
        write_json(&dir.join("verify.json"), &report).map_err(Failure::from)?;
        write_manifest(dir, "verify", Some(config_path), plan.seed, None, &["verify.json"], started)
            .map_err(Failure::from)?;
    }

    if all_pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("n,median,q90,max,exceedance,chernoff_error,bound\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            fmt_f(r.median),
            fmt_f(r.q90),
            fmt_f(r.max),
            fmt_f(r.exceedance),
            fmt_f(r.chernoff_error),
            fmt_f(r.chebyshev_bound)
        ));
    }
    out
}

fn cmd_sweep(cli: &Cli, config_path: &Path, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let experiment = load_experiment(cli, config_path)?;
    let result = run_lln_sweep(&experiment).context("running the sweep")?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("sweep.csv"), &sweep_csv(&result.records))?;
    write_json(&out.join("sweep.json"), &result)?;
    write_manifest(
        out,
        "sweep",
        Some(config_path),
        experiment.seed,
        Some(&experiment.config_hash),
        &["sweep.csv", "sweep.json"],
        started,
    )?;
    match result.rate {
        Some(rate) => println!(
            "sweep over n = {:?} done; fitted median rate {rate:.3} (files in {})",
            experiment.n_schedule,
            out.display()
        ),
        None => println!(
            "sweep over n = {:?} done; rate not estimable (files in {})",
            experiment.n_schedule,
            out.display()
        ),
    }
    Ok(())
}

#[derive(Serialize)]
struct ChernoffRecord {
    n: usize,
    chernoff_error: f64,
}

#[derive(Serialize)]
struct ChernoffResult {
    seed: u64,
    config_hash: String,
    records: Vec<ChernoffRecord>,
}

fn cmd_chernoff(cli: &Cli, config_path: &Path, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let experiment = load_experiment(cli, config_path)?;
    let mut records = Vec::with_capacity(experiment.n_schedule.len());
    for &n in &experiment.n_schedule {
        let err = chernoff_error(&experiment.ensemble, &experiment.x, n, &experiment.grid)
            .context("evaluating the mean-product error")?;
        records.push(ChernoffRecord { n, chernoff_error: err });
    }

    let mut csv = String::from("n,chernoff_error\n");
    for r in &records {
        csv.push_str(&format!("{},{}\n", r.n, fmt_f(r.chernoff_error)));
    }
    let result = ChernoffResult {
        seed: experiment.seed,
        config_hash: experiment.config_hash.clone(),
        records,
    };

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("chernoff.csv"), &csv)?;
    write_json(&out.join("chernoff.json"), &result)?;
    write_manifest(
        out,
        "chernoff",
        Some(config_path),
        experiment.seed,
        Some(&experiment.config_hash),
        &["chernoff.csv", "chernoff.json"],
        started,
    )?;
    println!(
        "chernoff errors for n = {:?} written to {}",
        experiment.n_schedule,
        out.display()
    );
    Ok(())
}

fn cmd_probe(cli: &Cli, config_path: &Path, out: &Path) -> anyhow::Result<()> {
    let started = Instant::now();
    let experiment = load_experiment(cli, config_path)?;
    let result = conjecture_probe(
        &experiment.ensemble,
        &experiment.x,
        &experiment.n_schedule,
        &experiment.grid,
        experiment.p,
        experiment.trials,
        experiment.seed,
    )
    .context("probing the Schatten-p deviation")?;

    let mut csv = String::from("n,median\n");
    for r in &result.records {
        csv.push_str(&format!("{},{}\n", r.n, fmt_f(r.median)));
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("probe.csv"), &csv)?;
    write_json(&out.join("probe.json"), &result)?;
    write_manifest(
        out,
        "probe-conjecture",
        Some(config_path),
        experiment.seed,
        Some(&experiment.config_hash),
        &["probe.csv", "probe.json"],
        started,
    )?;
    println!(
        "p = {} deviation medians for n = {:?} written to {} ({})",
        experiment.p,
        experiment.n_schedule,
        out.display(),
        result.note
    );
    Ok(())
}
