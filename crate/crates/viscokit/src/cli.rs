//! Command-line front end.
//!
//! Exit codes: `0` success, `1` failed verification or diverged run,
//! `2` invalid arguments, configuration or dataset.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::calibrate::{fit, ExperimentDataset, FitTemplate, TestMode};
use crate::config::{ConfigError, RunConfig};
use crate::driver::{run_program, write_atomic, TimeSeries};
use crate::par::{self, Execution};
use crate::verify;

pub const THREADS_ENV: &str = "VISCOKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "viscokit", version, about = "Finite-strain viscoelasticity with generalized strains")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the finite-difference and property suites.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Only suites whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// List suite names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Run load programs and write time series as CSV.
    Simulate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Output CSV; a directory when several configs are given.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit equilibrium branches to homogeneous test data.
    Fit {
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Input(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Applies the worker cap from the environment, if set.
pub fn apply_thread_cap() -> Result<(), String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
            if n == 0 {
                return Err(format!("{THREADS_ENV} must be a positive integer"));
            }
            par::configure_threads(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    if let Err(m) = apply_thread_cap() {
        let _ = writeln!(err, "error: {m}");
        return 2;
    }
    let mode = exec(cli.sequential);
    let result = match cli.command {
        Command::Verify { seed, filter, list } => run_verify(seed, filter.as_deref(), list, mode, out),
        Command::Simulate { configs, out: path } => run_simulate(&configs, path.as_deref(), mode, out),
        Command::Fit { data, config, out: path } => run_fit(&data, config.as_deref(), &path, mode, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Input(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
    }
}

fn run_verify(seed: u64, filter: Option<&str>, list: bool, mode: Execution, out: &mut dyn Write) -> Result<(), Failure> {
    if list {
        for (name, criterion, _) in verify::SUITES {
            let _ = writeln!(out, "{name} (criterion {criterion})");
        }
        return Ok(());
    }
    if let Some(f) = filter {
        if !verify::suite_names().iter().any(|n| n.contains(f)) {
            return Err(Failure::Input(format!("no suite matches '{f}'")));
        }
    }
    let mut buf = Vec::new();
    let ok = verify::report(seed, filter, mode, &mut buf).map_err(|e| Failure::Run(e.to_string()))?;
    let _ = out.write_all(&buf);
    if ok {
        Ok(())
    } else {
        Err(Failure::Run("verification failed".into()))
    }
}

fn csv_bytes(series: &TimeSeries) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    series.write_csv(&mut buf).map_err(|e| Failure::Run(e.to_string()))?;
    Ok(buf)
}

fn run_simulate(configs: &[PathBuf], out_path: Option<&Path>, mode: Execution, out: &mut dyn Write) -> Result<(), Failure> {
    let mut jobs = Vec::new();
    for path in configs {
        let cfg = RunConfig::load(path)?;
        let target = match (configs.len(), out_path) {
            (1, Some(p)) => p.to_path_buf(),
            (1, None) => cfg
                .output
                .csv
                .clone()
                .ok_or_else(|| Failure::Input("no output path: pass --out or set output.csv".into()))?,
            (_, Some(dir)) => {
                let stem = path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
                dir.join(format!("{stem}.csv"))
            }
            (_, None) => return Err(Failure::Input("--out <dir> is required with several configs".into())),
        };
        jobs.push((path.clone(), cfg.material()?, cfg.program()?, cfg.settings()?, target));
    }
    if configs.len() > 1 {
        if let Some(dir) = out_path {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))?;
        }
    }
    let results = par::map(mode, &jobs, |(src, material, program, settings, target)| {
        let series = run_program(program, material, settings).map_err(|e| format!("{}: {e}", src.display()))?;
        let bytes = csv_bytes(&series).map_err(|_| format!("{}: cannot format CSV", src.display()))?;
        write_atomic(target, &bytes).map_err(|e| format!("{}: {e}", target.display()))?;
        Ok::<_, String>((target.clone(), series.records.len()))
    });
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((target, n)) => {
                let _ = writeln!(out, "wrote {} ({n} steps)", target.display());
            }
            Err(m) => failures.push(m),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(failures.join("\n")))
    }
}

/// Initial modulus scale estimated from the smallest uniaxial record.
fn modulus_scale(data: &ExperimentDataset) -> f64 {
    data.records
        .iter()
        .filter(|r| r.mode == TestMode::Uniaxial && r.stretch > 1.0)
        .min_by(|a, b| a.stretch.total_cmp(&b.stretch))
        .map(|r| r.nominal_stress / (6.0 * (r.stretch - 1.0)))
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(1.0)
}

fn run_fit(data: &Path, config: Option<&Path>, out_path: &Path, mode: Execution, out: &mut dyn Write) -> Result<(), Failure> {
    let file = std::fs::File::open(data).map_err(|e| Failure::Input(format!("{}: {e}", data.display())))?;
    let label = data.display().to_string();
    let dataset = ExperimentDataset::from_csv(file, &label).map_err(|e| Failure::Input(format!("{label}: {e}")))?;
    let cfg = match config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let template = match cfg.as_ref().map(RunConfig::fit_template).transpose()?.flatten() {
        Some(t) => t,
        None => {
            let mut t = FitTemplate::two_branch_cr(modulus_scale(&dataset));
            if let Some(seed) = cfg.as_ref().and_then(|c| c.seed) {
                t.seed = seed;
            }
            t
        }
    };
    let result = fit(&dataset, &template, mode).map_err(|e| match e {
        crate::Error::InvalidParameters(m) => Failure::Input(m),
        other => Failure::Run(other.to_string()),
    })?;
    let json = serde_json::to_string_pretty(&result).map_err(|e| Failure::Run(e.to_string()))?;
    write_atomic(out_path, format!("{json}\n").as_bytes()).map_err(|e| Failure::Run(format!("{}: {e}", out_path.display())))?;
    let _ = writeln!(out, "chi2 {:.6e} after {} iterations (start {})", result.chi2_total, result.iterations, result.start_index);
    for (mode, v) in &result.chi2 {
        let _ = writeln!(out, "  {mode}: {v:.6e}");
    }
    for p in &result.parameters {
        let _ = writeln!(out, "  mu {:.6e}  {}", p.mu, p.strain);
    }
    let _ = writeln!(out, "wrote {}", out_path.display());
    Ok(())
}
