//! Command-line driver: reads a flat run configuration, runs one model
//! operation and writes plot-ready CSV.

pub mod config;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use thiserror::Error;

use hetmix::belief::{
    build_series, parse_district_shares, sundays_between, write_imputed_csv, BeliefError,
    GroupBeliefTable,
};
use hetmix::experiments::{
    curve_shapes, figure6_sweep, figure7_sweep, figure8_sweep, paradox_summary, run_sweep,
    threads_from_env, with_threads, SweepError, SweepResult, SweepSpec,
};
use hetmix::integrator::fmt_num;
use hetmix::oracle::OracleError;
use hetmix::{
    simulate, single_group_final_size, summarize, two_group_final_size, Seeding, SimError,
};

use crate::config::{parse_config, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hetmix", version, about = "Two-group SIRD simulator with testing bias and homophilic mixing")]
pub struct Cli {
    /// Run configuration (`key = value` lines); defaults apply when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one parameter set and write the trajectory.
    Simulate(OutArg),
    /// Sweep `axis1` (and optionally `axis2`) from the config.
    Sweep(OutArg),
    /// Deaths and reported cases against N2 for several common R0.
    Fig6(OutArg),
    /// Group attack rates against N2 for several R0_2.
    Fig7(OutArg),
    /// Deaths and reported cases against N2 for each homophily level.
    Fig8(OutArg),
    /// Slopes of deaths and reported cases over the N2 window.
    Paradox(OutArg),
    /// Final-size prediction; one group with `--r0`/`--alpha`, else the config.
    Oracle {
        #[arg(long, requires = "alpha")]
        r0: Option<f64>,
        #[arg(long, requires = "r0")]
        alpha: Option<f64>,
    },
    /// Weekly district beliefs from group means and district shares.
    Impute {
        #[arg(long)]
        means: PathBuf,
        #[arg(long)]
        shares: PathBuf,
        /// First week; defaults to the first wave start.
        #[arg(long)]
        from: Option<NaiveDate>,
        /// Last week; defaults to the last wave start.
        #[arg(long)]
        to: Option<NaiveDate>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
pub struct OutArg {
    /// Output CSV; overrides `out` in the config. Stdout when neither is set.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("config {}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{}: {source}", path.display())]
    Belief { path: PathBuf, source: BeliefError },
    #[error(transparent)]
    Imputation(BeliefError),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file. Without a path
/// the output goes to stdout.
fn emit<F>(path: Option<&Path>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let Some(path) = path else {
        let stdout = io::stdout();
        let mut w = BufWriter::new(stdout.lock());
        return match body(&mut w).and_then(|_| w.flush()) {
            // A closed pipe (e.g. `| head`) is the reader's choice, not a failure.
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => other.map_err(io_err(Path::new("<stdout>"))),
        };
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))?;
    let tmp = w.into_inner().map_err(|e| io_err(path)(e.into_error()))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// Summary lines go to stdout unless stdout carries the CSV.
fn note(to_stdout: bool, msg: &str) {
    if to_stdout {
        eprintln!("{msg}");
    } else {
        println!("{msg}");
    }
}

fn parallel<T: Send>(f: impl FnOnce() -> Result<T, SweepError> + Send) -> Result<T, CliError> {
    Ok(with_threads(threads_from_env(), f)??)
}

fn write_figure(
    out: Option<&Path>,
    name: &str,
    results: &[SweepResult],
    with_shapes: bool,
) -> Result<usize, CliError> {
    let shapes: Vec<_> = if with_shapes {
        results.iter().flat_map(|r| curve_shapes(name, r)).collect()
    } else {
        Vec::new()
    };
    emit(out, |w| hetmix::experiments::write_sweep_csv(w, results, &shapes))?;
    Ok(results.iter().map(|r| r.rows.len()).sum())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("hetmix: {e}");
            1
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    let out_path = |arg: &OutArg| arg.out.clone().or_else(|| cfg.out.clone());

    match &cli.command {
        Command::Simulate(arg) => {
            let out = out_path(arg);
            let traj = simulate(&cfg.params, &cfg.integration)?;
            emit(out.as_deref(), |w| traj.write_csv(w))?;
            let s = summarize(&traj);
            note(
                out.is_none(),
                &format!(
                    "simulate: {} rows, deaths {}, reported {}, extinct {}",
                    traj.samples.len(),
                    fmt_num(s.deaths),
                    fmt_num(s.reported_cumulative),
                    s.extinct
                ),
            );
        }
        Command::Sweep(arg) => {
            let out = out_path(arg);
            let axis1 = cfg
                .axis1
                .clone()
                .ok_or_else(|| CliError::Usage("sweep needs `axis1` and `axis1_grid` in the config".into()))?;
            let spec = SweepSpec {
                base: cfg.params,
                axis1,
                axis2: cfg.axis2.clone(),
                config: cfg.integration,
            };
            spec.validate()?;
            let res = parallel(|| run_sweep(&spec))?;
            let rows = write_figure(out.as_deref(), "sweep", std::slice::from_ref(&res), false)?;
            note(out.is_none(), &format!("sweep: {rows} rows"));
        }
        Command::Fig6(arg) => {
            let out = out_path(arg);
            let res = parallel(|| figure6_sweep(&cfg.fig6_r0, &cfg.n2_grid, &cfg.integration))?;
            let rows = write_figure(out.as_deref(), "fig6", std::slice::from_ref(&res), true)?;
            note(out.is_none(), &format!("fig6: {rows} rows"));
        }
        Command::Fig7(arg) => {
            let out = out_path(arg);
            let res = parallel(|| figure7_sweep(&cfg.fig7_r02, &cfg.n2_grid, &cfg.integration))?;
            let rows = write_figure(out.as_deref(), "fig7", std::slice::from_ref(&res), true)?;
            note(out.is_none(), &format!("fig7: {rows} rows"));
        }
        Command::Fig8(arg) => {
            let out = out_path(arg);
            let res = parallel(|| figure8_sweep(&cfg.fig8_r02, &cfg.fig8_h, &cfg.n2_grid, &cfg.integration))?;
            let rows = write_figure(out.as_deref(), "fig8", &res, true)?;
            note(out.is_none(), &format!("fig8: {rows} rows in {} blocks", cfg.fig8_r02.len() * cfg.fig8_h.len()));
        }
        Command::Paradox(arg) => {
            let out = out_path(arg);
            let s = parallel(|| paradox_summary(&cfg.paradox_window, &cfg.params, &cfg.integration))?;
            let shows = s.shows_paradox(cfg.paradox_ratio);
            emit(out.as_deref(), |w| {
                writeln!(w, "n2,deaths,reported")?;
                for k in 0..s.n2.len() {
                    writeln!(w, "{},{},{}", fmt_num(s.n2[k]), fmt_num(s.deaths[k]), fmt_num(s.reported[k]))?;
                }
                writeln!(
                    w,
                    "# slope: deaths={} reported={} normalized_deaths={} normalized_reported={}",
                    fmt_num(s.slope_deaths),
                    fmt_num(s.slope_reported),
                    fmt_num(s.normalized_slope_deaths),
                    fmt_num(s.normalized_slope_reported)
                )?;
                writeln!(w, "# pattern: {shows} (ratio {})", fmt_num(cfg.paradox_ratio))
            })?;
            note(
                out.is_none(),
                &format!(
                    "paradox: {} rows, normalized slopes deaths {:.4} reported {:.4}, pattern {shows}",
                    s.n2.len(),
                    s.normalized_slope_deaths,
                    s.normalized_slope_reported
                ),
            );
        }
        Command::Oracle { r0, alpha } => match (r0, alpha) {
            (Some(r0), Some(alpha)) => {
                if !(*r0 >= 0.0 && r0.is_finite() && (0.0..1.0).contains(alpha)) {
                    return Err(CliError::Usage(format!(
                        "need r0 >= 0 and alpha in [0, 1), got r0 = {r0}, alpha = {alpha}"
                    )));
                }
                println!("z = {}", fmt_num(single_group_final_size(*r0, *alpha)));
            }
            _ => {
                let p = two_group_final_size(&cfg.params, Seeding::FromParams)?;
                println!(
                    "S_inf = [{}, {}], attack = [{}, {}], deaths {}, reported {}, residual {:e}",
                    fmt_num(p.s_inf[0]),
                    fmt_num(p.s_inf[1]),
                    fmt_num(p.attack_rate[0]),
                    fmt_num(p.attack_rate[1]),
                    fmt_num(p.deaths),
                    fmt_num(p.reported_cumulative),
                    p.solver_residual
                );
            }
        },
        Command::Impute {
            means,
            shares,
            from,
            to,
            out,
        } => {
            let open = |p: &Path| fs::File::open(p).map_err(io_err(p));
            let table = GroupBeliefTable::from_csv(open(means)?).map_err(|source| CliError::Belief {
                path: means.clone(),
                source,
            })?;
            let districts = parse_district_shares(open(shares)?).map_err(|source| CliError::Belief {
                path: shares.clone(),
                source,
            })?;
            let starts = table.wave_starts();
            let (Some(&first), Some(&last)) = (starts.first(), starts.last()) else {
                return Err(CliError::Imputation(BeliefError::NoWaves));
            };
            let from = from.unwrap_or(first);
            let to = to.unwrap_or(last);
            if to < from {
                return Err(CliError::Usage(format!("--to {to} is before --from {from}")));
            }
            let weeks = sundays_between(from, to);
            let mut series = Vec::new();
            for d in &districts {
                series.extend(build_series(&table, d, &weeks).map_err(CliError::Imputation)?);
            }
            emit(out.as_deref(), |w| write_imputed_csv(w, &series))?;
            let rows: usize = series.iter().map(|s| s.values.len()).sum();
            note(
                out.is_none(),
                &format!("impute: {rows} rows for {} districts over {} weeks", districts.len(), weeks.len()),
            );
        }
    }
    Ok(())
}
