//! Subcommand implementations and exit-status mapping.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use hivnsfd_core::lyapunov::MONOTONE_SLACK;
use hivnsfd_core::{
    check_lemma2, check_monotone, classify_regime, equilibrium_set, lyapunov_series, run,
    run_sweep, sweep_summary, EquilibriumError, LyapunovError, LyapunovTarget, SimulateError,
    State, SweepError, TrajectoryRecord,
};
use thiserror::Error;

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::table::{emit_csv, emit_sweep_csv, TableError};

/// Relative output paths are resolved against this directory when set.
pub const OUTPUT_DIR_VAR: &str = "HIVNSFD_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hivnsfd",
    version,
    about = "NSFD simulator for a delayed HIV model with CTL response"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scheme and write the trajectory as CSV.
    Simulate {
        config: PathBuf,
        /// Output file; overrides `output` in the config. Defaults to stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print thresholds, equilibria and the predicted regime.
    Equilibria { config: PathBuf },
    /// Run, append a Lyapunov column and check that it is nonincreasing.
    Lyapunov {
        config: PathBuf,
        /// Overrides `lyapunov` in the config.
        #[arg(long, value_parser = parse_target)]
        target: Option<LyapunovTarget>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Simulate every grid cell and compare observed with predicted regimes.
    Sweep {
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn parse_target(s: &str) -> Result<LyapunovTarget, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{0}")]
    Usage(String),
}

/// Whether the scientific check behind a subcommand held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    CheckFailed,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = write!(stderr, "{}", err.render());
            return if err.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let output_dir = std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from);
    match dispatch(cli.command, output_dir.as_deref(), stdout, stderr) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::CheckFailed) => EXIT_CHECK_FAILED,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            EXIT_INVALID
        }
    }
}

pub fn dispatch(
    command: Command,
    output_dir: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate { config, output } => {
            let cfg = load(&config)?;
            let traj = simulate(&cfg)?;
            let sink = Sink::resolve(output.as_deref().or(cfg.output()), output_dir);
            sink.write(stdout, stderr, |w| emit_csv(&traj, w))?;
            Ok(Outcome::Done)
        }
        Command::Equilibria { config } => {
            let cfg = load(&config)?;
            write_equilibria(&cfg, stdout).map_err(|source| CliError::Write {
                path: "<stdout>".into(),
                source,
            })?;
            Ok(Outcome::Done)
        }
        Command::Lyapunov {
            config,
            target,
            output,
        } => {
            let mut cfg = load(&config)?;
            if target.is_some() {
                cfg.set_lyapunov(target);
            }
            if cfg.lyapunov().is_none() {
                return Err(CliError::Usage(
                    "no Lyapunov target: pass --target or set `lyapunov` in the config".into(),
                ));
            }
            let traj = simulate(&cfg)?;
            let series = traj.lyapunov.as_ref().expect("target was set");
            let m = cfg.parameters().delay_steps();
            let verdict = check_monotone(series, m, MONOTONE_SLACK);
            let sink = Sink::resolve(output.as_deref().or(cfg.output()), output_dir);
            sink.write(stdout, stderr, |w| emit_csv(&traj, w))?;
            let status = if verdict.holds { "PASS" } else { "FAIL" };
            let _ = writeln!(
                stderr,
                "monotonicity of {} for n >= {m}: {status} ({} of {} steps increase, worst relative increase {:.3e}, final value {:.6e})",
                series.target,
                verdict.violations,
                verdict.checked,
                verdict.worst_relative_increase,
                series.last().unwrap_or(f64::NAN),
            );
            if let Some(n) = verdict.first_violation {
                let _ = writeln!(stderr, "first increase at n = {n}");
            }
            Ok(if verdict.holds {
                Outcome::Done
            } else {
                Outcome::CheckFailed
            })
        }
        Command::Sweep { config, output } => {
            let cfg = load(&config)?;
            let grid = cfg
                .sweep_grid()
                .ok_or_else(|| CliError::Usage("config has no beta_values / c_values".into()))?;
            let results = run_sweep(&grid, cfg.sweep_start());
            let mut cells = Vec::with_capacity(results.len());
            for result in results {
                match result {
                    Ok(cell) => cells.push(cell),
                    Err(failure) => return Err(CliError::Usage(failure.to_string())),
                }
            }
            let sink = Sink::resolve(output.as_deref().or(cfg.output()), output_dir);
            sink.write(stdout, stderr, |w| emit_sweep_csv(&cells, w))?;
            let summary = sweep_summary(&cells)?;
            let _ = writeln!(
                stderr,
                "agreement {}/{} ({:.2}%), {} near-threshold cells excluded, {} unresolved",
                summary.agreeing,
                summary.considered,
                100.0 * summary.agreement_rate,
                summary.near_threshold_excluded,
                summary.unresolved.len(),
            );
            for cell in &summary.disagreeing {
                let _ = writeln!(
                    stderr,
                    "disagreement at beta = {}, c = {}, tau = {}: predicted {}, observed {}",
                    cell.beta,
                    cell.c,
                    cell.tau,
                    cell.predicted,
                    cell.observed.name()
                );
            }
            Ok(if summary.agreement_rate == 1.0 {
                Outcome::Done
            } else {
                Outcome::CheckFailed
            })
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text).map_err(|source| CliError::Config {
        path: path.to_owned(),
        source,
    })
}

/// Runs the configured trajectory, with monitors and a Lyapunov series when
/// the config asks for them.
pub fn simulate(cfg: &RunConfig) -> Result<TrajectoryRecord, CliError> {
    let mut traj = run(
        cfg.parameters(),
        cfg.initial_data(),
        cfg.steps(),
        cfg.omega(),
    )?;
    if let Some(target) = cfg.lyapunov() {
        traj.lyapunov = Some(lyapunov_series(&traj, target)?);
    }
    Ok(traj)
}

enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    fn resolve(path: Option<&Path>, output_dir: Option<&Path>) -> Sink {
        match (path, output_dir) {
            (None, _) => Sink::Stdout,
            (Some(p), Some(dir)) if p.is_relative() => Sink::File(dir.join(p)),
            (Some(p), _) => Sink::File(p.to_owned()),
        }
    }

    fn write<F>(
        &self,
        stdout: &mut dyn Write,
        stderr: &mut dyn Write,
        emit: F,
    ) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<usize, TableError>,
    {
        match self {
            Sink::Stdout => {
                emit(stdout)?;
            }
            Sink::File(path) => {
                let wrap = |source| CliError::Write {
                    path: path.clone(),
                    source,
                };
                let file = File::create(path).map_err(wrap)?;
                let mut buffered = BufWriter::new(file);
                let bytes = emit(&mut buffered)?;
                buffered.flush().map_err(wrap)?;
                let _ = writeln!(stderr, "wrote {bytes} bytes to {}", path.display());
            }
        }
        Ok(())
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped.
pub fn format_g12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{x:.*}", (11 - exp).max(0) as usize);
        trim_zeros(&fixed).to_owned()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn format_state(s: &State) -> String {
    let [x, y, v, z] = s.to_array().map(format_g12);
    format!("({x}, {y}, {v}, {z})")
}

pub fn write_equilibria(cfg: &RunConfig, out: &mut dyn Write) -> io::Result<()> {
    let params = cfg.parameters();
    let eqs = equilibrium_set(params);
    let nums = eqs.numbers;
    let regime = classify_regime(&nums, &eqs);
    writeln!(out, "R0 = {}", format_g12(nums.r0))?;
    writeln!(out, "R1 = {}", format_g12(nums.r1))?;
    writeln!(out, "E0 = {}", format_state(&eqs.e0))?;
    match eqs.e_star {
        Some(e) => writeln!(out, "E* = {}", format_state(&e))?,
        None => writeln!(out, "E* = absent (R0 <= 1)")?,
    }
    match eqs.e_bar {
        Some(e) => writeln!(out, "Ebar = {}", format_state(&e))?,
        None => writeln!(out, "Ebar = absent (R1 <= 1)")?,
    }
    writeln!(out, "regime = {}", regime.kind)?;
    writeln!(
        out,
        "attractor = {}",
        format_state(&regime.predicted_attractor)
    )?;
    match check_lemma2(params) {
        Ok(w) => writeln!(
            out,
            "infected levels: Y* = {}, Ybar = {}, Y* < Ybar: {}",
            format_g12(w.y_star),
            format_g12(w.y_bar),
            w.holds
        )?,
        Err(EquilibriumError::NotApplicable(why)) => {
            writeln!(out, "infected levels: not compared ({why})")?
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g12_formatting() {
        assert_eq!(format_g12(1.25), "1.25");
        assert_eq!(format_g12(0.625), "0.625");
        assert_eq!(format_g12(8.000000000000002), "8");
        assert_eq!(format_g12(1255.0), "1255");
        assert_eq!(format_g12(0.0), "0");
        assert_eq!(format_g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_g12(2.5e-7), "2.5e-7");
        assert_eq!(format_g12(-1.5e15), "-1.5e15");
        assert_eq!(format_g12(99999999999.99), "100000000000");
        assert_eq!(format_g12(999999999999.9), "1e12");
    }

    #[test]
    fn relative_outputs_follow_the_output_dir() {
        let dir = Path::new("/tmp/out");
        assert!(matches!(Sink::resolve(None, Some(dir)), Sink::Stdout));
        assert!(matches!(
            Sink::resolve(Some(Path::new("a.csv")), Some(dir)),
            Sink::File(p) if p == Path::new("/tmp/out/a.csv")
        ));
        assert!(matches!(
            Sink::resolve(Some(Path::new("/abs/a.csv")), Some(dir)),
            Sink::File(p) if p == Path::new("/abs/a.csv")
        ));
        assert!(matches!(
            Sink::resolve(Some(Path::new("a.csv")), None),
            Sink::File(p) if p == Path::new("a.csv")
        ));
    }
}
