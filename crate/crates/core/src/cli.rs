//! Command-line front end. `run` never panics on bad input; it maps every
//! failure to an exit code and a message on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::error::Error;
use crate::incoming::{bound_state_scan, completeness_residuals, incoming_on_uniform, Branch, CompletenessCheck};
use crate::oracle::compare_with_landauer;
use crate::suites::{run_suite, SCHEMA_VERSION};
use crate::transport::{current_grid, steady_current, transmission_curve};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PHYSICS: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Acceptance threshold of `oracle-compare`.
pub const ORACLE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "ness", version, about = "Steady-state transport through a quadratic system between two reservoirs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transmission function, self-energies and |Λ| on a frequency grid (CSV).
    Transmission {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Landauer current (JSON).
    Current {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Completeness residuals of the incoming fields and bound-state scan (JSON).
    CheckCompleteness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 400)]
        modes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Landauer current against a finite-lattice simulation (JSON).
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 400)]
        modes: usize,
        #[arg(long, default_value_t = 200.0)]
        tmax: f64,
        #[arg(long, default_value_t = 0.2)]
        window: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized verification suite (JSON).
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(Error),
    Physics(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BoundState { .. } => Failure::Physics(e.to_string()),
            Error::InvalidInput(msg) => Failure::Usage(msg),
            other => Failure::Numerical(other),
        }
    }
}

/// Parses `argv` (program name first), runs the command, returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Physics(msg)) => {
            eprintln!("physics check failed: {msg}");
            EXIT_PHYSICS
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical error: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("NESS_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("NESS_THREADS must be a nonnegative integer, got `{raw}`"))?;
    // A second call in the same process (tests) finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32, Failure> {
    match cmd {
        Command::Transmission { config, out, points } => {
            let cfg = RunConfig::load(&config)?;
            let points = points.unwrap_or(cfg.points);
            if points < 2 {
                return Err(Failure::Usage("--points must be at least 2".into()));
            }
            let (sys, ch, th) = (cfg.system()?, cfg.channel()?, cfg.thermo()?);
            let grid = current_grid(&sys, &ch, &ch, &th, points)?;
            let curve = transmission_curve(&sys, &ch, &ch, &grid, cfg.prefactor)?;
            let mut text = format!("# schema_version = {SCHEMA_VERSION}\n");
            for line in cfg.echo().lines() {
                text.push_str("# ");
                text.push_str(line);
                text.push('\n');
            }
            text.push_str("omega,T,re_xi,im_xi,re_eta,im_eta,abs_lambda\n");
            for s in &curve.samples {
                text.push_str(&format!("{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n", s.omega, s.t, s.xi.re, s.xi.im, s.eta.re, s.eta.im, s.abs_lambda));
            }
            write_output(Some(&out), &text)?;
            Ok(EXIT_OK)
        }
        Command::Current { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let (sys, ch, th) = (cfg.system()?, cfg.channel()?, cfg.thermo()?);
            let grid = current_grid(&sys, &ch, &ch, &th, cfg.points)?;
            let j = steady_current(&sys, &ch, &ch, &th, &grid, cfg.convention())?;
            let v = json!({
                "schema_version": SCHEMA_VERSION,
                "J": j,
                "prefactor": cfg.prefactor,
                "measure_2pi": cfg.measure_2pi,
                "grid_points": grid.nodes().len(),
                "config": cfg.echo(),
            });
            write_json(out.as_deref(), &v)?;
            Ok(EXIT_OK)
        }
        Command::CheckCompleteness { config, modes, out } => {
            let cfg = RunConfig::load(&config)?;
            if modes < 2 {
                return Err(Failure::Usage("--modes must be at least 2".into()));
            }
            let (sys, ch) = (cfg.system()?, cfg.channel()?);
            let check = match incoming_on_uniform(&sys, &ch, &ch, modes, Branch::Minus) {
                Ok(field) => {
                    let field = if cfg.delta > 0.0 { field.with_delta(cfg.delta) } else { field };
                    let dw = field.left.spacing().max(field.right.spacing());
                    CompletenessCheck { report: completeness_residuals(&field), bound_states: bound_state_scan(&sys, &ch, &ch, dw)? }
                }
                Err(e @ Error::BoundState { .. }) => return Err(Failure::Physics(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            let mut v = serde_json::to_value(&check).map_err(|e| Failure::Usage(e.to_string()))?;
            let pass = check.passes();
            extend(&mut v, json!({ "schema_version": SCHEMA_VERSION, "modes": modes, "pass": pass, "config": cfg.echo() }));
            write_json(out.as_deref(), &v)?;
            Ok(if pass { EXIT_OK } else { EXIT_PHYSICS })
        }
        Command::OracleCompare { config, modes, tmax, window, out } => {
            let cfg = RunConfig::load(&config)?;
            if modes < 2 {
                return Err(Failure::Usage("--modes must be at least 2".into()));
            }
            let (sys, ch, th) = (cfg.system()?, cfg.channel()?, cfg.thermo()?);
            let cmp = compare_with_landauer(&sys, &ch, &ch, &th, cfg.convention(), modes, tmax, window)?;
            let mut v = serde_json::to_value(&cmp).map_err(|e| Failure::Usage(e.to_string()))?;
            let pass = cmp.rel_err <= ORACLE_TOLERANCE;
            extend(&mut v, json!({ "schema_version": SCHEMA_VERSION, "pass": pass, "config": cfg.echo() }));
            write_json(out.as_deref(), &v)?;
            Ok(if pass { EXIT_OK } else { EXIT_PHYSICS })
        }
        Command::Verify { suite, seed, out } => {
            let report = run_suite(&suite, seed)?;
            let v = serde_json::to_value(&report).map_err(|e| Failure::Usage(e.to_string()))?;
            write_json(out.as_deref(), &v)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_PHYSICS })
        }
    }
}

fn extend(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

fn write_json(path: Option<&Path>, v: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Failure::Usage(e.to_string()))?;
    text.push('\n');
    write_output(path, &text)
}

/// Stdout, or a temp file in the target directory renamed into place.
fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::Usage(format!("stdout: {e}")));
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure::Usage(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
