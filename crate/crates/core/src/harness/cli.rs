//! Command-line front end. Every output is computed in full before any file is
//! written, and files are replaced atomically, so a failing command leaves no
//! partial output behind.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Parser, Subcommand};
use tempfile::NamedTempFile;

use super::{
    plan_for, reference_spec, run_with_maps, summarize, ExperimentConfig, HarnessError, MapSource, Maps, Mode,
    Termination,
};
use crate::entropy::{entropy_map, points_to_csv, select_low_entropy_points, EntropyConfig, WeightGuard};
use crate::geometry::Vec2;
use crate::grid::{load_grid, save_grid, synth_map, SynthSpec};
use crate::kv::KvError;
use crate::planner::path_to_csv;

#[derive(Debug, Parser)]
#[command(name = "magnav", about = "Entropy-map path planning over magnetic anomaly maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic anomaly map into a grid-CSV file.
    Synth {
        #[arg(long, required_unless_present = "reference", conflicts_with = "reference")]
        spec: Option<PathBuf>,
        /// Use the built-in reference map.
        #[arg(long)]
        reference: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the sliding-window entropy map and its low-entropy points.
    Entropy {
        #[arg(long = "in")]
        input: PathBuf,
        /// Bin edge length, meters.
        #[arg(long, default_value_t = 0.2)]
        bin: f64,
        /// Window edge length, bins.
        #[arg(long, default_value_t = 2)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the selected points; printed to stdout when absent.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        k_sigma: f64,
        #[arg(long, default_value_t = crate::entropy::DEFAULT_MAX_POINTS)]
        max_points: usize,
    },
    /// Plan a path on a magnetic map.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Start position `x,y`, overriding the config.
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        start: Option<Vec2<f64>>,
        #[arg(long, value_parser = parse_xy, allow_hyphen_values = true)]
        goal: Option<Vec2<f64>>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the plan metadata; printed to stdout when absent.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Run one closed-loop experiment.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the run summary; printed to stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn parse_xy(s: &str) -> Result<Vec2<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => {
            let x: f64 = x.parse().map_err(|_| format!("bad coordinate {x:?}"))?;
            let y: f64 = y.parse().map_err(|_| format!("bad coordinate {y:?}"))?;
            Ok(Vec2::new(x, y))
        }
        _ => Err(format!("expected `x,y`, found {s:?}")),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code:
/// 0 on success, 1 on a usage error, 2 on a data error.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn read(path: &FsPath) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn load_config(path: Option<&FsPath>) -> Result<ExperimentConfig, HarnessError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let base = p.parent().unwrap_or(FsPath::new("."));
            Ok(ExperimentConfig::parse(&read(p)?, base)?)
        }
    }
}

/// Returns text for stdout; files go through [`write_all_atomic`].
fn execute(command: Command) -> Result<String, HarnessError> {
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut stdout = String::new();
    let mut emit = |target: Option<PathBuf>, text: String, files: &mut Vec<(PathBuf, String)>| match target {
        Some(p) => files.push((p, text)),
        None => stdout.push_str(&text),
    };
    match command {
        Command::Synth { spec, reference, out } => {
            let spec = if reference {
                reference_spec()
            } else {
                let path = spec.expect("clap enforces --spec or --reference");
                SynthSpec::parse(&read(&path)?)?
            };
            files.push((out, save_grid(&synth_map(&spec)?)));
        }
        Command::Entropy { input, bin, window, out, points, k_sigma, max_points } => {
            let map = load_grid::<f64>(&read(&input)?)?;
            let emap = entropy_map(&map, &EntropyConfig::new(bin, window))?;
            if !(k_sigma.is_finite() && k_sigma >= 0.0) {
                return Err(KvError::Invalid("--k-sigma must be finite and non-negative".into()).into());
            }
            let pts = select_low_entropy_points(&emap, k_sigma, max_points, &WeightGuard::default());
            files.push((out, save_grid(&emap)));
            emit(points, points_to_csv(&pts), &mut files);
        }
        Command::Plan { map, config, start, goal, out, meta } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.map = MapSource::GridFile(map);
            cfg.mode = Mode::EntropyPlanner;
            if let Some(s) = start {
                cfg.start.x = s.x;
                cfg.start.y = s.y;
            }
            if let Some(g) = goal {
                cfg.goal = g;
            }
            cfg.validate()?;
            let maps = Maps::build(&cfg)?;
            let plan = plan_for(&cfg, &maps)?;
            files.push((out, path_to_csv(&plan.path)));
            emit(meta, plan.metadata(), &mut files);
        }
        Command::Simulate { config, seed, mode, out, summary } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m;
            }
            cfg.validate()?;
            let maps = Maps::build(&cfg)?;
            let run = run_with_maps(&cfg, &maps)?;
            let mut text = format!("mode={}\nseed={}\n", cfg.mode, cfg.seed);
            text.push_str(&run.plan.metadata());
            text.push_str(&format!(
                "termination={}\n",
                match run.termination {
                    Termination::ReachedGoal => "reached_goal",
                    Termination::MaxSteps => "max_steps",
                    Termination::LeftMap => "left_map",
                }
            ));
            if !run.log.rows.is_empty() {
                text.push_str(&summarize(&run.log, cfg.goal, cfg.arrival_tolerance)?.to_text());
            }
            files.push((out, run.log.to_csv()));
            emit(summary, text, &mut files);
        }
    }
    write_all_atomic(&files)?;
    Ok(stdout)
}

/// Stages every file next to its destination, then renames them into place.
pub fn write_all_atomic(files: &[(PathBuf, String)]) -> Result<(), HarnessError> {
    let io = |path: &FsPath| {
        let path = path.to_path_buf();
        move |source: std::io::Error| HarnessError::Io { path, source }
    };
    let mut staged = Vec::with_capacity(files.len());
    for (path, text) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => FsPath::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(io(path))?;
        tmp.write_all(text.as_bytes()).map_err(io(path))?;
        tmp.flush().map_err(io(path))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| io(path)(e.error))?;
    }
    Ok(())
}
