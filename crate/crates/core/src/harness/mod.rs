//! End-to-end experiments: map, entropy map, plan, then closed-loop following
//! with particle-filter localization.
//!
//! Randomness comes from the master seed. The harness generator draws, per
//! step, the truth motion noise and then the sensor noise; the particle set owns
//! a second generator seeded at `seed + FILTER_SEED_OFFSET` that draws the
//! per-particle motion noise and then the resampling offset.

mod cli;
mod config;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use cli::cli_main;
pub use config::{reference_spec, ExperimentConfig, MapSource, Mode, REFERENCE_SPEC};

use crate::entropy::{entropy_map, EntropyError};
use crate::geometry::{Control, Path, Pose, Vec2};
use crate::grid::{load_grid, synth_map, GridError, GridField};
use crate::kv::KvError;
use crate::localization::{FilterError, ParticleSet};
use crate::planner::{plan_path, PlanError, PlanResult};
use crate::scalar::format_sig;
use crate::vehicle::{measure, stanley_control, step_truth, VehicleError};

pub const FILTER_SEED_OFFSET: u64 = 0x9E37_79B9;

pub const TRAJECTORY_HEADER: &str =
    "step,t,truth_x,truth_y,truth_theta,est_x,est_y,est_theta,cov_det,z_nT,ess,entropy_bits,cmd_v,cmd_omega";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(#[from] KvError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("trajectory line {line}: {reason}")]
    Trajectory { line: usize, reason: String },
    #[error("cannot summarize an empty trajectory")]
    EmptyLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub truth: Pose<f64>,
    pub estimate: Pose<f64>,
    pub cov_det: f64,
    pub z: f64,
    pub ess: f64,
    pub entropy_bits: f64,
    pub command: Control<f64>,
}

/// Why the closed loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedGoal,
    MaxSteps,
    /// The true pose left the map; no measurement exists there.
    LeftMap,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRAJECTORY_HEADER);
        s.push('\n');
        for r in &self.rows {
            let fields = [
                r.t,
                r.truth.x,
                r.truth.y,
                r.truth.theta,
                r.estimate.x,
                r.estimate.y,
                r.estimate.theta,
                r.cov_det,
                r.z,
                r.ess,
                r.entropy_bits,
                r.command.v,
                r.command.omega,
            ];
            s.push_str(&r.step.to_string());
            for f in fields {
                s.push(',');
                s.push_str(&format_sig(f));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, reason: &str| HarnessError::Trajectory { line, reason: reason.into() };
        match lines.next() {
            Some((_, h)) if h.trim_end() == TRAJECTORY_HEADER => {}
            _ => return Err(bad(1, "missing or unexpected header")),
        }
        let mut rows = Vec::new();
        for (k, raw) in lines {
            let line = k + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
            if parts.len() != 14 {
                return Err(bad(line, &format!("expected 14 fields, found {}", parts.len())));
            }
            let step: usize = parts[0].parse().map_err(|_| bad(line, "bad step index"))?;
            let mut v = [0.0f64; 13];
            for (slot, p) in v.iter_mut().zip(&parts[1..]) {
                *slot = p.parse().map_err(|_| bad(line, &format!("bad number {p:?}")))?;
            }
            rows.push(TrajectoryRow {
                step,
                t: v[0],
                truth: Pose { x: v[1], y: v[2], theta: v[3] },
                estimate: Pose { x: v[4], y: v[5], theta: v[6] },
                cov_det: v[7],
                z: v[8],
                ess: v[9],
                entropy_bits: v[10],
                command: Control::new(v[11], v[12]),
            });
        }
        Ok(Self { rows })
    }
}

/// Maps shared by every run of one configuration.
#[derive(Debug, Clone)]
pub struct Maps {
    pub magnetic: GridField<f64>,
    pub entropy: GridField<f64>,
}

impl Maps {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let magnetic = match &cfg.map {
            MapSource::Reference => synth_map(&reference_spec())?,
            MapSource::Synth(spec) => synth_map(spec)?,
            MapSource::GridFile(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                load_grid(&text)?
            }
        };
        let entropy = entropy_map(&magnetic, &cfg.entropy)?;
        Ok(Self { magnetic, entropy })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub plan: PlanResult<f64>,
    pub log: TrajectoryLog,
    pub termination: Termination,
}

/// The path the vehicle follows in the configured mode.
pub fn plan_for(cfg: &ExperimentConfig, maps: &Maps) -> Result<PlanResult<f64>, HarnessError> {
    let start = cfg.start.position();
    match cfg.mode {
        Mode::EntropyPlanner => Ok(plan_path(start, cfg.goal, &maps.entropy, &cfg.planner)?),
        Mode::StraightLine => {
            for (which, p) in [("start", start), ("goal", cfg.goal)] {
                if !maps.entropy.contains(p.x, p.y) {
                    return Err(PlanError::OutsideMap { which, x: p.x, y: p.y }.into());
                }
            }
            let path = Path::new(vec![start, cfg.goal]);
            Ok(PlanResult {
                path: path.clone(),
                converged: true,
                iterations: 0,
                consumed_points: Vec::new(),
                abandoned_points: Vec::new(),
                raw_path: path,
            })
        }
    }
}

/// Builds the maps, plans and follows the plan.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let maps = Maps::build(cfg)?;
    run_with_maps(cfg, &maps)
}

pub fn run_with_maps(cfg: &ExperimentConfig, maps: &Maps) -> Result<RunOutput, HarnessError> {
    let plan = plan_for(cfg, maps)?;
    let (log, termination) = follow_path(cfg, maps, &plan.path)?;
    Ok(RunOutput { plan, log, termination })
}

/// Closed-loop tracking of `path` from the configured start pose.
pub fn follow_path(
    cfg: &ExperimentConfig,
    maps: &Maps,
    path: &Path<f64>,
) -> Result<(TrajectoryLog, Termination), HarnessError> {
    let mut truth = cfg.start;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut filter =
        ParticleSet::init(cfg.start, &cfg.init_spread, cfg.particles, cfg.seed.wrapping_add(FILTER_SEED_OFFSET))?;
    let mut rows = Vec::new();
    let mut command: Option<Control<f64>> = None;
    let mut termination = Termination::MaxSteps;

    for step in 0..cfg.max_steps {
        if let Some(u) = command {
            truth = step_truth(&truth, u, cfg.dt, &cfg.motion_noise, &mut rng);
            filter.predict(u, cfg.dt, &cfg.motion_noise);
        }
        if !maps.magnetic.contains(truth.x, truth.y) {
            termination = Termination::LeftMap;
            break;
        }
        let z = measure(&maps.magnetic, &truth, &cfg.sensor_noise, &mut rng)?;
        filter.update_weights(z, &maps.magnetic, &cfg.sensor_noise);
        let ess = filter.ess();
        filter.resample(cfg.ess_fraction);
        let est = filter.estimate();
        let omega = stanley_control(&est.mean, path, &cfg.stanley)?;
        let u = Control::new(cfg.stanley.v, omega);
        rows.push(TrajectoryRow {
            step,
            t: step as f64 * cfg.dt,
            truth,
            estimate: est.mean,
            cov_det: est.cov_det,
            z,
            ess,
            entropy_bits: maps.entropy.interpolate_clamped(truth.x, truth.y),
            command: u,
        });
        command = Some(u);
        if truth.position().distance(cfg.goal) <= cfg.arrival_tolerance {
            termination = Termination::ReachedGoal;
            break;
        }
    }
    Ok((TrajectoryLog { rows }, termination))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub steps: usize,
    pub mean_cov_det: f64,
    pub max_cov_det: f64,
    pub mean_entropy: f64,
    pub median_entropy: f64,
    pub rms_position_error: f64,
    /// Distance travelled by the true pose, meters.
    pub path_length: f64,
    /// Final true position within `tolerance` of the goal.
    pub success: bool,
}

impl Summary {
    pub fn to_text(&self) -> String {
        format!(
            "steps={}\nmean_cov_det={}\nmax_cov_det={}\nmean_entropy_bits={}\nmedian_entropy_bits={}\n\
             rms_position_error={}\npath_length={}\nsuccess={}\n",
            self.steps,
            format_sig(self.mean_cov_det),
            format_sig(self.max_cov_det),
            format_sig(self.mean_entropy),
            format_sig(self.median_entropy),
            format_sig(self.rms_position_error),
            format_sig(self.path_length),
            self.success
        )
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(log: &TrajectoryLog, goal: Vec2<f64>, tolerance: f64) -> Result<Summary, HarnessError> {
    let rows = &log.rows;
    let last = rows.last().ok_or(HarnessError::EmptyLog)?;
    let n = rows.len() as f64;
    let entropies: Vec<f64> = rows.iter().map(|r| r.entropy_bits).collect();
    let sq_err: f64 = rows
        .iter()
        .map(|r| (r.truth.position() - r.estimate.position()).dot(r.truth.position() - r.estimate.position()))
        .sum();
    Ok(Summary {
        steps: rows.len(),
        mean_cov_det: rows.iter().map(|r| r.cov_det).sum::<f64>() / n,
        max_cov_det: rows.iter().map(|r| r.cov_det).fold(f64::NEG_INFINITY, f64::max),
        mean_entropy: entropies.iter().sum::<f64>() / n,
        median_entropy: median(&entropies),
        rms_position_error: (sq_err / n).sqrt(),
        path_length: rows.windows(2).map(|w| w[0].truth.position().distance(w[1].truth.position())).sum(),
        success: last.truth.position().distance(goal) <= tolerance,
    })
}
