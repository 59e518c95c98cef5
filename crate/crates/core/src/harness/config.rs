//! Experiment configuration in the flat `key = value` format.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use crate::entropy::EntropyConfig;
use crate::geometry::{Pose, Vec2};
use crate::grid::SynthSpec;
use crate::kv::{parse_entries, Entry, KvError};
use crate::localization::{MotionNoise, SensorNoise};
use crate::planner::PlannerConfig;
use crate::scalar::format_sig;
use crate::vehicle::StanleyConfig;

/// The built-in reference map: a regional slope plus one cluster of narrow sinks.
pub const REFERENCE_SPEC: &str = include_str!("../../data/reference.synth");

pub fn reference_spec() -> SynthSpec<f64> {
    SynthSpec::parse(REFERENCE_SPEC).expect("bundled reference spec is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    EntropyPlanner,
    StraightLine,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::EntropyPlanner => "entropy_planner",
            Mode::StraightLine => "straight_line",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy_planner" => Ok(Mode::EntropyPlanner),
            "straight_line" => Ok(Mode::StraightLine),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Reference,
    GridFile(PathBuf),
    Synth(SynthSpec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub map: MapSource,
    pub entropy: EntropyConfig<f64>,
    pub planner: PlannerConfig<f64>,
    pub stanley: StanleyConfig<f64>,
    pub motion_noise: MotionNoise<f64>,
    pub sensor_noise: SensorNoise<f64>,
    /// Standard deviations of the initial particle cloud around the start pose.
    pub init_spread: MotionNoise<f64>,
    pub particles: usize,
    pub ess_fraction: f64,
    pub start: Pose<f64>,
    pub goal: Vec2<f64>,
    pub dt: f64,
    pub max_steps: usize,
    /// Closed-loop arrival radius around the goal, meters.
    pub arrival_tolerance: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            map: MapSource::Reference,
            entropy: EntropyConfig::new(0.2, 2),
            planner: PlannerConfig::default(),
            stanley: StanleyConfig::default(),
            motion_noise: MotionNoise::new(0.01, 0.01, 0.01745f64.to_radians()),
            sensor_noise: SensorNoise { sigma: 100.0 },
            init_spread: MotionNoise::new(0.01, 0.01, 0.01745f64.to_radians()),
            particles: 1000,
            ess_fraction: 0.5,
            start: Pose::new(-2.75, -1.25, 60f64.to_radians()),
            goal: Vec2::new(2.5, 0.0),
            dt: 0.1,
            max_steps: 2000,
            arrival_tolerance: 0.5,
            seed: 0,
            mode: Mode::EntropyPlanner,
        }
    }
}

const KEYS: &[&str] = &[
    "map_file",
    "synth_spec",
    "bin_size",
    "window",
    "step_size",
    "goal_tolerance",
    "max_iterations",
    "capture_radius",
    "rho_floor",
    "smoothing_window",
    "k_sigma",
    "max_points",
    "k_s",
    "speed",
    "omega_max",
    "sigma_x",
    "sigma_y",
    "sigma_theta",
    "sensor_sigma",
    "init_sigma_x",
    "init_sigma_y",
    "init_sigma_theta",
    "particles",
    "ess_fraction",
    "start",
    "start_yaw_deg",
    "goal",
    "dt",
    "max_steps",
    "arrival_tolerance",
    "seed",
    "mode",
];

impl ExperimentConfig {
    /// Parses a config document. Relative map paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &FsPath) -> Result<Self, KvError> {
        let entries = parse_entries(text, KEYS, &[])?;
        let mut cfg = Self::default();
        let mut yaw_deg = None;
        for e in &entries {
            apply(&mut cfg, e, base_dir, &mut yaw_deg)?;
        }
        if let Some(deg) = yaw_deg {
            cfg.start = Pose::new(cfg.start.x, cfg.start.y, f64::to_radians(deg));
        }
        if entries.iter().any(|e| e.key == "map_file") && entries.iter().any(|e| e.key == "synth_spec") {
            return Err(KvError::Invalid("map_file and synth_spec are mutually exclusive".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), KvError> {
        let inv = |m: String| Err(KvError::Invalid(m));
        self.entropy.validate().map_err(|e| KvError::Invalid(e.to_string()))?;
        self.planner.validate().map_err(|e| KvError::Invalid(e.to_string()))?;
        self.stanley.validate().map_err(|e| KvError::Invalid(e.to_string()))?;
        for n in [&self.motion_noise, &self.init_spread] {
            n.validate().map_err(|e| KvError::Invalid(e.to_string()))?;
        }
        if !(self.sensor_noise.sigma > 0.0 && self.sensor_noise.sigma.is_finite()) {
            return inv("sensor_sigma must be positive".into());
        }
        if self.particles == 0 {
            return inv("particles must be at least 1".into());
        }
        if !(self.ess_fraction > 0.0 && self.ess_fraction <= 1.0) {
            return inv("ess_fraction must lie in (0, 1]".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return inv("dt must be positive".into());
        }
        if self.max_steps == 0 {
            return inv("max_steps must be at least 1".into());
        }
        if !(self.arrival_tolerance > 0.0) {
            return inv("arrival_tolerance must be positive".into());
        }
        let finite = [self.start.x, self.start.y, self.start.theta, self.goal.x, self.goal.y];
        if !finite.iter().all(|v| v.is_finite()) {
            return inv("start and goal must be finite".into());
        }
        Ok(())
    }

    /// Canonical text form; parsing it reproduces the config.
    pub fn to_text(&self) -> String {
        let f = |v: f64| format_sig(v);
        let mut s = String::new();
        match &self.map {
            MapSource::Reference => s.push_str("# map: built-in reference\n"),
            MapSource::GridFile(p) => s.push_str(&format!("map_file = {}\n", p.display())),
            MapSource::Synth(_) => s.push_str("# map: inline synthetic spec (not representable)\n"),
        }
        let p = &self.planner;
        let lines = [
            ("bin_size", f(self.entropy.bin_size)),
            ("window", self.entropy.window.to_string()),
            ("step_size", f(p.step_size)),
            ("goal_tolerance", f(p.goal_tolerance)),
            ("max_iterations", p.max_iterations.to_string()),
            ("capture_radius", f(p.capture_radius)),
            ("rho_floor", f(p.rho_floor)),
            ("smoothing_window", p.smoothing_window.to_string()),
            ("k_sigma", f(p.k_sigma)),
            ("max_points", p.max_points.to_string()),
            ("k_s", f(self.stanley.k_s)),
            ("speed", f(self.stanley.v)),
            ("omega_max", f(self.stanley.omega_max)),
            ("sigma_x", f(self.motion_noise.sigma_x)),
            ("sigma_y", f(self.motion_noise.sigma_y)),
            ("sigma_theta", f(self.motion_noise.sigma_theta)),
            ("sensor_sigma", f(self.sensor_noise.sigma)),
            ("init_sigma_x", f(self.init_spread.sigma_x)),
            ("init_sigma_y", f(self.init_spread.sigma_y)),
            ("init_sigma_theta", f(self.init_spread.sigma_theta)),
            ("particles", self.particles.to_string()),
            ("ess_fraction", f(self.ess_fraction)),
            ("start", format!("{}, {}", f(self.start.x), f(self.start.y))),
            ("start_yaw_deg", f(self.start.theta.to_degrees())),
            ("goal", format!("{}, {}", f(self.goal.x), f(self.goal.y))),
            ("dt", f(self.dt)),
            ("max_steps", self.max_steps.to_string()),
            ("arrival_tolerance", f(self.arrival_tolerance)),
            ("seed", self.seed.to_string()),
            ("mode", self.mode.to_string()),
        ];
        for (k, v) in lines {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

fn apply(cfg: &mut ExperimentConfig, e: &Entry, base: &FsPath, yaw_deg: &mut Option<f64>) -> Result<(), KvError> {
    match e.key.as_str() {
        "map_file" => cfg.map = MapSource::GridFile(base.join(&e.value)),
        "synth_spec" => {
            let path = base.join(&e.value);
            let text = std::fs::read_to_string(&path)
                .map_err(|err| KvError::Invalid(format!("cannot read {}: {err}", path.display())))?;
            cfg.map = MapSource::Synth(SynthSpec::parse(&text)?);
        }
        "bin_size" => cfg.entropy.bin_size = e.parse()?,
        "window" => cfg.entropy.window = e.parse()?,
        "step_size" => cfg.planner.step_size = e.parse()?,
        "goal_tolerance" => cfg.planner.goal_tolerance = e.parse()?,
        "max_iterations" => cfg.planner.max_iterations = e.parse()?,
        "capture_radius" => cfg.planner.capture_radius = e.parse()?,
        "rho_floor" => cfg.planner.rho_floor = e.parse()?,
        "smoothing_window" => cfg.planner.smoothing_window = e.parse()?,
        "k_sigma" => cfg.planner.k_sigma = e.parse()?,
        "max_points" => cfg.planner.max_points = e.parse()?,
        "k_s" => cfg.stanley.k_s = e.parse()?,
        "speed" => cfg.stanley.v = e.parse()?,
        "omega_max" => cfg.stanley.omega_max = e.parse()?,
        "sigma_x" => cfg.motion_noise.sigma_x = e.parse()?,
        "sigma_y" => cfg.motion_noise.sigma_y = e.parse()?,
        "sigma_theta" => cfg.motion_noise.sigma_theta = e.parse()?,
        "sensor_sigma" => cfg.sensor_noise.sigma = e.parse()?,
        "init_sigma_x" => cfg.init_spread.sigma_x = e.parse()?,
        "init_sigma_y" => cfg.init_spread.sigma_y = e.parse()?,
        "init_sigma_theta" => cfg.init_spread.sigma_theta = e.parse()?,
        "particles" => cfg.particles = e.parse()?,
        "ess_fraction" => cfg.ess_fraction = e.parse()?,
        "start" => {
            let v: Vec<f64> = e.parse_list(2)?;
            cfg.start = Pose::new(v[0], v[1], cfg.start.theta);
        }
        "start_yaw_deg" => *yaw_deg = Some(e.parse()?),
        "goal" => {
            let v: Vec<f64> = e.parse_list(2)?;
            cfg.goal = Vec2::new(v[0], v[1]);
        }
        "dt" => cfg.dt = e.parse()?,
        "max_steps" => cfg.max_steps = e.parse()?,
        "arrival_tolerance" => cfg.arrival_tolerance = e.parse()?,
        "seed" => cfg.seed = e.parse()?,
        "mode" => cfg.mode = e.parse()?,
        _ => unreachable!("key filtered by parse_entries"),
    }
    Ok(())
}
