//! Attractive potential-field global planner.
//!
//! The goal and every active low-entropy point attract the path. Each attractor
//! contributes `0.5 * weight * distance`; the goal weight `10 * exp(1 / distance)`
//! grows near the goal, entropy-point weights come from their window entropy.
//! Descent follows the frozen-weight gradient (weights evaluated at the current
//! position and held constant) with a fixed step. Points are consumed once the
//! path passes within the capture radius, so the descent cannot settle on a
//! permanent minimizer between attractors.

use thiserror::Error;

use crate::entropy::{select_low_entropy_points, EntropyPoint, WeightGuard};
use crate::geometry::{Path, Vec2};
use crate::grid::GridField;
use crate::scalar::{format_sig, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("{which} ({x}, {y}) lies outside the entropy map extent")]
    OutsideMap { which: &'static str, x: f64, y: f64 },
    #[error("smoothing window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig<T> {
    /// Descent step, meters.
    pub step_size: T,
    pub goal_tolerance: T,
    pub max_iterations: usize,
    /// Distance at which an entropy point is consumed, meters.
    pub capture_radius: T,
    /// Floor on the goal distance inside the goal weight, meters.
    pub rho_floor: T,
    /// Moving-average window in waypoints, odd.
    pub smoothing_window: usize,
    pub k_sigma: T,
    pub max_points: usize,
}

impl<T: Scalar> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            step_size: T::lit(0.05),
            goal_tolerance: T::lit(0.1),
            max_iterations: 20_000,
            capture_radius: T::lit(0.3),
            rho_floor: T::lit(1e-3),
            smoothing_window: 9,
            k_sigma: T::lit(5.0),
            max_points: crate::entropy::DEFAULT_MAX_POINTS,
        }
    }
}

impl<T: Scalar> PlannerConfig<T> {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::Config(m.into()));
        if !(self.step_size > T::zero()) {
            return bad("step_size must be positive");
        }
        if !(self.goal_tolerance > T::zero()) {
            return bad("goal_tolerance must be positive");
        }
        if !(self.capture_radius >= self.step_size) {
            return bad("capture_radius must be at least step_size");
        }
        if !(self.rho_floor > T::zero()) {
            return bad("rho_floor must be positive");
        }
        if !(self.k_sigma >= T::zero()) {
            return bad("k_sigma must be non-negative");
        }
        if self.smoothing_window == 0 || self.smoothing_window.is_multiple_of(2) {
            return Err(PlanError::EvenWindow(self.smoothing_window));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult<T> {
    pub path: Path<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Points captured within the capture radius, in visit order.
    pub consumed_points: Vec<EntropyPoint<T>>,
    /// Points dropped by the oscillation escape without being reached.
    pub abandoned_points: Vec<EntropyPoint<T>>,
    /// Waypoints before smoothing.
    pub raw_path: Path<T>,
}

impl<T: Scalar> PlanResult<T> {
    /// Side-car `key=value` block describing the plan.
    pub fn metadata(&self) -> String {
        format!(
            "converged={}\niterations={}\nconsumed_points={}\nabandoned_points={}\nwaypoints={}\npath_length={}\n",
            self.converged,
            self.iterations,
            self.consumed_points.len(),
            self.abandoned_points.len(),
            self.path.len(),
            format_sig(self.path.length())
        )
    }
}

/// `10 * exp(1 / max(rho, rho_floor))`, saturating at the largest finite value.
pub fn goal_weight<T: Scalar>(rho: T, rho_floor: T) -> T {
    let w = T::lit(10.0) * (T::one() / rho.max(rho_floor)).exp();
    if w.is_finite() {
        w
    } else {
        T::max_value()
    }
}

pub fn goal_potential<T: Scalar>(q: Vec2<T>, goal: Vec2<T>, rho_floor: T) -> T {
    let rho = q.distance(goal);
    if rho == T::zero() {
        return T::zero();
    }
    T::lit(0.5) * goal_weight(rho, rho_floor) * rho
}

pub fn entropy_potential<T: Scalar>(q: Vec2<T>, points: &[EntropyPoint<T>]) -> T {
    points.iter().map(|p| T::lit(0.5) * p.weight * q.distance(Vec2::new(p.x, p.y))).sum()
}

fn unit_from<T: Scalar>(attractor: Vec2<T>, q: Vec2<T>) -> Vec2<T> {
    let d = q - attractor;
    let n = d.norm();
    if n > T::zero() {
        d * (T::one() / n)
    } else {
        Vec2::default()
    }
}

/// Unit descent direction: the negated, normalized frozen-weight gradient.
/// Falls back to heading straight for the goal when the forces cancel.
pub fn descent_direction<T: Scalar>(q: Vec2<T>, goal: Vec2<T>, points: &[EntropyPoint<T>], rho_floor: T) -> Vec2<T> {
    let half = T::lit(0.5);
    let rho_g = q.distance(goal);
    let u_goal = unit_from(goal, q);
    let mut g = u_goal * (half * goal_weight(rho_g, rho_floor));
    for p in points {
        g = g + unit_from(Vec2::new(p.x, p.y), q) * (half * p.weight);
    }
    let n = g.norm();
    if n > T::zero() && n.is_finite() {
        g * (-T::one() / n)
    } else {
        u_goal * -T::one()
    }
}

/// Centered moving average with a window that shrinks symmetrically at the ends.
pub fn smooth_path<T: Scalar>(path: &Path<T>, window: usize) -> Result<Path<T>, PlanError> {
    if window.is_multiple_of(2) {
        return Err(PlanError::EvenWindow(window));
    }
    let n = path.len();
    let half = window / 2;
    let pts = &path.points;
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            if h == 0 {
                return pts[i];
            }
            let span = &pts[i - h..=i + h];
            let c = T::one() / T::lit(span.len() as f64);
            let sx: T = span.iter().map(|p| p.x).sum();
            let sy: T = span.iter().map(|p| p.y).sum();
            Vec2::new(sx * c, sy * c)
        })
        .collect())
}

/// Descends from `start` toward `goal` through the given entropy points.
pub fn plan_with_points<T: Scalar>(
    start: Vec2<T>,
    goal: Vec2<T>,
    points: &[EntropyPoint<T>],
    cfg: &PlannerConfig<T>,
) -> Result<PlanResult<T>, PlanError> {
    cfg.validate()?;
    let mut active: Vec<EntropyPoint<T>> = points.to_vec();
    let mut consumed = Vec::new();
    let mut abandoned = Vec::new();
    let mut raw = vec![start];
    let mut q = start;
    let mut iterations = 0;
    let mut converged = q.distance(goal) <= cfg.goal_tolerance;
    let osc_limit = cfg.step_size / T::lit(10.0);

    let capture = |q: Vec2<T>, active: &mut Vec<EntropyPoint<T>>, consumed: &mut Vec<EntropyPoint<T>>| {
        let mut k = 0;
        while k < active.len() {
            if q.distance(Vec2::new(active[k].x, active[k].y)) <= cfg.capture_radius {
                consumed.push(active.remove(k));
            } else {
                k += 1;
            }
        }
    };
    capture(q, &mut active, &mut consumed);

    while !converged && iterations < cfg.max_iterations {
        let dir = descent_direction(q, goal, &active, cfg.rho_floor);
        q = q + dir * cfg.step_size;
        iterations += 1;
        raw.push(q);
        capture(q, &mut active, &mut consumed);
        if raw.len() >= 3 && !active.is_empty() && q.distance(raw[raw.len() - 3]) < osc_limit {
            // Oscillating between attractors: give up on the nearest one.
            let nearest = (0..active.len())
                .min_by(|&a, &b| {
                    let da = q.distance(Vec2::new(active[a].x, active[a].y));
                    let db = q.distance(Vec2::new(active[b].x, active[b].y));
                    da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("active is non-empty");
            abandoned.push(active.remove(nearest));
        }
        converged = q.distance(goal) <= cfg.goal_tolerance;
    }

    let raw_path = Path::new(raw);
    let mut pts = smooth_path(&raw_path, cfg.smoothing_window)?.points;
    if converged && pts.last() != Some(&goal) && pts.len() > 1 {
        pts.push(goal);
    }
    Ok(PlanResult {
        path: Path::new(pts),
        converged,
        iterations,
        consumed_points: consumed,
        abandoned_points: abandoned,
        raw_path,
    })
}

/// Plans on an entropy map: selects its low-entropy points and descends.
pub fn plan_path<T: Scalar>(
    start: Vec2<T>,
    goal: Vec2<T>,
    emap: &GridField<T>,
    cfg: &PlannerConfig<T>,
) -> Result<PlanResult<T>, PlanError> {
    cfg.validate()?;
    for (which, p) in [("start", start), ("goal", goal)] {
        if !emap.contains(p.x, p.y) {
            return Err(PlanError::OutsideMap {
                which,
                x: p.x.to_f64().unwrap_or(f64::NAN),
                y: p.y.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let points = select_low_entropy_points(emap, cfg.k_sigma, cfg.max_points, &WeightGuard::default());
    plan_with_points(start, goal, &points, cfg)
}

/// Path CSV with header `x,y`.
pub fn path_to_csv<T: Scalar>(path: &Path<T>) -> String {
    let mut s = String::from("x,y\n");
    for p in &path.points {
        s.push_str(&format!("{},{}\n", format_sig(p.x), format_sig(p.y)));
    }
    s
}
