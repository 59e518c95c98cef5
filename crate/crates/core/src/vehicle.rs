//! Ground-truth robot, magnetometer synthesis and Stanley path tracking.

use rand::Rng;
use thiserror::Error;

use crate::geometry::{Control, Path, Pose, Vec2};
use crate::grid::{GridError, GridField};
use crate::localization::{apply_motion, MotionNoise, SensorNoise};
use crate::scalar::{wrap_angle, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("path needs at least two waypoints, got {0}")]
    ShortPath(usize),
    #[error("invalid Stanley configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StanleyConfig<T> {
    /// Cross-track gain.
    pub k_s: T,
    /// Commanded linear speed, m/s.
    pub v: T,
    /// Yaw-rate saturation, rad/s.
    pub omega_max: T,
}

impl<T: Scalar> Default for StanleyConfig<T> {
    fn default() -> Self {
        Self { k_s: T::lit(0.001), v: T::lit(0.15), omega_max: T::one() }
    }
}

impl<T: Scalar> StanleyConfig<T> {
    pub fn validate(&self) -> Result<(), VehicleError> {
        if !(self.v > T::zero()) {
            return Err(VehicleError::Config("v must be positive".into()));
        }
        if !(self.omega_max > T::zero()) {
            return Err(VehicleError::Config("omega_max must be positive".into()));
        }
        if !(self.k_s >= T::zero()) {
            return Err(VehicleError::Config("k_s must be non-negative".into()));
        }
        Ok(())
    }
}

/// Advances the true pose with noise drawn from `rng`.
pub fn step_truth<T: Scalar, R: Rng + ?Sized>(
    pose: &Pose<T>,
    u: Control<T>,
    dt: T,
    noise: &MotionNoise<T>,
    rng: &mut R,
) -> Pose<T> {
    apply_motion(pose, u, dt, noise.sample(rng))
}

/// Total-field reading at `pose`: the interpolated map plus Gaussian noise.
pub fn measure<T: Scalar, R: Rng + ?Sized>(
    map: &GridField<T>,
    pose: &Pose<T>,
    noise: &SensorNoise<T>,
    rng: &mut R,
) -> Result<T, VehicleError> {
    let m = map.interpolate(pose.x, pose.y)?;
    Ok(m + noise.sigma * T::standard_normal(rng))
}

/// Closest point of a polyline to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathProjection<T> {
    /// Index of the owning segment's first waypoint.
    pub index: usize,
    pub point: Vec2<T>,
    /// Signed distance, positive when the query is left of the segment direction.
    pub cross_track: T,
    /// Heading of the owning segment, radians.
    pub tangent_heading: T,
}

pub fn nearest_path_point<T: Scalar>(path: &Path<T>, p: Vec2<T>) -> Result<PathProjection<T>, VehicleError> {
    if path.len() < 2 {
        return Err(VehicleError::ShortPath(path.len()));
    }
    let mut best: Option<(T, PathProjection<T>)> = None;
    for (k, w) in path.points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let seg = b - a;
        let len2 = seg.dot(seg);
        if len2 == T::zero() {
            continue;
        }
        let t = ((p - a).dot(seg) / len2).max(T::zero()).min(T::one());
        let point = a + seg * t;
        let d = p.distance(point);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            let side = seg.cross(p - a);
            let cross_track = if side < T::zero() { -d } else { d };
            best = Some((d, PathProjection { index: k, point, cross_track, tangent_heading: seg.heading() }));
        }
    }
    // All segments degenerate: every waypoint coincides.
    best.map(|(_, proj)| proj).ok_or(VehicleError::ShortPath(1))
}

/// `heading_error + atan(k_s * cross_track / v)`, where `cross_track` is positive
/// when the path lies to the robot's left, saturated to `omega_max`.
pub fn stanley_law<T: Scalar>(heading_error: T, cross_track: T, cfg: &StanleyConfig<T>) -> T {
    let omega = heading_error + (cfg.k_s * cross_track / cfg.v).atan();
    omega.max(-cfg.omega_max).min(cfg.omega_max)
}

/// Yaw-rate command steering the estimated pose onto the path.
pub fn stanley_control<T: Scalar>(est: &Pose<T>, path: &Path<T>, cfg: &StanleyConfig<T>) -> Result<T, VehicleError> {
    let proj = nearest_path_point(path, est.position())?;
    let heading_error = wrap_angle(proj.tangent_heading - est.theta);
    // Robot left of the path (positive offset) must steer right.
    Ok(stanley_law(heading_error, -proj.cross_track, cfg))
}
