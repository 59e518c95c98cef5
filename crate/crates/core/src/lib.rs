//! Informative global path planning over magnetic anomaly maps.
//!
//! A magnetic map is turned into a sliding-window entropy map; low-entropy
//! windows become attractors for a potential-field planner; the planned path is
//! then followed by a simulated unicycle under Stanley control while a particle
//! filter localizes it from total-field magnetometer readings.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases below
//! fix the double-precision types used by the experiment harness and CLI.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Grid code indexes several parallel arrays by cell.
#![allow(clippy::needless_range_loop)]

pub mod entropy;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod kv;
pub mod localization;
pub mod planner;
pub mod scalar;
pub mod vehicle;

pub use entropy::{EntropyConfig, EntropyError, EntropyPoint};
pub use geometry::{Control, Path, Pose, Vec2};
pub use grid::{GridError, GridField, SynthSpec, Unit};
pub use localization::{MotionNoise, ParticleSet, PoseEstimate, SensorNoise};
pub use planner::{PlanError, PlanResult, PlannerConfig};
pub use scalar::Scalar;
pub use vehicle::{StanleyConfig, VehicleError};

pub type Grid64 = GridField<f64>;
pub type Grid32 = GridField<f32>;
pub type SynthSpec64 = SynthSpec<f64>;
pub type EntropyConfig64 = EntropyConfig<f64>;
pub type EntropyPoint64 = EntropyPoint<f64>;
pub type Pose64 = Pose<f64>;
pub type Path64 = Path<f64>;
pub type Vec2d = Vec2<f64>;
pub type PlannerConfig64 = PlannerConfig<f64>;
pub type PlanResult64 = PlanResult<f64>;
pub type ParticleSet64 = ParticleSet<f64>;
pub type MotionNoise64 = MotionNoise<f64>;
pub type SensorNoise64 = SensorNoise<f64>;
pub type StanleyConfig64 = StanleyConfig<f64>;
