//! Regular 2-D scalar grids: the magnetic anomaly map and the maps derived from it.
//!
//! Values sit at cell centers. Cell `(ix, iy)` is centered at
//! `(origin_x + ix * dx, origin_y + iy * dy)` and values are stored row-major with
//! row 0 at minimum y. Interpolation is bilinear over the hull of cell centers.

mod csv;
mod synth;

pub use csv::{load_grid, save_grid};
pub use synth::{synth_map, Anomaly, SynthSpec};

use thiserror::Error;

use crate::geometry::Vec2;
use crate::scalar::Scalar;

/// Slack, in cell units, allowed past the hull before a query is out of bounds.
const HULL_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid grid geometry: {0}")]
    Geometry(String),
    #[error("grid contains a non-finite value at cell ({ix}, {iy})")]
    NonFiniteValue { ix: usize, iy: usize },
    #[error("query point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: invalid number {text:?}")]
    BadNumber { line: usize, column: usize, text: String },
    #[error("line {line}, column {column}: non-finite value")]
    NonFiniteEntry { line: usize, column: usize },
    #[error("line {line}: expected {expected} data rows, found {found}")]
    RowCount { line: usize, expected: usize, found: usize },
    #[error("invalid synthetic map spec: {0}")]
    Synth(String),
    #[error("upsample factor must be at least 1")]
    ZeroFactor,
}

/// Physical unit carried by a grid's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Nanotesla,
    Bits,
    Dimensionless,
}

impl Unit {
    /// Tag used in the grid-CSV header.
    pub fn tag(self) -> &'static str {
        match self {
            Unit::Nanotesla => "nT",
            Unit::Bits => "bits",
            Unit::Dimensionless => "none",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "nT" => Some(Unit::Nanotesla),
            "bits" => Some(Unit::Bits),
            "none" => Some(Unit::Dimensionless),
            _ => None,
        }
    }
}

/// Axis-aligned regular grid of finite scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    origin_x: T,
    origin_y: T,
    dx: T,
    dy: T,
    nx: usize,
    ny: usize,
    values: Vec<T>,
    unit: Unit,
}

impl<T: Scalar> GridField<T> {
    /// Builds a grid from row-major values (row 0 at minimum y).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        origin_x: T,
        origin_y: T,
        dx: T,
        dy: T,
        nx: usize,
        ny: usize,
        values: Vec<T>,
        unit: Unit,
    ) -> Result<Self, GridError> {
        if !(dx > T::zero() && dy > T::zero()) || !dx.is_finite() || !dy.is_finite() {
            return Err(GridError::Geometry(format!("spacing must be positive, got dx={dx} dy={dy}")));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(GridError::Geometry("origin must be finite".into()));
        }
        if nx < 2 || ny < 2 {
            return Err(GridError::Geometry(format!("need nx >= 2 and ny >= 2, got {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(GridError::Geometry(format!(
                "expected {} values for {nx}x{ny}, got {}",
                nx * ny,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteValue { ix: k % nx, iy: k / nx });
        }
        Ok(Self { origin_x, origin_y, dx, dy, nx, ny, values, unit })
    }

    /// Builds a grid by evaluating `f(x, y)` at every cell center.
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        origin_x: T,
        origin_y: T,
        dx: T,
        dy: T,
        nx: usize,
        ny: usize,
        unit: Unit,
        mut f: impl FnMut(T, T) -> T,
    ) -> Result<Self, GridError> {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let y = origin_y + T::lit(iy as f64) * dy;
            for ix in 0..nx {
                values.push(f(origin_x + T::lit(ix as f64) * dx, y));
            }
        }
        Self::new(origin_x, origin_y, dx, dy, nx, ny, values, unit)
    }

    pub fn origin_x(&self) -> T {
        self.origin_x
    }
    pub fn origin_y(&self) -> T {
        self.origin_y
    }
    pub fn dx(&self) -> T {
        self.dx
    }
    pub fn dy(&self) -> T {
        self.dy
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn unit(&self) -> Unit {
        self.unit
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> T {
        self.values[iy * self.nx + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec2<T> {
        Vec2::new(self.origin_x + T::lit(ix as f64) * self.dx, self.origin_y + T::lit(iy as f64) * self.dy)
    }

    pub fn x_max(&self) -> T {
        self.origin_x + T::lit((self.nx - 1) as f64) * self.dx
    }

    pub fn y_max(&self) -> T {
        self.origin_y + T::lit((self.ny - 1) as f64) * self.dy
    }

    /// Same geometry, new values and unit.
    pub fn with_values(&self, values: Vec<T>, unit: Unit) -> Result<Self, GridError> {
        Self::new(self.origin_x, self.origin_y, self.dx, self.dy, self.nx, self.ny, values, unit)
    }

    /// Applies `f` to every value.
    pub fn map_values(&self, f: impl Fn(T) -> T, unit: Unit) -> Result<Self, GridError> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect(), unit)
    }

    pub fn contains(&self, x: T, y: T) -> bool {
        self.fractional_index(x, y).is_some()
    }

    /// Nearest point of the cell-center hull.
    pub fn clamp_to_hull(&self, x: T, y: T) -> Vec2<T> {
        Vec2::new(x.max(self.origin_x).min(self.x_max()), y.max(self.origin_y).min(self.y_max()))
    }

    fn fractional_index(&self, x: T, y: T) -> Option<(T, T)> {
        let slack = T::lit(HULL_SLACK);
        let fx = (x - self.origin_x) / self.dx;
        let fy = (y - self.origin_y) / self.dy;
        let max_x = T::lit((self.nx - 1) as f64);
        let max_y = T::lit((self.ny - 1) as f64);
        // NaN queries fail these comparisons and land out of bounds.
        if fx >= -slack && fx <= max_x + slack && fy >= -slack && fy <= max_y + slack {
            Some((fx.max(T::zero()).min(max_x), fy.max(T::zero()).min(max_y)))
        } else {
            None
        }
    }

    /// Bilinear interpolation at fractional cell indices already inside the hull.
    fn sample_fractional(&self, fx: T, fy: T) -> T {
        let ix = fx.floor().to_usize().unwrap_or(0).min(self.nx - 2);
        let iy = fy.floor().to_usize().unwrap_or(0).min(self.ny - 2);
        let tx = fx - T::lit(ix as f64);
        let ty = fy - T::lit(iy as f64);
        let one = T::one();
        let v00 = self.value(ix, iy);
        let v10 = self.value(ix + 1, iy);
        let v01 = self.value(ix, iy + 1);
        let v11 = self.value(ix + 1, iy + 1);
        let bottom = (one - tx) * v00 + tx * v10;
        let top = (one - tx) * v01 + tx * v11;
        (one - ty) * bottom + ty * top
    }

    /// Bilinear interpolation of the four surrounding cell-center values.
    pub fn interpolate(&self, x: T, y: T) -> Result<T, GridError> {
        match self.fractional_index(x, y) {
            Some((fx, fy)) => Ok(self.sample_fractional(fx, fy)),
            None => {
                Err(GridError::OutOfBounds { x: x.to_f64().unwrap_or(f64::NAN), y: y.to_f64().unwrap_or(f64::NAN) })
            }
        }
    }

    /// Interpolates after clamping the query onto the hull.
    pub fn interpolate_clamped(&self, x: T, y: T) -> T {
        let p = self.clamp_to_hull(x, y);
        let fx = (p.x - self.origin_x) / self.dx;
        let fy = (p.y - self.origin_y) / self.dy;
        let max_x = T::lit((self.nx - 1) as f64);
        let max_y = T::lit((self.ny - 1) as f64);
        self.sample_fractional(fx.max(T::zero()).min(max_x), fy.max(T::zero()).min(max_y))
    }

    /// Central-difference gradient of the interpolated field, step of one cell,
    /// shrunk to one-sided differences at the hull boundary.
    pub fn gradient_at(&self, x: T, y: T) -> Result<Vec2<T>, GridError> {
        self.interpolate(x, y)?;
        let p = self.clamp_to_hull(x, y);
        let xl = (p.x - self.dx).max(self.origin_x);
        let xr = (p.x + self.dx).min(self.x_max());
        let yl = (p.y - self.dy).max(self.origin_y);
        let yr = (p.y + self.dy).min(self.y_max());
        let gx = (self.interpolate_clamped(xr, p.y) - self.interpolate_clamped(xl, p.y)) / (xr - xl);
        let gy = (self.interpolate_clamped(p.x, yr) - self.interpolate_clamped(p.x, yl)) / (yr - yl);
        Ok(Vec2::new(gx, gy))
    }

    /// Gradient magnitude at every cell center, row-major.
    pub fn gradient_magnitudes(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.values.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let (l, r) = (ix.saturating_sub(1), (ix + 1).min(self.nx - 1));
                let (b, t) = (iy.saturating_sub(1), (iy + 1).min(self.ny - 1));
                let gx = (self.value(r, iy) - self.value(l, iy)) / (T::lit((r - l) as f64) * self.dx);
                let gy = (self.value(ix, t) - self.value(ix, b)) / (T::lit((t - b) as f64) * self.dy);
                out.push(gx.hypot(gy));
            }
        }
        out
    }

    /// Refines the grid by `factor`, keeping the same cell-center hull.
    pub fn upsample(&self, factor: usize) -> Result<Self, GridError> {
        if factor == 0 {
            return Err(GridError::ZeroFactor);
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let nx = (self.nx - 1) * factor + 1;
        let ny = (self.ny - 1) * factor + 1;
        let f = T::lit(factor as f64);
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            // Exact integer division keeps original nodes on integer fractional indices.
            let fy = T::lit((iy / factor) as f64) + T::lit((iy % factor) as f64) / f;
            for ix in 0..nx {
                let fx = T::lit((ix / factor) as f64) + T::lit((ix % factor) as f64) / f;
                values.push(self.sample_fractional(fx, fy));
            }
        }
        Self::new(self.origin_x, self.origin_y, self.dx / f, self.dy / f, nx, ny, values, self.unit)
    }
}
