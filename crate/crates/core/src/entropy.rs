//! Sliding-window Shannon entropy maps and low-entropy attraction points.
//!
//! Pipeline: bin the magnetic map into square bins (bin mean), min-max normalize
//! the bins to [0, 1], then for every `r x r` window of bins treat the floored,
//! normalized values as a probability distribution and take its entropy in bits.
//! Low-entropy windows mark strong relative intensity variation, i.e. places
//! where a magnetometer reading pins down position well.

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{GridError, GridField, Unit};
use crate::scalar::{format_sig, Scalar};

/// Default probability floor applied to each window cell before normalization.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-12;
/// Half-width of the excluded band around `log2(H) = 0` in [`entropy_weight`].
pub const DEFAULT_LOG_GUARD: f64 = 1e-6;
/// Upper cap on a single entropy point's attraction weight.
pub const DEFAULT_WEIGHT_CAP: f64 = 1e3;
pub const DEFAULT_MAX_POINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntropyError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("bin size {bin_size} is smaller than the map spacing {spacing}")]
    BinTooSmall { bin_size: f64, spacing: f64 },
    #[error("map is constant; normalization needs at least two distinct values")]
    DegenerateField,
    #[error("window of size {r} anchored at ({i}, {j}) exceeds a {nx}x{ny} grid")]
    WindowOutOfBounds { i: usize, j: usize, r: usize, nx: usize, ny: usize },
    #[error("binned map is {nx}x{ny}, too small for a window of size {r}")]
    FieldTooSmall { nx: usize, ny: usize, r: usize },
    #[error("entropy must be positive to compute a weight, got {0}")]
    NonPositiveEntropy(f64),
    #[error("invalid entropy configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyConfig<T> {
    /// Bin edge length, meters.
    pub bin_size: T,
    /// Window edge length in bins; a window holds `r * r` bins.
    pub window: usize,
    pub probability_floor: T,
}

impl<T: Scalar> EntropyConfig<T> {
    pub fn new(bin_size: T, window: usize) -> Self {
        Self { bin_size, window, probability_floor: T::lit(DEFAULT_PROBABILITY_FLOOR) }
    }

    pub fn validate(&self) -> Result<(), EntropyError> {
        if !(self.bin_size > T::zero()) || !self.bin_size.is_finite() {
            return Err(EntropyError::Config("bin size must be positive".into()));
        }
        if self.window < 2 {
            return Err(EntropyError::Config("window size must be at least 2".into()));
        }
        if !(self.probability_floor > T::zero()) {
            return Err(EntropyError::Config("probability floor must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for EntropyConfig<T> {
    fn default() -> Self {
        Self::new(T::lit(0.2), 2)
    }
}

/// Guard constants for [`entropy_weight`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightGuard<T> {
    pub log_guard: T,
    pub weight_cap: T,
}

impl<T: Scalar> Default for WeightGuard<T> {
    fn default() -> Self {
        Self { log_guard: T::lit(DEFAULT_LOG_GUARD), weight_cap: T::lit(DEFAULT_WEIGHT_CAP) }
    }
}

/// A low-entropy map location that attracts the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPoint<T> {
    pub x: T,
    pub y: T,
    /// Window entropy, bits.
    pub entropy: T,
    pub weight: T,
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn bin_index<T: Scalar>(cell: usize, spacing: T, bin_size: T) -> usize {
    // Cells centered at (cell + 1/2) * spacing from the grid's lower edge.
    ((T::lit(cell as f64) + T::lit(0.5)) * spacing / bin_size).floor().to_usize().unwrap_or(0)
}

/// Averages source cells into square bins of edge `bin_size`.
///
/// Bins tile the plane from the lower-left cell edge of the grid; a cell belongs
/// to the bin containing its center. The last bin on each axis may be partial.
pub fn bin_map<T: Scalar>(field: &GridField<T>, bin_size: T) -> Result<GridField<T>, EntropyError> {
    let spacing = field.dx().max(field.dy());
    if !(bin_size >= spacing * (T::one() - T::lit(1e-9))) {
        return Err(EntropyError::BinTooSmall { bin_size: to_f64(bin_size), spacing: to_f64(spacing) });
    }
    let bx: Vec<usize> = (0..field.nx()).map(|i| bin_index(i, field.dx(), bin_size)).collect();
    let by: Vec<usize> = (0..field.ny()).map(|j| bin_index(j, field.dy(), bin_size)).collect();
    let nbx = bx[field.nx() - 1] + 1;
    let nby = by[field.ny() - 1] + 1;
    let mut sums = vec![T::zero(); nbx * nby];
    let mut counts = vec![0usize; nbx * nby];
    for iy in 0..field.ny() {
        for ix in 0..field.nx() {
            let k = by[iy] * nbx + bx[ix];
            sums[k] = sums[k] + field.value(ix, iy);
            counts[k] += 1;
        }
    }
    let values = sums.into_iter().zip(counts).map(|(s, c)| s / T::lit(c as f64)).collect();
    let half = T::lit(0.5);
    let origin_x = field.origin_x() - half * field.dx() + half * bin_size;
    let origin_y = field.origin_y() - half * field.dy() + half * bin_size;
    Ok(GridField::new(origin_x, origin_y, bin_size, bin_size, nbx, nby, values, field.unit())?)
}

/// Min-max normalization to [0, 1].
pub fn normalize_bins<T: Scalar>(binned: &GridField<T>) -> Result<GridField<T>, EntropyError> {
    let (lo, hi) =
        binned.values().iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(EntropyError::DegenerateField);
    }
    let range = hi - lo;
    Ok(binned.map_values(|v| (v - lo) / range, Unit::Dimensionless)?)
}

/// Probabilities of the `r x r` window whose lower-left bin is `(i, j)`,
/// in row-major order, each cell floored at `floor` before normalization.
pub fn window_probabilities<T: Scalar>(
    normalized: &GridField<T>,
    i: usize,
    j: usize,
    r: usize,
    floor: T,
) -> Result<Vec<T>, EntropyError> {
    if r == 0 || i + r > normalized.nx() || j + r > normalized.ny() {
        return Err(EntropyError::WindowOutOfBounds { i, j, r, nx: normalized.nx(), ny: normalized.ny() });
    }
    let mut cells = Vec::with_capacity(r * r);
    for b in j..j + r {
        for a in i..i + r {
            cells.push(normalized.value(a, b).max(floor));
        }
    }
    let total: T = cells.iter().copied().sum();
    Ok(cells.into_iter().map(|m| m / total).collect())
}

/// Shannon entropy in bits. Zero probabilities contribute nothing.
pub fn window_entropy<T: Scalar>(probs: &[T]) -> T {
    probs.iter().filter(|p| **p > T::zero()).map(|&p| -p * p.log2()).sum()
}

/// Entropy map of `field`: one value per window anchor, placed at the window center.
///
/// Cells are min-max normalized before binning as well as after. Bin means
/// commute with affine maps, so the first pass changes nothing in exact
/// arithmetic; in floating point it cancels an offset and a scale without
/// rounding, which keeps the result bit-identical under any affine change of
/// units that the input itself represents exactly.
pub fn entropy_map<T: Scalar>(field: &GridField<T>, cfg: &EntropyConfig<T>) -> Result<GridField<T>, EntropyError> {
    cfg.validate()?;
    let binned = bin_map(&normalize_bins(field)?, cfg.bin_size)?;
    let r = cfg.window;
    if binned.nx() < r + 1 || binned.ny() < r + 1 {
        // Fewer than two anchors per axis cannot form a grid.
        return Err(EntropyError::FieldTooSmall { nx: binned.nx(), ny: binned.ny(), r });
    }
    let normalized = normalize_bins(&binned)?;
    let nx = normalized.nx() - r + 1;
    let ny = normalized.ny() - r + 1;
    let values: Vec<T> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let probs = window_probabilities(&normalized, k % nx, k / nx, r, cfg.probability_floor)
                .expect("anchor ranges keep windows in bounds");
            window_entropy(&probs)
        })
        .collect();
    let shift = T::lit((r - 1) as f64 * 0.5);
    Ok(GridField::new(
        normalized.origin_x() + shift * normalized.dx(),
        normalized.origin_y() + shift * normalized.dy(),
        normalized.dx(),
        normalized.dy(),
        nx,
        ny,
        values,
        Unit::Bits,
    )?)
}

/// Attraction weight `0.5^(1 / log2(H))` of a point with window entropy `H` bits.
///
/// `log2(H)` inside `(-log_guard, log_guard)` is pushed to the nearest edge of that
/// band, with exactly zero going to `-log_guard`. The result is capped at
/// `weight_cap` and kept at or above the smallest positive normal value.
pub fn entropy_weight<T: Scalar>(entropy: T, guard: &WeightGuard<T>) -> Result<T, EntropyError> {
    if !(entropy > T::zero()) {
        return Err(EntropyError::NonPositiveEntropy(to_f64(entropy)));
    }
    let mut l = entropy.log2();
    if l.abs() < guard.log_guard {
        l = if l > T::zero() { guard.log_guard } else { -guard.log_guard };
    }
    let w = T::lit(0.5).powf(T::one() / l);
    Ok(w.min(guard.weight_cap).max(T::min_positive_value()))
}

/// Population mean and standard deviation.
pub fn mean_std<T: Scalar>(values: &[T]) -> (T, T) {
    let n = T::lit(values.len() as f64);
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Cells with entropy at or below `mean - k_sigma * std`, lowest entropy first
/// (ties by row-major index), truncated to `max_points`.
pub fn select_low_entropy_points<T: Scalar>(
    emap: &GridField<T>,
    k_sigma: T,
    max_points: usize,
    guard: &WeightGuard<T>,
) -> Vec<EntropyPoint<T>> {
    let values = emap.values();
    let (mean, std) = mean_std(values);
    let threshold = mean - k_sigma * std;
    let mut picked: Vec<(usize, T)> = values.iter().copied().enumerate().filter(|&(_, h)| h <= threshold).collect();
    picked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));
    picked.truncate(max_points);
    picked
        .into_iter()
        .map(|(k, h)| {
            let p = emap.cell_center(k % emap.nx(), k / emap.nx());
            let weight = entropy_weight(h.max(T::min_positive_value()), guard).expect("entropy clamped positive");
            EntropyPoint { x: p.x, y: p.y, entropy: h, weight }
        })
        .collect()
}

/// CSV with header `x,y,entropy_bits,weight`.
pub fn points_to_csv<T: Scalar>(points: &[EntropyPoint<T>]) -> String {
    let mut s = String::from("x,y,entropy_bits,weight\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{}\n",
            format_sig(p.x),
            format_sig(p.y),
            format_sig(p.entropy),
            format_sig(p.weight)
        ));
    }
    s
}
