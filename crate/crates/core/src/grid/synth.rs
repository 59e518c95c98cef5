//! Synthetic magnetic anomaly maps built from sums of Gaussian anomalies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GridError, GridField, Unit};
use crate::geometry::Vec2;
use crate::kv::{parse_entries, KvError};
use crate::scalar::{format_sig, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly<T> {
    pub center: Vec2<T>,
    /// Signed peak deviation, nT.
    pub amplitude: T,
    /// Gaussian standard deviation, meters.
    pub length_scale: T,
}

impl<T: Scalar> Anomaly<T> {
    pub fn new(cx: T, cy: T, amplitude: T, length_scale: T) -> Self {
        Self { center: Vec2::new(cx, cy), amplitude, length_scale }
    }

    pub fn contribution(&self, p: Vec2<T>) -> T {
        let d = p - self.center;
        let two = T::lit(2.0);
        self.amplitude * (-(d.dot(d)) / (two * self.length_scale * self.length_scale)).exp()
    }
}

/// Description of a synthetic map: constant base field plus Gaussian anomalies,
/// optionally with seeded white measurement noise on every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
    pub spacing: T,
    pub base_field: T,
    pub anomalies: Vec<Anomaly<T>>,
    /// Standard deviation of per-cell white noise, nT. Zero gives the exact sum.
    pub noise_std: T,
    pub seed: u64,
}

impl<T: Scalar> SynthSpec<T> {
    pub fn validate(&self) -> Result<(), GridError> {
        let err = |m: &str| Err(GridError::Synth(m.into()));
        let all_finite =
            [self.x_min, self.x_max, self.y_min, self.y_max, self.spacing, self.base_field, self.noise_std]
                .iter()
                .all(|v| v.is_finite());
        if !all_finite {
            return err("all fields must be finite");
        }
        if self.spacing <= T::zero() {
            return err("spacing must be positive");
        }
        if self.x_max - self.x_min < self.spacing || self.y_max - self.y_min < self.spacing {
            return err("extent must span at least one spacing on each axis");
        }
        if self.noise_std < T::zero() {
            return err("noise_std must be non-negative");
        }
        for a in &self.anomalies {
            if !(a.length_scale > T::zero())
                || !a.amplitude.is_finite()
                || !a.center.x.is_finite()
                || !a.center.y.is_finite()
            {
                return err("every anomaly needs a finite center and amplitude and a positive length scale");
            }
        }
        Ok(())
    }

    /// Analytic field value at `p`, without noise.
    pub fn evaluate(&self, p: Vec2<T>) -> T {
        sum_field(self.base_field, &self.canonical_anomalies(), p)
    }

    /// Anomalies in a fixed summation order, so results do not depend on list order.
    fn canonical_anomalies(&self) -> Vec<Anomaly<T>> {
        let mut sorted = self.anomalies.clone();
        sorted.sort_by(|a, b| canonical_key(a).partial_cmp(&canonical_key(b)).unwrap_or(std::cmp::Ordering::Equal));
        sorted
    }

    /// Parses the key=value form written by [`SynthSpec::to_text`].
    pub fn parse(text: &str) -> Result<Self, KvError> {
        const KEYS: [&str; 9] =
            ["x_min", "x_max", "y_min", "y_max", "spacing", "base_field", "anomaly", "noise_std", "seed"];
        let entries = parse_entries(text, &KEYS, &["anomaly"])?;
        let get = |k: &str| entries.iter().find(|e| e.key == k);
        let req = |k: &str| -> Result<T, KvError> { get(k).ok_or_else(|| KvError::Missing(k.into()))?.parse::<T>() };
        let mut anomalies = Vec::new();
        for e in entries.iter().filter(|e| e.key == "anomaly") {
            let v: Vec<T> = e.parse_list(4)?;
            anomalies.push(Anomaly::new(v[0], v[1], v[2], v[3]));
        }
        let spec = Self {
            x_min: req("x_min")?,
            x_max: req("x_max")?,
            y_min: req("y_min")?,
            y_max: req("y_max")?,
            spacing: req("spacing")?,
            base_field: req("base_field")?,
            anomalies,
            noise_std: get("noise_std").map(|e| e.parse()).transpose()?.unwrap_or_else(T::zero),
            seed: get("seed").map(|e| e.parse()).transpose()?.unwrap_or(0),
        };
        spec.validate().map_err(|e| KvError::Invalid(e.to_string()))?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("x_min", self.x_min),
            ("x_max", self.x_max),
            ("y_min", self.y_min),
            ("y_max", self.y_max),
            ("spacing", self.spacing),
            ("base_field", self.base_field),
            ("noise_std", self.noise_std),
        ] {
            s.push_str(&format!("{k} = {}\n", format_sig(v)));
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str("# anomaly = center_x, center_y, amplitude_nT, length_scale_m\n");
        for a in &self.anomalies {
            s.push_str(&format!(
                "anomaly = {}, {}, {}, {}\n",
                format_sig(a.center.x),
                format_sig(a.center.y),
                format_sig(a.amplitude),
                format_sig(a.length_scale)
            ));
        }
        s
    }
}

fn canonical_key<T: Scalar>(a: &Anomaly<T>) -> (T, T, T, T) {
    (a.center.x, a.center.y, a.amplitude, a.length_scale)
}

fn sum_field<T: Scalar>(base: T, anomalies: &[Anomaly<T>], p: Vec2<T>) -> T {
    anomalies.iter().fold(base, |acc, a| acc + a.contribution(p))
}

fn axis_count<T: Scalar>(lo: T, hi: T, spacing: T) -> usize {
    ((hi - lo) / spacing + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1
}

/// Samples this description on a grid with origin `(x_min, y_min)` and the given spacing.
pub fn synth_map<T: Scalar>(spec: &SynthSpec<T>) -> Result<GridField<T>, GridError> {
    spec.validate()?;
    let nx = axis_count(spec.x_min, spec.x_max, spec.spacing);
    let ny = axis_count(spec.y_min, spec.y_max, spec.spacing);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noisy = spec.noise_std > T::zero();
    let anomalies = spec.canonical_anomalies();
    GridField::from_fn(spec.x_min, spec.y_min, spec.spacing, spec.spacing, nx, ny, Unit::Nanotesla, |x, y| {
        let v = sum_field(spec.base_field, &anomalies, Vec2::new(x, y));
        if noisy {
            v + spec.noise_std * T::standard_normal(&mut rng)
        } else {
            v
        }
    })
}
