//! Monte Carlo localization against a total-field magnetic map.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{Control, Pose};
use crate::grid::GridField;
use crate::scalar::{wrap_angle, Scalar};

/// Log-likelihood given to particles outside the map, `ln(1e-300)`.
const OUT_OF_MAP_LOG_LIKELIHOOD: f64 = -690.775_527_898_213_7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("a particle set needs at least one particle")]
    NoParticles,
    #[error("noise standard deviations must be finite and non-negative")]
    BadNoise,
}

/// Per-step standard deviations of the additive motion noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionNoise<T> {
    pub sigma_x: T,
    pub sigma_y: T,
    pub sigma_theta: T,
}

impl<T: Scalar> MotionNoise<T> {
    pub fn new(sigma_x: T, sigma_y: T, sigma_theta: T) -> Self {
        Self { sigma_x, sigma_y, sigma_theta }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if [self.sigma_x, self.sigma_y, self.sigma_theta].iter().all(|s| s.is_finite() && *s >= T::zero()) {
            Ok(())
        } else {
            Err(FilterError::BadNoise)
        }
    }

    /// Draws `(eps_x, eps_y, eps_theta)` in that order.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> [T; 3] {
        [
            self.sigma_x * T::standard_normal(rng),
            self.sigma_y * T::standard_normal(rng),
            self.sigma_theta * T::standard_normal(rng),
        ]
    }
}

/// Magnetometer noise standard deviation, nT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise<T> {
    pub sigma: T,
}

/// Unicycle kinematics with additive noise. Shared by the filter and the truth simulator.
pub fn apply_motion<T: Scalar>(pose: &Pose<T>, u: Control<T>, dt: T, eps: [T; 3]) -> Pose<T> {
    Pose {
        x: pose.x + u.v * pose.theta.cos() * dt + eps[0],
        y: pose.y + u.v * pose.theta.sin() * dt + eps[1],
        theta: wrap_angle(pose.theta + u.omega * dt + eps[2]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle<T> {
    pub pose: Pose<T>,
    pub weight: T,
}

/// Weighted pose hypotheses plus the generator that drives their noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet<T> {
    particles: Vec<Particle<T>>,
    rng: ChaCha8Rng,
}

/// Weighted mean pose with its 3x3 covariance over (x, y, theta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEstimate<T> {
    pub mean: Pose<T>,
    pub covariance: [[T; 3]; 3],
    pub cov_det: T,
}

pub fn det3<T: Scalar>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

impl<T: Scalar> ParticleSet<T> {
    /// `n` particles sampled around `pose`, uniform weights.
    pub fn init(pose: Pose<T>, spread: &MotionNoise<T>, n: usize, seed: u64) -> Result<Self, FilterError> {
        if n == 0 {
            return Err(FilterError::NoParticles);
        }
        spread.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = T::one() / T::lit(n as f64);
        let particles = (0..n)
            .map(|_| {
                let e = spread.sample(&mut rng);
                Particle { pose: Pose::new(pose.x + e[0], pose.y + e[1], pose.theta + e[2]), weight: w }
            })
            .collect();
        Ok(Self { particles, rng })
    }

    /// Builds a set from explicit particles; weights are renormalized.
    pub fn from_particles(mut particles: Vec<Particle<T>>, seed: u64) -> Result<Self, FilterError> {
        if particles.is_empty() {
            return Err(FilterError::NoParticles);
        }
        let total: T = particles.iter().map(|p| p.weight).sum();
        let uniform = !(total > T::zero()) || !total.is_finite();
        let n = T::lit(particles.len() as f64);
        for p in &mut particles {
            p.weight = if uniform { T::one() / n } else { p.weight / total };
        }
        Ok(Self { particles, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Propagates every particle through the motion model with independent noise.
    pub fn predict(&mut self, u: Control<T>, dt: T, noise: &MotionNoise<T>) {
        for p in &mut self.particles {
            let eps = noise.sample(&mut self.rng);
            p.pose = apply_motion(&p.pose, u, dt, eps);
        }
    }

    /// Multiplies weights by the Gaussian likelihood of measurement `z`.
    pub fn update_weights(&mut self, z: T, map: &GridField<T>, noise: &SensorNoise<T>) {
        let two_var = T::lit(2.0) * noise.sigma * noise.sigma;
        let mut any_inside = false;
        let logw: Vec<T> = self
            .particles
            .iter()
            .map(|p| {
                let ll = match map.interpolate(p.pose.x, p.pose.y) {
                    Ok(m) => {
                        any_inside = true;
                        -(z - m) * (z - m) / two_var
                    }
                    Err(_) => T::lit(OUT_OF_MAP_LOG_LIKELIHOOD),
                };
                p.weight.ln() + ll
            })
            .collect();
        let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
        let n = T::lit(self.particles.len() as f64);
        // With no particle on the map the measurement carries no information.
        if !any_inside || !max.is_finite() {
            self.particles.iter_mut().for_each(|p| p.weight = T::one() / n);
            return;
        }
        let unnorm: Vec<T> = logw.iter().map(|&l| (l - max).exp()).collect();
        let total: T = unnorm.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            self.particles.iter_mut().for_each(|p| p.weight = T::one() / n);
            return;
        }
        for (p, w) in self.particles.iter_mut().zip(unnorm) {
            p.weight = w / total;
        }
    }

    /// Effective sample size `1 / sum(w^2)`.
    pub fn ess(&self) -> T {
        T::one() / self.particles.iter().map(|p| p.weight * p.weight).sum::<T>()
    }

    /// Systematic resampling when ESS drops below `fraction * n`.
    /// Returns whether resampling happened.
    pub fn resample(&mut self, fraction: T) -> bool {
        let n = self.particles.len();
        let nf = T::lit(n as f64);
        if !(self.ess() < fraction * nf) {
            return false;
        }
        let u0 = T::unit_uniform(&mut self.rng) / nf;
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = T::zero();
        for p in &self.particles {
            acc = acc + p.weight;
            cumulative.push(acc);
        }
        let mut out = Vec::with_capacity(n);
        let mut idx = 0;
        for k in 0..n {
            let target = u0 + T::lit(k as f64) / nf;
            while idx < n - 1 && cumulative[idx] < target {
                idx += 1;
            }
            out.push(Particle { pose: self.particles[idx].pose, weight: T::one() / nf });
        }
        self.particles = out;
        true
    }

    /// Weighted mean (circular for heading) and covariance with wrapped heading residuals.
    pub fn estimate(&self) -> PoseEstimate<T> {
        let (mut mx, mut my, mut s, mut c) = (T::zero(), T::zero(), T::zero(), T::zero());
        for p in &self.particles {
            mx = mx + p.weight * p.pose.x;
            my = my + p.weight * p.pose.y;
            s = s + p.weight * p.pose.theta.sin();
            c = c + p.weight * p.pose.theta.cos();
        }
        let mean = Pose::new(mx, my, s.atan2(c));
        let mut cov = [[T::zero(); 3]; 3];
        for p in &self.particles {
            let r = [p.pose.x - mean.x, p.pose.y - mean.y, wrap_angle(p.pose.theta - mean.theta)];
            for a in 0..3 {
                for b in a..3 {
                    cov[a][b] = cov[a][b] + p.weight * r[a] * r[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..a {
                cov[a][b] = cov[b][a];
            }
        }
        PoseEstimate { mean, covariance: cov, cov_det: det3(&cov) }
    }
}
