//! Random step sizes `ΔM = λh + σ(W(t+h) - W(t))`.
//!
//! Gaussian paths are sampled once on a fine grid and coarsened by
//! summation, so every step size sees the same Brownian path (common random
//! numbers). Window sums are pairwise and split at the midpoint; for
//! power-of-two coarsening factors a window therefore sums exactly to the
//! sum of its two half windows, bit for bit.
//!
//! Sample `m` draws from ChaCha12 keyed by the master seed on stream `m`, so
//! results do not depend on the order or thread in which samples are drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DriverError {
    #[error("λ must be 0 or 1, got {0}")]
    InvalidLambda(u8),
    #[error("σ must be finite, got {0}")]
    InvalidSigma(f64),
    #[error("coarsening factor {factor} does not divide the {n_fine} fine steps")]
    NonDividingFactor { factor: usize, n_fine: usize },
    #[error("step index {index} out of range ({steps} steps at this level)")]
    IndexOutOfRange { index: usize, steps: usize },
    #[error("unsupported discrete driver with {0} points (use 2, 3 or 4)")]
    UnsupportedPoints(usize),
    #[error("path needs T > 0 and at least one fine step")]
    EmptyPath,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriverScheme {
    Gaussian,
    /// Moment-matched `k`-point distribution.
    Discrete(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriverConfig {
    lambda: u8,
    sigma: f64,
    seed: u64,
    scheme: DriverScheme,
}

impl DriverConfig {
    pub fn new(lambda: u8, sigma: f64, seed: u64, scheme: DriverScheme) -> Result<Self, DriverError> {
        if lambda > 1 {
            return Err(DriverError::InvalidLambda(lambda));
        }
        if !sigma.is_finite() {
            return Err(DriverError::InvalidSigma(sigma));
        }
        if let DriverScheme::Discrete(k) = scheme {
            if !(2..=4).contains(&k) {
                return Err(DriverError::UnsupportedPoints(k));
            }
        }
        Ok(DriverConfig {
            lambda,
            sigma,
            seed,
            scheme,
        })
    }

    pub fn gaussian(lambda: u8, sigma: f64, seed: u64) -> Result<Self, DriverError> {
        DriverConfig::new(lambda, sigma, seed, DriverScheme::Gaussian)
    }

    pub fn lambda(&self) -> f64 {
        f64::from(self.lambda)
    }

    pub fn lambda_u8(&self) -> u8 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> DriverScheme {
        self.scheme
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Generator for sample `index`: key from the master seed, stream from the
    /// index.
    pub fn sample_rng(&self, index: u64) -> ChaCha12Rng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One Wiener path on a uniform fine grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverPath {
    horizon: f64,
    dw: Vec<f64>,
    lambda: f64,
    sigma: f64,
}

/// Samples `n_fine` independent `N(0, T/n_fine)` increments for sample
/// `index`.
pub fn sample_path(
    config: &DriverConfig,
    horizon: f64,
    n_fine: usize,
    index: u64,
) -> Result<DriverPath, DriverError> {
    if n_fine == 0 || !(horizon > 0.0) {
        return Err(DriverError::EmptyPath);
    }
    let mut rng = config.sample_rng(index);
    let scale = (horizon / n_fine as f64).sqrt();
    let dw = (0..n_fine)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(DriverPath {
        horizon,
        dw,
        lambda: config.lambda(),
        sigma: config.sigma,
    })
}

impl DriverPath {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_fine(&self) -> usize {
        self.dw.len()
    }

    pub fn fine_step(&self) -> f64 {
        self.horizon / self.dw.len() as f64
    }

    pub fn fine_increments(&self) -> &[f64] {
        &self.dw
    }

    /// Number of steps at coarsening `factor`.
    pub fn steps(&self, factor: usize) -> Result<usize, DriverError> {
        if factor == 0 || self.dw.len() % factor != 0 {
            return Err(DriverError::NonDividingFactor {
                factor,
                n_fine: self.dw.len(),
            });
        }
        Ok(self.dw.len() / factor)
    }

    /// `W(t_{i+1}) - W(t_i)` on the grid coarsened by `factor`.
    pub fn wiener_increment(&self, index: usize, factor: usize) -> Result<f64, DriverError> {
        let steps = self.steps(factor)?;
        if index >= steps {
            return Err(DriverError::IndexOutOfRange { index, steps });
        }
        Ok(pairwise_sum(&self.dw[index * factor..(index + 1) * factor]))
    }

    /// `ΔM = λh + σΔW` for step `index` of size `h = factor · T / n_fine`.
    pub fn increment(&self, index: usize, factor: usize) -> Result<f64, DriverError> {
        let dw = self.wiener_increment(index, factor)?;
        Ok(self.lambda * self.fine_step() * factor as f64 + self.sigma * dw)
    }

    /// All increments at coarsening `factor`.
    pub fn increments(&self, factor: usize) -> Result<Vec<f64>, DriverError> {
        let steps = self.steps(factor)?;
        (0..steps).map(|i| self.increment(i, factor)).collect()
    }

    /// `W(T)`, summed with the same pairwise tree as the windows.
    pub fn terminal_wiener(&self) -> f64 {
        pairwise_sum(&self.dw)
    }

    /// `μ(T) = λT + σW(T)`.
    pub fn terminal_time_change(&self) -> f64 {
        self.lambda * self.horizon + self.sigma * self.terminal_wiener()
    }
}

/// Sum that splits at the midpoint; aligned power-of-two windows nest.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (left, right) = values.split_at(n / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

/// Standardized `k`-point Gauss–Hermite nodes and probabilities: the discrete
/// variable matches the standard normal's moments up to order `2k - 1`.
pub fn standardized_hermite(k: usize) -> Result<Vec<(f64, f64)>, DriverError> {
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    Ok(match k {
        2 => vec![(-1.0, 0.5), (1.0, 0.5)],
        3 => vec![(-s3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (s3, 1.0 / 6.0)],
        4 => {
            let outer = (3.0 + s6).sqrt();
            let inner = (3.0 - s6).sqrt();
            let p_outer = (3.0 - s6) / 12.0;
            let p_inner = (3.0 + s6) / 12.0;
            vec![
                (-outer, p_outer),
                (-inner, p_inner),
                (inner, p_inner),
                (outer, p_outer),
            ]
        }
        _ => return Err(DriverError::UnsupportedPoints(k)),
    })
}

/// Support of the discrete `ΔM = λh + σ√h ξ` as `(value, probability)`.
/// With `σ = 0` the support collapses to the single point `λh`.
pub fn discrete_increment_support(
    k: usize,
    h: f64,
    lambda: f64,
    sigma: f64,
) -> Result<Vec<(f64, f64)>, DriverError> {
    let nodes = standardized_hermite(k)?;
    if sigma == 0.0 {
        return Ok(vec![(lambda * h, 1.0)]);
    }
    let scale = sigma * h.sqrt();
    Ok(nodes
        .into_iter()
        .map(|(xi, p)| (lambda * h + scale * xi, p))
        .collect())
}
