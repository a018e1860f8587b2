//! Convergence experiments: mean-square and weak errors over a step-size
//! ladder, order regression, exact enumeration for discrete drivers, and
//! invariant-drift tracking along one path.

mod convergence;
mod drift;
mod enumeration;

pub use convergence::{run_ms_convergence, run_weak_convergence};
pub use drift::{run_invariant_drift, write_drift_csv, DriftPoint};
pub use enumeration::{enumerate_discrete_distribution, Enumeration, DEFAULT_ENUMERATION_CAP};

use crate::drivers::{DriverConfig, DriverError, DriverScheme};
use crate::methods::{Method, MethodError, SolverSettings, StepError};
use crate::problems::{Observable, Problem, ProblemError};
use std::fmt;
use std::io::{self, Write};
use thiserror::Error;

/// Runs fail once more than this fraction of samples is invalid at any
/// (method, h).
pub const MAX_INVALID_FRACTION: f64 = 0.01;

/// Fine grid step `2^-14`.
pub const DEFAULT_FINE_STEP: f64 = 1.0 / 16384.0;

pub const DEFAULT_REFERENCE_TOLERANCE: f64 = 1e-13;

/// Samples for the flow-oracle Monte Carlo target when no closed form exists.
pub const DEFAULT_TARGET_SAMPLES: usize = 100_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error("enumeration needs {leaves} leaves, above the cap of {cap}; use fewer steps or Monte Carlo mode")]
    EnumerationTooLarge { leaves: f64, cap: u64 },
    #[error("enumeration probabilities sum to {total}, not 1")]
    ProbabilityMass { total: f64 },
    #[error("{method} at h = {h:e}: {invalid} of {samples} samples invalid (more than 1%)")]
    TooManyInvalid {
        method: String,
        h: f64,
        invalid: u64,
        samples: u64,
    },
    #[error("step {step} of {method} failed: {source}")]
    StepFailure {
        method: String,
        step: usize,
        #[source]
        source: StepError,
    },
    #[error("step {step} of {method} produced a non-finite state")]
    NonFiniteState { method: String, step: usize },
    #[error("order fit needs at least 3 positive finite errors, got {0}")]
    InsufficientData(usize),
}

impl HarnessError {
    /// Solver, reference and blow-up failures, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HarnessError::TooManyInvalid { .. }
                | HarnessError::StepFailure { .. }
                | HarnessError::NonFiniteState { .. }
                | HarnessError::ProbabilityMass { .. }
                | HarnessError::Problem(ProblemError::ReferenceAccuracy { .. })
                | HarnessError::Problem(ProblemError::BlowUp { .. })
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    /// Exact flow at the random time `μ(T)`.
    FlowOracle { tolerance: f64 },
    /// `method` at step `h` on the same fine path.
    FineScheme { method: String, h: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeakEstimator {
    MonteCarlo,
    /// Exact expectation over all `k^n` increment sequences.
    Enumeration { cap: u64 },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub methods: Vec<String>,
    pub horizon: f64,
    pub step_sizes: Vec<f64>,
    pub samples: usize,
    pub driver: DriverConfig,
    /// Fine Wiener grid; defaults to `T / 2^-14`.
    pub n_fine: Option<usize>,
    pub reference: Reference,
    pub observables: Vec<Observable>,
    pub weak_estimator: WeakEstimator,
    pub target_samples: usize,
    pub solver: SolverSettings,
}

impl ExperimentConfig {
    pub fn new(problem: Problem, methods: Vec<String>, horizon: f64, step_sizes: Vec<f64>, driver: DriverConfig) -> Self {
        let observables = problem.default_observables();
        ExperimentConfig {
            problem,
            methods,
            horizon,
            step_sizes,
            samples: 200,
            driver,
            n_fine: None,
            reference: Reference::FlowOracle {
                tolerance: DEFAULT_REFERENCE_TOLERANCE,
            },
            observables,
            weak_estimator: WeakEstimator::MonteCarlo,
            target_samples: DEFAULT_TARGET_SAMPLES,
            solver: SolverSettings::default(),
        }
    }

    /// The driver after problem-specific overrides (fatigue fixes `λ, σ`).
    pub fn effective_driver(&self) -> Result<DriverConfig, HarnessError> {
        Ok(match self.problem.noise_override() {
            Some((lambda, sigma)) => {
                DriverConfig::new(lambda, sigma, self.driver.seed(), self.driver.scheme())?
            }
            None => self.driver,
        })
    }

    pub fn fine_steps(&self) -> usize {
        self.n_fine
            .unwrap_or_else(|| (self.horizon / DEFAULT_FINE_STEP).round().max(1.0) as usize)
    }

    /// Number of steps of size `h` covering `[0, T]`.
    pub fn step_count(&self, h: f64) -> Result<usize, HarnessError> {
        let n = self.horizon / h;
        let rounded = n.round();
        if !(h > 0.0) || rounded < 1.0 || (n - rounded).abs() > 1e-9 * rounded {
            return Err(HarnessError::Config(format!(
                "step size {h:e} does not divide T = {}",
                self.horizon
            )));
        }
        Ok(rounded as usize)
    }

    /// Coarsening factor of step `h` relative to the fine grid.
    pub fn coarsening(&self, h: f64) -> Result<usize, HarnessError> {
        let n = self.step_count(h)?;
        let n_fine = self.fine_steps();
        if n_fine % n != 0 {
            return Err(HarnessError::Config(format!(
                "step size {h:e} is not a multiple of the fine step T/{n_fine}"
            )));
        }
        Ok(n_fine / n)
    }

    pub fn build_methods(&self) -> Result<Vec<Method>, HarnessError> {
        self.methods
            .iter()
            .map(|name| Ok(Method::from_name(name)?.with_solver(self.solver)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        self.build_methods()?;
        if self.step_sizes.is_empty() {
            return bad("no step sizes".into());
        }
        if self.samples < 2 {
            return bad(format!("need at least 2 samples, got {}", self.samples));
        }
        let d = self.problem.x0().len();
        if let Some(obs) = self.observables.iter().find(|o| !o.fits(d)) {
            return bad(format!("observable {obs} does not fit dimension {d}"));
        }
        let gaussian = self.driver.scheme() == DriverScheme::Gaussian;
        for &h in &self.step_sizes {
            if gaussian {
                self.coarsening(h)?;
            } else {
                self.step_count(h)?;
            }
        }
        if let Reference::FineScheme { method, h } = &self.reference {
            Method::<f64>::from_name(method)?;
            self.coarsening(*h)?;
        }
        if let Reference::FlowOracle { tolerance } = self.reference {
            if !(tolerance > 0.0) {
                return bad(format!("reference tolerance must be positive, got {tolerance}"));
            }
        }
        Ok(())
    }
}

/// An estimate and its Monte Carlo standard error (0 for exact values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ErrorFamily {
    MeanSquare,
    Weak(Observable),
}

impl fmt::Display for ErrorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorFamily::MeanSquare => f.write_str("ms"),
            ErrorFamily::Weak(obs) => write!(f, "{obs}"),
        }
    }
}

/// One CSV row: a (method, h) pair and one error family.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub method: String,
    pub h: f64,
    pub samples: u64,
    pub invalid: u64,
    pub family: ErrorFamily,
    pub error: Estimate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodFit {
    pub method: String,
    pub family: ErrorFamily,
    /// `None` when fewer than 3 step sizes gave positive finite errors.
    pub fit: Option<OrderFit>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ErrorRow>,
    pub fits: Vec<MethodFit>,
    /// Weak targets `E[g(X(T))]` with their standard errors.
    pub targets: Vec<(Observable, Estimate)>,
}

pub const CONVERGENCE_HEADER: &str =
    "method,h,samples,invalid,ms_error,ms_stderr,weak_obs,weak_error,weak_stderr";

impl ConvergenceReport {
    fn from_rows(rows: Vec<ErrorRow>, targets: Vec<(Observable, Estimate)>) -> Self {
        let mut fits: Vec<MethodFit> = Vec::new();
        for row in &rows {
            if !fits
                .iter()
                .any(|f| f.method == row.method && f.family == row.family)
            {
                fits.push(MethodFit {
                    method: row.method.clone(),
                    family: row.family.clone(),
                    fit: None,
                });
            }
        }
        for fit in &mut fits {
            let (hs, errs): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.method == fit.method && r.family == fit.family)
                .map(|r| (r.h, r.error.value))
                .unzip();
            fit.fit = fit_order(&hs, &errs).ok();
        }
        ConvergenceReport { rows, fits, targets }
    }

    pub fn slope(&self, method: &str, family: &ErrorFamily) -> Option<f64> {
        self.fits
            .iter()
            .find(|f| f.method == method && &f.family == family)
            .and_then(|f| f.fit)
            .map(|f| f.slope)
    }

    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a ErrorRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CONVERGENCE_HEADER}")?;
        for row in &self.rows {
            let (e, s) = (fmt_float(row.error.value), fmt_float(row.error.stderr));
            match &row.family {
                ErrorFamily::MeanSquare => writeln!(
                    out,
                    "{},{},{},{},{e},{s},,,",
                    row.method,
                    fmt_float(row.h),
                    row.samples,
                    row.invalid
                )?,
                ErrorFamily::Weak(obs) => writeln!(
                    out,
                    "{},{},{},{},,,{obs},{e},{s}",
                    row.method,
                    fmt_float(row.h),
                    row.samples,
                    row.invalid
                )?,
            }
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Least-squares line through `(log h, log error)` over the positive finite
/// points.
pub fn fit_order(step_sizes: &[f64], errors: &[f64]) -> Result<OrderFit, HarnessError> {
    let points: Vec<(f64, f64)> = step_sizes
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && h.is_finite() && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if points.len() < 3 {
        return Err(HarnessError::InsufficientData(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::InsufficientData(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(OrderFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_stderr(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    if values.is_empty() {
        return Estimate {
            value: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Estimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

pub(crate) fn check_invalid(method: &str, h: f64, invalid: u64, samples: u64) -> Result<(), HarnessError> {
    if invalid as f64 > MAX_INVALID_FRACTION * samples as f64 {
        return Err(HarnessError::TooManyInvalid {
            method: method.to_string(),
            h,
            invalid,
            samples,
        });
    }
    Ok(())
}
