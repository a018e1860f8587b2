use super::{
    check_invalid, enumerate_discrete_distribution, mean_and_stderr, ConvergenceReport, ErrorFamily,
    ErrorRow, Estimate, ExperimentConfig, HarnessError, Reference, WeakEstimator,
};
use crate::drivers::{
    discrete_increment_support, sample_path, DriverConfig, DriverPath, DriverScheme,
};
use crate::methods::Method;
use crate::problems::{Observable, Problem, ProblemError};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Mixed into the master seed for the Monte Carlo weak target, so the target
/// draws are independent of the scheme's samples.
const TARGET_SEED_SALT: u64 = 0x5EED_7A26_E7C0_FFEE;

/// Integrates `[0, T]` with the given increments.
pub(crate) fn integrate(
    problem: &Problem,
    method: &Method,
    increments: &[f64],
) -> Result<Vec<f64>, HarnessError> {
    let mut x = problem.x0().to_vec();
    for (step, &dmu) in increments.iter().enumerate() {
        x = problem
            .step(method, &x, dmu)
            .map_err(|source| HarnessError::StepFailure {
                method: method.name().to_string(),
                step,
                source,
            })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::NonFiniteState {
                method: method.name().to_string(),
                step,
            });
        }
    }
    Ok(x)
}

/// Increments of sample `index` at step `h`: coarsened from the fine path
/// for Gaussian drivers, drawn i.i.d. from the discrete support otherwise.
pub(crate) fn level_increments(
    config: &ExperimentConfig,
    driver: &DriverConfig,
    path: Option<&DriverPath>,
    index: u64,
    h: f64,
) -> Result<Vec<f64>, HarnessError> {
    match (driver.scheme(), path) {
        (DriverScheme::Gaussian, Some(path)) => Ok(path.increments(config.coarsening(h)?)?),
        (DriverScheme::Discrete(k), _) => {
            let n = config.step_count(h)?;
            let support = discrete_increment_support(k, h, driver.lambda(), driver.sigma())?;
            let mut rng = driver.sample_rng(index);
            Ok((0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    for &(value, p) in &support {
                        acc += p;
                        if u < acc {
                            return value;
                        }
                    }
                    support[support.len() - 1].0
                })
                .collect())
        }
        (DriverScheme::Gaussian, None) => unreachable!("Gaussian levels need a sampled path"),
    }
}

fn sample_fine_path(
    config: &ExperimentConfig,
    driver: &DriverConfig,
    index: u64,
) -> Result<Option<DriverPath>, HarnessError> {
    match driver.scheme() {
        DriverScheme::Gaussian => Ok(Some(sample_path(
            driver,
            config.horizon,
            config.fine_steps(),
            index,
        )?)),
        DriverScheme::Discrete(_) => Ok(None),
    }
}

/// Mean-square error `sqrt(E|Y(T) - X(T)|²)` per (method, h).
///
/// Every sample draws one fine Wiener path; all step sizes and the reference
/// see that same path. Samples whose integration fails are excluded and
/// counted; a reference failure other than blow-up aborts the run.
pub fn run_ms_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport, HarnessError> {
    config.validate()?;
    let driver = config.effective_driver()?;
    if driver.scheme() != DriverScheme::Gaussian {
        return Err(HarnessError::Config(
            "mean-square runs need the Gaussian driver".into(),
        ));
    }
    let methods = config.build_methods()?;
    let reference_method = match &config.reference {
        Reference::FineScheme { method, .. } => {
            Some(Method::from_name(method)?.with_solver(config.solver))
        }
        Reference::FlowOracle { .. } => None,
    };
    let levels = config.step_sizes.len();

    let per_sample: Vec<Result<Option<Vec<Option<f64>>>, HarnessError>> = (0..config.samples
        as u64)
        .into_par_iter()
        .map(|m| {
            let path = sample_fine_path(config, &driver, m)?.expect("Gaussian path");
            let exact = match (&config.reference, &reference_method) {
                (Reference::FlowOracle { tolerance }, _) => {
                    match config.problem.flow(config.problem.x0(), path.terminal_time_change(), *tolerance) {
                        Ok(x) => x,
                        Err(ProblemError::BlowUp { .. }) => return Ok(None),
                        Err(e) => return Err(e.into()),
                    }
                }
                (Reference::FineScheme { h, .. }, Some(method)) => {
                    let inc = path.increments(config.coarsening(*h)?)?;
                    integrate(&config.problem, method, &inc)?
                }
                (Reference::FineScheme { .. }, None) => unreachable!(),
            };
            let mut out = Vec::with_capacity(methods.len() * levels);
            for method in &methods {
                for &h in &config.step_sizes {
                    let inc = path.increments(config.coarsening(h)?)?;
                    out.push(integrate(&config.problem, method, &inc).ok().map(|y| {
                        y.iter().zip(&exact).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    }));
                }
            }
            Ok(Some(out))
        })
        .collect();

    let mut outcomes = Vec::with_capacity(per_sample.len());
    for r in per_sample {
        outcomes.push(r?);
    }
    let mut rows = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for (li, &h) in config.step_sizes.iter().enumerate() {
            let slot = mi * levels + li;
            let squares: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.as_ref().and_then(|v| v[slot]))
                .collect();
            let samples = outcomes.len() as u64;
            let invalid = samples - squares.len() as u64;
            check_invalid(method.name(), h, invalid, samples)?;
            let mean_sq = mean_and_stderr(&squares);
            let ms = mean_sq.value.sqrt();
            // Delta method: se(sqrt(m)) = se(m) / (2 sqrt(m)).
            let stderr = if ms > 0.0 { mean_sq.stderr / (2.0 * ms) } else { 0.0 };
            rows.push(ErrorRow {
                method: method.name().to_string(),
                h,
                samples,
                invalid,
                family: ErrorFamily::MeanSquare,
                error: Estimate { value: ms, stderr },
            });
        }
    }
    Ok(ConvergenceReport::from_rows(rows, Vec::new()))
}

/// Weak errors `|Ê g(Y(T)) - E g(X(T))|` per (method, h, observable).
pub fn run_weak_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport, HarnessError> {
    config.validate()?;
    let driver = config.effective_driver()?;
    let methods = config.build_methods()?;
    let targets = weak_targets(config, &driver)?;
    let observables = &config.observables;

    let mut rows = Vec::new();
    match config.weak_estimator {
        WeakEstimator::Enumeration { cap } => {
            let DriverScheme::Discrete(k) = driver.scheme() else {
                return Err(HarnessError::Config(
                    "exact enumeration needs a discrete driver".into(),
                ));
            };
            for method in &methods {
                for &h in &config.step_sizes {
                    let n = config.step_count(h)?;
                    let support =
                        discrete_increment_support(k, h, driver.lambda(), driver.sigma())?;
                    let step = |x: &[f64], dmu: f64| config.problem.step(method, x, dmu);
                    let result = enumerate_discrete_distribution(
                        &step,
                        config.problem.x0(),
                        &support,
                        n,
                        observables,
                        cap,
                    )?;
                    check_invalid(method.name(), h, result.invalid_leaves, result.leaves)?;
                    for (oi, (obs, target)) in targets.iter().enumerate() {
                        rows.push(ErrorRow {
                            method: method.name().to_string(),
                            h,
                            samples: result.leaves,
                            invalid: result.invalid_leaves,
                            family: ErrorFamily::Weak(obs.clone()),
                            error: Estimate {
                                value: (result.expectations[oi] - target.value).abs(),
                                stderr: target.stderr,
                            },
                        });
                    }
                }
            }
        }
        WeakEstimator::MonteCarlo => {
            let levels = config.step_sizes.len();
            let per_sample: Vec<Result<Vec<Option<Vec<f64>>>, HarnessError>> = (0..config.samples
                as u64)
                .into_par_iter()
                .map(|m| {
                    let path = sample_fine_path(config, &driver, m)?;
                    let mut out = Vec::with_capacity(methods.len() * levels);
                    for method in &methods {
                        for &h in &config.step_sizes {
                            let inc = level_increments(config, &driver, path.as_ref(), m, h)?;
                            out.push(
                                integrate(&config.problem, method, &inc)
                                    .ok()
                                    .map(|y| observables.iter().map(|g| g.eval(&y)).collect()),
                            );
                        }
                    }
                    Ok(out)
                })
                .collect();
            let mut outcomes = Vec::with_capacity(per_sample.len());
            for r in per_sample {
                outcomes.push(r?);
            }
            for (mi, method) in methods.iter().enumerate() {
                for (li, &h) in config.step_sizes.iter().enumerate() {
                    let slot = mi * levels + li;
                    let valid: Vec<&Vec<f64>> =
                        outcomes.iter().filter_map(|o| o[slot].as_ref()).collect();
                    let samples = outcomes.len() as u64;
                    let invalid = samples - valid.len() as u64;
                    check_invalid(method.name(), h, invalid, samples)?;
                    for (oi, (obs, target)) in targets.iter().enumerate() {
                        let values: Vec<f64> = valid.iter().map(|v| v[oi]).collect();
                        let est = mean_and_stderr(&values);
                        rows.push(ErrorRow {
                            method: method.name().to_string(),
                            h,
                            samples,
                            invalid,
                            family: ErrorFamily::Weak(obs.clone()),
                            error: Estimate {
                                value: (est.value - target.value).abs(),
                                stderr: est.stderr.hypot(target.stderr),
                            },
                        });
                    }
                }
            }
        }
    }
    Ok(ConvergenceReport::from_rows(rows, targets))
}

/// `E[g(X(T))]`: the problem's closed form when it has one, otherwise a
/// Monte Carlo average of the exact flow at sampled `μ(T) = λT + σW(T)`.
fn weak_targets(
    config: &ExperimentConfig,
    driver: &DriverConfig,
) -> Result<Vec<(Observable, Estimate)>, HarnessError> {
    let (lambda, sigma, t) = (driver.lambda(), driver.sigma(), config.horizon);
    let closed: Vec<Option<f64>> = config
        .observables
        .iter()
        .map(|g| config.problem.weak_expectation(g, lambda, sigma, t))
        .collect();
    if closed.iter().all(Option::is_some) {
        return Ok(config
            .observables
            .iter()
            .cloned()
            .zip(closed.into_iter().map(|v| Estimate {
                value: v.unwrap(),
                stderr: 0.0,
            }))
            .collect());
    }
    let tolerance = match config.reference {
        Reference::FlowOracle { tolerance } => tolerance,
        Reference::FineScheme { .. } => super::DEFAULT_REFERENCE_TOLERANCE,
    };
    let target_driver = driver.with_seed(driver.seed() ^ TARGET_SEED_SALT);
    let draws: Vec<Result<Option<Vec<f64>>, HarnessError>> = (0..config.target_samples as u64)
        .into_par_iter()
        .map(|i| {
            let z: f64 = target_driver.sample_rng(i).sample(StandardNormal);
            let mu = lambda * t + sigma * t.sqrt() * z;
            match config.problem.flow(config.problem.x0(), mu, tolerance) {
                Ok(x) => Ok(Some(config.observables.iter().map(|g| g.eval(&x)).collect())),
                Err(ProblemError::BlowUp { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(draws.len());
    for d in draws {
        if let Some(v) = d? {
            values.push(v);
        }
    }
    check_invalid(
        "target",
        t,
        (config.target_samples - values.len()) as u64,
        config.target_samples as u64,
    )?;
    Ok(config
        .observables
        .iter()
        .enumerate()
        .map(|(oi, g)| {
            let est = match closed[oi] {
                Some(v) => Estimate { value: v, stderr: 0.0 },
                None => mean_and_stderr(&values.iter().map(|v| v[oi]).collect::<Vec<_>>()),
            };
            (g.clone(), est)
        })
        .collect())
}
