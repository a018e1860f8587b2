use super::convergence::level_increments;
use super::{fmt_float, ExperimentConfig, HarnessError};
use crate::drivers::{sample_path, DriverScheme};
use std::io::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftPoint {
    pub t: f64,
    pub dh: f64,
    pub dc: f64,
}

/// `H(Y_n) - H(x0)` and `C(Y_n) - C(x0)` after every step along the path of
/// sample 0, starting with the zero row at `t = 0`. Needs exactly one method
/// and one step size.
pub fn run_invariant_drift(config: &ExperimentConfig) -> Result<Vec<DriftPoint>, HarnessError> {
    config.validate()?;
    let (method, h) = match (config.build_methods()?.as_slice(), config.step_sizes.as_slice()) {
        ([m], [h]) => (m.clone(), *h),
        _ => {
            return Err(HarnessError::Config(
                "drift runs take exactly one method and one step size".into(),
            ))
        }
    };
    let problem = &config.problem;
    problem.invariant_drift(problem.x0())?;
    let driver = config.effective_driver()?;
    let path = match driver.scheme() {
        DriverScheme::Gaussian => Some(sample_path(&driver, config.horizon, config.fine_steps(), 0)?),
        DriverScheme::Discrete(_) => None,
    };
    let increments = level_increments(config, &driver, path.as_ref(), 0, h)?;

    let mut x = problem.x0().to_vec();
    let mut out = Vec::with_capacity(increments.len() + 1);
    out.push(DriftPoint {
        t: 0.0,
        dh: 0.0,
        dc: 0.0,
    });
    for (step, &dmu) in increments.iter().enumerate() {
        x = problem
            .step(&method, &x, dmu)
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
        let (dh, dc) = problem.invariant_drift(&x)?;
        out.push(DriftPoint {
            t: (step + 1) as f64 * h,
            dh,
            dc,
        });
    }
    Ok(out)
}

pub const DRIFT_HEADER: &str = "t,dH,dC";

pub fn write_drift_csv<W: Write>(points: &[DriftPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{DRIFT_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{}", fmt_float(p.t), fmt_float(p.dh), fmt_float(p.dc))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::DriverConfig;
    use crate::problems::Problem;

    fn config(method: &str, sigma: f64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Problem::reference_rigid_body(),
            vec![method.into()],
            1.0,
            vec![1.0 / 16.0],
            DriverConfig::gaussian(1, sigma, 3).unwrap(),
        );
        c.n_fine = Some(256);
        c
    }

    #[test]
    fn midpoint_keeps_quadratic_invariants() {
        let points = run_invariant_drift(&config("midpoint", 0.0)).unwrap();
        assert_eq!(points.len(), 17);
        assert_eq!(points[16].t, 1.0);
        for p in &points {
            assert!(p.dh.abs() <= 1e-10 && p.dc.abs() <= 1e-10);
        }
    }

    #[test]
    fn needs_single_method_and_casimir() {
        let mut c = config("rk4", 0.5);
        c.methods.push("eps1".into());
        assert!(matches!(run_invariant_drift(&c), Err(HarnessError::Config(_))));
        let mut kubo = config("rk4", 0.5);
        kubo.problem = Problem::kubo([1.0, 0.0]);
        kubo.observables = kubo.problem.default_observables();
        assert!(matches!(run_invariant_drift(&kubo), Err(HarnessError::Problem(_))));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_drift_csv(&[DriftPoint { t: 0.0, dh: 0.0, dc: -0.25 }], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,dH,dC\n0.0000000000000000e0,0.0000000000000000e0,-2.5000000000000000e-1\n"
        );
    }
}
