use proptest::prelude::*;
use sisde::drivers::{sample_path, DriverConfig};
use sisde::harness::{fit_order, run_ms_convergence, ErrorFamily, ExperimentConfig, Reference};
use sisde::methods::Method;
use sisde::problems::{exact_flow_reference, Problem};

fn integrate(problem: &Problem, method: &Method, increments: &[f64]) -> Vec<f64> {
    increments
        .iter()
        .fold(problem.x0().to_vec(), |x, &dmu| problem.step(method, &x, dmu).unwrap())
}

#[test]
fn zero_noise_steps_are_the_deterministic_steps() {
    let problem = Problem::reference_rigid_body();
    let driver = DriverConfig::gaussian(1, 0.0, 99).unwrap();
    let path = sample_path(&driver, 1.0, 256, 4).unwrap();
    for factor in [1, 2, 16, 64] {
        let h = factor as f64 / 256.0;
        let increments = path.increments(factor).unwrap();
        assert!(increments.iter().all(|&d| d.to_bits() == h.to_bits()));
        for name in ["euler", "rk4", "gauss2", "avf", "eps3"] {
            let method = Method::from_name(name).unwrap();
            let stochastic = integrate(&problem, &method, &increments);
            let deterministic = integrate(&problem, &method, &vec![h; 256 / factor]);
            assert_eq!(stochastic, deterministic, "{name} at h = {h}");
        }
    }
}

#[test]
fn ep_deterministic_order_is_twice_the_stage_count() {
    let problem = Problem::reference_rigid_body();
    let t = 1.0;
    let exact = exact_flow_reference(&problem, problem.x0(), t, 1e-14).unwrap();
    for (s, ns) in [(1, [8, 16, 32, 64]), (2, [4, 8, 16, 32]), (3, [2, 4, 8, 16])] {
        let method = Method::from_name(&format!("eps{s}")).unwrap();
        let (mut hs, mut errs) = (Vec::new(), Vec::new());
        for n in ns {
            let h = t / n as f64;
            let y = integrate(&problem, &method, &vec![h; n]);
            let err = y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            hs.push(h);
            errs.push(err);
        }
        let slope = fit_order(&hs, &errs).unwrap().slope;
        assert!((slope - 2.0 * s as f64).abs() < 0.3, "eps{s}: slope {slope}, errors {errs:?}");
    }
}

#[test]
fn cutoff_is_neutral_on_the_invariant_sphere() {
    let problem = Problem::reference_rigid_body();
    let driver = DriverConfig::gaussian(1, 0.5, 5).unwrap();
    for index in 0..4 {
        let path = sample_path(&driver, 2.0, 128, index).unwrap();
        let increments = path.increments(2).unwrap();
        for name in ["midpoint", "gauss2", "eps1", "eps2"] {
            let plain = Method::from_name(name).unwrap();
            let cut = Method::from_name(&format!("{name}.cutoff")).unwrap();
            let (mut x, mut y) = (problem.x0().to_vec(), problem.x0().to_vec());
            for &dmu in &increments {
                x = problem.step(&plain, &x, dmu).unwrap();
                y = problem.step(&cut, &y, dmu).unwrap();
                let gap = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(gap <= 1e-12, "{name}: gap {gap:e}");
            }
        }
    }
}

/// Sample moments of `W(T)/√T` over 10⁵ paths: mean, variance, skewness and
/// excess kurtosis against their standard errors under normality.
#[test]
fn terminal_wiener_is_standard_normal() {
    let driver = DriverConfig::gaussian(1, 1.0, 20240601).unwrap();
    let horizon = 2.0;
    let m = 100_000u64;
    let z: Vec<f64> = (0..m)
        .map(|i| sample_path(&driver, horizon, 8, i).unwrap().terminal_wiener() / horizon.sqrt())
        .collect();
    let n = m as f64;
    let mean = z.iter().sum::<f64>() / n;
    let central = |k: i32| z.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let (var, m3, m4) = (central(2), central(3), central(4));
    let skew = m3 / var.powf(1.5);
    let kurt = m4 / (var * var) - 3.0;
    assert!(mean.abs() <= 4.0 / n.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() <= 4.0 * (2.0 / n).sqrt(), "variance {var}");
    assert!(skew.abs() <= 4.0 * (6.0 / n).sqrt(), "skewness {skew}");
    assert!(kurt.abs() <= 4.0 * (24.0 / n).sqrt(), "excess kurtosis {kurt}");
}

#[test]
fn fatigue_mean_square_study() {
    let problem = Problem::fatigue(0.5, 0.25, 2.0, 1.0).unwrap();
    // λ and σ are replaced by the problem's own (1, b/a).
    let driver = DriverConfig::gaussian(0, 3.0, 11).unwrap();
    let mut config = ExperimentConfig::new(
        problem,
        vec!["midpoint".into(), "rk4".into()],
        0.25,
        (4..=7).map(|k| 2f64.powi(-k)).collect(),
        driver,
    );
    config.n_fine = Some(1024);
    let report = run_ms_convergence(&config).unwrap();
    assert_eq!(report.rows.len(), 8);
    assert!(report.rows.iter().all(|r| r.samples == 200 && r.invalid == 0));
    let midpoint = report.slope("midpoint", &ErrorFamily::MeanSquare).unwrap();
    let rk4 = report.slope("rk4", &ErrorFamily::MeanSquare).unwrap();
    assert!((midpoint - 1.0).abs() < 0.3, "midpoint slope {midpoint}");
    assert!(rk4 >= 1.7, "rk4 slope {rk4}");
}

#[test]
fn fine_scheme_reference_runs() {
    let driver = DriverConfig::gaussian(1, 0.5, 3).unwrap();
    let mut config = ExperimentConfig::new(
        Problem::reference_rigid_body(),
        vec!["eps1".into()],
        0.5,
        vec![1.0 / 16.0, 1.0 / 32.0],
        driver,
    );
    config.samples = 20;
    config.n_fine = Some(256);
    config.reference = Reference::FineScheme {
        method: "eps3".into(),
        h: 1.0 / 256.0,
    };
    let report = run_ms_convergence(&config).unwrap();
    assert!(report.rows.iter().all(|r| r.error.value > 0.0 && r.error.stderr > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coarse_increments_are_sums_of_halves(seed in any::<u64>(), index in 0u64..1000, lambda in 0u8..=1, sigma in 0.0f64..3.0) {
        let driver = DriverConfig::gaussian(lambda, sigma, seed).unwrap();
        let path = sample_path(&driver, 1.5, 64, index).unwrap();
        for factor in [2, 4, 8, 16, 32, 64] {
            let half = factor / 2;
            for i in 0..path.steps(factor).unwrap() {
                let whole = path.wiener_increment(i, factor).unwrap();
                let parts = path.wiener_increment(2 * i, half).unwrap() + path.wiener_increment(2 * i + 1, half).unwrap();
                prop_assert_eq!(whole.to_bits(), parts.to_bits());
            }
        }
    }

    #[test]
    fn paths_depend_only_on_seed_and_index(seed in any::<u64>(), index in any::<u64>()) {
        let driver = DriverConfig::gaussian(1, 0.5, seed).unwrap();
        let a = sample_path(&driver, 1.0, 32, index).unwrap();
        let b = sample_path(&driver, 1.0, 32, index).unwrap();
        prop_assert_eq!(a.fine_increments(), b.fine_increments());
        let other = sample_path(&driver, 1.0, 32, index.wrapping_add(1)).unwrap();
        prop_assert_ne!(a.fine_increments(), other.fine_increments());
    }
}
