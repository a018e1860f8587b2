//! One-step integrators driven by a (possibly random, possibly negative)
//! step `Δμ`. Every scheme here is the deterministic method with `h`
//! replaced by `Δμ`; nothing in the stepping code knows about noise.
//!
//! Implicit stage equations are solved by plain fixed-point iteration
//! started from the current state.

pub mod cutoff;
pub mod quadrature;
pub mod solver;
pub mod tableau;

use crate::field::{mat_vec, VectorField};
use crate::real::Real;
use quadrature::{lagrange_basis, lagrange_integral, Quadrature};
use solver::solve_implicit;
use std::fmt;
use thiserror::Error;

pub use solver::{SolverError, SolverSettings};
pub use tableau::{detect_deterministic_order, elementary_weight, ButcherTableau, OrderReport};

/// Names accepted by [`Method::from_name`], without the `.cutoff` suffix.
pub const METHOD_NAMES: [&str; 10] = [
    "euler", "heun", "rk4", "midpoint", "gauss2", "gauss3", "avf", "eps1", "eps2", "eps3",
];

#[derive(Debug, Error, PartialEq)]
pub enum MethodError {
    #[error("unknown method {0:?} (known: euler, heun, rk4, midpoint, gauss2, gauss3, avf, eps1, eps2, eps3, each optionally with .cutoff)")]
    UnknownMethod(String),
    #[error("invalid method parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum StepError {
    #[error("implicit stage iteration failed at |Δμ| = {dmu_abs:e}: {source}")]
    NonConvergence {
        dmu_abs: f64,
        #[source]
        source: SolverError,
    },
    #[error("{method} needs a Poisson structure (B, ∇H) that the problem does not provide")]
    MissingPoissonStructure { method: String },
}

/// Coefficients of the energy-preserving collocation method EP(s).
///
/// The stage polynomial is `u(θ) = x + Σ_j Z_j L_j(θ)` with `L_j = ∫_0^θ ℓ_j`
/// over Lagrange polynomials on the `s` Gauss nodes. The scaled slopes solve
/// `Z_i = Δμ B(u(c_i)) (1/b_i) ∫_0^1 ℓ_i ∇H(u)`, the integral taken with a
/// `Q`-point Gauss rule, and the step returns `u(1) = x + Σ b_i Z_i`.
#[derive(Clone, Debug)]
pub struct EpCoefficients<T> {
    stages: usize,
    /// Collocation weights `b_i`.
    b: Vec<T>,
    /// `L_j(c_i)`.
    at_nodes: Vec<Vec<T>>,
    quad: Quadrature<T>,
    /// `L_j(τ_q)`.
    at_quad: Vec<Vec<T>>,
    /// `w_q ℓ_i(τ_q) / b_i`.
    projection: Vec<Vec<T>>,
}

impl<T: Real> EpCoefficients<T> {
    pub fn new(stages: usize, quad_points: usize) -> Result<Self, MethodError> {
        if stages == 0 || quad_points < stages {
            return Err(MethodError::InvalidParameters(format!(
                "EP needs s >= 1 and Q >= s, got s = {stages}, Q = {quad_points}"
            )));
        }
        let gauss = Quadrature::<T>::gauss_legendre(stages);
        let quad = Quadrature::<T>::gauss_legendre(quad_points);
        let integrals = |theta: T| -> Vec<T> {
            (0..stages)
                .map(|j| lagrange_integral(&gauss.nodes, &gauss, j, theta))
                .collect()
        };
        let at_nodes = gauss.nodes.iter().map(|&c| integrals(c)).collect();
        let at_quad = quad.nodes.iter().map(|&t| integrals(t)).collect();
        let projection = (0..stages)
            .map(|i| {
                quad.nodes
                    .iter()
                    .zip(&quad.weights)
                    .map(|(&t, &w)| w * lagrange_basis(&gauss.nodes, i, t) / gauss.weights[i])
                    .collect()
            })
            .collect();
        Ok(EpCoefficients {
            stages,
            b: gauss.weights,
            at_nodes,
            quad,
            at_quad,
            projection,
        })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn quad_points(&self) -> usize {
        self.quad.len()
    }
}

#[derive(Clone, Debug)]
pub enum Scheme<T> {
    RungeKutta(ButcherTableau<T>),
    /// Averaged vector field with a Gauss rule for `∫_0^1 f(x + τ(x1 - x)) dτ`.
    Avf(Quadrature<T>),
    EnergyPreserving(EpCoefficients<T>),
}

/// A named one-step method plus its cutoff flag and solver settings.
#[derive(Clone, Debug)]
pub struct Method<T = f64> {
    name: String,
    scheme: Scheme<T>,
    cutoff: bool,
    solver: SolverSettings,
}

/// Default quadrature size: exact for quadratic Hamiltonians.
pub fn default_quad_points(stages: usize) -> usize {
    stages.max(3)
}

impl<T: Real> Method<T> {
    pub fn new(name: impl Into<String>, scheme: Scheme<T>) -> Self {
        Method {
            name: name.into(),
            scheme,
            cutoff: false,
            solver: SolverSettings::default(),
        }
    }

    pub fn rk(name: impl Into<String>, tableau: ButcherTableau<T>) -> Self {
        Method::new(name, Scheme::RungeKutta(tableau))
    }

    pub fn avf(quad_points: usize) -> Result<Self, MethodError> {
        if quad_points == 0 {
            return Err(MethodError::InvalidParameters("AVF needs Q >= 1".into()));
        }
        Ok(Method::new(
            "avf",
            Scheme::Avf(Quadrature::gauss_legendre(quad_points)),
        ))
    }

    pub fn energy_preserving(stages: usize, quad_points: usize) -> Result<Self, MethodError> {
        Ok(Method::new(
            format!("eps{stages}"),
            Scheme::EnergyPreserving(EpCoefficients::new(stages, quad_points)?),
        ))
    }

    /// Looks up a registry name, e.g. `"rk4"` or `"eps2.cutoff"`.
    pub fn from_name(name: &str) -> Result<Self, MethodError> {
        let (base, cutoff) = match name.strip_suffix(".cutoff") {
            Some(base) => (base, true),
            None => (name, false),
        };
        let unknown = || MethodError::UnknownMethod(name.to_string());
        let mut method = match base {
            "euler" => Method::rk(base, ButcherTableau::explicit_euler()),
            "heun" => Method::rk(base, ButcherTableau::heun()),
            "rk4" => Method::rk(base, ButcherTableau::rk4()),
            "midpoint" => Method::rk(base, ButcherTableau::implicit_midpoint()),
            "gauss2" => Method::rk(base, ButcherTableau::gauss(2)),
            "gauss3" => Method::rk(base, ButcherTableau::gauss(3)),
            "avf" => Method::avf(default_quad_points(1))?,
            "eps1" | "eps2" | "eps3" => {
                let s = (base.as_bytes()[3] - b'0') as usize;
                Method::energy_preserving(s, default_quad_points(s))?
            }
            _ => return Err(unknown()),
        };
        method.name = name.to_string();
        method.cutoff = cutoff;
        Ok(method)
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_cutoff(mut self, cutoff: bool) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scheme(&self) -> &Scheme<T> {
        &self.scheme
    }

    pub fn cutoff(&self) -> bool {
        self.cutoff
    }

    pub fn solver(&self) -> &SolverSettings {
        &self.solver
    }

    pub fn tableau(&self) -> Option<&ButcherTableau<T>> {
        match &self.scheme {
            Scheme::RungeKutta(t) => Some(t),
            _ => None,
        }
    }

    /// Whether the scheme satisfies `step(-Δμ) ∘ step(Δμ) = id`.
    pub fn is_symmetric(&self) -> bool {
        match &self.scheme {
            Scheme::RungeKutta(_) => matches!(
                self.name.trim_end_matches(".cutoff"),
                "midpoint" | "gauss2" | "gauss3"
            ),
            Scheme::Avf(_) | Scheme::EnergyPreserving(_) => true,
        }
    }

    /// Deterministic order: from the order conditions for tableaux, and the
    /// known order (2 for AVF, 2s for EP(s)) otherwise.
    pub fn deterministic_order(&self) -> usize {
        match &self.scheme {
            Scheme::RungeKutta(t) => {
                detect_deterministic_order(t, crate::trees::DEFAULT_ORDER_CAP - 2)
                    .map(|r| r.deterministic_order)
                    .unwrap_or(0)
            }
            Scheme::Avf(_) => 2,
            Scheme::EnergyPreserving(ep) => 2 * ep.stages,
        }
    }

    /// One step of size `dmu` for `field`. The cutoff flag is not applied
    /// here; wrap the field in [`cutoff::CutoffField`] for that.
    pub fn step<F: VectorField<T> + ?Sized>(
        &self,
        field: &F,
        x: &[T],
        dmu: T,
    ) -> Result<Vec<T>, StepError> {
        let nonconvergence = |source| StepError::NonConvergence {
            dmu_abs: dmu.abs().to_f64().unwrap_or(f64::NAN),
            source,
        };
        match &self.scheme {
            Scheme::RungeKutta(t) => rk_step(t, field, x, dmu, &self.solver).map_err(nonconvergence),
            Scheme::Avf(q) => avf_step(q, field, x, dmu, &self.solver).map_err(nonconvergence),
            Scheme::EnergyPreserving(ep) => {
                if field.as_poisson().is_none() {
                    return Err(StepError::MissingPoissonStructure {
                        method: self.name.clone(),
                    });
                }
                ep_step(ep, field, x, dmu, &self.solver).map_err(nonconvergence)
            }
        }
    }
}

impl<T> fmt::Display for Method<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Runge–Kutta step `x + Δμ Σ b_i f(Y_i)` with `Y_i = x + Δμ Σ a_ij f(Y_j)`.
/// The unknowns are the stage offsets `Z_i = Y_i - x`, started at zero.
pub fn rk_step<T: Real, F: VectorField<T> + ?Sized>(
    tableau: &ButcherTableau<T>,
    field: &F,
    x: &[T],
    dmu: T,
    solver: &SolverSettings,
) -> Result<Vec<T>, SolverError> {
    let d = x.len();
    let s = tableau.stages();
    let a = tableau.a();
    let mut slopes = vec![T::zero(); s * d];
    let mut stage = vec![T::zero(); d];

    if tableau.is_explicit() {
        for i in 0..s {
            for k in 0..d {
                stage[k] = x[k] + dmu * (0..i).fold(T::zero(), |acc, j| acc + a[i][j] * slopes[j * d + k]);
            }
            field.eval(&stage, &mut slopes[i * d..(i + 1) * d]);
        }
    } else {
        let mut fz = vec![T::zero(); s * d];
        let map = |z: &[T], out: &mut [T]| {
            for j in 0..s {
                for k in 0..d {
                    stage[k] = x[k] + z[j * d + k];
                }
                field.eval(&stage, &mut fz[j * d..(j + 1) * d]);
            }
            for i in 0..s {
                for k in 0..d {
                    out[i * d + k] =
                        dmu * (0..s).fold(T::zero(), |acc, j| acc + a[i][j] * fz[j * d + k]);
                }
            }
        };
        let (z, _) = solve_implicit(map, vec![T::zero(); s * d], solver)?;
        for j in 0..s {
            for k in 0..d {
                stage[k] = x[k] + z[j * d + k];
            }
            field.eval(&stage, &mut slopes[j * d..(j + 1) * d]);
        }
    }

    let b = tableau.b();
    Ok((0..d)
        .map(|k| x[k] + dmu * (0..s).fold(T::zero(), |acc, i| acc + b[i] * slopes[i * d + k]))
        .collect())
}

/// Averaged vector field step `x1 = x + Δμ ∫_0^1 f(x + τ(x1 - x)) dτ`.
pub fn avf_step<T: Real, F: VectorField<T> + ?Sized>(
    quad: &Quadrature<T>,
    field: &F,
    x: &[T],
    dmu: T,
    solver: &SolverSettings,
) -> Result<Vec<T>, SolverError> {
    let d = x.len();
    let mut point = vec![T::zero(); d];
    let mut fp = vec![T::zero(); d];
    let map = |z: &[T], out: &mut [T]| {
        out.fill(T::zero());
        for (&tau, &w) in quad.nodes.iter().zip(&quad.weights) {
            for k in 0..d {
                point[k] = x[k] + tau * z[k];
            }
            field.eval(&point, &mut fp);
            for k in 0..d {
                out[k] = out[k] + w * fp[k];
            }
        }
        out.iter_mut().for_each(|v| *v = dmu * *v);
    };
    let (z, _) = solve_implicit(map, vec![T::zero(); d], solver)?;
    Ok(x.iter().zip(&z).map(|(&a, &b)| a + b).collect())
}

/// Energy-preserving collocation step EP(s); see [`EpCoefficients`].
pub fn ep_step<T: Real, F: VectorField<T> + ?Sized>(
    ep: &EpCoefficients<T>,
    field: &F,
    x: &[T],
    dmu: T,
    solver: &SolverSettings,
) -> Result<Vec<T>, SolverError> {
    let poisson = field
        .as_poisson()
        .expect("ep_step requires a Poisson structure");
    let d = x.len();
    let s = ep.stages;
    let nq = ep.quad.len();
    let mut point = vec![T::zero(); d];
    let mut grads = vec![T::zero(); nq * d];
    let mut g = vec![T::zero(); d];
    let mut bmat = vec![T::zero(); d * d];
    let map = |z: &[T], out: &mut [T]| {
        for q in 0..nq {
            combine(x, z, &ep.at_quad[q], &mut point);
            poisson.grad_hamiltonian(&point, &mut grads[q * d..(q + 1) * d]);
        }
        for i in 0..s {
            g.fill(T::zero());
            for q in 0..nq {
                let c = ep.projection[i][q];
                for k in 0..d {
                    g[k] = g[k] + c * grads[q * d + k];
                }
            }
            combine(x, z, &ep.at_nodes[i], &mut point);
            poisson.structure_matrix(&point, &mut bmat);
            let zi = &mut out[i * d..(i + 1) * d];
            mat_vec(&bmat, &g, zi);
            zi.iter_mut().for_each(|v| *v = dmu * *v);
        }
    };
    let (z, _) = solve_implicit(map, vec![T::zero(); s * d], solver)?;
    let mut out = vec![T::zero(); d];
    combine(x, &z, &ep.b, &mut out);
    Ok(out)
}

/// `out = x + Σ_j coeffs[j] z_j`.
fn combine<T: Real>(x: &[T], z: &[T], coeffs: &[T], out: &mut [T]) {
    let d = x.len();
    for k in 0..d {
        out[k] = coeffs
            .iter()
            .enumerate()
            .fold(x[k], |acc, (j, &c)| acc + c * z[j * d + k]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PoissonSystem;

    struct Linear;
    impl VectorField<f64> for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0];
        }
    }

    struct Square;
    impl VectorField<f64> for Square {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0] * x[0];
        }
    }

    /// Harmonic oscillator `(-x2, x1)` with `B = [[0, -1], [1, 0]]`, `H = |x|^2 / 2`.
    struct Rotation;
    impl VectorField<f64> for Rotation {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out[0] = -x[1];
            out[1] = x[0];
        }
        fn as_poisson(&self) -> Option<&dyn PoissonSystem<f64>> {
            Some(self)
        }
    }
    impl PoissonSystem<f64> for Rotation {
        fn structure_matrix(&self, _: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.0, -1.0, 1.0, 0.0]);
        }
        fn grad_hamiltonian(&self, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(x);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        for name in METHOD_NAMES {
            let m = Method::<f64>::from_name(name).unwrap();
            assert_eq!(m.step(&Rotation, &[0.3, -0.4], 0.0).unwrap(), vec![0.3, -0.4], "{name}");
        }
    }

    #[test]
    fn euler_on_linear() {
        let m = Method::<f64>::from_name("euler").unwrap();
        assert_eq!(m.step(&Linear, &[1.0], 0.5).unwrap(), vec![1.5]);
    }

    #[test]
    fn midpoint_is_cayley_rotation() {
        let m = Method::<f64>::from_name("midpoint").unwrap();
        let y = m.step(&Rotation, &[1.0, 0.0], 0.2).unwrap();
        let q = 1.0 + 0.01;
        assert!((y[0] - 0.99 / q).abs() < 1e-14);
        assert!((y[1] - 0.2 / q).abs() < 1e-14);
        assert!((y[0] - 0.980198).abs() < 1e-6 && (y[1] - 0.198019).abs() < 1e-6);
    }

    #[test]
    fn avf_matches_midpoint_on_linear_fields() {
        let avf = Method::<f64>::from_name("avf").unwrap();
        let mid = Method::<f64>::from_name("midpoint").unwrap();
        for dmu in [-0.3, 0.05, 0.2] {
            let a = avf.step(&Rotation, &[0.6, -0.8], dmu).unwrap();
            let b = mid.step(&Rotation, &[0.6, -0.8], dmu).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn avf_scalar_quadratic() {
        let avf = Method::<f64>::avf(2).unwrap();
        let y = avf.step(&Square, &[1.0], 0.1).unwrap();
        // Root of x1 = 1 + 0.1 (1 + x1 + x1^2) / 3 near 1.
        let a: f64 = 0.1 / 3.0;
        let root = ((1.0 - a) - ((1.0 - a) * (1.0 - a) - 4.0 * a * (1.0 + a)).sqrt()) / (2.0 * a);
        assert!((y[0] - root).abs() < 1e-13, "{} vs {root}", y[0]);
        assert!((root - 1.1115721610).abs() < 1e-9);
    }

    #[test]
    fn eps1_conserves_quadratic_energy() {
        let m = Method::<f64>::from_name("eps1").unwrap();
        let x = [0.6, -0.8];
        let y = m.step(&Rotation, &x, 0.37).unwrap();
        let h = |v: &[f64]| 0.5 * (v[0] * v[0] + v[1] * v[1]);
        assert!((h(&y) - h(&x)).abs() < 1e-14);
    }

    #[test]
    fn ep_requires_poisson_structure() {
        let m = Method::<f64>::from_name("eps2").unwrap();
        assert!(matches!(
            m.step(&Linear, &[1.0], 0.1),
            Err(StepError::MissingPoissonStructure { .. })
        ));
    }

    #[test]
    fn registry() {
        let m = Method::<f64>::from_name("eps3.cutoff").unwrap();
        assert!(m.cutoff());
        assert_eq!(m.name(), "eps3.cutoff");
        assert_eq!(m.deterministic_order(), 6);
        assert!(matches!(
            Method::<f64>::from_name("rk5"),
            Err(MethodError::UnknownMethod(_))
        ));
        assert!(Method::<f64>::energy_preserving(3, 2).is_err());
        assert_eq!(Method::<f64>::from_name("rk4").unwrap().deterministic_order(), 4);
        assert_eq!(Method::<f64>::from_name("avf").unwrap().deterministic_order(), 2);
    }

    #[test]
    fn nonconvergence_reports_step() {
        let m = Method::<f64>::from_name("midpoint").unwrap();
        let err = m.step(&Square, &[1.0], 5.0).unwrap_err();
        match err {
            StepError::NonConvergence { dmu_abs, .. } => assert_eq!(dmu_abs, 5.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
