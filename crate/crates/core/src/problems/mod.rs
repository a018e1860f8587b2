//! Model problems: the stochastic rigid body, the Kubo oscillator and the
//! fatigue-cracking equation, each with derivative oracle, invariants and a
//! reference for the exact solution.
//!
//! The exact solution of `dX = f(X) ∘ dμ` is the deterministic flow of `f`
//! evaluated at the random time `μ(t)`, so every problem provides that flow:
//! in closed form where one exists and otherwise through
//! [`exact_flow_reference`].

mod fatigue;
mod kubo;
mod rigid_body;

pub use fatigue::Fatigue;
pub use kubo::Kubo;
pub use rigid_body::{RigidBody, RigidBodyParams};

use crate::field::{DerivativeOracle, PoissonSystem, VectorField};
use crate::methods::cutoff::CutoffField;
use crate::methods::solver::SolverSettings;
use crate::methods::Method;
use crate::real::{sup_dist, Real};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const PROBLEM_NAMES: [&str; 3] = ["rigid-body", "kubo", "fatigue"];

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem {0:?} (known: rigid-body, kubo, fatigue)")]
    UnknownProblem(String),
    #[error("problem {problem} has no parameter {key:?}")]
    UnknownParameter { problem: String, key: String },
    #[error("invalid value {value:?} for parameter {key:?}: {reason}")]
    InvalidParameter {
        key: String,
        value: String,
        reason: String,
    },
    #[error("finite-time blow-up before time {time}")]
    BlowUp { time: f64 },
    #[error("reference flow to time {time} not certified to {tolerance:e} (last change {last_change:e})")]
    ReferenceAccuracy {
        time: f64,
        tolerance: f64,
        last_change: f64,
    },
    #[error("problem {problem} does not define invariant {invariant}")]
    MissingInvariant { problem: String, invariant: String },
    #[error("cannot parse observable {0:?} (use one, xi^2 or xixj)")]
    Observable(String),
}

/// Test functional `g` for weak errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    Constant,
    /// `x_i x_j`, 1-based.
    Product(usize, usize),
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Observable::Constant => 1.0,
            Observable::Product(i, j) => x[i - 1] * x[j - 1],
        }
    }

    pub fn fits(&self, dim: usize) -> bool {
        match *self {
            Observable::Constant => true,
            Observable::Product(i, j) => (1..=dim).contains(&i) && (1..=dim).contains(&j),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Observable::Constant => f.write_str("one"),
            Observable::Product(i, j) if i == j => write!(f, "x{i}^2"),
            Observable::Product(i, j) => write!(f, "x{i}x{j}"),
        }
    }
}

impl FromStr for Observable {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ProblemError::Observable(s.to_string());
        let s = s.trim();
        if s == "one" {
            return Ok(Observable::Constant);
        }
        let index = |t: &str| -> Result<usize, ProblemError> {
            t.parse::<usize>().ok().filter(|&i| i >= 1).ok_or_else(err)
        };
        if let Some(i) = s.strip_prefix('x').and_then(|r| r.strip_suffix("^2")) {
            let i = index(i)?;
            return Ok(Observable::Product(i, i));
        }
        let rest = s.strip_prefix('x').ok_or_else(err)?;
        let (i, j) = rest.split_once('x').ok_or_else(err)?;
        Ok(Observable::Product(index(i)?, index(j)?))
    }
}

#[derive(Clone, Debug)]
pub enum ProblemKind {
    RigidBody(RigidBody),
    Kubo(Kubo),
    Fatigue(Fatigue),
}

/// A model problem with its initial state.
#[derive(Clone, Debug)]
pub struct Problem {
    kind: ProblemKind,
    x0: Vec<f64>,
}

impl Problem {
    pub fn rigid_body(params: RigidBodyParams, x0: [f64; 3]) -> Result<Self, ProblemError> {
        if !params.is_valid() {
            return Err(invalid("inertia", &format!("{:?}", params.inertia), "moments of inertia must be positive"));
        }
        Ok(Problem {
            kind: ProblemKind::RigidBody(RigidBody::new(params)),
            x0: x0.to_vec(),
        })
    }

    /// Rigid body with the reference inertia and `X(0) = (0.8, 0.6, 0)`.
    pub fn reference_rigid_body() -> Self {
        Problem::rigid_body(RigidBodyParams::REFERENCE, [0.8, 0.6, 0.0]).unwrap()
    }

    pub fn kubo(x0: [f64; 2]) -> Self {
        Problem {
            kind: ProblemKind::Kubo(Kubo),
            x0: x0.to_vec(),
        }
    }

    /// `dX = aX^p dt + bX^p ∘ dW`, folded to `f = a x^p` with `σ = b/a`.
    pub fn fatigue(a: f64, b: f64, p: f64, x0: f64) -> Result<Self, ProblemError> {
        if !(p > 1.0) {
            return Err(invalid("p", &p.to_string(), "need p > 1"));
        }
        if !(x0 > 0.0) {
            return Err(invalid("x0", &x0.to_string(), "need x0 > 0"));
        }
        if a == 0.0 || !a.is_finite() {
            return Err(invalid("a", &a.to_string(), "need a != 0"));
        }
        Ok(Problem {
            kind: ProblemKind::Fatigue(Fatigue { a, b, p }),
            x0: vec![x0],
        })
    }

    /// Builds a registry problem from `key = value` parameters; unspecified
    /// parameters take their defaults and unknown keys are rejected.
    pub fn from_registry(name: &str, params: &[(String, String)]) -> Result<Self, ProblemError> {
        let unknown = |key: &str| ProblemError::UnknownParameter {
            problem: name.to_string(),
            key: key.to_string(),
        };
        match name {
            "rigid-body" => {
                let mut inertia = RigidBodyParams::REFERENCE.inertia;
                let mut x0 = [0.8, 0.6, 0.0];
                for (key, value) in params {
                    match key.as_str() {
                        "inertia" => inertia = parse_array(key, value)?,
                        "x0" => x0 = parse_array(key, value)?,
                        _ => return Err(unknown(key)),
                    }
                }
                Problem::rigid_body(RigidBodyParams { inertia }, x0)
            }
            "kubo" => {
                let mut x0 = [1.0, 0.0];
                for (key, value) in params {
                    match key.as_str() {
                        "x0" => x0 = parse_array(key, value)?,
                        _ => return Err(unknown(key)),
                    }
                }
                Ok(Problem::kubo(x0))
            }
            "fatigue" => {
                let (mut a, mut b, mut p, mut x0) = (0.5, 0.25, 2.0, 1.0);
                for (key, value) in params {
                    let v = parse_number(key, value)?;
                    match key.as_str() {
                        "a" => a = v,
                        "b" => b = v,
                        "p" => p = v,
                        "x0" => x0 = v,
                        _ => return Err(unknown(key)),
                    }
                }
                Problem::fatigue(a, b, p, x0)
            }
            _ => Err(ProblemError::UnknownProblem(name.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::RigidBody(_) => "rigid-body",
            ProblemKind::Kubo(_) => "kubo",
            ProblemKind::Fatigue(_) => "fatigue",
        }
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn with_x0(mut self, x0: &[f64]) -> Self {
        assert_eq!(x0.len(), self.x0.len());
        self.x0 = x0.to_vec();
        self
    }

    /// Driver coefficients dictated by the problem itself: fatigue folds
    /// its drift into `f`, leaving `λ = 1, σ = b/a`.
    pub fn noise_override(&self) -> Option<(u8, f64)> {
        match &self.kind {
            ProblemKind::Fatigue(f) => Some((1, f.sigma())),
            _ => None,
        }
    }

    pub fn hamiltonian(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            ProblemKind::RigidBody(rb) => Some(rb.hamiltonian(x)),
            ProblemKind::Kubo(k) => Some(k.hamiltonian(x)),
            ProblemKind::Fatigue(_) => None,
        }
    }

    pub fn casimir(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            ProblemKind::RigidBody(rb) => Some(rb.casimir(x)),
            _ => None,
        }
    }

    /// `H(x) - H(x0)` and `C(x) - C(x0)`; both invariants must exist.
    pub fn invariant_drift(&self, x: &[f64]) -> Result<(f64, f64), ProblemError> {
        let missing = |inv: &str| ProblemError::MissingInvariant {
            problem: self.name().to_string(),
            invariant: inv.to_string(),
        };
        let dh = self.hamiltonian(x).ok_or_else(|| missing("H"))?
            - self.hamiltonian(&self.x0).ok_or_else(|| missing("H"))?;
        let dc = self.casimir(x).ok_or_else(|| missing("C"))?
            - self.casimir(&self.x0).ok_or_else(|| missing("C"))?;
        Ok((dh, dc))
    }

    /// The field with the mollifier cutoff around `C(x0)`, `C = |x|²`.
    pub fn cutoff_field<T: Real>(&self) -> CutoffField<'_, Problem, impl Fn(&[T]) -> T + Sync> {
        let c0 = squared_norm(&self.x0);
        CutoffField::new(self, |x: &[T]| squared_norm(x), c0)
    }

    /// One step of `method`, applying the cutoff when the method asks for it.
    pub fn step<T: Real>(
        &self,
        method: &Method<T>,
        x: &[T],
        dmu: T,
    ) -> Result<Vec<T>, crate::methods::StepError> {
        if method.cutoff() {
            method.step(&self.cutoff_field::<T>(), x, dmu)
        } else {
            method.step(self, x, dmu)
        }
    }

    /// Closed-form deterministic flow to signed time `s`, when one exists.
    pub fn closed_form_flow(&self, x: &[f64], s: f64) -> Option<Result<Vec<f64>, ProblemError>> {
        match &self.kind {
            ProblemKind::Kubo(k) => Some(Ok(k.exact_flow(x, s))),
            ProblemKind::Fatigue(f) => Some(
                f.exact_flow(x[0], s)
                    .map(|v| vec![v])
                    .ok_or(ProblemError::BlowUp { time: s }),
            ),
            ProblemKind::RigidBody(_) => None,
        }
    }

    /// Deterministic flow to signed time `s`: closed form when available,
    /// otherwise [`exact_flow_reference`] certified to `tolerance`.
    pub fn flow(&self, x: &[f64], s: f64, tolerance: f64) -> Result<Vec<f64>, ProblemError> {
        match self.closed_form_flow(x, s) {
            Some(result) => result,
            None => exact_flow_reference(self, x, s, tolerance),
        }
    }

    /// Closed-form `E[g(X(T))]` for the SDE with driver `λt + σW(t)`.
    pub fn weak_expectation(&self, obs: &Observable, lambda: f64, sigma: f64, t: f64) -> Option<f64> {
        match &self.kind {
            ProblemKind::Kubo(k) => k.second_moment(obs, &self.x0, lambda, sigma, t),
            _ => match obs {
                Observable::Constant => Some(1.0),
                _ => None,
            },
        }
    }

    /// Observables reported by default in weak studies.
    pub fn default_observables(&self) -> Vec<Observable> {
        (1..=self.x0.len()).map(|i| Observable::Product(i, i)).collect()
    }
}

fn squared_norm<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |s, &v| s + v * v)
}

fn invalid(key: &str, value: &str, reason: &str) -> ProblemError {
    ProblemError::InvalidParameter {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_number(key: &str, value: &str) -> Result<f64, ProblemError> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|e| invalid(key, value, &e.to_string()))
}

fn parse_array<const N: usize>(key: &str, value: &str) -> Result<[f64; N], ProblemError> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| parse_number(key, p))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| invalid(key, value, &format!("expected {N} comma-separated numbers")))
}

impl<T: Real> VectorField<T> for Problem {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        match &self.kind {
            ProblemKind::RigidBody(p) => p.eval(x, out),
            ProblemKind::Kubo(p) => p.eval(x, out),
            ProblemKind::Fatigue(p) => p.eval(x, out),
        }
    }

    fn as_poisson(&self) -> Option<&dyn PoissonSystem<T>> {
        match &self.kind {
            ProblemKind::RigidBody(p) => Some(p),
            ProblemKind::Kubo(p) => Some(p),
            ProblemKind::Fatigue(_) => None,
        }
    }
}

impl<T: Real> DerivativeOracle<T> for Problem {
    fn derivative(&self, x: &[T], dirs: &[&[T]], out: &mut [T]) {
        match &self.kind {
            ProblemKind::RigidBody(p) => p.derivative(x, dirs, out),
            ProblemKind::Kubo(p) => p.derivative(x, dirs, out),
            ProblemKind::Fatigue(p) => p.derivative(x, dirs, out),
        }
    }
}

/// Substep size the reference flow starts from.
const REFERENCE_START_STEP: f64 = 0.125;
const REFERENCE_MAX_HALVINGS: usize = 16;

/// Deterministic flow of `ẏ = f(y)` to signed time `s` by 3-stage Gauss
/// collocation. The substep is halved until two successive results differ
/// by less than `tolerance` in the sup norm, and the finer one is returned.
pub fn exact_flow_reference<F: VectorField<f64> + ?Sized>(
    field: &F,
    x0: &[f64],
    s: f64,
    tolerance: f64,
) -> Result<Vec<f64>, ProblemError> {
    if s == 0.0 {
        return Ok(x0.to_vec());
    }
    let method = Method::<f64>::from_name("gauss3")
        .expect("gauss3 is registered")
        .with_solver(SolverSettings {
            tolerance: 1e-15,
            max_iterations: 100,
        });
    let integrate = |n: usize| -> Option<Vec<f64>> {
        let h = s / n as f64;
        let mut x = x0.to_vec();
        for _ in 0..n {
            x = method.step(field, &x, h).ok()?;
        }
        Some(x)
    };
    let mut n = (s.abs() / REFERENCE_START_STEP).ceil().max(1.0) as usize;
    let mut coarse = integrate(n);
    let mut last_change = f64::INFINITY;
    for _ in 0..REFERENCE_MAX_HALVINGS {
        n *= 2;
        let fine = integrate(n);
        if let (Some(c), Some(f)) = (&coarse, &fine) {
            last_change = sup_dist(c, f);
            if last_change < tolerance {
                return Ok(fine.unwrap());
            }
        }
        coarse = fine;
    }
    Err(ProblemError::ReferenceAccuracy {
        time: s,
        tolerance,
        last_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.5..1.5)).collect()
    }

    #[test]
    fn reference_rigid_body_invariants() {
        let p = Problem::reference_rigid_body();
        let h = p.hamiltonian(p.x0()).unwrap();
        assert!((h - 0.5 * (0.64 / 0.345 + 0.36 / 0.653)).abs() < 1e-15);
        assert!((h - 1.203_187_074_150_520).abs() < 1e-14);
        assert!((p.casimir(p.x0()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn principal_axis_is_fixed() {
        let p = Problem::reference_rigid_body();
        let mut out = [1.0; 3];
        VectorField::<f64>::eval(&p, &[1.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn poisson_consistency_and_conservation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [Problem::reference_rigid_body(), Problem::kubo([1.0, 0.0])] {
            let d = p.x0().len();
            for _ in 0..100 {
                let x = random_state(&mut rng, d);
                let mut f = vec![0.0; d];
                VectorField::<f64>::eval(&p, &x, &mut f);
                let poisson = VectorField::<f64>::as_poisson(&p).unwrap();
                let mut b = vec![0.0; d * d];
                let mut g = vec![0.0; d];
                poisson.structure_matrix(&x, &mut b);
                poisson.grad_hamiltonian(&x, &mut g);
                for i in 0..d {
                    for j in 0..d {
                        assert!((b[i * d + j] + b[j * d + i]).abs() <= 1e-14);
                    }
                    let bg: f64 = (0..d).map(|j| b[i * d + j] * g[j]).sum();
                    assert!((bg - f[i]).abs() < 1e-12);
                }
                // ∇H · f = 0 and ∇C · f = 0.
                let dh: f64 = g.iter().zip(&f).map(|(a, b)| a * b).sum();
                let dc: f64 = x.iter().zip(&f).map(|(a, b)| 2.0 * a * b).sum();
                assert!(dh.abs() < 1e-12 && dc.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rigid_body_derivatives_match_finite_differences() {
        let p = Problem::reference_rigid_body();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = random_state(&mut rng, 3);
            let u = random_state(&mut rng, 3);
            let v = random_state(&mut rng, 3);
            for dirs in [vec![u.as_slice()], vec![u.as_slice(), v.as_slice()]] {
                let mut exact = vec![0.0; 3];
                p.derivative(&x, &dirs, &mut exact);
                let fd = crate::bseries::finite_difference_derivative(&p, &x, &dirs);
                for k in 0..3 {
                    assert!((fd[k] - exact[k]).abs() < 1e-7, "{fd:?} vs {exact:?}");
                }
            }
            let mut uv = vec![0.0; 3];
            let mut vu = vec![0.0; 3];
            p.derivative(&x, &[&u, &v], &mut uv);
            p.derivative(&x, &[&v, &u], &mut vu);
            assert_eq!(uv, vu);
        }
    }

    #[test]
    fn kubo_closed_forms() {
        let k = Problem::kubo([1.0, 0.0]);
        let q = k.flow(&[1.0, 0.0], std::f64::consts::FRAC_PI_2, 1e-12).unwrap();
        assert!(q[0].abs() < 1e-15 && (q[1] - 1.0).abs() < 1e-15);
        let g = Observable::Product(1, 1);
        let det = k.weak_expectation(&g, 1.0, 0.0, 0.8).unwrap();
        assert!((det - 0.8f64.cos().powi(2)).abs() < 1e-15);
        let noisy = k.weak_expectation(&g, 1.0, 0.5, 1.0).unwrap();
        assert!((noisy - (0.5 + 0.5 * (-0.5f64).exp() * 2f64.cos())).abs() < 1e-15);
        assert!((noisy - 0.373_797_092_345_868).abs() < 1e-14);
    }

    #[test]
    fn reference_flow_matches_rotation() {
        let k = Problem::kubo([0.3, -0.7]);
        for s in [0.3, -0.3, 1.7, -1.7] {
            let reference = exact_flow_reference(&k, k.x0(), s, 1e-12).unwrap();
            let exact = Kubo.exact_flow(k.x0(), s);
            assert!(sup_dist(&reference, &exact) < 1e-12, "s={s}");
        }
        assert_eq!(exact_flow_reference(&k, k.x0(), 0.0, 1e-12).unwrap(), k.x0());
    }

    #[test]
    fn rigid_body_flow_group_property() {
        let p = Problem::reference_rigid_body();
        let there = p.flow(p.x0(), 0.9, 1e-12).unwrap();
        let back = p.flow(&there, -0.9, 1e-12).unwrap();
        assert!(sup_dist(&back, p.x0()) < 1e-10);
        let c = p.casimir(&there).unwrap();
        let h = p.hamiltonian(&there).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!((h - p.hamiltonian(p.x0()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fatigue_flow() {
        let p = Problem::fatigue(1.0, 0.0, 2.0, 1.0).unwrap();
        assert!((p.flow(&[1.0], 0.5, 1e-12).unwrap()[0] - 2.0).abs() < 1e-15);
        assert_eq!(p.flow(&[1.0], 0.0, 1e-12).unwrap(), vec![1.0]);
        assert_eq!(p.flow(&[1.0], 1.0, 1e-12), Err(ProblemError::BlowUp { time: 1.0 }));
        let q = Problem::fatigue(0.5, 0.25, 2.0, 1.0).unwrap();
        assert_eq!(q.noise_override(), Some((1, 0.5)));
        // Closed form against numerical integration of y' = a y^p.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s: f64 = rng.random_range(-0.8..0.8);
            let closed = q.flow(q.x0(), s, 1e-12).unwrap();
            let numeric = exact_flow_reference(&q, q.x0(), s, 1e-12).unwrap();
            assert!((closed[0] - numeric[0]).abs() < 1e-10);
        }
        assert!(Problem::fatigue(1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn registry_and_observables() {
        let p = Problem::from_registry("rigid-body", &[("x0".into(), "1, 0, 0".into())]).unwrap();
        assert_eq!(p.x0(), &[1.0, 0.0, 0.0]);
        assert!(matches!(
            Problem::from_registry("kubo", &[("inertia".into(), "1,1,1".into())]),
            Err(ProblemError::UnknownParameter { .. })
        ));
        assert!(matches!(
            Problem::from_registry("pendulum", &[]),
            Err(ProblemError::UnknownProblem(_))
        ));
        for s in ["x1^2", "x1x2", "x3^2", "one"] {
            let o: Observable = s.parse().unwrap();
            assert_eq!(o.to_string(), s);
        }
        assert!("x0^2".parse::<Observable>().is_err());
        assert!("y1".parse::<Observable>().is_err());
    }
}
