//! Kubo oscillator: `H = ½|x|²`, `f(x) = (-x2, x1)`. The exact flow is a
//! rotation, so second moments at a random time have closed forms.

use super::Observable;
use crate::field::{DerivativeOracle, PoissonSystem, VectorField};
use crate::real::Real;

#[derive(Clone, Copy, Debug, Default)]
pub struct Kubo;

impl Kubo {
    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1])
    }

    /// Rotation of `x0` by angle `s`.
    pub fn exact_flow(&self, x0: &[f64], s: f64) -> Vec<f64> {
        let (sin, cos) = s.sin_cos();
        vec![x0[0] * cos - x0[1] * sin, x0[0] * sin + x0[1] * cos]
    }

    /// `E[g(X(T))]` for `X(T) = R(μ(T)) x0`, `μ(T) = λT + σW(T)`, using
    /// `E[e^{ikμ}] = exp(ikλT - k²σ²T/2)`.
    pub fn second_moment(&self, obs: &Observable, x0: &[f64], lambda: f64, sigma: f64, t: f64) -> Option<f64> {
        let (a, b) = (x0[0], x0[1]);
        let damp = (-2.0 * sigma * sigma * t).exp();
        let cos2 = damp * (2.0 * lambda * t).cos();
        let sin2 = damp * (2.0 * lambda * t).sin();
        let r2 = 0.5 * (a * a + b * b);
        let diff = 0.5 * (a * a - b * b);
        match *obs {
            Observable::Constant => Some(1.0),
            Observable::Product(1, 1) => Some(r2 + diff * cos2 - a * b * sin2),
            Observable::Product(2, 2) => Some(r2 - diff * cos2 + a * b * sin2),
            Observable::Product(1, 2) | Observable::Product(2, 1) => Some(diff * sin2 + a * b * cos2),
            _ => None,
        }
    }
}

impl<T: Real> VectorField<T> for Kubo {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        out[0] = -x[1];
        out[1] = x[0];
    }

    fn as_poisson(&self) -> Option<&dyn PoissonSystem<T>> {
        Some(self)
    }
}

impl<T: Real> DerivativeOracle<T> for Kubo {
    fn derivative(&self, x: &[T], dirs: &[&[T]], out: &mut [T]) {
        match dirs {
            [] => self.eval(x, out),
            [v] => self.eval(v, out),
            _ => out.fill(T::zero()),
        }
    }
}

impl<T: Real> PoissonSystem<T> for Kubo {
    fn structure_matrix(&self, _: &[T], out: &mut [T]) {
        let (z, o) = (T::zero(), T::one());
        out.copy_from_slice(&[z, -o, o, z]);
    }

    fn grad_hamiltonian(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(x);
    }
}
