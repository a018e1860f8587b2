//! Smooth cutoff of a vector field outside a Casimir ball:
//!
//! ```text
//! f̃(x) = f(x) φ(4C0 - C(x)) / (φ(C(x) - 2C0) + φ(4C0 - C(x)))
//! φ(r) = exp(-1/r) for r > 0, 0 otherwise
//! ```
//!
//! `f̃ = f` wherever `C <= 2 C0` and `f̃ = 0` wherever `C >= 4 C0`. For
//! Poisson systems the factor multiplies `B`, so `B̃` stays skew and the
//! energy-preserving schemes keep conserving `H`.

use crate::field::{PoissonSystem, VectorField};
use crate::real::Real;

pub fn mollifier<T: Real>(r: T) -> T {
    if r > T::zero() {
        (-r.recip()).exp()
    } else {
        T::zero()
    }
}

/// Cutoff factor in `[0, 1]` at Casimir value `c`.
pub fn cutoff_factor<T: Real>(c: T, c0: T) -> T {
    let inner = mollifier(T::lit(4.0) * c0 - c);
    let outer = mollifier(c - T::lit(2.0) * c0);
    let denom = inner + outer;
    // The two arguments sum to 2 C0 > 0, so at least one is positive.
    debug_assert!(denom > T::zero());
    inner / denom
}

pub struct CutoffField<'a, F: ?Sized, C> {
    inner: &'a F,
    casimir: C,
    c0: f64,
}

impl<'a, F: ?Sized, C> CutoffField<'a, F, C> {
    /// Panics unless `c0 > 0`.
    pub fn new(inner: &'a F, casimir: C, c0: f64) -> Self {
        assert!(c0 > 0.0, "cutoff needs C0 > 0, got {c0}");
        CutoffField { inner, casimir, c0 }
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }
}

impl<T, F, C> VectorField<T> for CutoffField<'_, F, C>
where
    T: Real,
    F: VectorField<T> + ?Sized,
    C: Fn(&[T]) -> T + Sync,
{
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        self.inner.eval(x, out);
        let k = cutoff_factor((self.casimir)(x), T::lit(self.c0));
        if k != T::one() {
            out.iter_mut().for_each(|v| *v = *v * k);
        }
    }

    fn as_poisson(&self) -> Option<&dyn PoissonSystem<T>> {
        self.inner.as_poisson()?;
        Some(self)
    }
}

impl<T, F, C> PoissonSystem<T> for CutoffField<'_, F, C>
where
    T: Real,
    F: VectorField<T> + ?Sized,
    C: Fn(&[T]) -> T + Sync,
{
    fn structure_matrix(&self, x: &[T], out: &mut [T]) {
        let inner = self
            .inner
            .as_poisson()
            .expect("cutoff exposes a Poisson form only when the inner field has one");
        inner.structure_matrix(x, out);
        let k = cutoff_factor((self.casimir)(x), T::lit(self.c0));
        if k != T::one() {
            out.iter_mut().for_each(|v| *v = *v * k);
        }
    }

    fn grad_hamiltonian(&self, x: &[T], out: &mut [T]) {
        self.inner
            .as_poisson()
            .expect("cutoff exposes a Poisson form only when the inner field has one")
            .grad_hamiltonian(x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant;

    impl VectorField<f64> for Constant {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, _: &[f64], out: &mut [f64]) {
            out[0] = 0.3;
            out[1] = -1.7;
        }
    }

    #[test]
    fn factor_regions() {
        assert_eq!(mollifier(0.0), 0.0);
        assert_eq!(mollifier(-2.0), 0.0);
        assert_eq!(mollifier(1.0), (-1.0f64).exp());
        let c0 = 1.0;
        for c in [0.0, 0.5, 1.0, 2.0] {
            assert_eq!(cutoff_factor(c, c0), 1.0);
        }
        for c in [4.0, 5.0, 100.0] {
            assert_eq!(cutoff_factor(c, c0), 0.0);
        }
        assert_eq!(cutoff_factor(3.0, c0), 0.5);
        let mid = cutoff_factor(2.5, c0);
        assert!(mid > 0.5 && mid < 1.0);
    }

    #[test]
    fn wrapper_scales_field() {
        let sq = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let field = CutoffField::new(&Constant, sq, 1.0);
        let mut out = [0.0; 2];
        field.eval(&[1.0, 1.0], &mut out);
        assert_eq!(out, [0.3, -1.7]);
        field.eval(&[3.0f64.sqrt(), 0.0], &mut out);
        // C = 3 up to the rounding of sqrt(3)^2.
        assert!((out[0] - 0.15).abs() < 1e-15 && (out[1] + 0.85).abs() < 1e-15);
        field.eval(&[2.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
        assert!(field.as_poisson().is_none());
    }
}
