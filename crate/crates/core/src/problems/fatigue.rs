//! Fatigue cracking `dX = aX^p dt + bX^p ∘ dW`, normalized to the
//! single-integrand form `f(x) = a x^p` driven by `μ̃(t) = t + (b/a) W(t)`.

use crate::field::{DerivativeOracle, VectorField};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fatigue {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl Fatigue {
    pub fn sigma(&self) -> f64 {
        self.b / self.a
    }

    /// `(x^{1-p} - (p-1) a s)^{1/(1-p)}`, or `None` past the blow-up time.
    pub fn exact_flow(&self, x0: f64, s: f64) -> Option<f64> {
        let base = x0.powf(1.0 - self.p) - (self.p - 1.0) * self.a * s;
        if base > 0.0 && x0 > 0.0 {
            Some(base.powf(1.0 / (1.0 - self.p)))
        } else {
            None
        }
    }
}

impl<T: Real> VectorField<T> for Fatigue {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        out[0] = T::lit(self.a) * x[0].powf(T::lit(self.p));
    }
}

impl<T: Real> DerivativeOracle<T> for Fatigue {
    fn derivative(&self, x: &[T], dirs: &[&[T]], out: &mut [T]) {
        let k = dirs.len();
        let falling = (0..k).fold(T::one(), |acc, i| acc * T::lit(self.p - i as f64));
        let prod = dirs.iter().fold(T::one(), |acc, v| acc * v[0]);
        out[0] = T::lit(self.a) * falling * x[0].powf(T::lit(self.p - k as f64)) * prod;
    }
}
