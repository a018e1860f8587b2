//! Vector-field abstractions: the right-hand side `f`, its derivative oracle,
//! and an optional Poisson structure `f = B ∇H`.

use crate::real::Real;

/// Right-hand side of the single-integrand equation `dX = f(X) ∘ dμ`.
pub trait VectorField<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[T], out: &mut [T]);

    /// Poisson form of the field, when the field has one.
    fn as_poisson(&self) -> Option<&dyn PoissonSystem<T>> {
        None
    }
}

/// Analytic derivatives of `f`, as needed by elementary differentials.
pub trait DerivativeOracle<T: Real>: VectorField<T> {
    /// Highest derivative order the oracle can evaluate. Polynomial fields
    /// report `usize::MAX` and return zero beyond their degree.
    fn max_derivative_order(&self) -> usize {
        usize::MAX
    }

    /// Multilinear contraction `f^(k)(x)(v_1, ..., v_k)` with `k = dirs.len()`.
    /// `k = 0` is `f(x)` itself.
    fn derivative(&self, x: &[T], dirs: &[&[T]], out: &mut [T]);
}

/// `f(x) = B(x) ∇H(x)` with skew-symmetric `B`.
pub trait PoissonSystem<T: Real>: VectorField<T> {
    /// Row-major `d x d` structure matrix.
    fn structure_matrix(&self, x: &[T], out: &mut [T]);

    fn grad_hamiltonian(&self, x: &[T], out: &mut [T]);
}

/// `out = B v` for a row-major square matrix.
pub(crate) fn mat_vec<T: Real>(b: &[T], v: &[T], out: &mut [T]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &b[i * d..(i + 1) * d];
        *o = row.iter().zip(v).fold(T::zero(), |s, (a, x)| s + *a * *x);
    }
}
