//! Stochastic rigid body as a Lie–Poisson system:
//! `dX = B(X) ∇H(X) (dt + c ∘ dW)` with `B(X)` the cross-product matrix of
//! `X`, `H = ½ Σ X_i² / I_i` and Casimir `C = |X|²`.

use crate::field::{DerivativeOracle, PoissonSystem, VectorField};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyParams {
    pub inertia: [f64; 3],
}

impl RigidBodyParams {
    /// Moments of inertia used in the reference experiments.
    pub const REFERENCE: RigidBodyParams = RigidBodyParams {
        inertia: [0.345, 0.653, 1.0],
    };

    pub fn is_valid(&self) -> bool {
        self.inertia.iter().all(|&i| i > 0.0 && i.is_finite())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RigidBody {
    params: RigidBodyParams,
}

impl RigidBody {
    pub fn new(params: RigidBodyParams) -> Self {
        RigidBody { params }
    }

    pub fn params(&self) -> &RigidBodyParams {
        &self.params
    }

    /// Angular velocity `ω = I^{-1} v` (the gradient of `H` at `v`).
    fn omega<T: Real>(&self, v: &[T]) -> [T; 3] {
        let i = self.params.inertia;
        [v[0] / T::lit(i[0]), v[1] / T::lit(i[1]), v[2] / T::lit(i[2])]
    }

    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        let w = self.omega(x);
        0.5 * (x[0] * w[0] + x[1] * w[1] + x[2] * w[2])
    }

    pub fn casimir(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }
}

fn cross<T: Real>(a: &[T], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl<T: Real> VectorField<T> for RigidBody {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(&cross(x, &self.omega(x)));
    }

    fn as_poisson(&self) -> Option<&dyn PoissonSystem<T>> {
        Some(self)
    }
}

impl<T: Real> DerivativeOracle<T> for RigidBody {
    fn derivative(&self, x: &[T], dirs: &[&[T]], out: &mut [T]) {
        // f(x) = x × ω(x) is quadratic: f' v = v × ω(x) + x × ω(v),
        // f''(u, v) = u × ω(v) + v × ω(u), higher derivatives vanish.
        match dirs {
            [] => self.eval(x, out),
            [v] => {
                let a = cross(v, &self.omega(x));
                let b = cross(x, &self.omega(v));
                for k in 0..3 {
                    out[k] = a[k] + b[k];
                }
            }
            [u, v] => {
                let a = cross(u, &self.omega(v));
                let b = cross(v, &self.omega(u));
                for k in 0..3 {
                    out[k] = a[k] + b[k];
                }
            }
            _ => out.fill(T::zero()),
        }
    }
}

impl<T: Real> PoissonSystem<T> for RigidBody {
    fn structure_matrix(&self, x: &[T], out: &mut [T]) {
        let z = T::zero();
        out.copy_from_slice(&[z, -x[2], x[1], x[2], z, -x[0], -x[1], x[0], z]);
    }

    fn grad_hamiltonian(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.omega(x));
    }
}
