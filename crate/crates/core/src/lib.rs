//! Deterministic B-series integrators driven by the random step
//! `ΔM = λh + σΔW`, applied to single-integrand Stratonovich SDEs
//! `dX = f(X)(λ dt + σ ∘ dW)`.
//!
//! - [`trees`]: rooted trees with ρ, α, γ.
//! - [`bseries`]: elementary differentials and truncated B-series.
//! - [`methods`]: Runge–Kutta tableaux with an order-condition engine, the
//!   averaged vector field method, energy-preserving collocation EP(s) and
//!   the mollifier cutoff.
//! - [`drivers`]: Wiener paths with common random numbers and moment-matched
//!   discrete increments.
//! - [`problems`]: rigid body, Kubo oscillator and fatigue cracking models.
//! - [`harness`]: mean-square and weak convergence studies, order fits and
//!   invariant drift.

pub mod bseries;
pub mod drivers;
pub mod field;
pub mod harness;
pub mod methods;
pub mod problems;
pub mod real;
pub mod trees;

pub use field::{DerivativeOracle, PoissonSystem, VectorField};
pub use real::Real;
