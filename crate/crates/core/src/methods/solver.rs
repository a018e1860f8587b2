//! Plain fixed-point iteration for implicit stage equations.

use crate::real::{sup_dist, Real};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    /// Sup-norm bound on the last update.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-13,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update:e})")]
    MaxIterations { iterations: usize, last_update: f64 },
    #[error("fixed-point iteration produced a non-finite iterate after {iterations} iterations")]
    NonFinite { iterations: usize },
}

/// Iterates `y <- g(y)` from `initial` until the sup-norm update drops below
/// `settings.tolerance`. Returns the accepted iterate and the number of map
/// evaluations.
pub fn solve_implicit<T, G>(
    mut map: G,
    initial: Vec<T>,
    settings: &SolverSettings,
) -> Result<(Vec<T>, usize), SolverError>
where
    T: Real,
    G: FnMut(&[T], &mut [T]),
{
    let tol = T::lit(settings.tolerance);
    let mut current = initial;
    let mut next = vec![T::zero(); current.len()];
    let mut last_update = T::infinity();
    for iteration in 1..=settings.max_iterations {
        map(&current, &mut next);
        let update = sup_dist(&current, &next);
        std::mem::swap(&mut current, &mut next);
        if !update.is_finite() || current.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite {
                iterations: iteration,
            });
        }
        if update < tol {
            return Ok((current, iteration));
        }
        last_update = update;
    }
    Err(SolverError::MaxIterations {
        iterations: settings.max_iterations,
        last_update: last_update.to_f64().unwrap_or(f64::NAN),
    })
}
