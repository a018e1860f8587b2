use super::HarnessError;
use crate::methods::StepError;
use crate::problems::Observable;
use rayon::prelude::*;

/// Default bound on `k^n`, the number of enumerated increment sequences.
pub const DEFAULT_ENUMERATION_CAP: u64 = 2_000_000;

const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Exact law of the numerical solution under a discrete driver.
#[derive(Clone, Debug, PartialEq)]
pub struct Enumeration {
    pub leaves: u64,
    /// Leaves below a failed step or a non-finite state.
    pub invalid_leaves: u64,
    pub invalid_probability: f64,
    /// Sum of all leaf probabilities, valid or not.
    pub total_probability: f64,
    /// `E[g(Y_n)]` per observable, conditioned on valid leaves.
    pub expectations: Vec<f64>,
}

/// Sums over one subtree, with probabilities conditional on its root.
#[derive(Clone, Default)]
struct Accumulator {
    weighted: Vec<f64>,
    valid_probability: f64,
    invalid_probability: f64,
    invalid_leaves: u64,
}

impl Accumulator {
    fn new(n_obs: usize) -> Self {
        Accumulator {
            weighted: vec![0.0; n_obs],
            ..Default::default()
        }
    }

    fn absorb(&mut self, p: f64, child: Accumulator) {
        for (a, b) in self.weighted.iter_mut().zip(child.weighted) {
            *a += p * b;
        }
        self.valid_probability += p * child.valid_probability;
        self.invalid_probability += p * child.invalid_probability;
        self.invalid_leaves += child.invalid_leaves;
    }
}

struct Walk<'a, S> {
    step: &'a S,
    support: &'a [(f64, f64)],
    n: usize,
    observables: &'a [Observable],
}

impl<S> Walk<'_, S>
where
    S: Fn(&[f64], f64) -> Result<Vec<f64>, StepError> + Sync,
{
    /// Subtree below state `x` at `depth`. Summing per subtree keeps the
    /// rounding error proportional to the depth, not the leaf count.
    fn descend(&self, x: &[f64], depth: usize) -> Accumulator {
        let mut acc = Accumulator::new(self.observables.len());
        if depth == self.n {
            acc.valid_probability = 1.0;
            for (w, g) in acc.weighted.iter_mut().zip(self.observables) {
                *w = g.eval(x);
            }
            return acc;
        }
        for &(dmu, p) in self.support {
            acc.absorb(p, self.branch(x, depth, dmu));
        }
        acc
    }

    fn branch(&self, x: &[f64], depth: usize, dmu: f64) -> Accumulator {
        match (self.step)(x, dmu) {
            Ok(y) if y.iter().all(|v| v.is_finite()) => self.descend(&y, depth + 1),
            _ => Accumulator {
                weighted: vec![0.0; self.observables.len()],
                valid_probability: 0.0,
                invalid_probability: 1.0,
                invalid_leaves: (self.support.len() as u64).pow((self.n - depth - 1) as u32),
            },
        }
    }
}

/// Walks all `k^n` increment sequences depth first and returns the exact
/// expectation of each observable under the numerical scheme.
///
/// The first-level branches run in parallel and are combined in support
/// order, so the result does not depend on the thread count.
pub fn enumerate_discrete_distribution<S>(
    step: &S,
    x0: &[f64],
    support: &[(f64, f64)],
    n: usize,
    observables: &[Observable],
    cap: u64,
) -> Result<Enumeration, HarnessError>
where
    S: Fn(&[f64], f64) -> Result<Vec<f64>, StepError> + Sync,
{
    let k = support.len();
    let leaves_f = (k as f64).powi(n as i32);
    if k == 0 || leaves_f > cap as f64 {
        return Err(HarnessError::EnumerationTooLarge {
            leaves: leaves_f,
            cap,
        });
    }
    let leaves = (k as u64).pow(n as u32);
    let walk = Walk {
        step,
        support,
        n,
        observables,
    };
    let acc = if n == 0 {
        walk.descend(x0, 0)
    } else {
        let parts: Vec<Accumulator> = support
            .par_iter()
            .map(|&(dmu, _)| walk.branch(x0, 0, dmu))
            .collect();
        let mut acc = Accumulator::new(observables.len());
        for (part, &(_, p)) in parts.into_iter().zip(support) {
            acc.absorb(p, part);
        }
        acc
    };
    let total = acc.valid_probability + acc.invalid_probability;
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(HarnessError::ProbabilityMass { total });
    }
    let expectations = acc
        .weighted
        .iter()
        .map(|w| w / acc.valid_probability)
        .collect();
    Ok(Enumeration {
        leaves,
        invalid_leaves: acc.invalid_leaves,
        invalid_probability: acc.invalid_probability,
        total_probability: total,
        expectations,
    })
}
