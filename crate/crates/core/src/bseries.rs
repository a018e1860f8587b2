//! Elementary differentials and truncated B-series
//! `B(φ, x; h) = Σ α(τ) φ(τ)(h) F(τ)(x)`.

use crate::field::DerivativeOracle;
use crate::real::Real;
use crate::trees::{enumerate_trees, RootedTree, TreeError};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BSeriesError {
    #[error("tree {tree} needs derivative order {needed}, oracle provides {available}")]
    DerivativeUnavailable {
        tree: String,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Coefficients φ(τ) of a B-series. The value at ∅ is fixed to 1 and never
/// queried.
pub trait WeightFunction<T> {
    fn weight(&self, tree: &RootedTree) -> T;
}

impl<T, F> WeightFunction<T> for F
where
    F: Fn(&RootedTree) -> T,
{
    fn weight(&self, tree: &RootedTree) -> T {
        self(tree)
    }
}

/// Weights of the exact flow at signed time `dmu`: `dmu^ρ(τ) / γ(τ)`.
#[derive(Clone, Copy, Debug)]
pub struct ExactWeights<T> {
    pub dmu: T,
}

impl<T: Real> WeightFunction<T> for ExactWeights<T> {
    fn weight(&self, tree: &RootedTree) -> T {
        exact_weight(tree, self.dmu)
    }
}

pub fn exact_weight<T: Real>(tree: &RootedTree, dmu: T) -> T {
    dmu.powi(tree.order() as i32) / T::lit(tree.gamma() as f64)
}

/// `F(τ)(x)`: `F(∅) = x`, `F(•) = f(x)`,
/// `F([τ_1..τ_k]) = f^(k)(x)(F(τ_1), ..., F(τ_k))`.
pub fn elementary_differential<T: Real, O: DerivativeOracle<T> + ?Sized>(
    tree: &RootedTree,
    oracle: &O,
    x: &[T],
) -> Result<Vec<T>, BSeriesError> {
    if tree.is_empty() {
        return Ok(x.to_vec());
    }
    check_capability(tree, oracle)?;
    let mut memo = HashMap::new();
    Ok(differential_memo(tree, oracle, x, &mut memo))
}

fn check_capability<T: Real, O: DerivativeOracle<T> + ?Sized>(
    tree: &RootedTree,
    oracle: &O,
) -> Result<(), BSeriesError> {
    let needed = tree.max_out_degree();
    let available = oracle.max_derivative_order();
    if needed > available {
        return Err(BSeriesError::DerivativeUnavailable {
            tree: tree.to_string(),
            needed,
            available,
        });
    }
    Ok(())
}

fn differential_memo<T: Real, O: DerivativeOracle<T> + ?Sized>(
    tree: &RootedTree,
    oracle: &O,
    x: &[T],
    memo: &mut HashMap<RootedTree, Vec<T>>,
) -> Vec<T> {
    if let Some(v) = memo.get(tree) {
        return v.clone();
    }
    let args: Vec<Vec<T>> = tree
        .children()
        .iter()
        .map(|c| differential_memo(c, oracle, x, memo))
        .collect();
    let dirs: Vec<&[T]> = args.iter().map(Vec::as_slice).collect();
    let mut out = vec![T::zero(); x.len()];
    oracle.derivative(x, &dirs, &mut out);
    memo.insert(tree.clone(), out.clone());
    out
}

/// Sum over ∅ and every tree with `ρ(τ) <= n_max`.
pub fn evaluate_bseries<T, W, O>(
    weights: &W,
    oracle: &O,
    x: &[T],
    n_max: usize,
) -> Result<Vec<T>, BSeriesError>
where
    T: Real,
    W: WeightFunction<T> + ?Sized,
    O: DerivativeOracle<T> + ?Sized,
{
    let trees = enumerate_trees(n_max)?;
    evaluate_over(&trees, weights, oracle, x)
}

/// Like [`evaluate_bseries`], over a pre-enumerated tree table. The table
/// must list every tree after its subtrees, which [`enumerate_trees`] does.
pub fn evaluate_over<T, W, O>(
    trees: &[RootedTree],
    weights: &W,
    oracle: &O,
    x: &[T],
) -> Result<Vec<T>, BSeriesError>
where
    T: Real,
    W: WeightFunction<T> + ?Sized,
    O: DerivativeOracle<T> + ?Sized,
{
    for tree in trees {
        check_capability(tree, oracle)?;
    }
    let mut memo = HashMap::with_capacity(trees.len());
    let mut sum = x.to_vec();
    for tree in trees {
        let alpha = tree.alpha();
        let coeff = T::lit(*alpha.numer() as f64) / T::lit(*alpha.denom() as f64)
            * weights.weight(tree);
        let fx = differential_memo(tree, oracle, x, &mut memo);
        for (s, v) in sum.iter_mut().zip(&fx) {
            *s = *s + coeff * *v;
        }
    }
    Ok(sum)
}

/// Central finite-difference approximation of `f^(k)(x)(v_1..v_k)`, built by
/// nesting one-dimensional differences. Validation only; the step is the cube
/// root of machine epsilon scaled by `1 + |x|`.
pub fn finite_difference_derivative<O: DerivativeOracle<f64> + ?Sized>(
    oracle: &O,
    x: &[f64],
    dirs: &[&[f64]],
) -> Vec<f64> {
    let Some((last, rest)) = dirs.split_last() else {
        let mut out = vec![0.0; x.len()];
        oracle.eval(x, &mut out);
        return out;
    };
    let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let eps = f64::EPSILON.cbrt() * scale;
    let shifted = |sign: f64| -> Vec<f64> {
        let xs: Vec<f64> = x.iter().zip(*last).map(|(a, v)| a + sign * eps * v).collect();
        // Inner derivatives use the exact oracle so the nesting only adds one
        // difference quotient per level.
        let mut out = vec![0.0; x.len()];
        oracle.derivative(&xs, rest, &mut out);
        out
    };
    let plus = shifted(1.0);
    let minus = shifted(-1.0);
    plus.iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * eps))
        .collect()
}
