//! Butcher tableaux and the order-condition engine `Φ(τ) = 1/γ(τ)`.

use super::quadrature::{lagrange_integral, Quadrature};
use crate::real::Real;
use crate::trees::{enumerate_trees, RootedTree, TreeError};
use thiserror::Error;

/// Row-sum tolerance for `c_i = Σ_j a_ij`.
const ROW_SUM_TOLERANCE: f64 = 1e-14;

/// Order conditions count as satisfied below this residual.
pub const ORDER_CONDITION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum TableauError {
    #[error("tableau dimensions disagree: {0}")]
    Shape(&'static str),
    #[error("row {row}: c = {c} but the row of A sums to {sum}")]
    RowSum { row: usize, c: f64, sum: f64 },
}

#[derive(Clone, Debug)]
pub struct ButcherTableau<T> {
    a: Vec<Vec<T>>,
    b: Vec<T>,
    c: Vec<T>,
    explicit: bool,
}

impl<T: Real> ButcherTableau<T> {
    pub fn new(a: Vec<Vec<T>>, b: Vec<T>, c: Vec<T>) -> Result<Self, TableauError> {
        let s = b.len();
        if s == 0 {
            return Err(TableauError::Shape("no stages"));
        }
        if c.len() != s || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(TableauError::Shape("A must be s x s with b, c of length s"));
        }
        for (row, (ai, &ci)) in a.iter().zip(&c).enumerate() {
            let sum = ai.iter().fold(T::zero(), |acc, &v| acc + v);
            if (sum - ci).abs() > T::lit(ROW_SUM_TOLERANCE) {
                return Err(TableauError::RowSum {
                    row,
                    c: ci.to_f64().unwrap_or(f64::NAN),
                    sum: sum.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let explicit = a
            .iter()
            .enumerate()
            .all(|(i, row)| row[i..].iter().all(|v| v.is_zero()));
        Ok(ButcherTableau { a, b, c, explicit })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[Vec<T>] {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    /// `A` is strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    pub fn explicit_euler() -> Self {
        Self::new(vec![vec![T::zero()]], vec![T::one()], vec![T::zero()]).unwrap()
    }

    pub fn heun() -> Self {
        let (o, z, h) = (T::one(), T::zero(), T::lit(0.5));
        Self::new(vec![vec![z, z], vec![o, z]], vec![h, h], vec![z, o]).unwrap()
    }

    pub fn rk4() -> Self {
        let (o, z, h) = (T::one(), T::zero(), T::lit(0.5));
        let sixth = o / T::lit(6.0);
        let third = o / T::lit(3.0);
        Self::new(
            vec![
                vec![z, z, z, z],
                vec![h, z, z, z],
                vec![z, h, z, z],
                vec![z, z, o, z],
            ],
            vec![sixth, third, third, sixth],
            vec![z, h, h, o],
        )
        .unwrap()
    }

    pub fn implicit_midpoint() -> Self {
        Self::gauss(1)
    }

    /// `s`-stage Gauss collocation: Gauss–Legendre nodes, `a_ij = ∫_0^{c_i} ℓ_j`,
    /// `b_j = ∫_0^1 ℓ_j`. Order `2s`.
    pub fn gauss(s: usize) -> Self {
        let rule = Quadrature::<T>::gauss_legendre(s);
        let a = rule
            .nodes
            .iter()
            .map(|&ci| {
                (0..s)
                    .map(|j| lagrange_integral(&rule.nodes, &rule, j, ci))
                    .collect()
            })
            .collect();
        Self::new(a, rule.weights.clone(), rule.nodes.clone()).unwrap()
    }
}

/// Elementary weight `Φ(τ) = Σ_i b_i Φ_i(τ)` with
/// `Φ_i([τ_1..τ_k]) = Π_k Σ_j a_ij Φ_j(τ_k)` and `Φ(∅) = 1`.
pub fn elementary_weight<T: Real>(tableau: &ButcherTableau<T>, tree: &RootedTree) -> T {
    if tree.is_empty() {
        return T::one();
    }
    let stage = stage_weights(tableau, tree);
    tableau
        .b
        .iter()
        .zip(&stage)
        .fold(T::zero(), |acc, (&b, &phi)| acc + b * phi)
}

fn stage_weights<T: Real>(tableau: &ButcherTableau<T>, tree: &RootedTree) -> Vec<T> {
    let s = tableau.stages();
    let mut out = vec![T::one(); s];
    for child in tree.children() {
        let inner = stage_weights(tableau, child);
        for (o, row) in out.iter_mut().zip(&tableau.a) {
            let sum = row
                .iter()
                .zip(&inner)
                .fold(T::zero(), |acc, (&a, &phi)| acc + a * phi);
            *o = *o * sum;
        }
    }
    out
}

/// Deterministic order and the order it guarantees for the random-step method.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    pub deterministic_order: usize,
    /// `⌊p_d / 2⌋`, both mean-square and weak.
    pub stochastic_order: usize,
    /// First tree of order `p_d + 1` violating its condition, with residual
    /// `|Φ(τ) - 1/γ(τ)|`. `None` when every order up to `n_max` holds.
    pub first_failure: Option<(RootedTree, f64)>,
}

impl OrderReport {
    pub fn from_deterministic(p_d: usize) -> Self {
        OrderReport {
            deterministic_order: p_d,
            stochastic_order: p_d / 2,
            first_failure: None,
        }
    }
}

pub fn detect_deterministic_order<T: Real>(
    tableau: &ButcherTableau<T>,
    n_max: usize,
) -> Result<OrderReport, TreeError> {
    let trees = enumerate_trees(n_max)?;
    let tol = T::lit(ORDER_CONDITION_TOLERANCE);
    for tree in &trees {
        let phi = elementary_weight(tableau, tree);
        let residual = (phi - T::one() / T::lit(tree.gamma() as f64)).abs();
        if !(residual <= tol) {
            let mut report = OrderReport::from_deterministic(tree.order() - 1);
            report.first_failure = Some((tree.clone(), residual.to_f64().unwrap_or(f64::NAN)));
            return Ok(report);
        }
    }
    Ok(OrderReport::from_deterministic(n_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> RootedTree {
        s.parse().unwrap()
    }

    #[test]
    fn weights_by_hand() {
        let euler = ButcherTableau::<f64>::explicit_euler();
        assert_eq!(elementary_weight(&euler, &RootedTree::leaf()), 1.0);
        assert_eq!(elementary_weight(&euler, &t("[.]")), 0.0);
        assert_eq!(elementary_weight(&euler, &RootedTree::empty()), 1.0);
        let rk4 = ButcherTableau::<f64>::rk4();
        assert_eq!(elementary_weight(&rk4, &t("[.]")), 0.5);
    }

    #[test]
    fn classical_orders() {
        let cases: Vec<(ButcherTableau<f64>, usize)> = vec![
            (ButcherTableau::explicit_euler(), 1),
            (ButcherTableau::heun(), 2),
            (ButcherTableau::implicit_midpoint(), 2),
            (ButcherTableau::rk4(), 4),
            (ButcherTableau::gauss(2), 4),
            (ButcherTableau::gauss(3), 6),
        ];
        for (tab, p) in cases {
            let report = detect_deterministic_order(&tab, 8).unwrap();
            assert_eq!(report.deterministic_order, p);
            assert_eq!(report.stochastic_order, p / 2);
            let (tree, residual) = report.first_failure.unwrap();
            assert_eq!(tree.order(), p + 1);
            assert!(residual > ORDER_CONDITION_TOLERANCE);
        }
        let euler = detect_deterministic_order(&ButcherTableau::<f64>::explicit_euler(), 8).unwrap();
        assert_eq!(euler.first_failure.unwrap().0.to_string(), "[.]");
    }

    #[test]
    fn order_saturates_at_n_max() {
        let report = detect_deterministic_order(&ButcherTableau::<f64>::gauss(3), 4).unwrap();
        assert_eq!(report.deterministic_order, 4);
        assert!(report.first_failure.is_none());
    }

    #[test]
    fn flags_and_validation() {
        assert!(ButcherTableau::<f64>::rk4().is_explicit());
        assert!(!ButcherTableau::<f64>::gauss(2).is_explicit());
        let bad = ButcherTableau::new(vec![vec![0.5]], vec![1.0], vec![0.4]);
        assert!(matches!(bad, Err(TableauError::RowSum { row: 0, .. })));
        let gauss2 = ButcherTableau::<f64>::gauss(2);
        let r = 3f64.sqrt() / 6.0;
        assert!((gauss2.a()[0][1] - (0.25 - r)).abs() < 1e-15);
        assert!((gauss2.a()[1][0] - (0.25 + r)).abs() < 1e-15);
    }
}
