//! Gauss–Legendre rules on `[0, 1]` and Lagrange bases on their nodes.

use crate::real::Real;

/// Nodes (ascending) and weights of a quadrature rule on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Quadrature<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> Quadrature<T> {
    /// `n`-point Gauss–Legendre rule, exact for polynomials of degree `2n - 1`.
    /// Nodes are computed by Newton's method in `T`, so extended-precision
    /// types get correspondingly accurate rules.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one point");
        let one = T::one();
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let mut roots = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        // Roots of P_n on [-1, 1], descending; the second half mirrors the first.
        for i in 0..n.div_ceil(2) {
            let mut x = T::lit((std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos());
            if n % 2 == 1 && i == n / 2 {
                x = T::zero();
            } else {
                // Newton until the correction stops shrinking, i.e. reaches
                // the rounding level of `T`.
                let mut last = T::infinity();
                for _ in 0..100 {
                    let (p, dp) = legendre(n, x);
                    let dx = p / dp;
                    x = x - dx;
                    if dx.is_zero() || dx.abs() * T::lit(4.0) >= last {
                        break;
                    }
                    last = dx.abs();
                }
            }
            let (_, dp) = legendre(n, x);
            let w = two / ((one - x * x) * dp * dp);
            roots[i] = x;
            weights[i] = w;
            roots[n - 1 - i] = -x;
            weights[n - 1 - i] = w;
        }
        // Map to [0, 1] with ascending nodes.
        let nodes = roots.iter().rev().map(|&x| half * (one + x)).collect();
        let weights = weights.iter().rev().map(|&w| half * w).collect();
        Quadrature { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p_prev = T::one();
    let mut p = x;
    for k in 1..n {
        let kf = T::lit(k as f64);
        let next = ((kf + kf + T::one()) * x * p - kf * p_prev) / (kf + T::one());
        p_prev = p;
        p = next;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let dp = T::lit(n as f64) * (x * p - p_prev) / (x * x - T::one());
    (p, dp)
}

/// Lagrange basis polynomial `ℓ_j` on `nodes`, evaluated at `theta`.
pub fn lagrange_basis<T: Real>(nodes: &[T], j: usize, theta: T) -> T {
    nodes
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != j)
        .fold(T::one(), |acc, (_, &cm)| acc * (theta - cm) / (nodes[j] - cm))
}

/// `∫_0^θ ℓ_j(σ) dσ`, integrated exactly with a Gauss rule on `[0, θ]`.
pub fn lagrange_integral<T: Real>(nodes: &[T], rule: &Quadrature<T>, j: usize, theta: T) -> T {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .fold(T::zero(), |acc, (&xi, &w)| {
            acc + w * lagrange_basis(nodes, j, theta * xi)
        })
        * theta
}
