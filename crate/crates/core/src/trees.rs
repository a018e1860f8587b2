//! Non-colored rooted trees and their coefficient functions.
//!
//! A tree is stored in canonical form: children are sorted in descending
//! order under [`Ord`], which compares node count first and then the child
//! lists lexicographically. Isomorphic trees therefore have identical
//! representations, and structural equality is isomorphism.
//!
//! String notation: `.` is the single node, `[t1,t2,...]` joins subtrees to a
//! new root, and `∅` is the empty tree.

use num_rational::Ratio;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Largest order [`enumerate_trees`] accepts unless a larger cap is given.
pub const DEFAULT_ORDER_CAP: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("tree order {requested} exceeds the enumeration cap {cap}")]
    OrderCapExceeded { requested: usize, cap: usize },
    #[error("cannot parse tree {input:?}: {reason}")]
    Parse { input: String, reason: &'static str },
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RootedTree {
    children: Vec<RootedTree>,
    order: usize,
}

impl RootedTree {
    /// The empty tree ∅.
    pub fn empty() -> Self {
        RootedTree {
            children: Vec::new(),
            order: 0,
        }
    }

    /// The single-node tree • = [∅].
    pub fn leaf() -> Self {
        RootedTree {
            children: Vec::new(),
            order: 1,
        }
    }

    /// Joins subtrees to a common root and canonicalizes the result.
    /// Empty subtrees are dropped, so `join([∅])` is `•`.
    pub fn join(children: Vec<RootedTree>) -> Self {
        let mut children: Vec<RootedTree> = children
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(RootedTree::canonicalize)
            .collect();
        children.sort_by(|a, b| b.cmp(a));
        let order = 1 + children.iter().map(|c| c.order).sum::<usize>();
        RootedTree { children, order }
    }

    /// Builds the canonical representative of this tree. Idempotent.
    pub fn canonicalize(self) -> Self {
        if self.is_empty() || self.children.is_empty() {
            return self;
        }
        RootedTree::join(self.children)
    }

    /// Builds a tree with exactly the given child order, without sorting.
    /// Used to produce raw input for [`RootedTree::canonicalize`].
    pub fn raw(children: Vec<RootedTree>) -> Self {
        let order = 1 + children.iter().map(|c| c.order).sum::<usize>();
        RootedTree { children, order }
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.children
    }

    /// Number of nodes, ρ(τ).
    pub fn order(&self) -> usize {
        self.order
    }

    /// Largest out-degree over all nodes; the derivative order needed to
    /// evaluate the elementary differential.
    pub fn max_out_degree(&self) -> usize {
        self.children
            .iter()
            .map(RootedTree::max_out_degree)
            .fold(self.children.len(), usize::max)
    }

    /// Symmetry coefficient α(τ) = Π α(τ_j) / (r_1! ... r_q!), where the r's
    /// count equal subtrees.
    pub fn alpha(&self) -> Ratio<u64> {
        let mut value = Ratio::from_integer(1u64);
        for child in &self.children {
            value *= child.alpha();
        }
        for run in self.children.chunk_by(|a, b| a == b) {
            value /= factorial(run.len() as u64);
        }
        value
    }

    /// Density γ(τ) = ρ(τ) Π γ(τ_j), with γ(∅) = 1.
    pub fn gamma(&self) -> u64 {
        if self.is_empty() {
            return 1;
        }
        self.children
            .iter()
            .fold(self.order as u64, |g, c| g * c.gamma())
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats {
            order: self.order,
            alpha: self.alpha(),
            gamma: self.gamma(),
        }
    }
}

/// ρ, α and γ of one tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeStats {
    pub order: usize,
    pub alpha: Ratio<u64>,
    pub gamma: u64,
}

pub(crate) fn factorial(n: u64) -> u64 {
    (2..=n).product()
}

impl Ord for RootedTree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order
            .cmp(&other.order)
            .then_with(|| self.children.cmp(&other.children))
    }
}

impl PartialOrd for RootedTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("∅");
        }
        if self.children.is_empty() {
            return f.write_str(".");
        }
        f.write_str("[")?;
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for RootedTree {
    type Err = TreeError;

    /// Parses the bracket notation; the result is canonicalized.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| TreeError::Parse {
            input: s.to_string(),
            reason,
        };
        let compact: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact == ['∅'] {
            return Ok(RootedTree::empty());
        }
        let mut pos = 0;
        let tree = parse_tree(&compact, &mut pos).map_err(err)?;
        if pos != compact.len() {
            return Err(err("trailing characters"));
        }
        Ok(tree)
    }
}

fn parse_tree(s: &[char], pos: &mut usize) -> Result<RootedTree, &'static str> {
    match s.get(*pos) {
        Some('.') => {
            *pos += 1;
            Ok(RootedTree::leaf())
        }
        Some('[') => {
            *pos += 1;
            let mut children = Vec::new();
            loop {
                children.push(parse_tree(s, pos)?);
                match s.get(*pos) {
                    Some(',') => *pos += 1,
                    Some(']') => {
                        *pos += 1;
                        return Ok(RootedTree::join(children));
                    }
                    _ => return Err("expected ',' or ']'"),
                }
            }
        }
        _ => Err("expected '.' or '['"),
    }
}

/// All canonical trees with `1 <= order <= n_max`, grouped by order and
/// ascending within each order.
pub fn enumerate_trees(n_max: usize) -> Result<Vec<RootedTree>, TreeError> {
    enumerate_trees_with_cap(n_max, DEFAULT_ORDER_CAP)
}

pub fn enumerate_trees_with_cap(n_max: usize, cap: usize) -> Result<Vec<RootedTree>, TreeError> {
    if n_max > cap {
        return Err(TreeError::OrderCapExceeded {
            requested: n_max,
            cap,
        });
    }
    // by_order[n] holds the trees of order n in ascending canonical order.
    let mut by_order: Vec<Vec<RootedTree>> = vec![Vec::new(); n_max + 1];
    if n_max >= 1 {
        by_order[1].push(RootedTree::leaf());
    }
    for n in 2..=n_max {
        // Candidate children in ascending order; a child list is a
        // non-increasing index sequence into it, which is already canonical.
        let smaller: Vec<&RootedTree> = by_order[1..n].iter().flatten().collect();
        let mut out = Vec::new();
        let mut picked = Vec::new();
        pick_children(&smaller, n - 1, smaller.len(), &mut picked, &mut out);
        out.sort();
        by_order[n] = out;
    }
    Ok(by_order.into_iter().flatten().collect())
}

fn pick_children(
    candidates: &[&RootedTree],
    remaining: usize,
    upper: usize,
    picked: &mut Vec<RootedTree>,
    out: &mut Vec<RootedTree>,
) {
    if remaining == 0 {
        out.push(RootedTree::raw(picked.clone()));
        return;
    }
    for idx in (0..upper).rev() {
        let c = candidates[idx];
        if c.order > remaining {
            continue;
        }
        picked.push(c.clone());
        pick_children(candidates, remaining - c.order, idx + 1, picked, out);
        picked.pop();
    }
}
