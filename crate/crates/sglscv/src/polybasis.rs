//! Orthonormal polynomial bases on tensorized parameter domains.
//!
//! Univariate families are normalized Legendre polynomials (uniform reference
//! measure) and probabilists' Hermite polynomials (standard Gaussian), both
//! evaluated by their three-term recurrences. Multivariate bases are tensor
//! products indexed by downward-closed multi-index sets in graded
//! lexicographic order, so the constant function always sits at position 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("parameter dimension must be at least 1")]
    ZeroDimension,
    #[error("quadrature rules need at least one node")]
    EmptyQuadrature,
    #[error("interval [{0}, {1}] is empty")]
    EmptyInterval(f64, f64),
}

/// Normalized Legendre polynomial of degree `n` on `[-1, 1]`, orthonormal
/// with respect to the uniform probability measure `dy/2`.
pub fn legendre_value(n: usize, y: f64) -> f64 {
    let scale = ((2 * n + 1) as f64).sqrt();
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, y);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    scale * cur
}

/// Evaluates normalized Legendre polynomials of degree `0..=max_degree`.
pub fn legendre_values(max_degree: usize, y: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    let (mut prev, mut cur) = (1.0, y);
    out.push(3f64.sqrt() * cur);
    for k in 1..max_degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * y * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        out.push(((2 * (k + 1) + 1) as f64).sqrt() * cur);
    }
}

/// Probabilists' Hermite polynomial of degree `n`, orthonormal with respect
/// to the standard Gaussian measure. Uses the normalized recurrence
/// `H_{m+1} = (y H_m - sqrt(m) H_{m-1}) / sqrt(m+1)`.
pub fn hermite_value(n: usize, y: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, y);
    for m in 1..n {
        let mf = m as f64;
        let next = (y * cur - mf.sqrt() * prev) / (mf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Evaluates normalized Hermite polynomials of degree `0..=max_degree`.
pub fn hermite_values(max_degree: usize, y: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_degree == 0 {
        return;
    }
    let (mut prev, mut cur) = (1.0, y);
    out.push(cur);
    for m in 1..max_degree {
        let mf = m as f64;
        let next = (y * cur - mf.sqrt() * prev) / (mf + 1.0).sqrt();
        prev = cur;
        cur = next;
        out.push(cur);
    }
}

/// `S_m(0) = sum_{j < m} H_j(0)^2`, the inverse-weight sum of the Hermite
/// family at the origin, where the weight attains its supremum.
pub fn hermite_center_sum(m: usize) -> f64 {
    assert!(m >= 1, "hermite_center_sum needs m >= 1");
    // H_{j+1}(0) = -sqrt(j/(j+1)) H_{j-1}(0); odd degrees vanish at 0.
    let mut sum = 1.0;
    let mut h_prev = 1.0; // H_{j-1}(0), starting at H_0
    let mut h_cur = 0.0; // H_j(0), starting at H_1
    for j in 1..m.saturating_sub(1) {
        let jf = j as f64;
        let h_next = -(jf / (jf + 1.0)).sqrt() * h_prev;
        h_prev = h_cur;
        h_cur = h_next;
        sum += h_cur * h_cur;
    }
    sum
}

/// A d-dimensional polynomial degree multi-index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zeros(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Families of downward-closed multi-index sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSetKind {
    /// `prod_j (nu_j + 1) <= m + 1` (inclusive convention).
    HyperbolicCross,
    /// `sum_j nu_j <= m`.
    TotalDegree,
    /// `max_j nu_j <= m`.
    FullTensor,
}

/// An ordered, downward-closed set of multi-indices defining a polynomial
/// space. Iteration order is graded lexicographic and the zero index, when
/// present, is always first.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexSet {
    indices: Vec<MultiIndex>,
    dim: usize,
}

fn graded_lex(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.total_degree()
        .cmp(&b.total_degree())
        .then_with(|| a.0.cmp(&b.0))
}

impl MultiIndexSet {
    pub fn new(kind: IndexSetKind, m: usize, d: usize) -> Result<Self, PolyError> {
        if d == 0 {
            return Err(PolyError::ZeroDimension);
        }
        let mut indices = Vec::new();
        let mut current = vec![0usize; d];
        match kind {
            IndexSetKind::HyperbolicCross => {
                enumerate_product(&mut current, 0, m as u128 + 1, &mut indices)
            }
            IndexSetKind::TotalDegree => enumerate_total(&mut current, 0, m, &mut indices),
            IndexSetKind::FullTensor => enumerate_tensor(&mut current, 0, m, &mut indices),
        }
        indices.sort_by(graded_lex);
        Ok(MultiIndexSet { indices, dim: d })
    }

    pub fn from_indices(indices: Vec<MultiIndex>, d: usize) -> Result<Self, PolyError> {
        if d == 0 {
            return Err(PolyError::ZeroDimension);
        }
        let mut indices = indices;
        indices.sort_by(graded_lex);
        indices.dedup();
        Ok(MultiIndexSet { indices, dim: d })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.indices.iter()
    }

    pub fn index(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.indices
            .binary_search_by(|probe| graded_lex(probe, nu))
            .is_ok()
    }

    pub fn is_subset_of(&self, other: &MultiIndexSet) -> bool {
        self.indices.iter().all(|nu| other.contains(nu))
    }

    /// Exhaustive predecessor-membership check of downward closure.
    pub fn is_downward_closed(&self) -> bool {
        for nu in &self.indices {
            for coord in 0..self.dim {
                if nu.0[coord] > 0 {
                    let mut pred = nu.clone();
                    pred.0[coord] -= 1;
                    if !self.contains(&pred) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Largest degree appearing in any coordinate.
    pub fn max_degree(&self) -> usize {
        self.indices
            .iter()
            .flat_map(|nu| nu.0.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Positions in `self` of indices missing from `smaller`, in `self` order.
    pub fn complement_of(&self, smaller: &MultiIndexSet) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, nu)| !smaller.contains(nu))
            .map(|(i, _)| i)
            .collect()
    }
}

fn enumerate_product(
    current: &mut Vec<usize>,
    coord: usize,
    budget: u128,
    out: &mut Vec<MultiIndex>,
) {
    if coord == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    let mut v = 0usize;
    while (v as u128 + 1) <= budget {
        current[coord] = v;
        enumerate_product(current, coord + 1, budget / (v as u128 + 1), out);
        v += 1;
    }
    current[coord] = 0;
}

fn enumerate_total(
    current: &mut Vec<usize>,
    coord: usize,
    budget: usize,
    out: &mut Vec<MultiIndex>,
) {
    if coord == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for v in 0..=budget {
        current[coord] = v;
        enumerate_total(current, coord + 1, budget - v, out);
    }
    current[coord] = 0;
}

fn enumerate_tensor(current: &mut Vec<usize>, coord: usize, cap: usize, out: &mut Vec<MultiIndex>) {
    if coord == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for v in 0..=cap {
        current[coord] = v;
        enumerate_tensor(current, coord + 1, cap, out);
    }
    current[coord] = 0;
}

/// Per-coordinate reference measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateMeasure {
    /// Uniform probability measure on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Standard Gaussian on the real line.
    Gaussian,
}

impl CoordinateMeasure {
    /// Maps a point to the canonical domain of the univariate family
    /// (`[-1, 1]` for Legendre, identity for Hermite).
    pub fn to_canonical(&self, y: f64) -> f64 {
        match *self {
            CoordinateMeasure::Uniform { lo, hi } => (2.0 * y - lo - hi) / (hi - lo),
            CoordinateMeasure::Gaussian => y,
        }
    }

    pub fn from_canonical(&self, t: f64) -> f64 {
        match *self {
            CoordinateMeasure::Uniform { lo, hi } => lo + (hi - lo) * (t + 1.0) * 0.5,
            CoordinateMeasure::Gaussian => t,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, CoordinateMeasure::Uniform { .. })
    }
}

/// A multivariate orthonormal basis: index set plus per-coordinate reference
/// measures. `phi_0` is the constant function 1.
#[derive(Clone, Debug)]
pub struct BasisContext {
    set: MultiIndexSet,
    coords: Vec<CoordinateMeasure>,
}

impl BasisContext {
    pub fn new(set: MultiIndexSet, coords: Vec<CoordinateMeasure>) -> Self {
        assert_eq!(
            set.dim(),
            coords.len(),
            "index set dimension {} does not match {} coordinate measures",
            set.dim(),
            coords.len()
        );
        BasisContext { set, coords }
    }

    pub fn set(&self) -> &MultiIndexSet {
        &self.set
    }

    pub fn coords(&self) -> &[CoordinateMeasure] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn size(&self) -> usize {
        self.set.len()
    }

    /// Univariate factor `phi_k` for one coordinate.
    pub fn univariate(&self, coord: usize, degree: usize, y: f64) -> f64 {
        let t = self.coords[coord].to_canonical(y);
        match self.coords[coord] {
            CoordinateMeasure::Uniform { .. } => legendre_value(degree, t),
            CoordinateMeasure::Gaussian => hermite_value(degree, t),
        }
    }

    pub fn basis_eval(&self, y: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.size());
        self.basis_eval_into(y, &mut out);
        out
    }

    /// Evaluates all basis functions at `y` in index-set order.
    pub fn basis_eval_into(&self, y: &[f64], out: &mut DVector<f64>) {
        assert_eq!(
            y.len(),
            self.dim(),
            "point dimension {} does not match basis dimension {}",
            y.len(),
            self.dim()
        );
        assert_eq!(out.len(), self.size());
        let max_deg = self.set.max_degree();
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(self.dim());
        let mut scratch = Vec::new();
        for (i, cm) in self.coords.iter().enumerate() {
            let t = cm.to_canonical(y[i]);
            match cm {
                CoordinateMeasure::Uniform { .. } => legendre_values(max_deg, t, &mut scratch),
                CoordinateMeasure::Gaussian => hermite_values(max_deg, t, &mut scratch),
            }
            tables.push(scratch.clone());
        }
        for (j, nu) in self.set.iter().enumerate() {
            let mut v = 1.0;
            for (i, &deg) in nu.0.iter().enumerate() {
                if deg > 0 {
                    v *= tables[i][deg];
                }
            }
            out[j] = v;
        }
    }

    /// Sum of squared basis values at `y`.
    pub fn squared_basis_sum(&self, y: &[f64]) -> f64 {
        let phi = self.basis_eval(y);
        phi.iter().map(|v| v * v).sum()
    }
}

/// `k_{m,w}(y) = w(y) * sum_nu phi_nu(y)^2`, the reciprocal Christoffel
/// function of the weighted space.
pub fn christoffel_inverse<W: Fn(&[f64]) -> f64>(ctx: &BasisContext, weight: W, y: &[f64]) -> f64 {
    weight(y) * ctx.squared_basis_sum(y)
}

/// Quadrature nodes and probability weights on a (possibly tensorized)
/// parameter domain.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.len())
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * f(y))
            .sum()
    }

    /// Tensor product of one-dimensional rules.
    pub fn tensor(rules: &[QuadratureRule]) -> QuadratureRule {
        assert!(rules.iter().all(|r| r.dim() == 1));
        let mut nodes = vec![Vec::new()];
        let mut weights = vec![1.0];
        for rule in rules {
            let mut next_nodes = Vec::with_capacity(nodes.len() * rule.len());
            let mut next_weights = Vec::with_capacity(nodes.len() * rule.len());
            for (base, bw) in nodes.iter().zip(&weights) {
                for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                    let mut point = base.clone();
                    point.push(node[0]);
                    next_nodes.push(point);
                    next_weights.push(bw * w);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        QuadratureRule { nodes, weights }
    }
}

/// n-point Gauss-Legendre rule for the uniform probability measure on
/// `[lo, hi]`, built by eigendecomposition of the Jacobi matrix. Weights sum
/// to 1 so the rule approximates expectations directly.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<QuadratureRule, PolyError> {
    if n == 0 {
        return Err(PolyError::EmptyQuadrature);
    }
    if hi <= lo {
        return Err(PolyError::EmptyInterval(lo, hi));
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    Ok(rule_from_jacobi(jacobi, |t| lo + (hi - lo) * (t + 1.0) * 0.5))
}

/// n-point Gauss-Hermite rule for the standard Gaussian measure
/// (probabilists' convention); weights sum to 1.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule, PolyError> {
    if n == 0 {
        return Err(PolyError::EmptyQuadrature);
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    Ok(rule_from_jacobi(jacobi, |t| t))
}

fn rule_from_jacobi<F: Fn(f64) -> f64>(jacobi: DMatrix<f64>, map: F) -> QuadratureRule {
    let eigen = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let q0 = eigen.eigenvectors[(0, i)];
            (t, q0 * q0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    QuadratureRule {
        nodes: pairs.iter().map(|&(t, _)| vec![map(t)]).collect(),
        weights: pairs.iter().map(|&(_, w)| w).collect(),
    }
}

/// Gauss rule for one reference coordinate.
pub fn coordinate_rule(cm: &CoordinateMeasure, n: usize) -> Result<QuadratureRule, PolyError> {
    match *cm {
        CoordinateMeasure::Uniform { lo, hi } => gauss_legendre(n, lo, hi),
        CoordinateMeasure::Gaussian => gauss_hermite(n),
    }
}

/// Tensorized Gauss rule with `n` points per coordinate.
pub fn reference_rule(coords: &[CoordinateMeasure], n: usize) -> Result<QuadratureRule, PolyError> {
    let rules: Vec<QuadratureRule> = coords
        .iter()
        .map(|cm| coordinate_rule(cm, n))
        .collect::<Result<_, _>>()?;
    Ok(QuadratureRule::tensor(&rules))
}
