//! Bases of the tangent hyperplane `{v : (v, ∇ₓM) = 0}`.
//!
//! Four constructions are provided:
//!
//! * the chain basis `N_j = g_{j+1} E_j − g_j E_{j+1}`, which degenerates
//!   wherever an interior gradient component vanishes;
//! * the time-extended variant, which adds `N₀ = (−g₀/g₁, 0, …, 0)` so that
//!   drifts can follow a moving level set;
//! * the pair-permutation bases for `n ∈ {2, 4, 8}` (complex, quaternion and
//!   octonion multiplication tables), orthogonal with `|N_j| = |G|`;
//! * truncations of the 4- and 8-dimensional tables to `n ∈ {3, 5, 6, 7}`,
//!   which overshoot the dimension and are pruned to an independent subset.
//!
//! Every builder is generic over [`Scalar`] so synthesized coefficients can
//! be differentiated through it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Scalar;

/// Signed 1-based component indices: entry `±k` means `±g_k`.
const TABLE2: [[i8; 2]; 1] = [[-2, 1]];

const TABLE4: [[i8; 4]; 3] = [[-2, 1, 4, -3], [-3, -4, 1, 2], [-4, 3, -2, 1]];

const TABLE8: [[i8; 8]; 7] = [
    [-2, 1, 4, -3, 6, -5, -8, 7],
    [-3, -4, 1, 2, 7, 8, -5, -6],
    [-4, 3, -2, 1, 8, -7, 6, -5],
    [-5, -6, -7, -8, 1, 2, 3, 4],
    [-6, 5, -8, 7, -2, 1, -4, 3],
    [-7, 8, 5, -6, -3, 4, 1, -2],
    [-8, -7, 6, 5, -4, -3, 2, 1],
];

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension {n} is not supported here (need {expected})")]
    Dimension { n: usize, expected: &'static str },
    #[error("g1 = {g1:e} is too small to form N0 = (-g0/g1, 0, ..., 0)")]
    DegeneratePivot { g1: f64 },
    #[error("gradient norm {norm:e} is too small for a non-degenerate basis")]
    ZeroGradient { norm: f64 },
    #[error("basis vectors are linearly dependent at this point")]
    SingularBasis,
    #[error("vector is not in the span of the basis (residual {residual:e}, norm {norm:e})")]
    NotInSpan { residual: f64, norm: f64 },
    #[error("first integral does not depend on any state variable")]
    NoStateDependence,
}

/// Scale-relative threshold below which a gradient component counts as zero.
pub fn degeneracy_tol(norm: f64) -> f64 {
    1e-8 * norm.max(1.0)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(∂M/∂t, ∇ₓM)` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPoint {
    pub g0: f64,
    pub g: Vec<f64>,
    pub norm: f64,
}

impl GradientPoint {
    pub fn new(g0: f64, g: Vec<f64>) -> Self {
        let norm = norm(&g);
        Self { g0, g, norm }
    }

    /// Norm of the generalized gradient `(g0, G)`.
    pub fn extended_norm(&self) -> f64 {
        (self.g0 * self.g0 + self.norm * self.norm).sqrt()
    }
}

/// Reordering that moves variables absent from `M` behind the active ones.
///
/// `order[p]` is the original (0-based) index of reordered position `p`;
/// the first `active` positions are the variables `M` depends on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplementLayout {
    pub order: Vec<usize>,
    pub active: usize,
}

impl SupplementLayout {
    /// `zero_mask[i]` is true when `∂M/∂x_{i+1}` vanishes identically.
    ///
    /// Returns `None` when the plain chain basis should be used: nothing is
    /// missing, or (without `pivot_required`) exactly the first and last
    /// variables are missing, which leaves the chain interior intact.
    pub fn from_mask(zero_mask: &[bool], pivot_required: bool) -> Option<Self> {
        let n = zero_mask.len();
        if n < 2 || !zero_mask.iter().any(|&z| z) {
            return None;
        }
        let ends_only = zero_mask[0]
            && zero_mask[n - 1]
            && n > 2
            && !zero_mask[1..n - 1].iter().any(|&z| z);
        if ends_only && !pivot_required {
            return None;
        }
        let mut order: Vec<usize> = (0..n).filter(|&i| !zero_mask[i]).collect();
        let active = order.len();
        order.extend((0..n).filter(|&i| zero_mask[i]));
        Some(Self { order, active })
    }

    /// Sign of the permutation matrix mapping reordered to original positions.
    pub fn permutation_sign(&self) -> f64 {
        let mut seen = vec![false; self.order.len()];
        let mut sign = 1.0;
        for start in 0..self.order.len() {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.order[i];
                len += 1;
            }
            if len % 2 == 0 {
                sign = -sign;
            }
        }
        sign
    }

    /// Original index of the variable that serves as the `N₀` pivot.
    pub fn pivot(&self) -> usize {
        self.order[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    General,
    TimeExtended,
    Special2,
    Special4,
    Special8,
    Projected(usize),
    Supplemented(SupplementLayout),
}

/// Tangent vectors evaluated at one point plus degeneracy diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    pub kind: BasisKind,
    pub vectors: Vec<Vec<f64>>,
    /// `N₀`, present only for time-dependent first integrals.
    pub n0: Option<Vec<f64>>,
    /// 1-based indices of gradient components the construction needs to be
    /// non-zero but which fall below [`degeneracy_tol`].
    pub degeneracy: Vec<usize>,
}

impl BasisSet {
    pub fn is_degenerate(&self) -> bool {
        !self.degeneracy.is_empty()
    }
}

fn from_table<S: Scalar, const N: usize>(table: &[[i8; N]], g: &[S], n: usize) -> Vec<Vec<S>> {
    table
        .iter()
        .map(|row| {
            row[..n]
                .iter()
                .map(|&k| {
                    let idx = k.unsigned_abs() as usize - 1;
                    let v = if idx < g.len() { g[idx] } else { S::zero() };
                    if k < 0 {
                        -v
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

/// Chain vectors `N_j = g_{j+1} E_j − g_j E_{j+1}`, `j = 1 … n−1`.
pub fn chain_vectors<S: Scalar>(g: &[S]) -> Vec<Vec<S>> {
    let n = g.len();
    (0..n.saturating_sub(1))
        .map(|j| {
            let mut v = vec![S::zero(); n];
            v[j] = g[j + 1];
            v[j + 1] = -g[j];
            v
        })
        .collect()
}

/// Pair-permutation vectors for `n ∈ {2, 4, 8}`.
pub fn special_vectors<S: Scalar>(g: &[S]) -> Option<Vec<Vec<S>>> {
    match g.len() {
        2 => Some(from_table(&TABLE2, g, 2)),
        4 => Some(from_table(&TABLE4, g, 4)),
        8 => Some(from_table(&TABLE8, g, 8)),
        _ => None,
    }
}

/// Truncated 4- or 8-dimensional vectors for `n ∈ {3, 5, 6, 7}`, before
/// pruning (3 candidates for `n = 3`, 7 otherwise).
pub fn projected_candidates<S: Scalar>(g: &[S]) -> Option<Vec<Vec<S>>> {
    match g.len() {
        3 => Some(from_table(&TABLE4, g, 3)),
        n @ 5..=7 => Some(from_table(&TABLE8, g, n)),
        _ => None,
    }
}

/// Chain vectors over the active block plus unit vectors for the inactive
/// variables, expressed in the original variable order.
pub fn supplemented_vectors<S: Scalar>(g: &[S], layout: &SupplementLayout) -> Vec<Vec<S>> {
    let n = g.len();
    let k = layout.active;
    let reordered: Vec<S> = layout.order[..k].iter().map(|&i| g[i]).collect();
    let mut out = Vec::with_capacity(n - 1);
    for chain in chain_vectors(&reordered) {
        let mut v = vec![S::zero(); n];
        for (p, c) in chain.into_iter().enumerate() {
            v[layout.order[p]] = c;
        }
        out.push(v);
    }
    for &i in &layout.order[k..] {
        let mut v = vec![S::zero(); n];
        v[i] = S::one();
        out.push(v);
    }
    out
}

/// `π_n = 1` for `n = 2`, else `g₂ g₃ ⋯ g_{n−1}`.
pub fn pi_n(g: &[f64]) -> f64 {
    let n = g.len();
    if n <= 2 {
        1.0
    } else {
        g[1..n - 1].iter().product()
    }
}

fn interior_degeneracy(g: &[f64], from: usize, tol: f64) -> Vec<usize> {
    let n = g.len();
    (from..n.saturating_sub(1))
        .filter(|&i| g[i].abs() <= tol)
        .map(|i| i + 1)
        .collect()
}

fn require_dim(g: &[f64]) -> Result<usize, GeometryError> {
    match g.len() {
        n if n >= 2 => Ok(n),
        n => Err(GeometryError::Dimension { n, expected: "n >= 2" }),
    }
}

pub fn general_basis(g: &[f64]) -> Result<BasisSet, GeometryError> {
    require_dim(g)?;
    let tol = degeneracy_tol(norm(g));
    Ok(BasisSet {
        kind: BasisKind::General,
        vectors: chain_vectors(g),
        n0: None,
        degeneracy: interior_degeneracy(g, 1, tol),
    })
}

/// `N₀ = (−g₀/g₁, 0, …, 0)`, placed at `pivot` (0-based).
pub fn n0_vector<S: Scalar>(g0: S, g: &[S], pivot: usize) -> Result<Vec<S>, GeometryError> {
    let nrm = g.iter().map(|v| v.re() * v.re()).sum::<f64>().sqrt();
    let tol = degeneracy_tol(nrm);
    if g[pivot].re().abs() <= tol {
        return Err(GeometryError::DegeneratePivot { g1: g[pivot].re() });
    }
    let mut v = vec![S::zero(); g.len()];
    v[pivot] = -g0 / g[pivot];
    Ok(v)
}

pub fn time_extended_basis(g0: f64, g: &[f64]) -> Result<BasisSet, GeometryError> {
    require_dim(g)?;
    let tol = degeneracy_tol(norm(g));
    let n0 = if g0 == 0.0 {
        vec![0.0; g.len()]
    } else {
        n0_vector(g0, g, 0)?
    };
    Ok(BasisSet {
        kind: BasisKind::TimeExtended,
        vectors: chain_vectors(g),
        n0: Some(n0),
        degeneracy: interior_degeneracy(g, 0, tol),
    })
}

pub fn special_basis(g: &[f64]) -> Result<BasisSet, GeometryError> {
    let n = g.len();
    let kind = match n {
        2 => BasisKind::Special2,
        4 => BasisKind::Special4,
        8 => BasisKind::Special8,
        _ => return Err(GeometryError::Dimension { n, expected: "n in {2, 4, 8}" }),
    };
    let nrm = norm(g);
    if nrm <= degeneracy_tol(nrm) {
        return Err(GeometryError::ZeroGradient { norm: nrm });
    }
    Ok(BasisSet {
        kind,
        vectors: special_vectors(g).expect("dimension checked"),
        n0: None,
        degeneracy: Vec::new(),
    })
}

/// Greedy pivoted Gram–Schmidt: repeatedly takes the candidate with the
/// largest residual (lowest index on ties) until every residual is at most
/// `threshold`. Returns selected indices in ascending order.
pub fn select_independent(vectors: &[Vec<f64>], threshold: f64, max: usize) -> Vec<usize> {
    let mut residual: Vec<Vec<f64>> = vectors.to_vec();
    let mut taken = vec![false; vectors.len()];
    let mut selected = Vec::new();
    while selected.len() < max {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in residual.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let nr = norm(r);
            if best.map_or(true, |(_, b)| nr > b) {
                best = Some((i, nr));
            }
        }
        let Some((idx, nr)) = best else { break };
        if nr <= threshold {
            break;
        }
        taken[idx] = true;
        selected.push(idx);
        let q: Vec<f64> = residual[idx].iter().map(|v| v / nr).collect();
        for (i, r) in residual.iter_mut().enumerate() {
            if taken[i] {
                continue;
            }
            let c = dot(r, &q);
            for (a, b) in r.iter_mut().zip(&q) {
                *a -= c * b;
            }
        }
    }
    selected.sort_unstable();
    selected
}

/// Pivot threshold for pruning projected candidates.
pub fn projection_threshold(gradient_norm: f64) -> f64 {
    1e-8 * gradient_norm
}

pub fn projected_special_basis(g: &[f64]) -> Result<BasisSet, GeometryError> {
    let n = g.len();
    let candidates = projected_candidates(g).ok_or(GeometryError::Dimension {
        n,
        expected: "n in {3, 5, 6, 7}",
    })?;
    let nrm = norm(g);
    if nrm <= degeneracy_tol(nrm) {
        return Err(GeometryError::ZeroGradient { norm: nrm });
    }
    let keep = select_independent(&candidates, projection_threshold(nrm), n - 1);
    let vectors = keep.into_iter().map(|i| candidates[i].clone()).collect();
    Ok(BasisSet {
        kind: BasisKind::Projected(n),
        vectors,
        n0: None,
        degeneracy: Vec::new(),
    })
}

/// Chain basis over the variables `M` depends on, completed by unit vectors
/// for the variables it does not. Falls back to [`general_basis`] when the
/// missing variables sit only at the ends of the chain.
pub fn supplement_basis(g: &[f64], zero_mask: &[bool]) -> Result<BasisSet, GeometryError> {
    let n = require_dim(g)?;
    if zero_mask.len() != n {
        return Err(GeometryError::Dimension { n: zero_mask.len(), expected: "mask length n" });
    }
    let Some(layout) = SupplementLayout::from_mask(zero_mask, false) else {
        return general_basis(g);
    };
    if layout.active == 0 {
        return Err(GeometryError::NoStateDependence);
    }
    let tol = degeneracy_tol(norm(g));
    let degeneracy = (1..layout.active.saturating_sub(1))
        .map(|p| layout.order[p])
        .filter(|&i| g[i].abs() <= tol)
        .map(|i| i + 1)
        .collect();
    Ok(BasisSet {
        vectors: supplemented_vectors(g, &layout),
        kind: BasisKind::Supplemented(layout),
        n0: None,
        degeneracy,
    })
}

/// Closed-form determinant of `[G, N₁, …]` (or `[G̃, Ñ₀, Ñ₁, …]` for the
/// time-extended kind). `None` for projected bases, which have no square
/// matrix to speak of.
pub fn closed_form_determinant(kind: &BasisKind, g0: f64, g: &[f64]) -> Option<f64> {
    let n = g.len();
    let sq: f64 = g.iter().map(|v| v * v).sum();
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    match kind {
        BasisKind::General => Some(sign(n - 1) * sq * pi_n(g)),
        BasisKind::TimeExtended => Some(sign(n) * (g0 * g0 + sq) * pi_n(g)),
        BasisKind::Special2 | BasisKind::Special4 | BasisKind::Special8 => {
            Some(sq.powi(n as i32 / 2))
        }
        BasisKind::Projected(_) => None,
        BasisKind::Supplemented(layout) => {
            let m = layout.active;
            let block: Vec<f64> = layout.order[..m].iter().map(|&i| g[i]).collect();
            let reordered = match m {
                0 => 0.0,
                1 => block[0],
                _ => sign(m - 1) * sq * pi_n(&block),
            };
            Some(layout.permutation_sign() * reordered)
        }
    }
}

/// Determinant by LU factorisation of the matrix whose columns are given.
pub fn lu_determinant(columns: &[Vec<f64>]) -> f64 {
    let n = columns.len();
    let m = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    m.lu().determinant()
}

/// Columns `[G, N₁, …, N_{n−1}]` of a basis set (or `[G̃, Ñ₀, Ñ₁, …]` when
/// `n0` is present), ready for [`lu_determinant`].
pub fn basis_matrix_columns(basis: &BasisSet, g0: f64, g: &[f64]) -> Vec<Vec<f64>> {
    match &basis.n0 {
        None => std::iter::once(g.to_vec())
            .chain(basis.vectors.iter().cloned())
            .collect(),
        Some(_) => {
            let mut gt = vec![g0];
            gt.extend_from_slice(g);
            let mut n0t = vec![1.0, -g0 / g[0]];
            n0t.resize(g.len() + 1, 0.0);
            let mut cols = vec![gt, n0t];
            for v in &basis.vectors {
                let mut e = vec![0.0];
                e.extend_from_slice(v);
                cols.push(e);
            }
            cols
        }
    }
}

/// Expansion coefficients of `v` in the basis vectors.
pub fn coordinates_in_basis(v: &[f64], basis: &BasisSet) -> Result<Vec<f64>, GeometryError> {
    let n = v.len();
    let k = basis.vectors.len();
    if k == 0 {
        return Err(GeometryError::SingularBasis);
    }
    let b = DMatrix::from_fn(n, k, |i, j| basis.vectors[j][i]);
    let svd = b.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-10 * smax {
        return Err(GeometryError::SingularBasis);
    }
    let rhs = DVector::from_column_slice(v);
    let c = svd
        .solve(&rhs, 0.0)
        .map_err(|_| GeometryError::SingularBasis)?;
    let residual = (&b * &c - &rhs).norm();
    let vn = rhs.norm();
    if residual > 1e-9 * vn {
        return Err(GeometryError::NotInSpan { residual, norm: vn });
    }
    Ok(c.iter().copied().collect())
}
