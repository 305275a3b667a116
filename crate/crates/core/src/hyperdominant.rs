//! Doubly hyperdominant and doubly stochastic matrices, Birkhoff decomposition,
//! and the conic parameterization `M = sum beta_i (I - P_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::signals::Signal;

/// Tolerance for row/column-sum membership checks.
pub const CLASS_TOL: f64 = 1e-9;
/// Tolerance for reconstructions and leftover mass.
pub const RECON_TOL: f64 = 1e-8;
/// Entries at or below this are outside the support during Birkhoff peeling.
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub hyperdominant: bool,
    pub zero_excess: bool,
    pub doubly_stochastic: bool,
}

pub fn classify(m: &DenseMatrix) -> Classification {
    let n = m.n();
    let offdiag_nonpositive = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] <= 0.0));
    let row_sums: Vec<f64> = (0..n).map(|i| m.row_sum(i)).collect();
    let col_sums: Vec<f64> = (0..n).map(|j| m.col_sum(j)).collect();
    let sums = || row_sums.iter().chain(&col_sums);

    let hyperdominant = offdiag_nonpositive && sums().all(|&s| s >= -CLASS_TOL);
    let zero_excess = hyperdominant && sums().all(|&s| s.abs() <= CLASS_TOL);
    let nonnegative = (0..n).all(|i| m.row(i).iter().all(|&x| x >= 0.0));
    let doubly_stochastic = nonnegative && sums().all(|&s| (s - 1.0).abs() <= CLASS_TOL);
    Classification {
        hyperdominant,
        zero_excess,
        doubly_stochastic,
    }
}

/// Appends a row and column so that every row and column sums to zero.
pub fn augment_zero_excess(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !classify(m).hyperdominant {
        return Err(Error::NotHyperdominant);
    }
    let n = m.n();
    let total: f64 = (0..n).map(|i| m.row_sum(i)).sum();
    Ok(DenseMatrix::from_fn(n + 1, |i, j| match (i < n, j < n) {
        (true, true) => m[(i, j)],
        (true, false) => -m.row_sum(i),
        (false, true) => -m.col_sum(j),
        (false, false) => total,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPermutation {
    pub weight: f64,
    /// `perm[i] = j` places a one at `(i, j)`.
    pub perm: Vec<usize>,
}

pub type PermutationCombo = Vec<WeightedPermutation>;

pub fn is_identity(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(i, &p)| i == p)
}

/// `sum w_i P_i`.
pub fn combo_sum(n: usize, combo: &[WeightedPermutation]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n);
    for t in combo {
        for (i, &j) in t.perm.iter().enumerate() {
            out[(i, j)] += t.weight;
        }
    }
    out
}

/// `sum beta_i (I - P_i)`.
pub fn conic_sum(n: usize, combo: &[WeightedPermutation]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n);
    for t in combo {
        for (i, &j) in t.perm.iter().enumerate() {
            out[(i, i)] += t.weight;
            out[(i, j)] -= t.weight;
        }
    }
    out
}

pub fn birkhoff_decompose(a: &DenseMatrix) -> Result<PermutationCombo> {
    if !classify(a).doubly_stochastic {
        return Err(Error::InvalidInput("matrix is not doubly stochastic".into()));
    }
    peel_permutations(a, RECON_TOL)
}

/// Greedy peeling of support permutations until the mean row mass left is
/// at most `tol`; no class precheck.
fn peel_permutations(a: &DenseMatrix, tol: f64) -> Result<PermutationCombo> {
    let n = a.n();
    let mut residual = a.clone();
    let mut combo = Vec::new();
    loop {
        let mass: f64 = (0..n).map(|i| residual.row_sum(i)).sum::<f64>() / n.max(1) as f64;
        if mass <= tol {
            return Ok(combo);
        }
        let Some(perm) = support_matching(&residual) else {
            return Err(Error::DecompositionStalled { residual: mass });
        };
        let (imin, weight) = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| (i, residual[(i, j)]))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        for (i, &j) in perm.iter().enumerate() {
            residual[(i, j)] -= weight;
            if residual[(i, j)] <= SUPPORT_TOL {
                residual[(i, j)] = 0.0;
            }
        }
        residual[(imin, perm[imin])] = 0.0;
        combo.push(WeightedPermutation { weight, perm });
    }
}

/// Perfect matching inside the positive support by augmenting paths; rows in
/// index order, candidate columns by descending residual.
fn support_matching(a: &DenseMatrix) -> Option<Vec<usize>> {
    let n = a.n();
    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut cols: Vec<usize> = (0..n).filter(|&j| a[(i, j)] > SUPPORT_TOL).collect();
            cols.sort_by(|&x, &y| a[(i, y)].total_cmp(&a[(i, x)]));
            cols
        })
        .collect();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    for row in 0..n {
        let mut visited = vec![false; n];
        if !augment(row, &candidates, &mut col_owner, &mut visited) {
            return None;
        }
    }
    let mut perm = vec![0; n];
    for (j, owner) in col_owner.iter().enumerate() {
        perm[owner.expect("perfect matching assigns every column")] = j;
    }
    Some(perm)
}

fn augment(
    row: usize,
    candidates: &[Vec<usize>],
    col_owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &c in &candidates[row] {
        if visited[c] {
            continue;
        }
        visited[c] = true;
        let free = match col_owner[c] {
            None => true,
            Some(other) => augment(other, candidates, col_owner, visited),
        };
        if free {
            col_owner[c] = Some(row);
            return true;
        }
    }
    false
}

/// Writes a zero-excess hyperdominant `M` as `sum beta_i (I - P_i)` with
/// `beta_i > 0` and no identity terms.
pub fn conic_decompose(m: &DenseMatrix) -> Result<PermutationCombo> {
    if !classify(m).zero_excess {
        return Err(Error::NotZeroExcess);
    }
    let d = m.max_abs();
    if d == 0.0 {
        return Ok(Vec::new());
    }
    let n = m.n();
    let a = DenseMatrix::from_fn(n, |i, j| {
        let delta = if i == j { d } else { 0.0 };
        ((delta - m[(i, j)]) / d).max(0.0)
    });
    // entries are rescaled by d afterwards
    Ok(peel_permutations(&a, RECON_TOL / (10.0 * d.max(1.0)))?
        .into_iter()
        .filter(|t| !is_identity(&t.perm))
        .map(|t| WeightedPermutation {
            weight: d * t.weight,
            perm: t.perm,
        })
        .collect())
}

/// `<M v, w> = sum_ij m_ij v_j w_i` with both signals read on indices `0..n`.
pub fn bilinear_form(m: &DenseMatrix, v: &Signal, w: &Signal) -> Result<f64> {
    let n = m.n();
    for s in [v, w] {
        if !s.is_zero() && (s.start() < 0 || s.end() > n as i64) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.end().max(0) as usize,
            });
        }
    }
    let vv = v.window(0, n as i64);
    let ww = w.window(0, n as i64);
    Ok(crate::linalg::dot(&m.matvec(&vv), &ww))
}
