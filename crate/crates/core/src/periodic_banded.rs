//! T-periodic, B-banded operators on sequences over Z, their permutation basis,
//! and the fold/unfold correspondence with T x T matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperdominant::{self, CLASS_TOL, RECON_TOL};
use crate::linalg::DenseMatrix;
use crate::signals::{SequencePair, Signal};

/// Default cap on the number of enumerated permutations.
pub const DEFAULT_BASIS_CAP: usize = 1_000_000;
/// Membership tolerance on `<(I - P) v, w>`.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// A doubly-infinite matrix with finitely many nonzero entries per row and column.
pub trait BandedOperator {
    fn bandwidth(&self) -> usize;

    /// Entry `m_{ij}`; zero for `|i - j| > bandwidth()`.
    fn entry(&self, i: i64, j: i64) -> f64;

    /// `(M u)_i = sum_j m_{ij} u_j`.
    fn apply(&self, u: &Signal) -> Signal {
        if u.is_zero() {
            return Signal::zero();
        }
        let b = self.bandwidth() as i64;
        let lo = u.start() - b;
        let hi = u.end() + b;
        let values = (lo..hi)
            .map(|i| {
                (i - b..=i + b)
                    .map(|j| self.entry(i, j) * u.get(j))
                    .sum()
            })
            .collect();
        Signal::new(lo, values)
    }

    /// Window `m_{offset+i, offset+j}` for `i, j < n`.
    fn window_matrix(&self, offset: i64, n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, |i, j| self.entry(offset + i as i64, offset + j as i64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOperator")]
pub struct PeriodicBandedOperator {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "B")]
    b: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOperator {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "B")]
    b: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawOperator> for PeriodicBandedOperator {
    type Error = Error;

    fn try_from(raw: RawOperator) -> Result<Self> {
        PeriodicBandedOperator::new(raw.t, raw.b, raw.rows)
    }
}

impl PeriodicBandedOperator {
    /// `rows[r][c + B] = m_{r, r + c}` for residues `r < T` and `|c| <= B`.
    pub fn new(t: usize, b: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidOperator("period must be at least 1".into()));
        }
        if rows.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                got: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != 2 * b + 1) {
            return Err(Error::DimensionMismatch {
                expected: 2 * b + 1,
                got: r.len(),
            });
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidOperator("entries must be finite".into()));
        }
        Ok(PeriodicBandedOperator { t, b, rows })
    }

    pub fn zero(t: usize, b: usize) -> Self {
        PeriodicBandedOperator {
            t,
            b,
            rows: vec![vec![0.0; 2 * b + 1]; t],
        }
    }

    pub fn identity(t: usize, b: usize) -> Self {
        let mut m = Self::zero(t, b);
        for row in &mut m.rows {
            row[b] = 1.0;
        }
        m
    }

    pub fn period(&self) -> usize {
        self.t
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Band coefficient `m_{r, r + offset}` for a residue `r`.
    pub fn band(&self, r: usize, offset: i64) -> f64 {
        self.rows[r][(offset + self.b as i64) as usize]
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.rows.iter_mut().flatten().for_each(|x| *x *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.t != other.t || self.b != other.b {
            return Err(Error::InvalidOperator("period or bandwidth differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.rows.iter_mut().flatten().zip(other.rows.iter().flatten()) {
            *a += b;
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.rows.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn offsets(&self) -> std::ops::RangeInclusive<i64> {
        -(self.b as i64)..=self.b as i64
    }
}

impl BandedOperator for PeriodicBandedOperator {
    fn bandwidth(&self) -> usize {
        self.b
    }

    fn entry(&self, i: i64, j: i64) -> f64 {
        let c = j - i;
        if c.unsigned_abs() as usize > self.b {
            return 0.0;
        }
        self.band(i.rem_euclid(self.t as i64) as usize, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignViolation {
    pub residue: usize,
    pub offset: i64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sign_violations: Vec<SignViolation>,
    /// Sum of row `r` of the infinite matrix, per residue.
    pub row_excess: Vec<f64>,
    /// Sum of column `r` of the infinite matrix, per residue.
    pub col_excess: Vec<f64>,
    /// `T < 2B + 1`.
    pub period_too_short: bool,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.sign_violations.is_empty()
            && !self.period_too_short
            && self
                .row_excess
                .iter()
                .chain(&self.col_excess)
                .all(|s| s.abs() <= CLASS_TOL)
    }
}

/// Checks membership in the zero-excess hyperdominant multiplier class.
pub fn validate(m: &PeriodicBandedOperator) -> Diagnostics {
    let t = m.t as i64;
    let mut sign_violations = Vec::new();
    for r in 0..m.t {
        for c in m.offsets() {
            let value = m.band(r, c);
            if c != 0 && value > 0.0 {
                sign_violations.push(SignViolation {
                    residue: r,
                    offset: c,
                    value,
                });
            }
        }
    }
    let row_excess = m.rows.iter().map(|r| r.iter().sum()).collect();
    let col_excess = (0..t)
        .map(|j| {
            m.offsets()
                .map(|c| m.band((j - c).rem_euclid(t) as usize, c))
                .sum()
        })
        .collect();
    Diagnostics {
        sign_violations,
        row_excess,
        col_excess,
        period_too_short: m.t < 2 * m.b + 1,
    }
}

fn require_valid(m: &PeriodicBandedOperator) -> Result<()> {
    let diag = validate(m);
    if diag.is_valid() {
        Ok(())
    } else if diag.period_too_short {
        Err(Error::InvalidOperator(format!(
            "period {} is shorter than 2B + 1 = {}",
            m.t,
            2 * m.b + 1
        )))
    } else {
        Err(Error::InvalidOperator(
            "operator is not doubly hyperdominant with zero excess".into(),
        ))
    }
}

/// Wraps one period into a T x T matrix: `fold[r][(r + c) mod T] += m_{r, r + c}`.
pub fn fold(m: &PeriodicBandedOperator) -> Result<DenseMatrix> {
    require_valid(m)?;
    Ok(fold_unchecked(m))
}

fn fold_unchecked(m: &PeriodicBandedOperator) -> DenseMatrix {
    let t = m.t as i64;
    let mut out = DenseMatrix::zeros(m.t);
    for r in 0..m.t {
        for c in m.offsets() {
            out[(r, (r as i64 + c).rem_euclid(t) as usize)] += m.band(r, c);
        }
    }
    out
}

/// The unique in-band offset `o` with `r + o = col (mod T)`.
fn band_offset(t: usize, b: usize, r: usize, col: usize) -> Result<i64> {
    let t = t as i64;
    let b_i = b as i64;
    (-b_i..=b_i)
        .find(|o| (r as i64 + o).rem_euclid(t) == col as i64)
        .ok_or(Error::BandInfeasible { row: r, col, band: b })
}

/// Inverse of [`fold`]: places each entry at its congruent in-band column.
pub fn unfold(x: &DenseMatrix, t: usize, b: usize) -> Result<PeriodicBandedOperator> {
    if x.n() != t {
        return Err(Error::DimensionMismatch {
            expected: t,
            got: x.n(),
        });
    }
    if t < 2 * b + 1 {
        return Err(Error::InvalidOperator(format!(
            "period {t} is shorter than 2B + 1 = {}",
            2 * b + 1
        )));
    }
    let mut out = PeriodicBandedOperator::zero(t, b);
    for r in 0..t {
        for c in 0..t {
            let value = x[(r, c)];
            if value != 0.0 {
                let o = band_offset(t, b, r, c)?;
                out.rows[r][(o + b as i64) as usize] = value;
            }
        }
    }
    Ok(out)
}

/// A T-periodic permutation of Z moving no index by more than `B`:
/// `pi(k) = k + displacement[k mod T]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPermutation")]
pub struct BandedPeriodicPermutation {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "B")]
    b: usize,
    displacement: Vec<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPermutation {
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "B")]
    b: usize,
    displacement: Vec<i64>,
}

impl TryFrom<RawPermutation> for BandedPeriodicPermutation {
    type Error = Error;

    fn try_from(raw: RawPermutation) -> Result<Self> {
        BandedPeriodicPermutation::new(raw.t, raw.b, raw.displacement)
    }
}

impl BandedPeriodicPermutation {
    pub fn new(t: usize, b: usize, displacement: Vec<i64>) -> Result<Self> {
        if t == 0 || displacement.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                got: displacement.len(),
            });
        }
        if displacement.iter().any(|d| d.unsigned_abs() as usize > b) {
            return Err(Error::InvalidOperator(format!(
                "displacement exceeds bandwidth {b}"
            )));
        }
        let mut hit = vec![false; t];
        for (r, d) in displacement.iter().enumerate() {
            let image = (r as i64 + d).rem_euclid(t as i64) as usize;
            if std::mem::replace(&mut hit[image], true) {
                return Err(Error::InvalidOperator("displacement is not a bijection".into()));
            }
        }
        Ok(BandedPeriodicPermutation { t, b, displacement })
    }

    pub fn identity(t: usize, b: usize) -> Self {
        BandedPeriodicPermutation {
            t,
            b,
            displacement: vec![0; t],
        }
    }

    pub fn period(&self) -> usize {
        self.t
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn displacement(&self) -> &[i64] {
        &self.displacement
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.iter().all(|&d| d == 0)
    }

    pub fn image(&self, k: i64) -> i64 {
        k + self.displacement[k.rem_euclid(self.t as i64) as usize]
    }

    /// `I - P` where `(P v)_i = v_{pi(i)}`.
    pub fn complement(&self) -> PeriodicBandedOperator {
        let mut out = PeriodicBandedOperator::zero(self.t, self.b);
        for (r, &d) in self.displacement.iter().enumerate() {
            out.rows[r][self.b] += 1.0;
            out.rows[r][(d + self.b as i64) as usize] -= 1.0;
        }
        out
    }

    /// `<(I - P) v, w> = sum_k w_k (v_k - v_{pi(k)})`.
    pub fn complement_pairing(&self, p: &SequencePair) -> f64 {
        if p.w.is_zero() {
            return 0.0;
        }
        (p.w.start()..p.w.end())
            .map(|k| p.w.get(k) * (p.v.get(k) - p.v.get(self.image(k))))
            .sum()
    }
}

/// All banded periodic permutations in lexicographic order of displacement
/// vectors (each displacement ascending from `-B`).
pub fn enumerate_basis(t: usize, b: usize, cap: usize) -> Result<Vec<BandedPeriodicPermutation>> {
    if t == 0 || t < 2 * b + 1 {
        return Err(Error::InvalidOperator(format!(
            "period {t} is shorter than 2B + 1 = {}",
            2 * b + 1
        )));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(t);
    let mut used = vec![false; t];
    backtrack(t, b as i64, cap, &mut current, &mut used, &mut out)?;
    Ok(out)
}

fn backtrack(
    t: usize,
    b: i64,
    cap: usize,
    current: &mut Vec<i64>,
    used: &mut [bool],
    out: &mut Vec<BandedPeriodicPermutation>,
) -> Result<()> {
    let r = current.len();
    if r == t {
        if out.len() >= cap {
            return Err(Error::BudgetExceeded { cap });
        }
        out.push(BandedPeriodicPermutation {
            t,
            b: b as usize,
            displacement: current.clone(),
        });
        return Ok(());
    }
    for d in -b..=b {
        let image = (r as i64 + d).rem_euclid(t as i64) as usize;
        if used[image] {
            continue;
        }
        used[image] = true;
        current.push(d);
        backtrack(t, b, cap, current, used, out)?;
        current.pop();
        used[image] = false;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicTerm {
    pub weight: f64,
    pub permutation: BandedPeriodicPermutation,
}

/// `M = sum alpha_i (I - P_i)` over the banded periodic permutation basis.
pub fn conic_decompose_periodic(m: &PeriodicBandedOperator) -> Result<Vec<ConicTerm>> {
    let folded = fold(m)?;
    hyperdominant::conic_decompose(&folded)?
        .into_iter()
        .map(|term| {
            let displacement = term
                .perm
                .iter()
                .enumerate()
                .map(|(r, &c)| band_offset(m.t, m.b, r, c))
                .collect::<Result<Vec<_>>>()?;
            Ok(ConicTerm {
                weight: term.weight,
                permutation: BandedPeriodicPermutation::new(m.t, m.b, displacement)?,
            })
        })
        .collect()
}

/// `sum alpha_i (I - P_i)` as an operator.
pub fn conic_reconstruct(t: usize, b: usize, terms: &[ConicTerm]) -> PeriodicBandedOperator {
    terms.iter().fold(PeriodicBandedOperator::zero(t, b), |acc, term| {
        acc.add(&term.permutation.complement().scaled(term.weight))
            .expect("terms share the period and bandwidth")
    })
}

/// Whether a reconstruction matches within the decomposition tolerance.
pub fn reconstructs(m: &PeriodicBandedOperator, terms: &[ConicTerm]) -> bool {
    conic_reconstruct(m.t, m.b, terms).max_abs_diff(m) <= RECON_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    /// Smallest `<(I - P) v, w>` over the basis.
    pub min_value: f64,
    /// Most violating permutation when not a member.
    pub witness: Option<BandedPeriodicPermutation>,
}

/// Tests `<(I - P) v, w> >= 0` for every banded periodic permutation `P`.
pub fn pair_in_gtb(p: &SequencePair, t: usize, b: usize) -> Result<Membership> {
    let basis = enumerate_basis(t, b, DEFAULT_BASIS_CAP)?;
    Ok(pair_in_basis(p, &basis))
}

/// Membership against a precomputed basis.
pub fn pair_in_basis(p: &SequencePair, basis: &[BandedPeriodicPermutation]) -> Membership {
    let (min_value, worst) = basis
        .iter()
        .map(|perm| (perm.complement_pairing(p), perm))
        .fold((0.0f64, None), |(best, wp), (value, perm)| {
            if value < best {
                (value, Some(perm))
            } else {
                (best, wp)
            }
        });
    let member = min_value >= -MEMBERSHIP_TOL;
    Membership {
        member,
        min_value,
        witness: if member { None } else { worst.cloned() },
    }
}

/// Finds the index pair `k, l` with `|k - l| <= B` most violating
/// `(v_k - v_l)(w_k - w_l) >= 0` and returns it as a transposition whose
/// period is long enough that no other copy meets the support.
pub fn violating_transposition(p: &SequencePair, b: usize) -> Option<BandedPeriodicPermutation> {
    if b == 0 || (p.v.is_zero() && p.w.is_zero()) {
        return None;
    }
    let (lo, hi) = p.support();
    let bi = b as i64;
    let mut worst: Option<(f64, i64, i64)> = None;
    for k in lo - bi..hi + bi {
        for l in k + 1..=k + bi {
            let prod = (p.v.get(k) - p.v.get(l)) * (p.w.get(k) - p.w.get(l));
            if prod < 0.0 && worst.is_none_or(|(w, _, _)| prod < w) {
                worst = Some((prod, k, l));
            }
        }
    }
    let (_, k, l) = worst?;
    let t = (2 * b + 1).max((hi - lo) as usize + 2 * b + 1);
    let mut displacement = vec![0; t];
    displacement[k.rem_euclid(t as i64) as usize] = l - k;
    displacement[l.rem_euclid(t as i64) as usize] = k - l;
    Some(BandedPeriodicPermutation {
        t,
        b,
        displacement,
    })
}
