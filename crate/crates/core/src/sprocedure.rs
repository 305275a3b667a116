//! Finite-horizon quadratic forms over stacked `(v, w)` signals and a
//! cutting-plane search for S-procedure multipliers `alpha_k >= 0` with
//! `sigma_0 + sum alpha_k sigma_k <= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, DenseMatrix};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::periodic_banded::{BandedOperator, BandedPeriodicPermutation};
use crate::plant::RationalPlant;
use crate::signals::{SequencePair, Signal};

/// `f^T Pi f` with `f = (v_0..v_{H-1}, w_0..w_{H-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawForm", into = "RawForm")]
pub struct QuadraticForm {
    h: usize,
    matrix: DenseMatrix,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForm {
    #[serde(rename = "H")]
    h: usize,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<RawForm> for QuadraticForm {
    type Error = Error;

    fn try_from(raw: RawForm) -> Result<Self> {
        QuadraticForm::new(raw.h, DenseMatrix::from_rows(raw.matrix)?)
    }
}

impl From<QuadraticForm> for RawForm {
    fn from(f: QuadraticForm) -> Self {
        RawForm {
            h: f.h,
            matrix: f.matrix.rows(),
        }
    }
}

impl QuadraticForm {
    pub fn new(h: usize, matrix: DenseMatrix) -> Result<Self> {
        if matrix.n() != 2 * h {
            return Err(Error::DimensionMismatch {
                expected: 2 * h,
                got: matrix.n(),
            });
        }
        if !matrix.is_symmetric(1e-12 * matrix.max_abs().max(1.0)) {
            return Err(Error::InvalidInput("form matrix must be symmetric".into()));
        }
        Ok(QuadraticForm {
            h,
            matrix: matrix.symmetric_part(),
        })
    }

    /// `<C v, w>` as a symmetric form: `[[0, C^T/2], [C/2, 0]]`.
    pub fn from_bilinear(c: &DenseMatrix) -> Self {
        let h = c.n();
        let matrix = DenseMatrix::from_fn(2 * h, |i, j| match (i < h, j < h) {
            (true, false) => 0.5 * c[(j - h, i)],
            (false, true) => 0.5 * c[(i - h, j)],
            _ => 0.0,
        });
        QuadraticForm { h, matrix }
    }

    pub fn horizon(&self) -> usize {
        self.h
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn evaluate(&self, f: &[f64]) -> f64 {
        self.matrix.quadratic(f)
    }

    /// Evaluates on a pair read over `0..H`.
    pub fn evaluate_pair(&self, p: &SequencePair) -> f64 {
        let h = self.h as i64;
        let f: Vec<f64> = p.v.window(0, h).into_iter().chain(p.w.window(0, h)).collect();
        self.evaluate(&f)
    }
}

/// `sigma_0(v, w) = ||w||^2 - gamma^2 ||v - G w||^2` on horizon `h`.
pub fn build_sigma0(g: &RationalPlant, gamma: f64, h: usize) -> Result<QuadraticForm> {
    if !(gamma > 0.0 && gamma.is_finite()) || h == 0 {
        return Err(Error::InvalidInput("gamma must be positive and the horizon nonzero".into()));
    }
    g.ensure_stable()?;
    let tg = g.toeplitz_truncation(h).matrix();
    let gtg = tg.transpose().matmul(&tg);
    let g2 = gamma * gamma;
    let matrix = DenseMatrix::from_fn(2 * h, |i, j| match (i < h, j < h) {
        (true, true) => {
            if i == j {
                -g2
            } else {
                0.0
            }
        }
        (true, false) => g2 * tg[(i, j - h)],
        (false, true) => g2 * tg[(j, i - h)],
        (false, false) => {
            let id = if i == j { 1.0 } else { 0.0 };
            id - g2 * gtg[(i - h, j - h)]
        }
    });
    Ok(QuadraticForm {
        h,
        matrix: matrix.symmetric_part(),
    })
}

/// `sigma(v, w) = <(I - P) v, w>` truncated to `0..h`; `h` must be a multiple of the period.
pub fn build_sigmak(c: &BandedPeriodicPermutation, h: usize) -> Result<QuadraticForm> {
    let t = c.period();
    if h == 0 || !h.is_multiple_of(t) {
        return Err(Error::HorizonNotMultipleOfPeriod { horizon: h, period: t });
    }
    Ok(QuadraticForm::from_bilinear(&c.complement().window_matrix(0, h)))
}

/// `v = w = (1, 1/2, ..., 1/T)`.
pub fn witness_signal(t: usize) -> SequencePair {
    let values: Vec<f64> = (1..=t).map(|k| 1.0 / k as f64).collect();
    SequencePair::new(Signal::new(0, values.clone()), Signal::new(0, values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateConfig {
    pub max_iter: usize,
    /// Acceptance threshold on the largest eigenvalue of the combined form.
    pub tolerance: f64,
    /// Each cut demands `f^T Q(alpha) f <= -cut_margin` for a unit `f`.
    pub cut_margin: f64,
    /// Positive eigen-directions added as cuts per iteration.
    pub cuts_per_iteration: usize,
    /// Optional stacked `(v, w)` signal used for the strict-feasibility check.
    pub slater_witness: Option<Vec<f64>>,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig {
            max_iter: 500,
            tolerance: 1e-8,
            cut_margin: 1e-6,
            cuts_per_iteration: 4,
            slater_witness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: Vec<f64>,
    pub max_eig: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Certified,
    /// No certificate found at this horizon; never a proof of nonexistence.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateOutcome {
    pub status: SearchStatus,
    /// The search stopped because the margin-strengthened cuts admit no `alpha >= 0`.
    pub cuts_infeasible: bool,
    pub certificate: Option<Certificate>,
    /// Last evaluated `alpha` and the largest eigenvalue there.
    pub alpha: Vec<f64>,
    pub max_eig: f64,
    pub iterations: usize,
    /// Largest eigenvalue at each LP iterate.
    pub eig_history: Vec<f64>,
    /// `sum alpha` at each LP iterate.
    pub objective_history: Vec<f64>,
}

impl CertificateOutcome {
    pub fn found(&self) -> bool {
        self.status == SearchStatus::Certified
    }
}

/// `sigma_0 + sum alpha_k sigma_k` as a matrix.
pub fn combined_matrix(sigma0: &QuadraticForm, alpha: &[f64], sigmas: &[QuadraticForm]) -> DenseMatrix {
    let mut q = sigma0.matrix.clone();
    for (a, s) in alpha.iter().zip(sigmas) {
        if *a != 0.0 {
            q.add_scaled(*a, &s.matrix);
        }
    }
    q
}

pub fn combined_max_eig(sigma0: &QuadraticForm, alpha: &[f64], sigmas: &[QuadraticForm]) -> Result<f64> {
    if alpha.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidInput("alpha must be nonnegative".into()));
    }
    Ok(symmetric_eigen(&combined_matrix(sigma0, alpha, sigmas))?.values[0])
}

/// A stacked signal on which every constraint form is strictly positive.
fn slater_point(sigmas: &[QuadraticForm], h: usize, config: &CertificateConfig) -> Option<Vec<f64>> {
    let positive = |f: &[f64]| sigmas.iter().all(|s| s.evaluate(f) > 0.0);
    if let Some(f) = &config.slater_witness {
        return (f.len() == 2 * h && positive(f)).then(|| f.clone());
    }
    (1..=h).rev().find_map(|len| {
        let p = witness_signal(len);
        let f: Vec<f64> = p.v.window(0, h as i64).into_iter().chain(p.w.window(0, h as i64)).collect();
        positive(&f).then_some(f)
    })
}

/// Kelley cutting-plane search for `alpha >= 0` with
/// `lambda_max(sigma_0 + sum alpha_k sigma_k) <= tolerance`.
pub fn certificate_search(
    sigma0: &QuadraticForm,
    sigmas: &[QuadraticForm],
    config: &CertificateConfig,
) -> Result<CertificateOutcome> {
    let h = sigma0.h;
    if let Some(s) = sigmas.iter().find(|s| s.h != h) {
        return Err(Error::DimensionMismatch {
            expected: h,
            got: s.h,
        });
    }
    if !sigmas.is_empty() && slater_point(sigmas, h, config).is_none() {
        return Err(Error::SlaterViolated);
    }

    let n = sigmas.len();
    let mut lp = LinearProgram::minimize(vec![1.0; n]);
    let mut alpha = vec![0.0; n];
    let mut outcome = CertificateOutcome {
        status: SearchStatus::Inconclusive,
        cuts_infeasible: false,
        certificate: None,
        alpha: alpha.clone(),
        max_eig: f64::INFINITY,
        iterations: 0,
        eig_history: Vec::new(),
        objective_history: Vec::new(),
    };
    for iteration in 1..=config.max_iter.max(1) {
        outcome.iterations = iteration;
        let eig = symmetric_eigen(&combined_matrix(sigma0, &alpha, sigmas))?;
        let max_eig = eig.values[0];
        outcome.alpha = alpha.clone();
        outcome.max_eig = max_eig;
        outcome.eig_history.push(max_eig);
        outcome.objective_history.push(alpha.iter().sum());
        if max_eig <= config.tolerance {
            outcome.status = SearchStatus::Certified;
            outcome.certificate = Some(Certificate {
                alpha: alpha.clone(),
                max_eig,
                iterations: iteration,
            });
            return Ok(outcome);
        }
        if n == 0 || iteration == config.max_iter {
            return Ok(outcome);
        }
        for (value, f) in eig.values.iter().zip(&eig.vectors).take(config.cuts_per_iteration.max(1)) {
            if *value <= config.tolerance {
                break;
            }
            // sigma_0(f) + sum alpha_k sigma_k(f) <= -margin
            let coeffs = sigmas.iter().map(|s| s.evaluate(f)).collect();
            lp.add(coeffs, Relation::Le, -config.cut_margin - sigma0.evaluate(f));
        }
        match lp.solve()? {
            LpOutcome::Optimal { x, .. } => alpha = x,
            LpOutcome::Infeasible { .. } => {
                outcome.cuts_infeasible = true;
                return Ok(outcome);
            }
            LpOutcome::Unbounded { iterations } => return Err(Error::LpNumericalFailure { iterations }),
        }
    }
    Ok(outcome)
}
