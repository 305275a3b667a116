use serde::{Deserialize, Serialize};

use super::fir::{ClassMode, FirMultiplier};
use crate::error::{Error, Result};
use crate::linalg::{max_eigenpair, DenseMatrix};
use crate::periodic_banded::{validate, BandedOperator, PeriodicBandedOperator};
use crate::plant::RationalPlant;
use crate::signals::Signal;

/// Threshold on the largest eigenvalue for the finite-horizon inequality to hold.
pub const NEGATIVITY_TOL: f64 = 1e-9;

/// Averages the shifted copies of a periodic operator into an LTI multiplier:
/// `m_k = (1/T) sum_r m_{r, r-k}`.
pub fn average_to_lti(m: &PeriodicBandedOperator) -> Result<FirMultiplier> {
    let diag = validate(m);
    if !diag.is_valid() {
        return Err(Error::InvalidOperator(
            "operator is not a valid zero-excess periodic multiplier".into(),
        ));
    }
    let t = m.period();
    let b = m.bandwidth() as i64;
    let coeffs = (-b..=b)
        .map(|k| (0..t as i64).map(|r| m.entry(r, r - k)).sum::<f64>() / t as f64)
        .collect();
    FirMultiplier::new(b as usize, coeffs, ClassMode::ZeroExcess)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub holds: bool,
    pub max_eig: f64,
    /// Unit eigenvector of the largest eigenvalue, on the tested index range.
    pub witness: Signal,
}

/// `sym(T_M T_G) + eps I` on `0..horizon`.
pub fn negativity_form<M: BandedOperator + ?Sized>(
    m: &M,
    g: &RationalPlant,
    horizon: usize,
    eps: f64,
) -> DenseMatrix {
    let tm = m.window_matrix(0, horizon);
    let tg = g.toeplitz_truncation(horizon).matrix();
    let mut q = tm.matmul(&tg).symmetric_part();
    q.add_diagonal(eps);
    q
}

/// Checks `<M G w, w> <= -eps ||w||^2` for `w` supported on `0..horizon`.
pub fn quadratic_negativity<M: BandedOperator + ?Sized>(
    m: &M,
    g: &RationalPlant,
    horizon: usize,
    eps: f64,
) -> Result<NegativityReport> {
    quadratic_negativity_on(m, g, horizon, eps, 0..horizon)
}

/// As [`quadratic_negativity`] but restricted to `w` supported on `range`,
/// with the products still formed on `0..horizon`.
pub fn quadratic_negativity_on<M: BandedOperator + ?Sized>(
    m: &M,
    g: &RationalPlant,
    horizon: usize,
    eps: f64,
    range: std::ops::Range<usize>,
) -> Result<NegativityReport> {
    if horizon == 0 || range.is_empty() || range.end > horizon {
        return Err(Error::InvalidInput("empty or out-of-horizon index range".into()));
    }
    g.ensure_stable()?;
    let q = negativity_form(m, g, horizon, eps);
    let idx: Vec<usize> = range.clone().collect();
    let (max_eig, vector) = max_eigenpair(&q.principal(&idx))?;
    Ok(NegativityReport {
        holds: max_eig <= NEGATIVITY_TOL,
        max_eig,
        witness: Signal::new(range.start as i64, vector),
    })
}
