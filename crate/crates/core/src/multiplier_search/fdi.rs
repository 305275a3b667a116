use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fir::{ClassMode, FirMultiplier, FrequencyGrid};
use crate::error::{Error, Result};
use crate::lp::{verify_farkas, LinearProgram, LpOutcome, Relation};
use crate::periodic_banded::BandedOperator;
use crate::plant::RationalPlant;

/// Extra slack so that LP solutions land strictly inside the grid margin.
const LP_MARGIN_SLACK: f64 = 1e-9;
const MAX_SUBDIVISION_DEPTH: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdiReport {
    /// `grid_pass && certified`.
    pub pass: bool,
    /// Grid maximum of `Re{M G}` is at most `-margin`.
    pub grid_pass: bool,
    /// The continuum maximum is at most `-margin / 2`.
    pub certified: bool,
    pub worst_frequency: f64,
    pub worst_value: f64,
    /// Lipschitz constant of `omega -> Re{M G}` used for the continuum argument.
    pub lipschitz: f64,
}

fn fdi_value(m: &FirMultiplier, g: &RationalPlant, omega: f64) -> Result<f64> {
    Ok((m.frequency_response(omega) * g.frequency_response(omega)?).re)
}

/// Checks `Re{M(e^jw) G(e^jw)} <= -margin` on the grid and certifies the
/// continuum at half the margin with a derivative bound.
pub fn verify_fdi(m: &FirMultiplier, g: &RationalPlant, grid: &FrequencyGrid) -> Result<FdiReport> {
    g.ensure_stable()?;
    grid.check(m.bandwidth())?;
    let values: Vec<f64> = (0..grid.points)
        .into_par_iter()
        .map(|i| fdi_value(m, g, grid.omega(i)))
        .collect::<Result<_>>()?;
    let (worst_index, worst_value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let grid_pass = worst_value <= -grid.margin;

    let (g_sup, g_deriv) = g.response_bounds()?;
    let (m_deriv, m_sup) = m.response_bounds();
    let lipschitz = m_deriv * g_sup + m_sup * g_deriv;

    let certified = grid_pass && {
        let target = -grid.margin / 2.0;
        let h = grid.spacing();
        (0..grid.points).into_par_iter().all(|i| {
            let a = grid.omega(i);
            let fb = values[(i + 1) % grid.points];
            interval_below(m, g, lipschitz, target, a, a + h, values[i], fb, 0).unwrap_or(false)
        })
    };
    Ok(FdiReport {
        pass: grid_pass && certified,
        grid_pass,
        certified,
        worst_frequency: grid.omega(worst_index),
        worst_value,
        lipschitz,
    })
}

/// Whether an `L`-Lipschitz function stays at or below `target` on `[a, b]`.
#[allow(clippy::too_many_arguments)]
fn interval_below(
    m: &FirMultiplier,
    g: &RationalPlant,
    lipschitz: f64,
    target: f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    depth: u32,
) -> Result<bool> {
    if fa > target || fb > target {
        return Ok(false);
    }
    // max over [a, b] of a Lipschitz function through (a, fa), (b, fb)
    let bound = 0.5 * (fa + fb) + 0.5 * lipschitz * (b - a);
    if bound <= target {
        return Ok(true);
    }
    if depth >= MAX_SUBDIVISION_DEPTH {
        return Ok(false);
    }
    let mid = 0.5 * (a + b);
    let fm = fdi_value(m, g, mid)?;
    Ok(interval_below(m, g, lipschitz, target, a, mid, fa, fm, depth + 1)?
        && interval_below(m, g, lipschitz, target, mid, b, fm, fb, depth + 1)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub feasible: bool,
    pub multiplier: Option<FirMultiplier>,
    /// On success the grid argmax of `Re{M G}`; on failure the frequency
    /// carrying the largest weight in the infeasibility certificate.
    pub worst_frequency: Option<f64>,
    pub worst_value: Option<f64>,
    pub lp_iterations: usize,
    /// Slack beyond the required margin achieved by the LP solution.
    pub margin: Option<f64>,
    /// Farkas multipliers over the LP rows when the LP is infeasible.
    pub certificate: Option<Vec<f64>>,
    pub certificate_verified: bool,
    /// Continuum check of the returned multiplier.
    pub verification: Option<FdiReport>,
    pub mode: ClassMode,
    pub band: usize,
    pub grid_points: usize,
}

/// Linear program over `x_k = -m_k` (`k != 0`) and a margin variable `s`,
/// with `m_0 = 1`. The first `grid.points` rows are the frequency rows.
fn build_lp(g: &RationalPlant, b: usize, grid: &FrequencyGrid, mode: ClassMode) -> Result<LinearProgram> {
    let bi = b as i64;
    let offsets: Vec<i64> = (-bi..=bi).filter(|&k| k != 0).collect();
    let n = offsets.len() + 1;
    let mut objective = vec![0.0; n];
    objective[n - 1] = -1.0;
    let mut lp = LinearProgram::minimize(objective);
    let eps = grid.margin + LP_MARGIN_SLACK;
    for omega in grid.omegas() {
        let gw = g.frequency_response(omega)?;
        // Re{M G} = Re G - sum_k x_k Re{e^{-j w k} G}
        let mut row: Vec<f64> = offsets
            .iter()
            .map(|&k| -(Complex64::from_polar(1.0, -omega * k as f64) * gw).re)
            .collect();
        row.push(1.0);
        lp.add(row, Relation::Le, -eps - gw.re);
    }
    if !offsets.is_empty() {
        let mut sum = vec![1.0; n];
        sum[n - 1] = 0.0;
        let rel = match mode {
            ClassMode::Hyperdominant => Relation::Le,
            ClassMode::ZeroExcess => Relation::Eq,
        };
        lp.add(sum, rel, 1.0);
    } else if mode == ClassMode::ZeroExcess {
        // m_0 = 1 cannot sum to zero: encode 0 * s = 1
        lp.add(vec![0.0], Relation::Eq, 1.0);
    }
    Ok(lp)
}

/// Searches the FIR multiplier class of bandwidth `b` for `M` with
/// `Re{M G} <= -margin` on the grid, maximizing the slack.
pub fn search_fir(g: &RationalPlant, b: usize, grid: &FrequencyGrid, mode: ClassMode) -> Result<SearchReport> {
    g.ensure_stable()?;
    grid.check(b)?;
    let lp = build_lp(g, b, grid, mode)?;
    let mut report = SearchReport {
        feasible: false,
        multiplier: None,
        worst_frequency: None,
        worst_value: None,
        lp_iterations: 0,
        margin: None,
        certificate: None,
        certificate_verified: false,
        verification: None,
        mode,
        band: b,
        grid_points: grid.points,
    };
    match lp.solve()? {
        LpOutcome::Optimal { x, iterations, .. } => {
            report.lp_iterations = iterations;
            let (taps, s) = x.split_at(x.len() - 1);
            let mut coeffs = Vec::with_capacity(2 * b + 1);
            coeffs.extend(taps[..b].iter().map(|t| -t.max(0.0)));
            coeffs.push(1.0);
            coeffs.extend(taps[b..].iter().map(|t| -t.max(0.0)));
            let m = FirMultiplier::new(b, coeffs, mode)?;
            let check = verify_fdi(&m, g, grid)?;
            report.feasible = check.pass;
            report.margin = Some(s[0]);
            report.worst_frequency = Some(check.worst_frequency);
            report.worst_value = Some(check.worst_value);
            report.multiplier = Some(m);
            report.verification = Some(check);
        }
        LpOutcome::Infeasible { certificate, iterations } => {
            report.lp_iterations = iterations;
            report.certificate_verified = verify_farkas(&lp, &certificate, 1e-9);
            let heaviest = certificate[..grid.points]
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, z)| if z.abs() > best.1 { (i, z.abs()) } else { best });
            report.worst_frequency = Some(grid.omega(heaviest.0));
            report.certificate = Some(certificate);
        }
        LpOutcome::Unbounded { iterations } => {
            return Err(Error::LpNumericalFailure { iterations });
        }
    }
    Ok(report)
}
