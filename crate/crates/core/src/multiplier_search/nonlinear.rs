use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, DenseMatrix};
use crate::nonlinearity::{PiecewiseLinear, PiecewiseLinearMonotone, SectorNonlinearity};
use crate::periodic_banded::BandedOperator;
use crate::plant::RationalPlant;
use crate::signals::Signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub horizon: usize,
    pub random_probes: usize,
    /// Leading eigenvectors of the linearized form used as probes.
    pub eigen_probes: usize,
    /// Every probe direction is evaluated at each of these scales.
    pub amplitudes: Vec<f64>,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            horizon: 32,
            random_probes: 256,
            eigen_probes: 4,
            amplitudes: vec![0.1, 1.0, 10.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearReport {
    pub max_value: f64,
    /// Some probe gave `J(w) > 0`.
    pub violated: bool,
    pub worst_w: Signal,
    pub probes: usize,
}

/// The pieces of `J(w) = <M phi0(G w), w> + <psi(G w, k), w> + eps ||w||^2`
/// on a fixed horizon.
pub struct CertificateForm<'a> {
    tm: DenseMatrix,
    tg: DenseMatrix,
    phi0: &'a PiecewiseLinearMonotone,
    psi: &'a SectorNonlinearity,
    eps: f64,
}

impl<'a> CertificateForm<'a> {
    pub fn new<M: BandedOperator + ?Sized>(
        m: &M,
        phi0: &'a PiecewiseLinearMonotone,
        psi: &'a SectorNonlinearity,
        g: &RationalPlant,
        eps: f64,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        g.ensure_stable()?;
        Ok(CertificateForm {
            tm: m.window_matrix(0, horizon),
            tg: g.toeplitz_truncation(horizon).matrix(),
            phi0,
            psi,
            eps,
        })
    }

    pub fn horizon(&self) -> usize {
        self.tm.n()
    }

    /// `J(w)` for `w` given on `0..horizon`.
    pub fn evaluate(&self, w: &[f64]) -> f64 {
        let v = self.tg.matvec(w);
        let phi: Vec<f64> = v.iter().map(|&x| self.phi0.evaluate(x)).collect();
        let psi: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(k, &x)| self.psi.evaluate(x, k as i64))
            .collect();
        dot(&self.tm.matvec(&phi), w) + dot(&psi, w) + self.eps * dot(w, w)
    }

    /// Symmetric matrix of `J` with each nonlinearity replaced by its slope at the origin.
    fn linearized(&self) -> DenseMatrix {
        let h = self.horizon();
        let a = slope_at_origin(self.phi0.as_piecewise());
        let psi_slopes: Vec<f64> = (0..h).map(|k| slope_at_origin(self.psi.phase(k as i64))).collect();
        let mut lin = self.tm.scaled(a).matmul(&self.tg);
        for i in 0..h {
            for j in 0..h {
                lin[(i, j)] += psi_slopes[i] * self.tg[(i, j)];
            }
        }
        let mut q = lin.symmetric_part();
        q.add_diagonal(self.eps);
        q
    }
}

fn slope_at_origin(f: &PiecewiseLinear) -> f64 {
    let h = 1e-9;
    (f.evaluate(h) - f.evaluate(-h)) / (2.0 * h)
}

/// Falsification search for the nonlinear multiplier inequality over a probe
/// family: random signals, eigenvectors of the linearized form and coordinate
/// impulses, each at several amplitudes. A nonpositive maximum is evidence only.
pub fn nonlinear_certificate<M: BandedOperator + ?Sized>(
    m: &M,
    phi0: &PiecewiseLinearMonotone,
    psi: &SectorNonlinearity,
    g: &RationalPlant,
    eps: f64,
    config: &ProbeConfig,
) -> Result<NonlinearReport> {
    let form = CertificateForm::new(m, phi0, psi, g, eps, config.horizon)?;
    let h = config.horizon;
    let mut directions: Vec<Vec<f64>> = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.random_probes {
        let w: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dot(&w, &w).sqrt();
        directions.push(w.iter().map(|x| x / n).collect());
    }
    if config.eigen_probes > 0 {
        let eig = symmetric_eigen(&form.linearized())?;
        for vector in eig.vectors.iter().take(config.eigen_probes) {
            directions.push(vector.clone());
            directions.push(vector.iter().map(|x| -x).collect());
        }
    }
    for i in 0..h {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; h];
            e[i] = sign;
            directions.push(e);
        }
    }

    let probes: Vec<Vec<f64>> = directions
        .iter()
        .flat_map(|d| config.amplitudes.iter().map(move |&a| d.iter().map(|x| a * x).collect()))
        .collect();
    let (index, max_value) = probes
        .par_iter()
        .map(|w| form.evaluate(w))
        .enumerate()
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| match a.1.total_cmp(&b.1) {
                std::cmp::Ordering::Less => b,
                std::cmp::Ordering::Greater => a,
                std::cmp::Ordering::Equal => if a.0 <= b.0 { a } else { b },
            },
        );
    let worst_w = probes
        .get(index)
        .map(|w| Signal::new(0, w.clone()))
        .unwrap_or_default();
    Ok(NonlinearReport {
        max_value,
        violated: max_value > 0.0,
        worst_w,
        probes: probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplier_search::fir::{ClassMode, FirMultiplier};
    use crate::multiplier_search::negativity::negativity_form;

    fn zero_psi() -> SectorNonlinearity {
        SectorNonlinearity::new(None, vec![PiecewiseLinear::linear(0.0)], None).unwrap()
    }

    #[test]
    fn reduces_to_the_linear_form() {
        let m = FirMultiplier::new(1, vec![-0.3, 1.0, -0.2], ClassMode::Hyperdominant).unwrap();
        let g = RationalPlant::first_order(-0.4, 0.5);
        let id = PiecewiseLinearMonotone::linear(1.0).unwrap();
        let psi = zero_psi();
        let h = 10;
        let form = CertificateForm::new(&m, &id, &psi, &g, 0.05, h).unwrap();
        let q = negativity_form(&m, &g, h, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let w: Vec<f64> = (0..h).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!((form.evaluate(&w) - q.quadratic(&w)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_signal_gives_zero() {
        let m = FirMultiplier::identity();
        let phi = PiecewiseLinearMonotone::new(vec![(-1.0, -2.0), (0.0, 0.0), (1.0, 0.5)]).unwrap();
        let psi = SectorNonlinearity::new(Some(2), vec![PiecewiseLinear::linear(0.0), PiecewiseLinear::linear(3.0)], None)
            .unwrap();
        let form = CertificateForm::new(&m, &phi, &psi, &RationalPlant::first_order(1.0, 0.2), 1.0, 6).unwrap();
        assert_eq!(form.evaluate(&[0.0; 6]), 0.0);
    }

    #[test]
    fn static_closed_form() {
        let m = FirMultiplier::identity();
        let id = PiecewiseLinearMonotone::linear(1.0).unwrap();
        let psi = SectorNonlinearity::new(None, vec![PiecewiseLinear::linear(0.1)], None).unwrap();
        let g = RationalPlant::static_gain(-0.5);
        let config = ProbeConfig { horizon: 12, ..ProbeConfig::default() };
        let form = CertificateForm::new(&m, &id, &psi, &g, 0.3, 12).unwrap();
        let w = [0.3, -1.0, 2.0, 0.0, 0.5, 0.1, -0.2, 0.0, 0.0, 1.0, 0.0, 4.0];
        let norm_sq = dot(&w, &w);
        assert!((form.evaluate(&w) + 0.25 * norm_sq).abs() < 1e-12);
        let report = nonlinear_certificate(&m, &id, &psi, &g, 0.3, &config).unwrap();
        assert!(!report.violated);
        // smallest probes are the coordinate impulses at amplitude 0.1
        assert!((report.max_value + 0.25 * 0.01).abs() < 1e-12);
    }

    #[test]
    fn finds_violations_and_is_deterministic() {
        let m = FirMultiplier::identity();
        let id = PiecewiseLinearMonotone::linear(1.0).unwrap();
        let psi = zero_psi();
        let g = RationalPlant::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let config = ProbeConfig { horizon: 8, seed: 3, ..ProbeConfig::default() };
        let a = nonlinear_certificate(&m, &id, &psi, &g, 0.01, &config).unwrap();
        let b = nonlinear_certificate(&m, &id, &psi, &g, 0.01, &config).unwrap();
        assert!(a.violated);
        assert_eq!(a, b);
    }
}
