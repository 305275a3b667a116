use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperdominant::CLASS_TOL;
use crate::periodic_banded::BandedOperator;

/// Which row/column-sum condition the multiplier satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMode {
    /// `sum_k m_k >= 0`.
    #[default]
    Hyperdominant,
    /// `sum_k m_k = 0`.
    ZeroExcess,
}

/// LTI multiplier `(M y)_i = sum_{|k| <= B} m_k y_{i-k}` with `m_k <= 0` for `k != 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFir")]
pub struct FirMultiplier {
    #[serde(rename = "B")]
    b: usize,
    /// `coeffs[k + B] = m_k`.
    coeffs: Vec<f64>,
    mode: ClassMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFir {
    #[serde(rename = "B")]
    b: usize,
    coeffs: Vec<f64>,
    #[serde(default)]
    mode: ClassMode,
}

impl TryFrom<RawFir> for FirMultiplier {
    type Error = Error;

    fn try_from(raw: RawFir) -> Result<Self> {
        FirMultiplier::new(raw.b, raw.coeffs, raw.mode)
    }
}

impl FirMultiplier {
    pub fn new(b: usize, coeffs: Vec<f64>, mode: ClassMode) -> Result<Self> {
        if coeffs.len() != 2 * b + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * b + 1,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("multiplier coefficients must be finite".into()));
        }
        if coeffs[b] < 0.0 {
            return Err(Error::InvalidInput("m_0 must be nonnegative".into()));
        }
        if coeffs.iter().enumerate().any(|(i, &c)| i != b && c > 0.0) {
            return Err(Error::InvalidInput("off-centre coefficients must be nonpositive".into()));
        }
        let sum: f64 = coeffs.iter().sum();
        match mode {
            ClassMode::Hyperdominant if sum < -CLASS_TOL => Err(Error::NotHyperdominant),
            ClassMode::ZeroExcess if sum.abs() > CLASS_TOL => Err(Error::NotZeroExcess),
            _ => Ok(FirMultiplier { b, coeffs, mode }),
        }
    }

    /// `M = I`.
    pub fn identity() -> Self {
        FirMultiplier {
            b: 0,
            coeffs: vec![1.0],
            mode: ClassMode::Hyperdominant,
        }
    }

    pub fn zero(b: usize) -> Self {
        FirMultiplier {
            b,
            coeffs: vec![0.0; 2 * b + 1],
            mode: ClassMode::ZeroExcess,
        }
    }

    pub fn mode(&self) -> ClassMode {
        self.mode
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `m_k`, zero outside the band.
    pub fn coeff(&self, k: i64) -> f64 {
        if k.unsigned_abs() as usize > self.b {
            0.0
        } else {
            self.coeffs[(k + self.b as i64) as usize]
        }
    }

    fn taps(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let b = self.b as i64;
        (-b..=b).zip(self.coeffs.iter().copied())
    }

    /// `sum_k m_k e^{-j omega k}`.
    pub fn frequency_response(&self, omega: f64) -> Complex64 {
        self.taps()
            .map(|(k, m)| m * Complex64::from_polar(1.0, -omega * k as f64))
            .sum()
    }

    /// `(sum |k m_k|, sum |m_k|)`: bounds on `|M'|` and `|M|` over the circle.
    pub fn response_bounds(&self) -> (f64, f64) {
        self.taps().fold((0.0, 0.0), |(d, s), (k, m)| {
            (d + (k as f64 * m).abs(), s + m.abs())
        })
    }
}

impl BandedOperator for FirMultiplier {
    fn bandwidth(&self) -> usize {
        self.b
    }

    fn entry(&self, i: i64, j: i64) -> f64 {
        self.coeff(i - j)
    }
}

/// Uniform frequency grid `omega_i = 2 pi i / N` on `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub points: usize,
    /// Required margin: the inequality is `Re{M G} <= -margin`.
    pub margin: f64,
}

pub const DEFAULT_MARGIN: f64 = 1e-6;

impl FrequencyGrid {
    pub fn new(points: usize, margin: f64) -> Self {
        FrequencyGrid { points, margin }
    }

    /// `max(512, 16 B)` points at the default margin.
    pub fn default_for(b: usize) -> Self {
        FrequencyGrid {
            points: 512.max(16 * b),
            margin: DEFAULT_MARGIN,
        }
    }

    pub fn check(&self, b: usize) -> Result<()> {
        if self.points < 4 * b + 4 {
            return Err(Error::InvalidInput(format!(
                "frequency grid of {} points is too coarse for bandwidth {b}; need at least {}",
                self.points,
                4 * b + 4
            )));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidInput("frequency margin must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.points as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn omegas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.omega(i))
    }
}
