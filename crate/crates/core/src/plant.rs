//! Causal LTI plants given as rational transfer functions in the delay variable.
//!
//! `G(z) = (b0 + b1 z^-1 + ... + bm z^-m) / (a0 + a1 z^-1 + ... + an z^-n)`.
//!
//! The loop convention used throughout the crate is `v = G w + e`, `w = phi(v)`
//! (positive feedback). A negative-feedback plant is obtained by negating `num`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::signals::Signal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlant")]
pub struct RationalPlant {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPlant {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawPlant> for RationalPlant {
    type Error = Error;

    fn try_from(raw: RawPlant) -> Result<Self> {
        RationalPlant::new(raw.num, raw.den)
    }
}

/// Grid size for the winding-number stability test.
pub const WINDING_GRID: usize = 1 << 14;
const WINDING_FLOOR: f64 = 1e-10;
const MAX_REFINE_DEPTH: u32 = 24;

impl RationalPlant {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.is_empty() || den[0] == 0.0 {
            return Err(Error::InvalidInput(
                "leading denominator coefficient must be nonzero".into(),
            ));
        }
        if num.is_empty() {
            return Err(Error::InvalidInput("numerator must not be empty".into()));
        }
        if num.iter().chain(&den).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("plant coefficients must be finite".into()));
        }
        Ok(RationalPlant { num, den })
    }

    /// `G = g` (memoryless gain).
    pub fn static_gain(g: f64) -> Self {
        RationalPlant {
            num: vec![g],
            den: vec![1.0],
        }
    }

    /// `G = g / (1 - p z^-1)`.
    pub fn first_order(g: f64, pole: f64) -> Self {
        RationalPlant {
            num: vec![g],
            den: vec![1.0, -pole],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// `g0 = b0 / a0`, the direct feedthrough.
    pub fn feedthrough(&self) -> f64 {
        self.num[0] / self.den[0]
    }

    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        let b = poly_in_delay(&self.num, omega);
        let a = poly_in_delay(&self.den, omega);
        if a.norm() < 1e-12 {
            return Err(Error::Domain { omega });
        }
        Ok(b / a)
    }

    /// First `n` impulse-response coefficients by long division.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let a0 = self.den[0];
        let mut g = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = self.num.get(k).copied().unwrap_or(0.0);
            for (i, &ai) in self.den.iter().enumerate().skip(1).take(k) {
                acc -= ai * g[k - i];
            }
            g.push(acc / a0);
        }
        g
    }

    /// Argument-principle test: the winding of `a(e^jw)` around the origin
    /// must equal the full denominator degree.
    pub fn is_stable(&self) -> Result<bool> {
        let degree = self.den.len() - 1;
        if degree == 0 {
            return Ok(true);
        }
        let eval = |omega: f64| -> Result<Complex64> {
            let z = Complex64::from_polar(1.0, omega);
            let a = self.den.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
            if a.norm() < WINDING_FLOOR {
                return Err(Error::InconclusiveWinding {
                    omega,
                    magnitude: a.norm(),
                });
            }
            Ok(a)
        };

        let step = 2.0 * PI / WINDING_GRID as f64;
        let mut total = 0.0;
        let mut prev = eval(0.0)?;
        for k in 1..=WINDING_GRID {
            let omega = k as f64 * step;
            let next = eval(omega)?;
            total += refined_phase_step(&eval, omega - step, prev, omega, next, 0)?;
            prev = next;
        }
        let winding = (total / (2.0 * PI)).round() as i64;
        Ok(winding == degree as i64)
    }

    pub fn ensure_stable(&self) -> Result<()> {
        if self.is_stable()? {
            Ok(())
        } else {
            Err(Error::UnstablePlant)
        }
    }

    pub fn toeplitz_truncation(&self, horizon: usize) -> ToeplitzTruncation {
        ToeplitzTruncation {
            coeffs: self.impulse_response(horizon),
        }
    }

    /// Causal filtering of a signal supported on the nonnegative integers,
    /// returning samples `0..horizon`.
    pub fn apply(&self, u: &Signal, horizon: usize) -> Result<Signal> {
        if !u.is_zero() && u.start() < 0 {
            return Err(Error::InvalidInput(
                "plant input must be supported on nonnegative indices".into(),
            ));
        }
        let input = u.window(0, horizon as i64);
        Ok(Signal::from_samples(self.filter(&input)))
    }

    /// Difference-equation recursion on a dense input starting at index 0.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let a0 = self.den[0];
        let mut y = vec![0.0; input.len()];
        for k in 0..input.len() {
            let mut acc = 0.0;
            for (i, &bi) in self.num.iter().enumerate().take(k + 1) {
                acc += bi * input[k - i];
            }
            for (i, &ai) in self.den.iter().enumerate().skip(1).take(k) {
                acc -= ai * y[k - i];
            }
            y[k] = acc / a0;
        }
        y
    }

    /// Bounds `(sum |g_k|, sum k |g_k|)` on `sup |G|` and `sup |G'|` over the
    /// unit circle, from the impulse response summed until the tail is negligible.
    pub fn response_bounds(&self) -> Result<(f64, f64)> {
        self.ensure_stable()?;
        const CHUNK: usize = 256;
        const MAX_LEN: usize = 1 << 20;
        let mut len = CHUNK * 4;
        loop {
            let g = self.impulse_response(len);
            let l1: f64 = g.iter().map(|x| x.abs()).sum();
            let tail = g[len - CHUNK..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if tail <= 1e-16 * (1.0 + l1) || len >= MAX_LEN {
                let d1: f64 = g.iter().enumerate().map(|(k, x)| k as f64 * x.abs()).sum();
                return Ok((l1, d1));
            }
            len *= 2;
        }
    }
}

fn poly_in_delay(coeffs: &[f64], omega: f64) -> Complex64 {
    let zinv = Complex64::from_polar(1.0, -omega);
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zinv + c)
}

/// Phase increment between two samples, bisecting the interval while the
/// increment is too large to be unambiguous.
fn refined_phase_step<F>(
    eval: &F,
    w0: f64,
    a0: Complex64,
    w1: f64,
    a1: Complex64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let step = (a1 / a0).arg();
    if step.abs() <= PI / 4.0 || depth >= MAX_REFINE_DEPTH {
        return Ok(step);
    }
    let wm = 0.5 * (w0 + w1);
    let am = eval(wm)?;
    Ok(refined_phase_step(eval, w0, a0, wm, am, depth + 1)?
        + refined_phase_step(eval, wm, am, w1, a1, depth + 1)?)
}

/// Lower-triangular Toeplitz window of a causal plant: entry `(i, j)` is
/// `g_{i-j}` for `i >= j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzTruncation {
    coeffs: Vec<f64>,
}

impl ToeplitzTruncation {
    pub fn horizon(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.coeffs[i - j]
        } else {
            0.0
        }
    }

    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.horizon(), |i, j| self.entry(i, j))
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let h = self.horizon();
        (0..h)
            .map(|i| (0..=i).map(|j| self.coeffs[i - j] * u.get(j).copied().unwrap_or(0.0)).sum())
            .collect()
    }
}
