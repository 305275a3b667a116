//! Memoryless monotone nonlinearities, sector-bounded time-varying
//! nonlinearities, and the monotone interpolation of similarly ordered pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{is_similarly_ordered, truncate_window, SequencePair, Signal};

/// A continuous piecewise-linear map of the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewiseLinear {
    breakpoints: Vec<(f64, f64)>,
    left_slope: f64,
    right_slope: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiecewise {
    breakpoints: Vec<(f64, f64)>,
    #[serde(default)]
    left_slope: f64,
    #[serde(default)]
    right_slope: f64,
}

impl TryFrom<RawPiecewise> for PiecewiseLinear {
    type Error = Error;

    fn try_from(raw: RawPiecewise) -> Result<Self> {
        PiecewiseLinear::new(raw.breakpoints, raw.left_slope, raw.right_slope)
    }
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<(f64, f64)>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::InvalidInput("at least one breakpoint is required".into()));
        }
        let finite = breakpoints.iter().all(|(x, y)| x.is_finite() && y.is_finite())
            && left_slope.is_finite()
            && right_slope.is_finite();
        if !finite {
            return Err(Error::InvalidInput("breakpoints and slopes must be finite".into()));
        }
        if breakpoints.windows(2).any(|p| p[0].0 >= p[1].0) {
            return Err(Error::InvalidInput(
                "breakpoint abscissae must be strictly increasing".into(),
            ));
        }
        Ok(PiecewiseLinear {
            breakpoints,
            left_slope,
            right_slope,
        })
    }

    /// `x -> slope * x`.
    pub fn linear(slope: f64) -> Self {
        PiecewiseLinear {
            breakpoints: vec![(0.0, 0.0)],
            left_slope: slope,
            right_slope: slope,
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.right_slope
    }

    /// Exact at breakpoints, linear in between, extension slopes outside.
    pub fn evaluate(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        let idx = bp.partition_point(|p| p.0 < x);
        if idx < bp.len() && bp[idx].0 == x {
            return bp[idx].1;
        }
        if idx == 0 {
            let (x0, y0) = bp[0];
            return y0 + self.left_slope * (x - x0);
        }
        if idx == bp.len() {
            let (xn, yn) = bp[bp.len() - 1];
            return yn + self.right_slope * (x - xn);
        }
        let (x0, y0) = bp[idx - 1];
        let (x1, y1) = bp[idx];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn segment_slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints
            .windows(2)
            .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
            .chain([self.left_slope, self.right_slope])
    }

    /// Lipschitz constant.
    pub fn max_slope(&self) -> f64 {
        self.segment_slopes().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Smallest `C` with `|f(x)| <= C |x|`, for maps through the origin.
    pub fn sector_bound(&self) -> f64 {
        self.breakpoints
            .iter()
            .filter(|p| p.0 != 0.0)
            .map(|&(x, y)| (y / x).abs())
            .chain([self.left_slope.abs(), self.right_slope.abs()])
            .fold(0.0, f64::max)
    }
}

/// Monotone nondecreasing piecewise-linear map through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseLinear", into = "PiecewiseLinear")]
pub struct PiecewiseLinearMonotone(PiecewiseLinear);

impl TryFrom<PiecewiseLinear> for PiecewiseLinearMonotone {
    type Error = Error;

    fn try_from(f: PiecewiseLinear) -> Result<Self> {
        if !f.breakpoints.contains(&(0.0, 0.0)) {
            return Err(Error::InvalidInput("monotone map must pass through (0, 0)".into()));
        }
        if f.breakpoints.windows(2).any(|p| p[1].1 < p[0].1) {
            return Err(Error::InvalidInput("breakpoint ordinates must be nondecreasing".into()));
        }
        if f.left_slope < 0.0 || f.right_slope < 0.0 {
            return Err(Error::InvalidInput("extension slopes must be nonnegative".into()));
        }
        Ok(PiecewiseLinearMonotone(f))
    }
}

impl From<PiecewiseLinearMonotone> for PiecewiseLinear {
    fn from(n: PiecewiseLinearMonotone) -> Self {
        n.0
    }
}

impl PiecewiseLinearMonotone {
    /// Breakpoints must include `(0, 0)`; extension slopes default to zero.
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_slopes(breakpoints, 0.0, 0.0)
    }

    pub fn with_slopes(breakpoints: Vec<(f64, f64)>, left_slope: f64, right_slope: f64) -> Result<Self> {
        PiecewiseLinear::new(breakpoints, left_slope, right_slope)?.try_into()
    }

    pub fn linear(slope: f64) -> Result<Self> {
        PiecewiseLinear::linear(slope).try_into()
    }

    pub fn as_piecewise(&self) -> &PiecewiseLinear {
        &self.0
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        self.0.breakpoints()
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.0.evaluate(x)
    }

    pub fn max_slope(&self) -> f64 {
        self.0.max_slope()
    }

    pub fn sector_bound(&self) -> f64 {
        self.0.sector_bound()
    }

    /// Samplewise application.
    pub fn lift(&self, v: &Signal) -> Signal {
        v.map(|_, x| self.evaluate(x))
    }
}

/// `psi(x, k)` with `psi(x, k) x >= 0`, periodic in `k` (or time-invariant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSector")]
pub struct SectorNonlinearity {
    period: Option<usize>,
    phases: Vec<PiecewiseLinear>,
    lipschitz: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSector {
    #[serde(default)]
    period: Option<usize>,
    phases: Vec<PiecewiseLinear>,
    #[serde(default)]
    lipschitz: Option<f64>,
}

impl TryFrom<RawSector> for SectorNonlinearity {
    type Error = Error;

    fn try_from(raw: RawSector) -> Result<Self> {
        SectorNonlinearity::new(raw.period, raw.phases, raw.lipschitz)
    }
}

impl SectorNonlinearity {
    /// `period = None` means time-invariant and requires exactly one phase.
    /// The Lipschitz constant defaults to the largest phase slope.
    pub fn new(period: Option<usize>, phases: Vec<PiecewiseLinear>, lipschitz: Option<f64>) -> Result<Self> {
        let expected = period.unwrap_or(1);
        if expected == 0 || phases.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: phases.len(),
            });
        }
        for f in &phases {
            let signs_ok = f.breakpoints.iter().all(|&(x, y)| x * y >= 0.0);
            if !signs_ok || f.evaluate(0.0) != 0.0 || f.left_slope < 0.0 || f.right_slope < 0.0 {
                return Err(Error::InvalidInput("phase map leaves the sector psi(x) x >= 0".into()));
            }
        }
        let measured = phases.iter().map(PiecewiseLinear::max_slope).fold(0.0, f64::max);
        let lipschitz = lipschitz.unwrap_or(measured);
        if measured > lipschitz * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "phase slope {measured} exceeds the Lipschitz constant {lipschitz}"
            )));
        }
        Ok(SectorNonlinearity {
            period,
            phases,
            lipschitz,
        })
    }

    pub fn period(&self) -> Option<usize> {
        self.period
    }

    pub fn phases(&self) -> &[PiecewiseLinear] {
        &self.phases
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn phase(&self, k: i64) -> &PiecewiseLinear {
        match self.period {
            Some(p) => &self.phases[k.rem_euclid(p as i64) as usize],
            None => &self.phases[0],
        }
    }

    pub fn evaluate(&self, x: f64, k: i64) -> f64 {
        self.phase(k).evaluate(x)
    }

    pub fn lift(&self, v: &Signal) -> Signal {
        v.map(|k, x| self.evaluate(x, k))
    }
}

/// Output of [`interpolate_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolation {
    pub nonlinearity: PiecewiseLinearMonotone,
    /// Truncated input pair.
    pub v_bar: Signal,
    pub w_bar: Signal,
    /// Perturbed input with `w_hat = N(v_hat)` exactly.
    pub v_hat: Signal,
    pub w_hat: Signal,
    /// `||v - v_bar||` plus `||w - w_bar||`.
    pub truncation_error: f64,
    /// `||v_bar - v_hat||`.
    pub perturbation: f64,
    /// `delta * ||w_bar||`, an upper bound on the perturbation.
    pub bound: f64,
    /// Steps strictly below this keep the perturbed abscissae separated.
    pub max_delta: f64,
}

/// One group of indices sharing a value of `v_bar`.
struct Group {
    value: f64,
    w_min: f64,
    w_max: f64,
}

impl Group {
    /// How far the perturbed abscissae can reach above and below `value`, per unit step.
    fn reach(&self) -> (f64, f64) {
        if self.value > 0.0 {
            (self.w_max - self.w_min, 0.0)
        } else if self.value < 0.0 {
            (0.0, self.w_max - self.w_min)
        } else {
            (self.w_max.max(0.0), -self.w_min.min(0.0))
        }
    }

    fn perturb(&self, w: f64, delta: f64) -> f64 {
        if self.value > 0.0 {
            self.value + delta * (w - self.w_min)
        } else if self.value < 0.0 {
            self.value + delta * (w - self.w_max)
        } else {
            delta * w
        }
    }
}

/// Builds a monotone map through the origin whose graph contains every
/// perturbed sample `(v_hat_k, w_k)` of a similarly ordered pair truncated to
/// `[-tau, tau]`. Repeated values of `v` are spread along lines of slope
/// `1/delta`, anchored at the end of each group nearest the origin in `w`.
pub fn interpolate_monotone(p: &SequencePair, delta: f64, tau: i64) -> Result<Interpolation> {
    if !is_similarly_ordered(p) {
        return Err(Error::NotSimilarlyOrdered);
    }
    if !(delta > 0.0 && delta.is_finite()) || tau < 0 {
        return Err(Error::InvalidInput("delta must be positive and tau nonnegative".into()));
    }
    let v_bar = truncate_window(&p.v, -tau, tau);
    let w_bar = truncate_window(&p.w, -tau, tau);
    let truncation_error = p.v.sub(&v_bar).norm() + p.w.sub(&w_bar).norm();
    let bar = SequencePair::new(v_bar.clone(), w_bar.clone());
    let (lo, hi) = bar.support();
    let samples: Vec<(i64, f64, f64)> = (lo..hi).map(|k| (k, v_bar.get(k) + 0.0, w_bar.get(k))).collect();

    let mut groups: Vec<Group> = Vec::new();
    let mut values: Vec<f64> = samples.iter().map(|s| s.1).chain([0.0]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    for value in values {
        // the zero group always contains the origin
        let init = if value == 0.0 {
            (0.0, 0.0)
        } else {
            (f64::INFINITY, f64::NEG_INFINITY)
        };
        let (w_min, w_max) = samples
            .iter()
            .filter(|s| s.1 == value)
            .fold(init, |(a, b), s| (a.min(s.2), b.max(s.2)));
        groups.push(Group { value, w_min, w_max });
    }

    let max_delta = groups
        .windows(2)
        .map(|g| {
            let reach = g[0].reach().0 + g[1].reach().1;
            if reach > 0.0 {
                (g[1].value - g[0].value) / reach
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    if delta >= max_delta {
        return Err(Error::DeltaTooLarge { delta, max_delta });
    }

    let group_of = |value: f64| {
        groups
            .iter()
            .find(|g| g.value == value)
            .expect("every sample value has a group")
    };
    let v_hat_values: Vec<f64> = samples.iter().map(|&(_, v, w)| group_of(v).perturb(w, delta)).collect();

    let mut points: Vec<(f64, f64)> = v_hat_values
        .iter()
        .zip(&samples)
        .map(|(&x, s)| (x, s.2))
        .chain([(0.0, 0.0)])
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    if points.windows(2).any(|p| p[0].0 == p[1].0) {
        return Err(Error::DeltaTooLarge { delta, max_delta });
    }
    let nonlinearity = PiecewiseLinearMonotone::new(points)?;

    let v_hat = Signal::new(lo, v_hat_values);
    let w_hat = nonlinearity.lift(&v_hat);
    Ok(Interpolation {
        perturbation: v_bar.sub(&v_hat).norm(),
        bound: delta * w_bar.norm(),
        nonlinearity,
        v_bar,
        w_bar,
        v_hat,
        w_hat,
        truncation_error,
        max_delta,
    })
}

/// Shape of randomly generated nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomConfig {
    /// Breakpoints on each side of the origin.
    pub breakpoints: usize,
    /// Upper bound on every segment slope.
    pub slope_cap: f64,
    /// Breakpoints lie in `[-x_range, x_range]`.
    pub x_range: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            breakpoints: 4,
            slope_cap: 2.0,
            x_range: 5.0,
        }
    }
}

fn sorted_abscissae(rng: &mut ChaCha8Rng, config: &RandomConfig) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..config.breakpoints)
        .map(|_| rng.random_range(1e-3..=1.0) * config.x_range)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Deterministic in `seed`; slopes lie in `[0, slope_cap]`, extensions are flat.
pub fn random_monotone(seed: u64, config: &RandomConfig) -> PiecewiseLinearMonotone {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = |rng: &mut ChaCha8Rng| {
        let mut prev = (0.0, 0.0);
        sorted_abscissae(rng, config)
            .into_iter()
            .map(|x| {
                let y = prev.1 + rng.random_range(0.0..=config.slope_cap) * (x - prev.0);
                prev = (x, y);
                (x, y)
            })
            .collect::<Vec<_>>()
    };
    let right = side(&mut rng);
    let left = side(&mut rng);
    let mut points: Vec<(f64, f64)> = left.into_iter().rev().map(|(x, y)| (-x, -y)).collect();
    points.push((0.0, 0.0));
    points.extend(right);
    PiecewiseLinearMonotone::new(points).expect("generated breakpoints are monotone through the origin")
}

/// Deterministic in `seed`; each phase is Lipschitz with constant `slope_cap`.
pub fn random_sector(seed: u64, period: Option<usize>, config: &RandomConfig) -> SectorNonlinearity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = config.slope_cap;
    let phases = (0..period.unwrap_or(1))
        .map(|_| {
            let side = |rng: &mut ChaCha8Rng| {
                let mut prev = (0.0, 0.0);
                sorted_abscissae(rng, config)
                    .into_iter()
                    .map(|x| {
                        let y = (prev.1 + rng.random_range(-cap..=cap) * (x - prev.0)).max(0.0);
                        prev = (x, y);
                        (x, y)
                    })
                    .collect::<Vec<_>>()
            };
            let right = side(&mut rng);
            let left = side(&mut rng);
            let mut points: Vec<(f64, f64)> = left.into_iter().rev().map(|(x, y)| (-x, -y)).collect();
            points.push((0.0, 0.0));
            points.extend(right);
            PiecewiseLinear::new(points, 0.0, 0.0).expect("abscissae are strictly increasing")
        })
        .collect();
    SectorNonlinearity::new(period, phases, Some(cap)).expect("generated phases respect the sector")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{is_unbiased, shift};
    use rand::Rng;
    use proptest::prelude::*;

    fn pair(v: &[f64], w: &[f64]) -> SequencePair {
        SequencePair::new(Signal::new(0, v.to_vec()), Signal::new(0, w.to_vec()))
    }

    #[test]
    fn evaluate_examples() {
        let n = PiecewiseLinearMonotone::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(n.evaluate(0.5), 0.5);
        assert_eq!(n.evaluate(0.0), 0.0);
        assert_eq!(n.evaluate(3.0), 1.0);
        let n = PiecewiseLinearMonotone::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)]).unwrap();
        assert_eq!(n.evaluate(1.5), 2.5);
    }

    #[test]
    fn lift_examples() {
        let v = Signal::from_samples(vec![1.0, -1.0]);
        assert_eq!(PiecewiseLinearMonotone::linear(1.0).unwrap().lift(&v), v);
        assert!(PiecewiseLinearMonotone::linear(0.0).unwrap().lift(&v).is_zero());
        assert_eq!(
            PiecewiseLinearMonotone::linear(2.0).unwrap().lift(&v),
            Signal::from_samples(vec![2.0, -2.0])
        );
    }

    #[test]
    fn monotone_invariants_enforced() {
        assert!(PiecewiseLinearMonotone::new(vec![(1.0, 1.0)]).is_err());
        assert!(PiecewiseLinearMonotone::new(vec![(0.0, 0.0), (1.0, -1.0)]).is_err());
        assert!(PiecewiseLinearMonotone::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(PiecewiseLinearMonotone::with_slopes(vec![(0.0, 0.0)], -1.0, 0.0).is_err());
        let json = r#"{"breakpoints":[[0,0],[1,2]],"right_slope":0.5}"#;
        let n: PiecewiseLinearMonotone = serde_json::from_str(json).unwrap();
        assert_eq!(n.evaluate(3.0), 3.0);
        assert!(serde_json::from_str::<PiecewiseLinearMonotone>(r#"{"breakpoints":[[1,1]]}"#).is_err());
    }

    #[test]
    fn slope_bounds() {
        let n = PiecewiseLinearMonotone::with_slopes(vec![(-1.0, -3.0), (0.0, 0.0), (2.0, 1.0)], 0.5, 0.0)
            .unwrap();
        assert_eq!(n.max_slope(), 3.0);
        assert_eq!(n.sector_bound(), 3.0);
    }

    #[test]
    fn interpolation_examples() {
        let out = interpolate_monotone(&pair(&[1.0, 2.0], &[1.0, 4.0]), 1e-3, 10).unwrap();
        assert_eq!(out.nonlinearity.breakpoints(), &[(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)]);
        assert_eq!(out.v_hat, Signal::from_samples(vec![1.0, 2.0]));
        assert_eq!(out.w_hat, Signal::from_samples(vec![1.0, 4.0]));

        let out = interpolate_monotone(&pair(&[1.0, 1.0], &[1.0, 2.0]), 0.01, 10).unwrap();
        assert_eq!(out.v_hat, Signal::from_samples(vec![1.0, 1.01]));
        assert_eq!(out.nonlinearity.breakpoints(), &[(0.0, 0.0), (1.0, 1.0), (1.01, 2.0)]);
        assert_eq!(out.w_hat, out.w_bar);

        let out = interpolate_monotone(&pair(&[0.0], &[3.0]), 0.1, 10).unwrap();
        assert!((out.v_hat.get(0) - 0.3).abs() < 1e-15);
        assert_eq!(out.nonlinearity.breakpoints().len(), 2);
        assert_eq!(out.w_hat, Signal::from_samples(vec![3.0]));
    }

    #[test]
    fn interpolation_errors() {
        assert_eq!(
            interpolate_monotone(&pair(&[1.0, 2.0], &[4.0, 1.0]), 0.01, 10).unwrap_err(),
            Error::NotSimilarlyOrdered
        );
        // groups at 1 and 1.1 with a w-spread of 1 each cannot take delta = 0.5
        let p = pair(&[1.0, 1.0, 1.1, 1.1], &[1.0, 2.0, 2.0, 3.0]);
        assert!(matches!(interpolate_monotone(&p, 0.5, 10), Err(Error::DeltaTooLarge { .. })));
        assert!(interpolate_monotone(&p, 0.05, 10).is_ok());
    }

    #[test]
    fn negative_group_anchored_at_largest_w() {
        let p = pair(&[-1.0, 0.0, 0.0, 0.0], &[-1.0, 0.0, 0.0, 0.0]);
        let out = interpolate_monotone(&p, 0.1, 10).unwrap();
        assert!(out.perturbation <= out.bound + 1e-15);
        let p = pair(&[-2.0, -2.0, -2.0], &[-3.0, -1.0, 0.0]);
        let out = interpolate_monotone(&p, 0.1, 10).unwrap();
        assert_eq!(out.v_hat.get(2), -2.0);
        assert!(out.perturbation <= out.bound + 1e-15);
        assert_eq!(out.w_hat, out.w_bar);
    }

    #[test]
    fn truncation_window() {
        let p = SequencePair::new(Signal::new(-3, vec![1.0, 2.0, 3.0]), Signal::new(-3, vec![1.0, 2.0, 3.0]));
        let out = interpolate_monotone(&p, 1e-3, 2).unwrap();
        assert_eq!(out.v_bar, Signal::new(-2, vec![2.0, 3.0]));
        assert_eq!(out.truncation_error, 2.0);
    }

    #[test]
    fn sector_examples() {
        let relu = SectorNonlinearity::new(
            None,
            vec![PiecewiseLinear::new(vec![(0.0, 0.0)], 0.0, 1.0).unwrap()],
            None,
        )
        .unwrap();
        assert_eq!(relu.evaluate(0.0, 7), 0.0);
        assert_eq!(relu.evaluate(-2.0, 5), 0.0);
        let alternating = SectorNonlinearity::new(
            Some(2),
            vec![PiecewiseLinear::linear(0.0), PiecewiseLinear::linear(1.0)],
            None,
        )
        .unwrap();
        assert_eq!(alternating.evaluate(2.0, 3), 2.0);
        assert_eq!(alternating.evaluate(2.0, -2), 0.0);
        assert!(SectorNonlinearity::new(None, vec![PiecewiseLinear::linear(-1.0)], None).is_err());
        assert!(SectorNonlinearity::new(Some(2), vec![PiecewiseLinear::linear(1.0)], None).is_err());
        let json = r#"{"period":2,"phases":[{"breakpoints":[[0,0]]},{"breakpoints":[[0,0]],"left_slope":1,"right_slope":1}]}"#;
        let psi: SectorNonlinearity = serde_json::from_str(json).unwrap();
        assert_eq!(psi, alternating);
    }

    #[test]
    fn random_generators_are_deterministic() {
        let cfg = RandomConfig::default();
        assert_eq!(random_monotone(3, &cfg), random_monotone(3, &cfg));
        assert_ne!(random_monotone(3, &cfg), random_monotone(4, &cfg));
        assert_eq!(random_sector(3, Some(3), &cfg), random_sector(3, Some(3), &cfg));
    }

    #[test]
    fn sector_probes_respect_the_sign_condition() {
        let cfg = RandomConfig { breakpoints: 6, slope_cap: 3.0, x_range: 4.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..20 {
            let psi = random_sector(seed, Some(4), &cfg);
            for _ in 0..10_000 {
                let x = rng.random_range(-6.0..6.0);
                let k = rng.random_range(-50i64..50);
                assert!(psi.evaluate(x, k) * x >= 0.0);
            }
        }
    }

    /// Integer-valued similarly ordered pairs with unit gaps in `v`, so small steps are admissible.
    fn ordered_pair() -> impl Strategy<Value = SequencePair> {
        (prop::collection::vec((-4i32..=4, -2i32..=2), 1..8), -3i64..3).prop_map(|(raw, start)| {
            let vals: Vec<f64> = raw.iter().map(|r| f64::from(r.0)).collect();
            // monotone image of v plus a jitter that stays inside each level
            let w: Vec<f64> = raw
                .iter()
                .zip(&vals)
                .map(|(r, &v)| {
                    let jitter = f64::from(r.1) * 0.1;
                    if v > 0.0 {
                        v * 0.4 + jitter.abs()
                    } else if v < 0.0 {
                        v * 0.4 - jitter.abs()
                    } else {
                        jitter
                    }
                })
                .collect();
            SequencePair::new(Signal::new(start, vals), Signal::new(start, w))
        })
    }

    proptest! {
        #[test]
        fn generated_pairs_are_similarly_ordered_and_unbiased(
            seed in 0u64..1000,
            v in prop::collection::vec(-6.0f64..6.0, 0..10),
        ) {
            let n = random_monotone(seed, &RandomConfig::default());
            let v = Signal::new(0, v);
            let p = SequencePair::new(v.clone(), n.lift(&v));
            prop_assert!(is_similarly_ordered(&p));
            prop_assert!(is_unbiased(&p));
        }

        #[test]
        fn random_slope_cap_respected(seed in 0u64..1000, cap in 0.1f64..5.0) {
            let cfg = RandomConfig { slope_cap: cap, ..RandomConfig::default() };
            prop_assert!(random_monotone(seed, &cfg).max_slope() <= cap * (1.0 + 1e-12));
        }

        #[test]
        fn lift_commutes_with_shift(
            seed in 0u64..100,
            v in prop::collection::vec(-6.0f64..6.0, 0..8),
            tau in -5i64..5,
        ) {
            let n = random_monotone(seed, &RandomConfig::default());
            let v = Signal::new(0, v);
            prop_assert_eq!(n.lift(&shift(&v, tau)), shift(&n.lift(&v), tau));
        }

        #[test]
        fn interpolation_is_exact_and_converges(p in ordered_pair()) {
            prop_assume!(is_similarly_ordered(&p));
            let mut last = f64::INFINITY;
            for delta in [1e-1, 1e-2, 1e-3] {
                let out = interpolate_monotone(&p, delta, 10).unwrap();
                prop_assert_eq!(&out.w_hat, &out.w_bar);
                prop_assert!(out.perturbation <= out.bound * (1.0 + 1e-12) + 1e-15);
                prop_assert!(out.perturbation <= last);
                last = out.perturbation;
            }
        }
    }
}
