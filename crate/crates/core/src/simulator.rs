//! Time-domain simulation of the loop `v = G w + e`, `w = N(v)`, finite-horizon
//! gain estimates and a randomized search for destabilizing nonlinearities.
//! Every gain reported here is a lower bound on the true loop gain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{random_monotone, PiecewiseLinearMonotone, RandomConfig};
use crate::plant::RationalPlant;
use crate::signals::Signal;

/// Denominator of the gain trace below which `P_tau e` counts as zero.
pub const GAIN_FLOOR: f64 = 1e-12;
const MAX_BISECTION: usize = 200;
const DIVERGENCE_FACTOR: f64 = 1e9;
const DIVERGENCE_GAIN: f64 = 1e6;

/// How a nonzero direct feedthrough `g_0` is handled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedthroughPolicy {
    /// Solve `v - g_0 N(v) = c` at each step.
    #[default]
    Solve,
    /// Refuse plants with `g_0 != 0`.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub plant: RationalPlant,
    pub nonlinearity: PiecewiseLinearMonotone,
    pub input: Signal,
    pub horizon: usize,
    #[serde(default)]
    pub feedthrough: FeedthroughPolicy,
    /// Probe mode: simulate unstable plants and flag divergence.
    #[serde(default)]
    pub allow_unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// `e` on `0..H`.
    pub e: Vec<f64>,
    /// `v` on `0..H`, shorter only if the run diverged.
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `||P_tau w|| / ||P_tau e||`, `None` where `P_tau e` vanishes.
    pub gain_trace: Vec<Option<f64>>,
    pub peak_gain: f64,
    pub diverged: bool,
}

/// Checks that `v - g_0 N(v)` is strictly increasing so each step has a unique root.
fn check_well_posed(g0: f64, n: &PiecewiseLinearMonotone) -> Result<()> {
    let slope = n.max_slope();
    if g0 > 0.0 && g0 * slope >= 1.0 {
        return Err(Error::WellPosednessUnverifiable { g0, slope });
    }
    Ok(())
}

/// `(x0, y0, slope)` of the linear piece of `n` active at `x`.
fn local_piece(n: &PiecewiseLinearMonotone, x: f64) -> (f64, f64, f64) {
    let pw = n.as_piecewise();
    let bp = n.breakpoints();
    let idx = bp.partition_point(|p| p.0 <= x);
    if idx == 0 {
        (bp[0].0, bp[0].1, pw.left_slope())
    } else if idx == bp.len() {
        let (x0, y0) = bp[idx - 1];
        (x0, y0, pw.right_slope())
    } else {
        let (x0, y0) = bp[idx - 1];
        let (x1, y1) = bp[idx];
        (x0, y0, (y1 - y0) / (x1 - x0))
    }
}

/// Unique root of `v - g0 N(v) = c`; the map is increasing by well-posedness.
fn solve_step(n: &PiecewiseLinearMonotone, g0: f64, c: f64, step: usize) -> Result<f64> {
    let f = |v: f64| v - g0 * n.evaluate(v) - c;
    let mut width = 1.0f64.max(c.abs());
    let (mut lo, mut hi) = (c - width, c + width);
    let mut bracketed = false;
    for _ in 0..MAX_BISECTION {
        if f(lo) <= 0.0 && f(hi) >= 0.0 {
            bracketed = true;
            break;
        }
        width *= 2.0;
        lo = c - width;
        hi = c + width;
    }
    if !bracketed {
        return Err(Error::BisectionFailure { step });
    }
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let approx = 0.5 * (lo + hi);
    // exact solve on the active linear piece
    let (x0, y0, s) = local_piece(n, approx);
    let denom = 1.0 - g0 * s;
    if denom.abs() > 1e-12 {
        let exact = (c + g0 * (y0 - s * x0)) / denom;
        let (a, b) = local_piece_bounds(n, approx);
        if exact >= a - 1e-12 && exact <= b + 1e-12 {
            return Ok(exact);
        }
    }
    Ok(approx)
}

fn local_piece_bounds(n: &PiecewiseLinearMonotone, x: f64) -> (f64, f64) {
    let bp = n.breakpoints();
    let idx = bp.partition_point(|p| p.0 <= x);
    let lo = if idx == 0 { f64::NEG_INFINITY } else { bp[idx - 1].0 };
    let hi = bp.get(idx).map_or(f64::INFINITY, |p| p.0);
    (lo, hi)
}

pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    let h = cfg.horizon;
    if h == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    if !cfg.input.is_zero() && cfg.input.start() < 0 {
        return Err(Error::InvalidInput("input must be supported on nonnegative indices".into()));
    }
    if !cfg.allow_unstable {
        cfg.plant.ensure_stable()?;
    }
    let g = &cfg.plant;
    let g0 = g.feedthrough();
    if g0 != 0.0 && cfg.feedthrough == FeedthroughPolicy::Reject {
        return Err(Error::InvalidInput("plant has direct feedthrough".into()));
    }
    check_well_posed(g0, &cfg.nonlinearity)?;

    let (num, den) = (g.num(), g.den());
    let a0 = den[0];
    let e = cfg.input.window(0, h as i64);
    let cap = DIVERGENCE_FACTOR * (1.0 + cfg.input.norm());
    let mut v = Vec::with_capacity(h);
    let mut w: Vec<f64> = Vec::with_capacity(h);
    // y = G w
    let mut y: Vec<f64> = Vec::with_capacity(h);
    let mut diverged = false;
    for k in 0..h {
        let mut past = 0.0;
        for (i, &bi) in num.iter().enumerate().skip(1).take(k) {
            past += bi * w[k - i];
        }
        for (i, &ai) in den.iter().enumerate().skip(1).take(k) {
            past -= ai * y[k - i];
        }
        let c = e[k] + past / a0;
        let vk = if g0 == 0.0 {
            c
        } else {
            solve_step(&cfg.nonlinearity, g0, c, k)?
        };
        let wk = cfg.nonlinearity.evaluate(vk);
        if !(vk.is_finite() && wk.is_finite()) || vk.abs() > cap || wk.abs() > cap {
            diverged = true;
            break;
        }
        v.push(vk);
        w.push(wk);
        y.push(vk - e[k]);
    }

    let mut gain_trace = Vec::with_capacity(v.len());
    let (mut ew, mut ww) = (0.0, 0.0);
    for (ek, wk) in e.iter().zip(&w) {
        ew += ek * ek;
        ww += wk * wk;
        gain_trace.push((ew.sqrt() > GAIN_FLOOR).then(|| (ww / ew).sqrt()));
    }
    let peak_gain = gain_trace.iter().flatten().copied().fold(0.0, f64::max);
    if gain_trace.last().copied().flatten().is_some_and(|g| g > DIVERGENCE_GAIN) {
        diverged = true;
    }
    Ok(SimResult {
        e,
        v,
        w,
        gain_trace,
        peak_gain,
        diverged,
    })
}

/// Seeded input family used for gain estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputFamily {
    /// Impulses at indices `0..impulses`.
    pub impulses: usize,
    /// Unit steps starting at 0.
    pub steps: bool,
    /// Random `+-1` bursts of random length.
    pub bursts: usize,
    /// Hann-windowed sinusoids at random frequencies.
    pub packets: usize,
    /// Every shape is tried at each amplitude.
    pub amplitudes: Vec<f64>,
    pub seed: u64,
}

impl Default for InputFamily {
    fn default() -> Self {
        InputFamily {
            impulses: 2,
            steps: true,
            bursts: 4,
            packets: 4,
            amplitudes: vec![0.1, 1.0, 10.0],
            seed: 0,
        }
    }
}

impl InputFamily {
    pub fn generate(&self, horizon: usize) -> Vec<Signal> {
        let h = horizon.max(1);
        let mut shapes: Vec<Vec<f64>> = Vec::new();
        for i in 0..self.impulses.min(h) {
            let mut e = vec![0.0; h];
            e[i] = 1.0;
            shapes.push(e);
        }
        if self.steps {
            shapes.push(vec![1.0; h]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.bursts {
            let len = rng.random_range(1..=h);
            let mut e = vec![0.0; h];
            for x in &mut e[..len] {
                *x = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            }
            shapes.push(e);
        }
        for _ in 0..self.packets {
            let omega = rng.random_range(0.0..std::f64::consts::PI);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            let e = (0..h)
                .map(|k| {
                    let hann = (std::f64::consts::PI * (k as f64 + 0.5) / h as f64).sin().powi(2);
                    hann * (omega * k as f64 + phase).cos()
                })
                .collect();
            shapes.push(e);
        }
        shapes
            .iter()
            .flat_map(|s| {
                self.amplitudes
                    .iter()
                    .map(move |&a| Signal::new(0, s.iter().map(|x| a * x).collect()))
            })
            .filter(|s| !s.is_zero())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    /// Largest peak gain over the family.
    pub gamma: f64,
    pub diverged: bool,
    /// Input attaining `gamma`.
    pub worst_input: Signal,
    pub inputs: usize,
}

/// Picks the larger `(value, index)`; ties go to the lower index.
fn argmax<T>(a: (f64, usize, T), b: (f64, usize, T)) -> (f64, usize, T) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Max of the peak gains over the input family; a lower bound on the loop gain.
pub fn estimate_gain(
    plant: &RationalPlant,
    n: &PiecewiseLinearMonotone,
    family: &InputFamily,
    horizon: usize,
    allow_unstable: bool,
) -> Result<GainEstimate> {
    let inputs = family.generate(horizon);
    let results: Vec<(f64, bool)> = inputs
        .par_iter()
        .map(|e| {
            let cfg = SimConfig {
                plant: plant.clone(),
                nonlinearity: n.clone(),
                input: e.clone(),
                horizon,
                feedthrough: FeedthroughPolicy::Solve,
                allow_unstable,
            };
            simulate(&cfg).map(|r| {
                let gamma = if r.diverged { f64::INFINITY } else { r.peak_gain };
                (gamma, r.diverged)
            })
        })
        .collect::<Result<_>>()?;
    let (gamma, index, _) = results
        .iter()
        .enumerate()
        .map(|(i, r)| (r.0, i, ()))
        .fold((f64::NEG_INFINITY, usize::MAX, ()), argmax);
    Ok(GainEstimate {
        gamma: gamma.max(0.0),
        diverged: results.iter().any(|r| r.1),
        worst_input: inputs.get(index).cloned().unwrap_or_default(),
        inputs: inputs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeFamily {
    pub nonlinearity: RandomConfig,
    pub inputs: InputFamily,
    pub horizon: usize,
    /// Coordinate-refinement sweeps over the incumbent's breakpoints.
    pub refinement_rounds: usize,
    pub seed: u64,
}

impl Default for ProbeFamily {
    fn default() -> Self {
        ProbeFamily {
            nonlinearity: RandomConfig::default(),
            inputs: InputFamily::default(),
            horizon: 64,
            refinement_rounds: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub worst_n: PiecewiseLinearMonotone,
    pub worst_e: Signal,
    pub gamma: f64,
    pub diverged: bool,
    /// Nonlinearities evaluated, including refinement moves.
    pub evaluations: usize,
    /// Candidates skipped because the loop was not provably well posed.
    pub skipped: usize,
}

/// Candidate score; ill-posed loops are skipped rather than failing the search.
fn score(plant: &RationalPlant, n: &PiecewiseLinearMonotone, family: &ProbeFamily) -> Option<GainEstimate> {
    estimate_gain(plant, n, &family.inputs, family.horizon, true).ok()
}

fn within_cap(points: &[(f64, f64)], cap: f64) -> bool {
    points
        .windows(2)
        .all(|p| (p[1].1 - p[0].1) <= cap * (p[1].0 - p[0].0) * (1.0 + 1e-12))
}

/// Randomized search over `random_monotone` nonlinearities followed by
/// coordinate refinement of the incumbent's breakpoint values. Deterministic
/// in `family.seed`; `budget` is the number of random candidates.
pub fn destabilization_probe(plant: &RationalPlant, family: &ProbeFamily, budget: usize) -> Result<ProbeResult> {
    if family.horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let seeds: Vec<u64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(family.seed);
        (0..budget.max(1)).map(|_| rng.random()).collect()
    };
    let candidates: Vec<PiecewiseLinearMonotone> = seeds
        .iter()
        .map(|&s| random_monotone(s, &family.nonlinearity))
        .collect();
    let scored: Vec<Option<GainEstimate>> = candidates.par_iter().map(|n| score(plant, n, family)).collect();
    let mut skipped = scored.iter().filter(|s| s.is_none()).count();
    let mut evaluations = candidates.len();
    let best = scored
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (s.gamma, i, s)))
        .reduce(argmax);

    let Some((_, index, mut incumbent)) = best else {
        return Ok(ProbeResult {
            worst_n: candidates[0].clone(),
            worst_e: Signal::zero(),
            gamma: 0.0,
            diverged: false,
            evaluations,
            skipped,
        });
    };
    let mut worst_n = candidates[index].clone();

    let cap = family.nonlinearity.slope_cap;
    let mut step = 0.25 * cap.max(0.0) * family.nonlinearity.x_range / (family.nonlinearity.breakpoints.max(1) as f64);
    for _ in 0..family.refinement_rounds {
        if incumbent.gamma.is_infinite() || step <= 0.0 {
            break;
        }
        for i in 0..worst_n.breakpoints().len() {
            if worst_n.breakpoints()[i].0 == 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut points = worst_n.breakpoints().to_vec();
                points[i].1 += sign * step;
                if !within_cap(&points, cap) {
                    continue;
                }
                let Ok(trial) = PiecewiseLinearMonotone::new(points) else {
                    continue;
                };
                evaluations += 1;
                match score(plant, &trial, family) {
                    Some(est) if est.gamma > incumbent.gamma => {
                        incumbent = est;
                        worst_n = trial;
                    }
                    Some(_) => {}
                    None => skipped += 1,
                }
            }
        }
        step *= 0.5;
    }
    Ok(ProbeResult {
        worst_n,
        worst_e: incumbent.worst_input,
        gamma: incumbent.gamma,
        diverged: incumbent.diverged,
        evaluations,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(plant: RationalPlant, n: PiecewiseLinearMonotone, input: Signal, horizon: usize) -> SimConfig {
        SimConfig {
            plant,
            nonlinearity: n,
            input,
            horizon,
            feedthrough: FeedthroughPolicy::Solve,
            allow_unstable: false,
        }
    }

    #[test]
    fn zero_nonlinearity_passes_input_through() {
        let e = Signal::new(0, vec![1.0, -2.0, 0.5, 3.0]);
        let r = simulate(&cfg(RationalPlant::first_order(0.7, 0.4), PiecewiseLinearMonotone::linear(0.0).unwrap(), e.clone(), 6))
            .unwrap();
        assert!(r.w.iter().all(|&x| x == 0.0));
        assert_eq!(r.v, e.window(0, 6));
        assert_eq!(r.peak_gain, 0.0);
    }

    #[test]
    fn hand_recursion_example() {
        let g = RationalPlant::new(vec![0.0, 0.5], vec![1.0]).unwrap();
        let n = PiecewiseLinearMonotone::linear(0.5).unwrap();
        let r = simulate(&cfg(g, n, Signal::impulse(0), 8)).unwrap();
        for k in 0..8 {
            let expected = 0.25f64.powi(k as i32);
            assert!((r.v[k] - expected).abs() < 1e-15);
            assert!((r.w[k] - expected / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn implicit_step_closed_form() {
        let n = PiecewiseLinearMonotone::linear(1.0).unwrap();
        let e = Signal::new(0, vec![3.0, -1.0, 0.25]);
        let r = simulate(&cfg(RationalPlant::static_gain(-1.0), n, e.clone(), 3)).unwrap();
        for k in 0..3 {
            assert!((r.v[k] - e.get(k as i64) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_loops_match_plant_algebra() {
        let e: Vec<f64> = (0..40).map(|k| ((k * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let input = Signal::new(0, e.clone());
        for (g, p, slope) in [(-0.6, 0.0, 0.8), (0.4, 0.0, 1.5), (-0.5, 0.7, 1.2), (0.3, -0.4, 0.9)] {
            let plant = RationalPlant::first_order(g, p);
            let n = PiecewiseLinearMonotone::linear(slope).unwrap();
            let r = simulate(&cfg(plant, n, input.clone(), 40)).unwrap();
            // w = k (1 - p z^-1) / ((1 - k g) - p z^-1) e
            let closed = RationalPlant::new(vec![slope, -slope * p], vec![1.0 - slope * g, -p]).unwrap();
            let expected = closed.filter(&e);
            for (a, b) in r.w.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn static_gain_is_exact_on_any_input() {
        let n = PiecewiseLinearMonotone::linear(2.0).unwrap();
        let est = estimate_gain(&RationalPlant::static_gain(-0.5), &n, &InputFamily::default(), 20, false).unwrap();
        assert!((est.gamma - 1.0).abs() < 1e-12);
        let zero = PiecewiseLinearMonotone::linear(0.0).unwrap();
        let est = estimate_gain(&RationalPlant::first_order(0.9, 0.5), &zero, &InputFamily::default(), 20, false).unwrap();
        assert_eq!(est.gamma, 0.0);
    }

    #[test]
    fn nonlinear_steps_solve_the_implicit_equation() {
        let n = PiecewiseLinearMonotone::with_slopes(vec![(-1.0, -0.5), (0.0, 0.0), (0.5, 1.0)], 0.2, 0.0).unwrap();
        let plant = RationalPlant::new(vec![-0.8, 0.3], vec![1.0, -0.5]).unwrap();
        let e: Vec<f64> = (0..30).map(|k| (k as f64 * 0.9).sin() * 2.0).collect();
        let r = simulate(&cfg(plant.clone(), n.clone(), Signal::new(0, e.clone()), 30)).unwrap();
        let gw = plant.filter(&r.w);
        for k in 0..30 {
            assert!((r.v[k] - gw[k] - e[k]).abs() < 1e-12);
            assert_eq!(r.w[k], n.evaluate(r.v[k]));
        }
    }

    #[test]
    fn ill_posed_loops_are_rejected() {
        let n = PiecewiseLinearMonotone::linear(2.0).unwrap();
        let err = simulate(&cfg(RationalPlant::static_gain(0.5), n, Signal::impulse(0), 4)).unwrap_err();
        assert!(matches!(err, Error::WellPosednessUnverifiable { .. }));
        let mut c = cfg(
            RationalPlant::static_gain(0.5),
            PiecewiseLinearMonotone::linear(1.0).unwrap(),
            Signal::impulse(0),
            4,
        );
        c.feedthrough = FeedthroughPolicy::Reject;
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn impulse_gain_trace_is_monotone() {
        let n = PiecewiseLinearMonotone::new(vec![(-2.0, -1.0), (0.0, 0.0), (1.0, 1.5)]).unwrap();
        let r = simulate(&cfg(RationalPlant::first_order(-0.7, 0.6), n, Signal::impulse(0), 30)).unwrap();
        let trace: Vec<f64> = r.gain_trace.iter().map(|g| g.unwrap()).collect();
        assert!(trace.windows(2).all(|p| p[1] >= p[0]));
        let delayed = simulate(&cfg(
            RationalPlant::first_order(-0.7, 0.6),
            PiecewiseLinearMonotone::linear(1.0).unwrap(),
            Signal::impulse(3),
            6,
        ))
        .unwrap();
        assert_eq!(&delayed.gain_trace[..3], &[None, None, None]);
        assert!(delayed.gain_trace[3].is_some());
    }

    #[test]
    fn unstable_plants_need_probe_mode_and_diverge() {
        let plant = RationalPlant::new(vec![0.0, 1.0], vec![1.0, -1.5]).unwrap();
        let n = PiecewiseLinearMonotone::linear(1.0).unwrap();
        let mut c = cfg(plant, n, Signal::impulse(0), 40);
        assert_eq!(simulate(&c).unwrap_err(), Error::UnstablePlant);
        c.allow_unstable = true;
        let short = simulate(&SimConfig { horizon: 10, ..c.clone() }).unwrap();
        let long = simulate(&c).unwrap();
        assert!(long.peak_gain > short.peak_gain);
        assert!(long.diverged);
    }

    #[test]
    fn probe_small_gain_bound_and_determinism() {
        let family = ProbeFamily {
            nonlinearity: RandomConfig { slope_cap: 1.0, ..RandomConfig::default() },
            horizon: 24,
            refinement_rounds: 1,
            seed: 9,
            ..ProbeFamily::default()
        };
        let plant = RationalPlant::static_gain(-0.5);
        let a = destabilization_probe(&plant, &family, 16).unwrap();
        assert!(a.gamma <= 2.0 + 1e-12);
        assert!(!a.diverged);
        let b = destabilization_probe(&plant, &family, 16).unwrap();
        assert_eq!(a, b);

        let flat = ProbeFamily {
            nonlinearity: RandomConfig { slope_cap: 0.0, ..RandomConfig::default() },
            ..family
        };
        assert_eq!(destabilization_probe(&plant, &flat, 8).unwrap().gamma, 0.0);
    }

    #[test]
    fn input_family_is_seeded() {
        let f = InputFamily::default();
        assert_eq!(f.generate(16), f.generate(16));
        let other = InputFamily { seed: 1, ..f.clone() };
        assert_ne!(f.generate(16), other.generate(16));
        assert_eq!(f.generate(16).len(), (2 + 1 + 4 + 4) * 3);
    }
}
