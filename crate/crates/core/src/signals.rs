//! Finitely supported real sequences on the integers.
//!
//! A [`Signal`] stores its values densely from `start` onward; everything
//! outside the stored window is zero. Construction trims leading and trailing
//! exact zeros so that equal sequences compare equal.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "RawSignal")]
pub struct Signal {
    start: i64,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSignal {
    start: i64,
    values: Vec<f64>,
}

impl From<RawSignal> for Signal {
    fn from(raw: RawSignal) -> Self {
        Signal::new(raw.start, raw.values)
    }
}

impl Signal {
    /// Builds a signal with `values[0]` at index `start`, trimmed to canonical form.
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        let first = values.iter().position(|&x| x != 0.0);
        match first {
            None => Signal::zero(),
            Some(first) => {
                let last = values.iter().rposition(|&x| x != 0.0).unwrap();
                let values = values[first..=last].to_vec();
                Signal {
                    start: start + first as i64,
                    values,
                }
            }
        }
    }

    pub fn zero() -> Self {
        Signal {
            start: 0,
            values: Vec::new(),
        }
    }

    /// Unit impulse at `index`.
    pub fn impulse(index: i64) -> Self {
        Signal {
            start: index,
            values: vec![1.0],
        }
    }

    /// Builds a signal from samples starting at index 0.
    pub fn from_samples(values: Vec<f64>) -> Self {
        Signal::new(0, values)
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    /// One past the last stored index.
    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: i64) -> f64 {
        if k < self.start || k >= self.end() {
            0.0
        } else {
            self.values[(k - self.start) as usize]
        }
    }

    /// Dense samples on `[from, to)`.
    pub fn window(&self, from: i64, to: i64) -> Vec<f64> {
        (from..to).map(|k| self.get(k)).collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn map(&self, mut f: impl FnMut(i64, f64) -> f64) -> Signal {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| f(self.start + i as i64, x))
            .collect();
        Signal::new(self.start, values)
    }

    pub fn scale(&self, c: f64) -> Signal {
        self.map(|_, x| c * x)
    }

    pub fn add(&self, other: &Signal) -> Signal {
        combine(self, other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Signal {
        combine(self, other, |a, b| a - b)
    }
}

fn combine(a: &Signal, b: &Signal, op: impl Fn(f64, f64) -> f64) -> Signal {
    if a.is_zero() && b.is_zero() {
        return Signal::zero();
    }
    let (lo, hi) = support_hull(a, b);
    Signal::new(lo, (lo..hi).map(|k| op(a.get(k), b.get(k))).collect())
}

/// Smallest window `[lo, hi)` covering the supports of both signals.
fn support_hull(a: &Signal, b: &Signal) -> (i64, i64) {
    match (a.is_zero(), b.is_zero()) {
        (true, true) => (0, 0),
        (true, false) => (b.start, b.end()),
        (false, true) => (a.start, a.end()),
        (false, false) => (a.start.min(b.start), a.end().max(b.end())),
    }
}

/// `<u, w> = sum_k u_k w_k` over the overlap of supports.
pub fn inner_product(u: &Signal, w: &Signal) -> f64 {
    let lo = u.start.max(w.start);
    let hi = u.end().min(w.end());
    (lo..hi).map(|k| u.get(k) * w.get(k)).sum()
}

/// Rightward shift: `(S_tau u)_k = u_{k - tau}`.
pub fn shift(u: &Signal, tau: i64) -> Signal {
    if u.is_zero() {
        return Signal::zero();
    }
    Signal {
        start: u.start + tau,
        values: u.values.clone(),
    }
}

/// Keeps samples with index `<= tau`.
pub fn truncate(u: &Signal, tau: i64) -> Signal {
    if u.is_zero() || tau < u.start {
        return Signal::zero();
    }
    let keep = ((tau - u.start + 1) as usize).min(u.len());
    Signal::new(u.start, u.values[..keep].to_vec())
}

/// Keeps samples with index in `[a, b]`; an empty window (`a > b`) yields zero.
pub fn truncate_window(u: &Signal, a: i64, b: i64) -> Signal {
    if a > b || u.is_zero() {
        return Signal::zero();
    }
    let lo = a.max(u.start);
    let hi = (b + 1).min(u.end());
    if lo >= hi {
        return Signal::zero();
    }
    Signal::new(lo, u.window(lo, hi))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SequencePair {
    pub v: Signal,
    pub w: Signal,
}

impl SequencePair {
    pub fn new(v: Signal, w: Signal) -> Self {
        SequencePair { v, w }
    }

    /// Window covering both supports.
    pub fn support(&self) -> (i64, i64) {
        support_hull(&self.v, &self.w)
    }

    /// Samples `(v_k, w_k)` over the joint support plus one synthetic `(0, 0)`
    /// standing in for the zero tail.
    pub fn samples_with_tail(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.support();
        // `+ 0.0` folds negative zero into zero so ties sort together.
        let mut out: Vec<(f64, f64)> = (lo..hi)
            .map(|k| (self.v.get(k) + 0.0, self.w.get(k) + 0.0))
            .collect();
        out.push((0.0, 0.0));
        out
    }
}

/// True iff `v_i < v_j` implies `w_i <= w_j` for every pair of indices in Z.
pub fn is_similarly_ordered(p: &SequencePair) -> bool {
    let mut samples = p.samples_with_tail();
    samples.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => a.1.total_cmp(&b.1),
        other => other,
    });
    samples.windows(2).all(|s| s[0].1 <= s[1].1)
}

/// True iff `v_k w_k >= 0` at every index.
pub fn is_unbiased(p: &SequencePair) -> bool {
    let (lo, hi) = p.support();
    (lo..hi).all(|k| p.v.get(k) * p.w.get(k) >= 0.0)
}
