use std::collections::BTreeSet;

use rand::Rng;
use sinai_core::rng::Stream;
use sinai_core::{Alphabet, Coupling, Dist};

/// Outcome of one criterion.
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
    /// Seconds.
    pub time_limit: f64,
}

/// Accumulates failed sub-checks, keeping the first message of each.
#[derive(Default)]
pub struct Tally {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.failures.len() < 3 {
            self.failures.push(msg());
        } else if !ok {
            self.failures.push(String::new());
        }
    }

    pub fn verdict(self, what: &str, time_limit: f64) -> Verdict {
        let passed = self.failures.is_empty();
        let detail = if passed {
            format!("{} {what} checks hold", self.checked)
        } else {
            let first: Vec<_> = self.failures.iter().filter(|m| !m.is_empty()).cloned().collect();
            format!("{} of {} {what} checks fail; {}", self.failures.len(), self.checked, first.join("; "))
        };
        Verdict {
            passed,
            detail,
            time_limit,
        }
    }
}

pub fn dist(rng: &mut Stream, n: usize) -> Dist {
    loop {
        let w: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0u32..12))).collect();
        if w.iter().any(|&x| x > 0.0) {
            return Dist::from_weights(w).unwrap();
        }
    }
}

/// `(p, q)` with `p` dominating `q`, made by pushing mass of `p` down.
pub fn dominating_pair(rng: &mut Stream, n: usize) -> (Dist, Dist) {
    let p = dist(rng, n);
    let mut q = p.probs().to_vec();
    for _ in 0..rng.gen_range(0..6) {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (hi, lo) = (i.max(j), i.min(j));
        let m = q[hi] * rng.gen::<f64>();
        q[hi] -= m;
        q[lo] += m;
    }
    (p, Dist::from_weights(q).unwrap())
}

pub fn coupling(rng: &mut Stream, rows: usize, cols: usize) -> Coupling {
    let w = dist(rng, rows * cols);
    let entries = w.probs().iter().enumerate().map(|(i, &m)| (i / cols, i % cols, m));
    Coupling::normalized(Alphabet::flat(rows), Alphabet::flat(cols), entries).unwrap()
}

pub fn subset(rng: &mut Stream, n: usize) -> BTreeSet<usize> {
    (0..n).filter(|_| rng.gen_bool(0.5)).collect()
}

pub fn max_diff(a: &Dist, b: &Dist) -> f64 {
    a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
