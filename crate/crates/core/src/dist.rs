//! Probability vectors on `[N] = {0, ..., N-1}`, entropies, stochastic
//! domination and relation-constrained domination.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::coupling::{Alphabet, Coupling};
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;

/// Construction tolerance on the total mass of a [`Dist`].
pub const DIST_TOL: f64 = 1e-12;
/// Tolerance on prefix-sum comparisons in [`dominates`].
pub const DOMINANCE_TOL: f64 = 1e-12;
/// Tolerance on the flow value in [`r_dominates`].
pub const FLOW_TOL: f64 = 1e-10;

/// Probability vector on `[n]`. Zero-mass symbols are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Dist {
    probs: Vec<f64>,
}

impl Dist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDist("empty alphabet".into()));
        }
        if let Some(x) = probs.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidDist(format!("entry {x}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DIST_TOL {
            return Err(Error::InvalidDist(format!("total mass {total}")));
        }
        Ok(Self {
            probs: probs.into_iter().map(|x| x / total).collect(),
        })
    }

    /// Normalise nonnegative weights with positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(x) = weights.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidDist(format!("weight {x}")));
        }
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || total <= 0.0 {
            return Err(Error::InvalidDist("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|x| x / total).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(n: usize, at: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Cumulative sums `F(i) = P(X <= i)`.
    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(p: &Dist) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(w: &[f64]) -> f64 {
    -w.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Entropy of the two-set partition with masses `t` and `1 - t`.
pub fn binary_entropy(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("binary entropy argument {t}")));
    }
    Ok(entropy_of(&[t, 1.0 - t]))
}

/// Stochastic domination `p >= q`: every prefix sum of `p` is at most the
/// corresponding prefix sum of `q`.
pub fn dominates(p: &Dist, q: &Dist) -> Result<bool> {
    check_sizes(p, q)?;
    Ok(p.cdf()
        .iter()
        .zip(q.cdf())
        .all(|(fp, fq)| *fp <= fq + DOMINANCE_TOL))
}

fn check_sizes(p: &Dist, q: &Dist) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// A relation `R` on `[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Relation {
    n: usize,
    pairs: BTreeSet<(usize, usize)>,
}

impl Relation {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(Error::InvalidRelation(format!("pair ({a}, {b}) outside [{n}]")));
        }
        Ok(Self { n, pairs })
    }

    pub fn full(n: usize) -> Self {
        Self::from_pred(n, |_, _| true)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_pred(n, |a, b| a == b)
    }

    /// The monotone order `{(a, b) : a >= b}`.
    pub fn monotone(n: usize) -> Self {
        Self::from_pred(n, |a, b| a >= b)
    }

    pub fn empty(n: usize) -> Self {
        Self::from_pred(n, |_, _| false)
    }

    fn from_pred(n: usize, pred: impl Fn(usize, usize) -> bool) -> Self {
        let pairs = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| pred(a, b))
            .collect();
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a, b))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }
}

/// Witness coupling of `p` and `q` supported on `relation`, if one exists.
///
/// Decided by max flow on source -> a (capacity `p_a`), a -> b for
/// `(a, b)` in the relation, b -> sink (capacity `q_b`).
pub fn r_dominates(p: &Dist, q: &Dist, relation: &Relation) -> Result<Option<Coupling>> {
    check_sizes(p, q)?;
    let n = p.len();
    if relation.n() != n {
        return Err(Error::InvalidRelation(format!(
            "relation on [{}] for alphabet of size {n}",
            relation.n()
        )));
    }
    let (source, sink) = (0, 2 * n + 1);
    let mut net = FlowNetwork::new(2 * n + 2);
    for a in 0..n {
        net.add_edge(source, 1 + a, p.get(a));
        net.add_edge(1 + n + a, sink, q.get(a));
    }
    for (a, b) in relation.pairs() {
        if p.get(a) > 0.0 && q.get(b) > 0.0 {
            net.add_edge(1 + a, 1 + n + b, 2.0);
        }
    }
    let value = net.max_flow(source, sink, 1e-15);
    if value < 1.0 - FLOW_TOL {
        return Ok(None);
    }
    let entries = relation
        .pairs()
        .map(|(a, b)| (a, b, net.flow_on(1 + a, 1 + n + b)));
    Coupling::normalized(Alphabet::flat(n), Alphabet::flat(n), entries).map(Some)
}

/// Laws of `X` and `Y` conditioned on `{X != e_star}` for `Z = (X, Y)`.
pub fn conditioned_pair(z: &Coupling, e_star: usize) -> Result<(Dist, Dist)> {
    if e_star >= z.rows().size() {
        return Err(Error::OutOfRange(format!("symbol {e_star}")));
    }
    let u = z.row_weights()[e_star];
    if u >= 1.0 - 1e-15 {
        return Err(Error::NullConditioning(format!("P(X = {e_star}) = {u}")));
    }
    Ok(z.condition_rows(|a| a != e_star)?.marginals())
}

/// Exact entropies around conditioning on `{X != e_star}` together with the
/// two bounds `H(X~) >= H(X) - Phi(u)` and
/// `H(Y~) <= H(Y) + Phi(u) + u log #E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CapHReport {
    pub u: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub h_x_tilde: f64,
    pub h_y_tilde: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

pub fn cap_h_check(z: &Coupling, e_star: usize) -> Result<CapHReport> {
    if z.rows().size() != z.cols().size() {
        return Err(Error::AlphabetMismatch {
            left: z.rows().size(),
            right: z.cols().size(),
        });
    }
    let (x_tilde, y_tilde) = conditioned_pair(z, e_star)?;
    let (x, y) = z.marginals();
    let u = x.get(e_star);
    let phi = binary_entropy(u)?;
    let size = z.rows().size() as f64;
    let (h_x, h_y) = (x.entropy(), y.entropy());
    let (h_x_tilde, h_y_tilde) = (x_tilde.entropy(), y_tilde.entropy());
    let lower = h_x - phi;
    let upper = h_y + phi + u * size.ln();
    Ok(CapHReport {
        u,
        h_x,
        h_y,
        h_x_tilde,
        h_y_tilde,
        lower,
        upper,
        holds: h_x_tilde >= lower - 1e-9 && h_y_tilde <= upper + 1e-9,
    })
}
