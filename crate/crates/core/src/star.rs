//! Star-coupling of two jointly distributed pairs and its left-to-right
//! iterates.
//!
//! Given `Z1 = (X1, Y1)` and `Z2 = (X2, Y2)`, the star-coupling draws `X2` and
//! `Y1` independently from their marginals and then couples the conditional
//! laws `X1 | Y1` and `Y2 | X2` through one shared uniform variable. Symbols
//! are ordered by index; block alphabets are ordered lexicographically.

use std::collections::BTreeMap;

use rand::Rng;

use crate::coupling::{quantile_overlaps, Alphabet, Coupling};
use crate::error::{Error, Result};
use crate::stats::mutual_information;

/// Cumulative table of a finitely supported law on ordered symbols.
///
/// Only symbols of positive weight are stored; symbol `symbols[i]` owns the
/// half-open interval `[upper[i-1], upper[i])` and the last upper end is 1.
#[derive(Debug, Clone)]
pub(crate) struct CdfTable {
    symbols: Vec<usize>,
    upper: Vec<f64>,
}

impl CdfTable {
    /// Weights must be listed in increasing symbol order.
    pub(crate) fn new(weights: impl IntoIterator<Item = (usize, f64)>) -> Option<Self> {
        let w: Vec<(usize, f64)> = weights.into_iter().filter(|e| e.1 > 0.0).collect();
        let total: f64 = w.iter().map(|e| e.1).sum();
        if w.is_empty() || total <= 0.0 {
            return None;
        }
        let mut acc = 0.0;
        let mut upper: Vec<f64> = w
            .iter()
            .map(|e| {
                acc += e.1;
                acc / total
            })
            .collect();
        *upper.last_mut().expect("nonempty") = 1.0;
        Some(Self {
            symbols: w.iter().map(|e| e.0).collect(),
            upper,
        })
    }

    /// Index of the interval containing `u` (right-continuous at endpoints).
    pub(crate) fn index_of(&self, u: f64) -> usize {
        self.upper
            .partition_point(|&c| c <= u)
            .min(self.symbols.len() - 1)
    }

    pub(crate) fn quantile(&self, u: f64) -> usize {
        self.symbols[self.index_of(u)]
    }

    pub(crate) fn interval(&self, index: usize) -> (f64, f64) {
        let lo = if index == 0 { 0.0 } else { self.upper[index - 1] };
        (lo, self.upper[index])
    }

    pub(crate) fn symbol(&self, index: usize) -> usize {
        self.symbols[index]
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.quantile(rng.gen::<f64>())
    }

    pub(crate) fn intervals(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.symbols.len()).map(|i| {
            let (lo, hi) = self.interval(i);
            (self.symbols[i], lo, hi)
        })
    }
}

/// Joint law of `(X1', Y1', X2', Y2')` produced by the star-coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct StarJoint {
    alphabets: [Alphabet; 4],
    mass: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl StarJoint {
    pub fn mass(&self, e1: usize, f1: usize, e2: usize, f2: usize) -> f64 {
        self.mass.get(&(e1, f1, e2, f2)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), f64)> + '_ {
        self.mass.iter().map(|(&k, &m)| (k, m))
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    /// Law of `(X1', Y1')`.
    pub fn first_pair(&self) -> Result<Coupling> {
        Coupling::new(
            self.alphabets[0].clone(),
            self.alphabets[1].clone(),
            self.iter().map(|((e1, f1, _, _), m)| (e1, f1, m)),
        )
    }

    /// Law of `(X2', Y2')`.
    pub fn second_pair(&self) -> Result<Coupling> {
        Coupling::new(
            self.alphabets[2].clone(),
            self.alphabets[3].clone(),
            self.iter().map(|((_, _, e2, f2), m)| (e2, f2, m)),
        )
    }

    /// Repackage as a coupling of `(X1', X2')` with `(Y1', Y2')`, both sides
    /// ordered lexicographically.
    pub fn to_coupling(&self) -> Result<Coupling> {
        let rows = self.alphabets[0].concat(&self.alphabets[2])?;
        let cols = self.alphabets[1].concat(&self.alphabets[3])?;
        let (n2, m2) = (self.alphabets[2].size(), self.alphabets[3].size());
        Coupling::new(
            rows,
            cols,
            self.iter()
                .map(|((e1, f1, e2, f2), m)| (e1 * n2 + e2, f1 * m2 + f2, m)),
        )
    }

    /// Mutual information between `Y1'` and `(X2', Y2')`.
    pub fn info_first_output_vs_second_pair(&self) -> f64 {
        let mut joint = BTreeMap::new();
        for ((_, f1, e2, f2), m) in self.iter() {
            *joint.entry((f1, (e2, f2))).or_insert(0.0) += m;
        }
        mutual_information(&joint)
    }

    /// Mutual information between `X2'` and `(X1', Y1')`.
    pub fn info_second_input_vs_first_pair(&self) -> f64 {
        let mut joint = BTreeMap::new();
        for ((e1, f1, e2, _), m) in self.iter() {
            *joint.entry((e2, (e1, f1))).or_insert(0.0) += m;
        }
        mutual_information(&joint)
    }

    /// Largest number, over fixed `(e2, f1)`, of values `e1` whose mass is
    /// spread over at least two values of `f2`.
    pub fn max_split_rows(&self) -> usize {
        let mut targets: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
        for ((e1, f1, e2, _), _) in self.iter() {
            *targets.entry((e2, f1, e1)).or_insert(0) += 1;
        }
        let mut split: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (&(e2, f1, _), &c) in &targets {
            if c >= 2 {
                *split.entry((e2, f1)).or_insert(0) += 1;
            }
        }
        split.values().copied().max().unwrap_or(0)
    }
}

/// Conditional tables of `X | Y = f` for every column `f` of positive mass.
fn column_tables(z: &Coupling) -> BTreeMap<usize, CdfTable> {
    let mut cols: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (a, b, m) in z.iter() {
        cols.entry(b).or_default().push((a, m));
    }
    cols.into_iter()
        .filter_map(|(b, w)| CdfTable::new(w).map(|t| (b, t)))
        .collect()
}

/// Conditional tables of `Y | X = e` for every row `e` of positive mass.
fn row_tables(z: &Coupling) -> BTreeMap<usize, CdfTable> {
    column_tables(&z.transpose())
}

fn weight_list(z: &Coupling, rows: bool) -> Vec<(usize, f64)> {
    let w = if rows { z.row_weights() } else { z.col_weights() };
    w.into_iter().enumerate().filter(|e| e.1 > 0.0).collect()
}

fn star_support_bound(z1: &Coupling, z2: &Coupling) -> u128 {
    let f1 = weight_list(z1, false).len() as u128;
    let e2 = weight_list(z2, true).len() as u128;
    e2 * z1.support_len() as u128 + f1 * z2.support_len() as u128
}

/// Overlaps of conditional quantile intervals at or below this length are
/// rounding artifacts of shared endpoints and are dropped.
pub const OVERLAP_TOL: f64 = 1e-12;

/// Exact star-coupling of `z1` and `z2`.
pub fn star_couple(z1: &Coupling, z2: &Coupling) -> Result<StarJoint> {
    let s = column_tables(z1);
    let t = row_tables(z2);
    let py1 = weight_list(z1, false);
    let px2 = weight_list(z2, true);
    let mut mass = BTreeMap::new();
    for &(f1, pf) in &py1 {
        let sw: Vec<(usize, f64)> = s[&f1]
            .intervals()
            .map(|(e, lo, hi)| (e, hi - lo))
            .collect();
        for &(e2, pe) in &px2 {
            let tw: Vec<(usize, f64)> = t[&e2]
                .intervals()
                .map(|(f, lo, hi)| (f, hi - lo))
                .collect();
            for (e1, f2, len) in quantile_overlaps(&sw, &tw) {
                if len <= OVERLAP_TOL {
                    continue;
                }
                *mass.entry((e1, f1, e2, f2)).or_insert(0.0) += pf * pe * len;
            }
        }
    }
    Ok(StarJoint {
        alphabets: [
            z1.rows().clone(),
            z1.cols().clone(),
            z2.rows().clone(),
            z2.cols().clone(),
        ],
        mass,
    })
}

/// Iterated star-coupling `(((z0 * zs[0]) * zs[1]) * ...)` repackaged on
/// lexicographic block products. `budget` caps the support size of every
/// intermediate result.
pub fn iterative_star(z0: &Coupling, zs: &[Coupling], budget: usize) -> Result<Coupling> {
    let mut w = z0.clone();
    for z in zs {
        let needed = star_support_bound(&w, z);
        if needed > budget as u128 {
            return Err(Error::Budget {
                what: "iterative star-coupling support".into(),
                needed,
                budget: budget as u128,
            });
        }
        w = star_couple(&w, z)?.to_coupling()?;
    }
    Ok(w)
}

/// Sampling form of the star-coupling with precomputed tables.
#[derive(Debug, Clone)]
pub struct StarSampler {
    y1: CdfTable,
    x2: CdfTable,
    s: BTreeMap<usize, CdfTable>,
    t: BTreeMap<usize, CdfTable>,
}

impl StarSampler {
    pub fn new(z1: &Coupling, z2: &Coupling) -> Result<Self> {
        let y1 = CdfTable::new(weight_list(z1, false))
            .ok_or_else(|| Error::NullConditioning("empty first pair".into()))?;
        let x2 = CdfTable::new(weight_list(z2, true))
            .ok_or_else(|| Error::NullConditioning("empty second pair".into()))?;
        Ok(Self {
            y1,
            x2,
            s: column_tables(z1),
            t: row_tables(z2),
        })
    }

    /// Draw `(e1, f1, e2, f2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, usize, usize) {
        let e2 = self.x2.sample(rng);
        let f1 = self.y1.sample(rng);
        let u: f64 = rng.gen();
        (self.s[&f1].quantile(u), f1, e2, self.t[&e2].quantile(u))
    }
}

/// One draw from the star-coupling of `z1` and `z2`.
pub fn star_sample<R: Rng + ?Sized>(
    rng: &mut R,
    z1: &Coupling,
    z2: &Coupling,
) -> Result<(usize, usize, usize, usize)> {
    Ok(StarSampler::new(z1, z2)?.sample(rng))
}

/// Conditional law of a block given its output, seen as a density on `[0, 1)`.
#[derive(Debug, Clone)]
struct OutputProfile {
    /// `(input, lo, hi, weight)`: the input's slice `[lo, hi)` of the
    /// output's conditional quantile scale, weighted by `P(input) / P(output)`.
    pieces: Vec<(usize, f64, f64, f64)>,
    /// Breakpoints of the piecewise-linear cumulative function and its values.
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl OutputProfile {
    fn new(pieces: Vec<(usize, f64, f64, f64)>) -> Self {
        let mut knots: Vec<f64> = pieces.iter().flat_map(|p| [p.1, p.2]).collect();
        knots.push(0.0);
        knots.push(1.0);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let values = knots.iter().map(|&v| Self::eval_with(&pieces, v)).collect();
        Self {
            pieces,
            knots,
            values,
        }
    }

    fn eval_with(pieces: &[(usize, f64, f64, f64)], v: f64) -> f64 {
        pieces
            .iter()
            .map(|&(_, lo, hi, w)| w * (v.min(hi) - lo).max(0.0))
            .sum()
    }

    /// `v` itself if some piece contains it, else the nearest point of the
    /// nearest piece when that is within rounding distance.
    fn snap(&self, v: f64) -> Option<f64> {
        if self.pieces.iter().any(|p| p.1 <= v && v < p.2) {
            return Some(v);
        }
        let (dist, to) = self
            .pieces
            .iter()
            .map(|&(_, lo, hi, _)| {
                if v < lo {
                    (lo - v, lo)
                } else {
                    (v - hi, lo + (hi - lo) * (1.0 - 1e-9))
                }
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))?;
        (dist <= SNAP_DISTANCE).then_some(to)
    }

    fn eval(&self, v: f64) -> f64 {
        Self::eval_with(&self.pieces, v)
    }

    /// Largest `v` with `G(v) <= u`.
    fn inverse(&self, u: f64) -> f64 {
        let j = self.values.partition_point(|&g| g <= u);
        if j == 0 {
            return 0.0;
        }
        if j == self.knots.len() {
            return *self.knots.last().expect("knots");
        }
        let (v0, v1) = (self.knots[j - 1], self.knots[j]);
        let (g0, g1) = (self.values[j - 1], self.values[j]);
        (v0 + (u - g0) / (g1 - g0) * (v1 - v0)).clamp(v0, v1)
    }
}

/// Sampler for the iterated star-coupling of an initial pair with `n` copies
/// of a block pair, usable when the exact iterate is far too large.
///
/// The conditional quantile functions of the iterate are evaluated
/// recursively: descending from the last block, each level inverts the
/// piecewise-linear cumulative function of one block, and the ascent
/// recovers the input blocks and their quantile intervals. Interval widths
/// are tracked in log scale; once an interval falls below floating-point
/// resolution it is treated as a point located at the descent's target and
/// the next input block is drawn from its exact conditional weights.
#[derive(Debug, Clone)]
pub struct IterativeStarSampler {
    initial: Coupling,
    block: Coupling,
    initial_pairs: CdfTable,
    initial_entries: Vec<(usize, usize)>,
    initial_out: CdfTable,
    initial_given_out: BTreeMap<usize, CdfTable>,
    block_in: CdfTable,
    block_out: CdfTable,
    out_given_in: BTreeMap<usize, CdfTable>,
    profiles: BTreeMap<usize, OutputProfile>,
}

/// Smallest log-width treated as a genuine interval.
const POINT_LOG_WIDTH: f64 = -690.0;

/// Largest rounding drift of a point that is moved back onto a piece.
const SNAP_DISTANCE: f64 = 1e-9;

impl IterativeStarSampler {
    pub fn new(initial: &Coupling, block: &Coupling) -> Result<Self> {
        let initial_entries: Vec<(usize, usize)> = initial.iter().map(|(a, b, _)| (a, b)).collect();
        let initial_pairs = CdfTable::new(initial.iter().enumerate().map(|(i, (_, _, m))| (i, m)))
            .ok_or_else(|| Error::NullConditioning("empty initial pair".into()))?;
        let initial_out = CdfTable::new(weight_list(initial, false))
            .ok_or_else(|| Error::NullConditioning("empty initial pair".into()))?;
        let block_in = CdfTable::new(weight_list(block, true))
            .ok_or_else(|| Error::NullConditioning("empty block pair".into()))?;
        let block_out = CdfTable::new(weight_list(block, false))
            .ok_or_else(|| Error::NullConditioning("empty block pair".into()))?;
        let out_given_in = row_tables(block);
        let px = block.row_weights();
        let py = block.col_weights();
        let mut pieces: BTreeMap<usize, Vec<(usize, f64, f64, f64)>> = BTreeMap::new();
        for (&l, table) in &out_given_in {
            for (y, lo, hi) in table.intervals() {
                pieces.entry(y).or_default().push((l, lo, hi, px[l] / py[y]));
            }
        }
        Ok(Self {
            initial: initial.clone(),
            block: block.clone(),
            initial_pairs,
            initial_entries,
            initial_out,
            initial_given_out: column_tables(initial),
            block_in,
            block_out,
            out_given_in,
            profiles: pieces
                .into_iter()
                .map(|(y, p)| (y, OutputProfile::new(p)))
                .collect(),
        })
    }

    pub fn initial(&self) -> &Coupling {
        &self.initial
    }

    pub fn block(&self) -> &Coupling {
        &self.block
    }

    /// Draw inputs `x[0..=n]` and outputs `y[0..=n]`; index 0 is the initial
    /// block. Every returned pair lies in the support of its coupling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Vec<usize>, Vec<usize>) {
        if n == 0 {
            let (x, y) = self.initial_entries[self.initial_pairs.sample(rng)];
            return (vec![x], vec![y]);
        }
        loop {
            if let Some(draw) = self.try_sample(rng, n) {
                return draw;
            }
        }
    }

    fn try_sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n: usize,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let last_in = self.block_in.sample(rng);
        let mut ys = Vec::with_capacity(n + 1);
        ys.push(self.initial_out.sample(rng));
        for _ in 1..n {
            ys.push(self.block_out.sample(rng));
        }
        let u: f64 = rng.gen();
        ys.push(self.out_given_in[&last_in].quantile(u));

        // Descend: targets[m] is the quantile level used at history depth m.
        let mut targets = vec![0.0; n];
        targets[n - 1] = u;
        for m in (1..n).rev() {
            targets[m - 1] = self.profiles[&ys[m]].inverse(targets[m]);
        }

        let table = &self.initial_given_out[&ys[0]];
        let idx = table.index_of(targets[0]);
        let (lo0, hi0) = table.interval(idx);
        let mut xs = Vec::with_capacity(n + 1);
        xs.push(table.symbol(idx));
        let (mut lo, mut log_w) = (lo0, (hi0 - lo0).ln());

        for m in 1..n {
            let profile = &self.profiles[&ys[m]];
            let w = log_w.exp();
            let point = log_w < POINT_LOG_WIDTH || lo + w == lo;
            let (l, new_lo, new_log_w) = if point {
                // The cell has shrunk to its target, which the descent
                // computed through contracting maps.
                lo = profile.snap(targets[m - 1])?;
                let hits: Vec<(usize, f64)> = profile
                    .pieces
                    .iter()
                    .filter(|p| p.1 <= lo && lo < p.2)
                    .map(|p| (p.0, p.3))
                    .collect();
                let pick = CdfTable::new(hits)?.sample(rng);
                let weight = profile.pieces.iter().find(|p| p.0 == pick)?.3;
                (pick, profile.eval(lo), log_w + weight.ln())
            } else {
                let hi = lo + w;
                let base = profile.eval(lo);
                let mut acc = base;
                let mut chosen = None;
                for &(l, a, b, weight) in &profile.pieces {
                    let ov = hi.min(b) - lo.max(a);
                    if ov <= 0.0 {
                        continue;
                    }
                    let part = weight * ov;
                    chosen = Some((l, acc, part.ln()));
                    if targets[m] < acc + part {
                        break;
                    }
                    acc += part;
                }
                chosen?
            };
            xs.push(l);
            lo = new_lo;
            log_w = new_log_w;
        }
        xs.push(last_in);

        let pairs_ok = self.initial.mass(xs[0], ys[0]) > 0.0
            && (1..=n).all(|i| self.block.mass(xs[i], ys[i]) > 0.0);
        pairs_ok.then_some((xs, ys))
    }
}
