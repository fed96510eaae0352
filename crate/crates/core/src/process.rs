//! Window-scale simulation of the alternating joining and the interval
//! structure it induces.
//!
//! A marker is a run of `2k` copies of `a` followed by `b`. The alternating
//! joining draws `k`-blocks from the block coupling until the input block is
//! `a^k`, then single coordinates from the base coupling until the input is
//! not `a`, and repeats. Reading markers off the input row recovers which
//! coupling produced every coordinate to the right of the first marker.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{product_power, quantile_coupling, Coupling, MASS_TOL};
use crate::dist::{binary_entropy, entropy_of, Dist};
use crate::error::{Error, Result};
use crate::star::CdfTable;
use crate::stats::Estimate;

/// Marker symbols `a < b` and block length `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarkerConfig {
    pub a: usize,
    pub b: usize,
    pub k: usize,
}

impl MarkerConfig {
    pub fn new(a: usize, b: usize, k: usize) -> Result<Self> {
        if a >= b {
            return Err(Error::Precondition(format!("marker symbols need a < b, got {a}, {b}")));
        }
        if k == 0 {
            return Err(Error::Precondition("block length k must be positive".into()));
        }
        Ok(Self { a, b, k })
    }

    /// Check the symbols against an input law.
    pub fn validate(&self, p: &Dist) -> Result<()> {
        if self.b >= p.len() {
            return Err(Error::Precondition(format!(
                "marker symbol {} outside alphabet of size {}",
                self.b,
                p.len()
            )));
        }
        if p.get(self.a) <= 0.0 || p.get(self.b) <= 0.0 {
            return Err(Error::Precondition("marker symbols need positive mass".into()));
        }
        Ok(())
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..*self }
    }
}

/// Closed index range `[lo, hi]` inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn width(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }
}

/// All markers of `x`, left to right. Markers never overlap.
pub fn find_markers(x: &[usize], cfg: &MarkerConfig) -> Vec<Span> {
    let mut out = Vec::new();
    let mut run = 0usize;
    for (i, &s) in x.iter().enumerate() {
        if s == cfg.b && run >= 2 * cfg.k {
            out.push(Span {
                lo: i - 2 * cfg.k,
                hi: i,
            });
        }
        run = if s == cfg.a { run + 1 } else { 0 };
    }
    out
}

/// A finite stretch of a two-row process with a distinguished origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProcessWindow {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    /// Index of coordinate 0.
    pub origin: usize,
}

impl ProcessWindow {
    pub fn new(x: Vec<usize>, y: Vec<usize>, origin: usize) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(Error::InvalidCoupling(format!(
                "window rows of lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        if origin >= x.len() {
            return Err(Error::OutOfRange(format!("origin {origin}")));
        }
        Ok(Self { x, y, origin })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Position of the first coordinate relative to the origin.
    pub fn lo(&self) -> i64 {
        -(self.origin as i64)
    }

    pub fn hi(&self) -> i64 {
        self.x.len() as i64 - 1 - self.origin as i64
    }

    /// True iff `x[i] >= y[i]` at every coordinate.
    pub fn is_monotone(&self) -> bool {
        self.x.iter().zip(&self.y).all(|(a, b)| a >= b)
    }

    /// Two-row text form preceded by the line `lo hi origin`.
    pub fn to_text(&self) -> String {
        let row = |v: &[usize]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
        format!(
            "{} {} {}\n{}\n{}\n",
            self.lo(),
            self.hi(),
            self.origin,
            row(&self.x),
            row(&self.y)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} line")))
        };
        let head: Vec<i64> = next("header")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("{e}"))))
            .collect::<Result<_>>()?;
        let row = |l: &str| -> Result<Vec<usize>> {
            l.split_whitespace()
                .map(|t| t.parse().map_err(|e| Error::Parse(format!("{e}"))))
                .collect()
        };
        let x = row(next("x")?)?;
        let y = row(next("y")?)?;
        if head.len() != 3 || head[2] < 0 {
            return Err(Error::Parse("header must be `lo hi origin`".into()));
        }
        let w = Self::new(x, y, head[2] as usize)?;
        if w.lo() != head[0] || w.hi() != head[1] {
            return Err(Error::Parse("header bounds disagree with row length".into()));
        }
        Ok(w)
    }
}

/// Base coupling on single coordinates, the seed coupling whose `k`-fold
/// power is the block coupling, and the marker configuration.
#[derive(Debug, Clone)]
pub struct BlockJoining {
    cfg: MarkerConfig,
    seed: Coupling,
    base: Coupling,
    p: Dist,
    q: Dist,
    seed_pairs: PairTable,
    input_table: CdfTable,
    base_given_input: Vec<Option<CdfTable>>,
}

/// Sampler over the support entries of a coupling.
#[derive(Debug, Clone)]
struct PairTable {
    table: CdfTable,
    entries: Vec<(usize, usize)>,
}

impl PairTable {
    fn new(c: &Coupling) -> Self {
        Self {
            table: CdfTable::new(c.iter().enumerate().map(|(i, (_, _, m))| (i, m)))
                .expect("coupling has positive mass"),
            entries: c.iter().map(|(a, b, _)| (a, b)).collect(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        self.entries[self.table.sample(rng)]
    }
}

/// Block couplings with the quantile coupling of the seed's marginals as
/// the base coupling on single coordinates.
pub fn build_block_joining(seed: &Coupling, cfg: MarkerConfig) -> Result<BlockJoining> {
    let (p, q) = seed.marginals();
    build_block_joining_with(seed, &quantile_coupling(&p, &q), cfg)
}

/// Block couplings with an explicit base coupling on single coordinates,
/// which must have the same marginals as the seed.
pub fn build_block_joining_with(
    seed: &Coupling,
    base: &Coupling,
    cfg: MarkerConfig,
) -> Result<BlockJoining> {
    if seed.rows().len() != 1 || seed.cols().len() != 1 {
        return Err(Error::InvalidCoupling("seed must live on single symbols".into()));
    }
    if seed.rows() != base.rows() || seed.cols() != base.cols() {
        return Err(Error::AlphabetMismatch {
            left: seed.rows().size(),
            right: base.rows().size(),
        });
    }
    let (p, q) = seed.marginals();
    let (bp, bq) = base.marginals();
    let close = |a: &Dist, b: &Dist| {
        a.probs()
            .iter()
            .zip(b.probs())
            .all(|(x, y)| (x - y).abs() <= MASS_TOL)
    };
    if !close(&p, &bp) || !close(&q, &bq) {
        return Err(Error::InvalidCoupling(
            "base coupling marginals differ from the seed's".into(),
        ));
    }
    cfg.validate(&p)?;
    if p.get(cfg.a) >= 1.0 {
        return Err(Error::Degenerate("block coupling is concentrated on a^k".into()));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.len()];
    for (a, b, m) in base.iter() {
        rows[a].push((b, m));
    }
    Ok(BlockJoining {
        cfg,
        seed: seed.clone(),
        base: base.clone(),
        seed_pairs: PairTable::new(seed),
        input_table: CdfTable::new(p.probs().iter().copied().enumerate()).expect("valid law"),
        base_given_input: rows.into_iter().map(CdfTable::new).collect(),
        p,
        q,
    })
}

impl BlockJoining {
    pub fn cfg(&self) -> &MarkerConfig {
        &self.cfg
    }

    pub fn seed(&self) -> &Coupling {
        &self.seed
    }

    pub fn base(&self) -> &Coupling {
        &self.base
    }

    pub fn input_law(&self) -> &Dist {
        &self.p
    }

    pub fn output_law(&self) -> &Dist {
        &self.q
    }

    pub fn alphabet_size(&self) -> usize {
        self.p.len()
    }

    /// `P(input block = a^k)`.
    pub fn switch_probability(&self) -> f64 {
        self.p.get(self.cfg.a).powi(self.cfg.k as i32)
    }

    /// Index of `a^k` in the block alphabet.
    pub fn switch_block(&self) -> usize {
        let n = self.alphabet_size();
        (0..self.cfg.k).fold(0, |acc, _| acc * n + self.cfg.a)
    }

    /// The block coupling: the seed's `k`-fold power.
    pub fn block_coupling(&self, budget: usize) -> Result<Coupling> {
        product_power(&self.seed, self.cfg.k, budget)
    }

    /// The block coupling conditioned on the input block not being `a^k`.
    pub fn conditioned_block_coupling(&self, budget: usize) -> Result<Coupling> {
        let s = self.switch_block();
        self.block_coupling(budget)?.condition_rows(|x| x != s)
    }

    /// One pair drawn from the seed.
    pub fn sample_seed<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        self.seed_pairs.sample(rng)
    }

    /// One pair drawn from the base coupling given the input symbol.
    pub fn sample_base_given<R: Rng + ?Sized>(&self, rng: &mut R, x: usize) -> usize {
        self.base_given_input[x]
            .as_ref()
            .expect("input symbol has positive mass")
            .sample(rng)
    }

    /// One pair drawn from the base coupling.
    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let x = self.input_table.sample(rng);
        (x, self.sample_base_given(rng, x))
    }

    /// One block drawn from the conditioned block coupling, by rejection.
    pub fn sample_free_block<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        loop {
            let (x, y): (Vec<usize>, Vec<usize>) =
                (0..self.cfg.k).map(|_| self.sample_seed(rng)).unzip();
            if x.iter().any(|&s| s != self.cfg.a) {
                return (x, y);
            }
        }
    }
}

/// One draw made by the alternating generator, in window coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Draw {
    pub span: Span,
    pub block: bool,
    pub switch: bool,
}

/// Run the one-sided alternating generator for at least `len` coordinates.
fn run_alternating<R: Rng + ?Sized>(
    rng: &mut R,
    bj: &BlockJoining,
    len: usize,
) -> (Vec<usize>, Vec<usize>, Vec<Draw>) {
    let cfg = bj.cfg;
    let (mut x, mut y) = (Vec::with_capacity(len + cfg.k), Vec::with_capacity(len + cfg.k));
    let mut draws = Vec::new();
    let mut block_mode = true;
    while x.len() < len {
        let lo = x.len();
        if block_mode {
            let mut all_a = true;
            for _ in 0..cfg.k {
                let (a, b) = bj.sample_seed(rng);
                all_a &= a == cfg.a;
                x.push(a);
                y.push(b);
            }
            draws.push(Draw {
                span: Span { lo, hi: lo + cfg.k - 1 },
                block: true,
                switch: all_a,
            });
            block_mode = !all_a;
        } else {
            let (a, b) = bj.sample_base(rng);
            x.push(a);
            y.push(b);
            let switch = a != cfg.a;
            draws.push(Draw {
                span: Span { lo, hi: lo },
                block: false,
                switch,
            });
            block_mode = switch;
        }
    }
    (x, y, draws)
}

/// Sample a window of `len` coordinates of the alternating joining.
///
/// The generator runs for `burn_in` coordinates plus a uniform offset in
/// `[0, 4k)` before the window starts; the origin sits in the middle.
pub fn sample_alternating<R: Rng + ?Sized>(
    rng: &mut R,
    bj: &BlockJoining,
    len: usize,
    burn_in: usize,
) -> Result<ProcessWindow> {
    Ok(sample_alternating_traced(rng, bj, len, burn_in)?.0)
}

/// As [`sample_alternating`], also returning the generator's draws that lie
/// entirely inside the window.
pub fn sample_alternating_traced<R: Rng + ?Sized>(
    rng: &mut R,
    bj: &BlockJoining,
    len: usize,
    burn_in: usize,
) -> Result<(ProcessWindow, Vec<Draw>)> {
    if len == 0 {
        return Err(Error::OutOfRange("window length must be positive".into()));
    }
    let start = burn_in + rng.gen_range(0..4 * bj.cfg.k);
    let (mut x, mut y, draws) = run_alternating(rng, bj, start + len);
    x.truncate(start + len);
    y.truncate(start + len);
    let x = x.split_off(start);
    let y = y.split_off(start);
    let draws = draws
        .into_iter()
        .filter(|d| d.span.lo >= start && d.span.hi < start + len)
        .map(|d| Draw {
            span: Span {
                lo: d.span.lo - start,
                hi: d.span.hi - start,
            },
            ..d
        })
        .collect();
    Ok((ProcessWindow::new(x, y, len / 2)?, draws))
}

/// Whether an alternating interval is a single coordinate or a `k`-block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Single,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AltInterval {
    pub span: Span,
    pub kind: IntervalKind,
    pub switch: bool,
    pub frozen: bool,
}

/// A large block together with the indices of its free intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LargeBlock {
    pub span: Span,
    pub free: Vec<usize>,
    pub block_intervals: usize,
    pub action: bool,
}

/// Alternating intervals of a window read off its input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntervalDecomposition {
    pub k: usize,
    pub markers: Vec<Span>,
    pub intervals: Vec<AltInterval>,
    pub super_markers: Vec<Span>,
    pub large_blocks: Vec<LargeBlock>,
}

/// Alternating intervals from the first marker's right endpoint to the last
/// interval that fits in the window.
pub fn decompose(x: &[usize], cfg: &MarkerConfig) -> Result<IntervalDecomposition> {
    let markers = find_markers(x, cfg);
    let first = markers
        .first()
        .ok_or_else(|| Error::Degenerate("no marker in window".into()))?;
    let k = cfg.k;
    let mut intervals = Vec::new();
    let single = |i: usize, out: &mut Vec<AltInterval>| {
        out.push(AltInterval {
            span: Span { lo: i, hi: i },
            kind: IntervalKind::Single,
            switch: false,
            frozen: true,
        })
    };
    single(first.hi, &mut intervals);
    let mut pos = first.hi + 1;
    let mut in_singles = false;
    loop {
        if in_singles {
            if pos >= x.len() {
                break;
            }
            single(pos, &mut intervals);
            in_singles = x[pos] == cfg.a;
            pos += 1;
        } else {
            if pos + k > x.len() {
                break;
            }
            let switch = x[pos..pos + k].iter().all(|&s| s == cfg.a);
            intervals.push(AltInterval {
                span: Span { lo: pos, hi: pos + k - 1 },
                kind: IntervalKind::Block,
                switch,
                frozen: switch,
            });
            in_singles = switch;
            pos += k;
        }
    }
    Ok(IntervalDecomposition {
        k,
        markers,
        intervals,
        super_markers: Vec::new(),
        large_blocks: Vec::new(),
    })
}

/// The decomposition drawn by the generator itself. It covers every draw
/// inside the window, including those before the first marker.
pub fn draw_decomposition(x: &[usize], draws: &[Draw], cfg: &MarkerConfig) -> IntervalDecomposition {
    let intervals = draws
        .iter()
        .map(|d| AltInterval {
            span: d.span,
            kind: if d.block { IntervalKind::Block } else { IntervalKind::Single },
            switch: d.block && d.switch,
            frozen: !d.block || d.switch,
        })
        .collect();
    IntervalDecomposition {
        k: cfg.k,
        markers: find_markers(x, cfg),
        intervals,
        super_markers: Vec::new(),
        large_blocks: Vec::new(),
    }
}

impl IntervalDecomposition {
    /// Range of coordinates covered by intervals.
    pub fn covered(&self) -> Span {
        Span {
            lo: self.intervals[0].span.lo,
            hi: self.intervals.last().expect("nonempty").span.hi,
        }
    }

    /// Index of the interval containing coordinate `i`.
    pub fn interval_index(&self, i: usize) -> Option<usize> {
        let j = self.intervals.partition_point(|iv| iv.span.hi < i);
        (j < self.intervals.len() && self.intervals[j].span.contains(i)).then_some(j)
    }

    pub fn frozen_at(&self, i: usize) -> Option<bool> {
        self.interval_index(i).map(|j| self.intervals[j].frozen)
    }

    /// Group abutting markers into super markers of at least `k_super`
    /// markers, and mark large blocks with at least `n0` free intervals as
    /// action blocks.
    pub fn mark_blocks(&mut self, k_super: usize, n0: usize) {
        let mut supers = Vec::new();
        let mut run: Option<(Span, usize)> = None;
        for &m in &self.markers {
            run = match run {
                Some((s, c)) if s.hi + 1 == m.lo => Some((Span { lo: s.lo, hi: m.hi }, c + 1)),
                Some((s, c)) => {
                    if c >= k_super {
                        supers.push(s);
                    }
                    Some((m, 1))
                }
                None => Some((m, 1)),
            };
        }
        if let Some((s, c)) = run {
            if c >= k_super {
                supers.push(s);
            }
        }
        let mut blocks = Vec::new();
        for pair in supers.windows(2) {
            if pair[1].lo <= pair[0].hi + 1 {
                continue;
            }
            let span = Span {
                lo: pair[0].hi + 1,
                hi: pair[1].lo - 1,
            };
            let first = self.intervals.partition_point(|iv| iv.span.lo < span.lo);
            let inside: Vec<usize> = (first..self.intervals.len())
                .take_while(|&j| self.intervals[j].span.hi <= span.hi)
                .collect();
            let free: Vec<usize> = inside
                .iter()
                .copied()
                .filter(|&j| !self.intervals[j].frozen)
                .collect();
            let block_intervals = inside
                .iter()
                .filter(|&&j| self.intervals[j].kind == IntervalKind::Block)
                .count();
            blocks.push(LargeBlock {
                span,
                action: free.len() >= n0,
                free,
                block_intervals,
            });
        }
        self.super_markers = supers;
        self.large_blocks = blocks;
    }

    /// Index of the large block containing coordinate `i`.
    pub fn large_block_index(&self, i: usize) -> Option<usize> {
        let j = self.large_blocks.partition_point(|b| b.span.hi < i);
        (j < self.large_blocks.len() && self.large_blocks[j].span.contains(i)).then_some(j)
    }

    /// Span between the first and last super marker, where large-block
    /// membership is determined.
    pub fn block_region(&self) -> Option<Span> {
        match (self.super_markers.first(), self.super_markers.last()) {
            (Some(f), Some(l)) if f.hi < l.lo => Some(Span { lo: f.lo, hi: l.hi }),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("decomposition serializes")
    }
}

/// Frozen-coordinate frequencies with the bound `p_a^(k-1) + p_a^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FrozenStats {
    pub frozen: Estimate,
    pub single: Estimate,
    pub switch: Estimate,
    pub single_bound: f64,
    pub switch_bound: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Frequencies of frozen, single and switch coordinates over the covered
/// parts of `windows`, with batch-means standard errors.
pub fn frozen_stats(windows: &[ProcessWindow], cfg: &MarkerConfig, p_a: f64) -> Result<FrozenStats> {
    let ds = windows
        .iter()
        .map(|w| decompose(&w.x, cfg))
        .collect::<Result<Vec<_>>>()?;
    frozen_stats_of(&ds, cfg, p_a)
}

/// As [`frozen_stats`], over given decompositions.
pub fn frozen_stats_of(decompositions: &[IntervalDecomposition], cfg: &MarkerConfig, p_a: f64) -> Result<FrozenStats> {
    let mut frozen = Vec::new();
    let mut single = Vec::new();
    let mut switch = Vec::new();
    for d in decompositions {
        for iv in &d.intervals {
            for _ in iv.span.lo..=iv.span.hi {
                frozen.push(iv.frozen);
                single.push(iv.kind == IntervalKind::Single);
                switch.push(iv.switch);
            }
        }
    }
    if frozen.is_empty() {
        return Err(Error::InsufficientSamples("no covered coordinates".into()));
    }
    let batches = 100;
    let single_bound = p_a.powi(cfg.k as i32 - 1);
    let switch_bound = p_a.powi(cfg.k as i32);
    let frozen = Estimate::batch_means(&frozen, batches);
    let bound = single_bound + switch_bound;
    Ok(FrozenStats {
        frozen,
        single: Estimate::batch_means(&single, batches),
        switch: Estimate::batch_means(&switch, batches),
        single_bound,
        switch_bound,
        bound,
        within_bound: frozen.at_most(bound, 4.0),
    })
}

/// A source of cylinder laws for the weak-star distance.
#[derive(Debug, Clone, Copy)]
pub enum CylinderSource<'a> {
    /// The product measure of a single-coordinate coupling.
    Iid(&'a Coupling),
    /// Sliding windows over sampled process windows.
    Windows(&'a [ProcessWindow]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeakStarReport {
    pub per_radius: Vec<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub truncation_bound: f64,
    pub samples: usize,
}

// Ordered so that sums over cells are reproducible bit for bit.
type CellLaw = BTreeMap<u128, f64>;

fn pair_radix(n: usize) -> u128 {
    (n * n) as u128
}

fn empirical_cells(windows: &[ProcessWindow], n: usize, radius: usize, i_max: usize) -> Result<(CellLaw, usize)> {
    let width = 2 * radius + 1;
    let radix = pair_radix(n);
    if (width as f64) * (radix as f64).log2() > 127.0 {
        return Err(Error::Budget {
            what: "cylinder key".into(),
            needed: width as u128,
            budget: (127.0 / (radix as f64).log2()) as u128,
        });
    }
    let mut counts: HashMap<u128, usize> = HashMap::new();
    let mut total = 0usize;
    for w in windows {
        if w.len() < 2 * i_max + 1 {
            continue;
        }
        for c in i_max..w.len() - i_max {
            let mut key = 0u128;
            for j in c - radius..=c + radius {
                key = key * radix + (w.x[j] * n + w.y[j]) as u128;
            }
            *counts.entry(key).or_insert(0) += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientSamples("windows shorter than 2 iMax + 1".into()));
    }
    Ok((
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect(),
        total,
    ))
}

fn iid_cell_mass(c: &Coupling, n: usize, mut key: u128, width: usize) -> f64 {
    let radix = pair_radix(n);
    let mut m = 1.0;
    for _ in 0..width {
        let cell = (key % radix) as usize;
        key /= radix;
        m *= c.mass(cell / n, cell % n);
        if m == 0.0 {
            break;
        }
    }
    m
}

fn iid_cells(c: &Coupling, n: usize, width: usize, budget: usize) -> Result<CellLaw> {
    let support: Vec<(u128, f64)> = c.iter().map(|(a, b, m)| ((a * n + b) as u128, m)).collect();
    let needed = (support.len() as u128).saturating_pow(width as u32);
    if needed > budget as u128 {
        return Err(Error::Budget {
            what: "exact cylinder table".into(),
            needed,
            budget: budget as u128,
        });
    }
    let radix = pair_radix(n);
    let mut law: CellLaw = BTreeMap::from([(0u128, 1.0)]);
    for _ in 0..width {
        let mut next = BTreeMap::new();
        for (&k, &m) in &law {
            for &(s, ms) in &support {
                next.insert(k * radix + s, m * ms);
            }
        }
        law = next;
    }
    Ok(law)
}

/// Truncated weak-star distance `sum_{i <= i_max} 2^-(i+1) TV_i` between the
/// laws of the pair process on `[-i, i]`.
///
/// Exact sources contribute their cylinder masses; window sources contribute
/// sliding-window frequencies over centers at least `i_max` from either end.
/// `budget` caps exact cylinder tables.
pub fn weak_star_distance(
    left: CylinderSource<'_>,
    right: CylinderSource<'_>,
    alphabet: usize,
    i_max: usize,
    budget: usize,
) -> Result<WeakStarReport> {
    use CylinderSource::*;
    let n = alphabet;
    let mut per_radius = Vec::with_capacity(i_max + 1);
    let mut stderr = 0.0;
    let mut samples = 0;
    for i in 0..=i_max {
        let width = 2 * i + 1;
        let tv = match (left, right) {
            (Iid(a), Iid(b)) => {
                let la = iid_cells(a, n, width, budget)?;
                let lb = iid_cells(b, n, width, budget)?;
                tv_maps(&la, &lb)
            }
            (Iid(c), Windows(w)) | (Windows(w), Iid(c)) => {
                let (emp, total) = empirical_cells(w, n, i, i_max)?;
                samples = total;
                stderr += 0.5f64.powi(i as i32 + 1) * emp_stderr(&emp, total);
                let mut seen = 0.0;
                let mut diff = 0.0;
                for (&k, &f) in &emp {
                    let m = iid_cell_mass(c, n, k, width);
                    seen += m;
                    diff += (m - f).abs();
                }
                0.5 * (diff + (1.0 - seen).max(0.0))
            }
            (Windows(a), Windows(b)) => {
                let (la, ta) = empirical_cells(a, n, i, i_max)?;
                let (lb, tb) = empirical_cells(b, n, i, i_max)?;
                samples = ta.min(tb);
                stderr += 0.5f64.powi(i as i32 + 1) * (emp_stderr(&la, ta) + emp_stderr(&lb, tb));
                tv_maps(&la, &lb)
            }
        };
        per_radius.push(tv);
    }
    let estimate = per_radius
        .iter()
        .enumerate()
        .map(|(i, tv)| 0.5f64.powi(i as i32 + 1) * tv)
        .sum();
    Ok(WeakStarReport {
        per_radius,
        estimate,
        stderr,
        truncation_bound: 0.5f64.powi(i_max as i32 + 1),
        samples,
    })
}

fn tv_maps(a: &CellLaw, b: &CellLaw) -> f64 {
    let mut sum = 0.0;
    for (k, &pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            sum += pb;
        }
    }
    0.5 * sum
}

fn emp_stderr(law: &CellLaw, total: usize) -> f64 {
    0.5 * law
        .values()
        .map(|&f| (f * (1.0 - f) / total as f64).sqrt())
        .sum::<f64>()
}

/// `-(1/n) log p^n(x)` in nats per symbol.
pub fn smb_rate(x: &[usize], p: &Dist) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InsufficientSamples("empty sequence".into()));
    }
    let mut acc = 0.0;
    for &s in x {
        let m = p.get(s);
        if m <= 0.0 {
            return Err(Error::NullConditioning(format!("symbol {s} has zero mass")));
        }
        acc -= m.ln();
    }
    Ok(acc / x.len() as f64)
}

/// Entropies of the conditioned block coupling's marginals and the lower
/// bound on their gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FillerEntropies {
    pub h_input: f64,
    pub h_output: f64,
    pub gap: f64,
    /// `k (H(p) - H(q)) - 2 Phi(u) - k u log N` with `u = p_a^k`.
    pub lower_bound: f64,
    /// The same expression with `+ k u log N` in place of `- k u log N`.
    pub printed_bound: f64,
}

/// Exact per-block entropies (nats) of the input and output laws of the
/// conditioned block coupling. The output law is enumerated over all `N^k`
/// blocks; `budget` caps that count.
pub fn filler_entropies(bj: &BlockJoining, budget: usize) -> Result<FillerEntropies> {
    let k = bj.cfg.k;
    let n = bj.alphabet_size();
    let blocks = (n as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if blocks > budget as u128 {
        return Err(Error::Budget {
            what: "output block enumeration".into(),
            needed: blocks,
            budget: budget as u128,
        });
    }
    let u = bj.switch_probability();
    let (hp, hq) = (bj.p.entropy(), bj.q.entropy());
    let h_input = if u > 0.0 {
        (k as f64 * hp + u * u.ln()) / (1.0 - u) + (1.0 - u).ln()
    } else {
        k as f64 * hp
    };
    // Output law: (q^k(y) - prod_i seed(a, y_i)) / (1 - u).
    let q = bj.q.probs();
    let row_a: Vec<f64> = (0..n).map(|y| bj.seed.mass(bj.cfg.a, y)).collect();
    let mut weights = Vec::with_capacity(blocks as usize);
    let mut digits = vec![0usize; k];
    loop {
        let (mut qy, mut ay) = (1.0, 1.0);
        for &d in &digits {
            qy *= q[d];
            ay *= row_a[d];
        }
        weights.push(((qy - ay) / (1.0 - u)).max(0.0));
        let mut i = k;
        while i > 0 {
            i -= 1;
            digits[i] += 1;
            if digits[i] < n {
                break;
            }
            digits[i] = 0;
        }
        if digits.iter().all(|&d| d == 0) {
            break;
        }
    }
    let h_output = entropy_of(&weights);
    let phi = binary_entropy(u)?;
    let base = k as f64 * (hp - hq) - 2.0 * phi;
    let tail = k as f64 * u * (n as f64).ln();
    Ok(FillerEntropies {
        h_input,
        h_output,
        gap: h_input - h_output,
        lower_bound: base - tail,
        printed_bound: base + tail,
    })
}

/// Smallest `k` in `[1, k_max]` at which the lower bound on the filler
/// entropy gap is positive.
pub fn gap_threshold(p: &Dist, q: &Dist, a: usize, k_max: usize) -> Option<usize> {
    let (hp, hq) = (p.entropy(), q.entropy());
    let n = p.len() as f64;
    (1..=k_max).find(|&k| {
        let u = p.get(a).powi(k as i32);
        let phi = binary_entropy(u).unwrap_or(f64::INFINITY);
        k as f64 * (hp - hq) - 2.0 * phi - k as f64 * u * n.ln() > 0.0
    })
}
