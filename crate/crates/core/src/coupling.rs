//! Finite couplings on ordered product alphabets.
//!
//! A [`Coupling`] is a sparse probability mass function on `A x B` where both
//! `A` and `B` are [`Alphabet`]s: mixed-radix products of finite ordered sets
//! enumerated in lexicographic order. Plain alphabets `[N]` have a single
//! radix; block alphabets `[N]^k` have `k` equal radices, so that block index
//! order coincides with the lexicographic order on words.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dist::{Dist, Relation};
use crate::error::{Error, Result};

/// Tolerance on total mass when a coupling is constructed.
pub const MASS_TOL: f64 = 1e-10;
/// Entries at or below this value are dropped during cycle cancellation.
pub const ZERO_MASS: f64 = 1e-14;

/// Ordered finite product alphabet `R_0 x R_1 x ... x R_{m-1}` with the
/// lexicographic order (first coordinate most significant).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Alphabet {
    radices: Vec<usize>,
    size: usize,
}

/// Words of length `length` over `[base]`.
pub type BlockAlphabet = Alphabet;

impl Alphabet {
    pub fn new(radices: Vec<usize>) -> Result<Self> {
        if radices.is_empty() || radices.contains(&0) {
            return Err(Error::OutOfRange(format!("alphabet radices {radices:?}")));
        }
        let mut size: usize = 1;
        for &r in &radices {
            size = size.checked_mul(r).ok_or_else(|| Error::Budget {
                what: "alphabet cardinality".into(),
                needed: radices.iter().map(|&r| r as u128).product(),
                budget: usize::MAX as u128,
            })?;
        }
        Ok(Self { radices, size })
    }

    /// The plain alphabet `[n]`.
    pub fn flat(n: usize) -> Self {
        Self::new(vec![n]).expect("nonzero flat alphabet")
    }

    /// Block alphabet `[base]^length`, identified with `[base^length]`.
    pub fn blocks(base: usize, length: usize) -> Result<Self> {
        Self::new(vec![base; length])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Number of coordinates.
    pub fn len(&self) -> usize {
        self.radices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radices.is_empty()
    }

    /// Digits of `index`, most significant first.
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = index % r;
            index /= r;
        }
        out
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&d, &r)| acc * r + d)
    }

    /// Lexicographically ordered product `self x other`; the index of
    /// `(a, b)` is `a * other.size() + b`.
    pub fn concat(&self, other: &Alphabet) -> Result<Alphabet> {
        let mut radices = self.radices.clone();
        radices.extend_from_slice(&other.radices);
        Alphabet::new(radices)
    }

    pub fn power(&self, m: usize) -> Result<Alphabet> {
        if m == 0 {
            return Err(Error::OutOfRange("zero power of an alphabet".into()));
        }
        Alphabet::new(self.radices.repeat(m))
    }

    /// The common radix when every coordinate has the same one.
    pub fn uniform_base(&self) -> Option<usize> {
        let first = self.radices[0];
        self.radices.iter().all(|&r| r == first).then_some(first)
    }
}

/// Sparse probability mass on `rows x cols`; stored entries are strictly
/// positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Coupling {
    rows: Alphabet,
    cols: Alphabet,
    mass: BTreeMap<(usize, usize), f64>,
}

impl Coupling {
    /// Build from entries; duplicates accumulate, zeros are dropped, and the
    /// total must be 1 within [`MASS_TOL`].
    pub fn new(
        rows: Alphabet,
        cols: Alphabet,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let (mass, total) = Self::collect(&rows, &cols, entries)?;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidCoupling(format!("total mass {total}")));
        }
        Ok(Self { rows, cols, mass })
    }

    fn collect(
        rows: &Alphabet,
        cols: &Alphabet,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<(BTreeMap<(usize, usize), f64>, f64)> {
        let mut mass = BTreeMap::new();
        let mut total = 0.0;
        for (a, b, m) in entries {
            if a >= rows.size() || b >= cols.size() {
                return Err(Error::InvalidCoupling(format!(
                    "pair ({a}, {b}) outside {}x{}",
                    rows.size(),
                    cols.size()
                )));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidCoupling(format!("mass {m} at ({a}, {b})")));
            }
            if m > 0.0 {
                *mass.entry((a, b)).or_insert(0.0) += m;
                total += m;
            }
        }
        Ok((mass, total))
    }

    /// Build from arbitrary nonnegative weights with positive total.
    pub fn normalized(
        rows: Alphabet,
        cols: Alphabet,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let (mut mass, total) = Self::collect(&rows, &cols, entries)?;
        if total <= 0.0 {
            return Err(Error::NullConditioning("all weights are zero".into()));
        }
        for v in mass.values_mut() {
            *v /= total;
        }
        Ok(Self { rows, cols, mass })
    }

    /// Diagonal coupling of `p` with itself.
    pub fn diagonal(p: &Dist) -> Self {
        let a = Alphabet::flat(p.len());
        Self::new(
            a.clone(),
            a,
            p.probs().iter().enumerate().map(|(i, &m)| (i, i, m)),
        )
        .expect("diagonal of a valid distribution")
    }

    /// Independent coupling `p (x) q`.
    pub fn product_of(p: &Dist, q: &Dist) -> Self {
        let entries = p.probs().iter().enumerate().flat_map(|(a, &pa)| {
            q.probs()
                .iter()
                .enumerate()
                .map(move |(b, &qb)| (a, b, pa * qb))
        });
        Self::new(Alphabet::flat(p.len()), Alphabet::flat(q.len()), entries)
            .expect("product of valid distributions")
    }

    pub fn rows(&self) -> &Alphabet {
        &self.rows
    }

    pub fn cols(&self) -> &Alphabet {
        &self.cols
    }

    pub fn mass(&self, a: usize, b: usize) -> f64 {
        self.mass.get(&(a, b)).copied().unwrap_or(0.0)
    }

    /// Support entries in `(row, col)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.mass.iter().map(|(&(a, b), &m)| (a, b, m))
    }

    pub fn support_len(&self) -> usize {
        self.mass.len()
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    pub fn row_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.rows.size()];
        for (&(a, _), &m) in &self.mass {
            w[a] += m;
        }
        w
    }

    pub fn col_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.cols.size()];
        for (&(_, b), &m) in &self.mass {
            w[b] += m;
        }
        w
    }

    /// Row and column marginals.
    pub fn marginals(&self) -> (Dist, Dist) {
        (
            Dist::from_weights(self.row_weights()).expect("row marginal"),
            Dist::from_weights(self.col_weights()).expect("column marginal"),
        )
    }

    /// Swap the roles of rows and columns.
    pub fn transpose(&self) -> Coupling {
        Coupling {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            mass: self.mass.iter().map(|(&(a, b), &m)| ((b, a), m)).collect(),
        }
    }

    /// Condition on the row set selected by `keep`.
    pub fn condition_rows(&self, keep: impl Fn(usize) -> bool) -> Result<Coupling> {
        let kept: Vec<_> = self.iter().filter(|&(a, _, _)| keep(a)).collect();
        if kept.iter().map(|e| e.2).sum::<f64>() <= 0.0 {
            return Err(Error::NullConditioning("row event has zero mass".into()));
        }
        Coupling::normalized(self.rows.clone(), self.cols.clone(), kept)
    }

    /// True iff every support pair satisfies `a >= b` coordinatewise.
    pub fn is_monotone(&self) -> Result<bool> {
        if self.rows.radices() != self.cols.radices() {
            return Err(Error::Incomparable(format!(
                "{:?} vs {:?}",
                self.rows.radices(),
                self.cols.radices()
            )));
        }
        if self.rows.len() == 1 {
            return Ok(self.mass.keys().all(|&(a, b)| a >= b));
        }
        Ok(self.mass.keys().all(|&(a, b)| {
            self.rows
                .decode(a)
                .iter()
                .zip(self.cols.decode(b))
                .all(|(x, y)| *x >= y)
        }))
    }

    /// True iff every support pair lies in `relation` coordinatewise.
    pub fn respects_relation(&self, relation: &Relation) -> Result<bool> {
        let n = relation.n();
        let ok_shape = |a: &Alphabet| a.radices().iter().all(|&r| r == n);
        if !ok_shape(&self.rows) || !ok_shape(&self.cols) || self.rows.len() != self.cols.len() {
            return Err(Error::Incomparable(format!(
                "relation on [{n}] vs alphabets {:?} / {:?}",
                self.rows.radices(),
                self.cols.radices()
            )));
        }
        Ok(self.mass.keys().all(|&(a, b)| {
            self.rows
                .decode(a)
                .iter()
                .zip(self.cols.decode(b))
                .all(|(&x, y)| relation.contains(x, y))
        }))
    }

    /// True iff `support(self)` is contained in `support(coarse)`.
    pub fn is_subordinate(&self, coarse: &Coupling) -> Result<bool> {
        self.same_alphabets(coarse)?;
        Ok(self.mass.keys().all(|k| coarse.mass.contains_key(k)))
    }

    fn same_alphabets(&self, other: &Coupling) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::AlphabetMismatch {
                left: self.rows.size() * self.cols.size(),
                right: other.rows.size() * other.cols.size(),
            });
        }
        Ok(())
    }

    /// Rows carrying positive mass to at least two distinct columns of
    /// `subset`.
    pub fn split_elements(&self, subset: &BTreeSet<usize>) -> Result<BTreeSet<usize>> {
        if let Some(&b) = subset.iter().find(|&&b| b >= self.cols.size()) {
            return Err(Error::OutOfRange(format!("column {b} not in alphabet")));
        }
        let mut count: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, b) in self.mass.keys() {
            if subset.contains(&b) {
                *count.entry(a).or_insert(0) += 1;
            }
        }
        Ok(count
            .into_iter()
            .filter(|&(_, c)| c >= 2)
            .map(|(a, _)| a)
            .collect())
    }

    /// Independent product `self (x) other` on the concatenated alphabets.
    pub fn product(&self, other: &Coupling, budget: usize) -> Result<Coupling> {
        let needed = self.mass.len() as u128 * other.mass.len() as u128;
        if needed > budget as u128 {
            return Err(Error::Budget {
                what: "product coupling support".into(),
                needed,
                budget: budget as u128,
            });
        }
        let rows = self.rows.concat(&other.rows)?;
        let cols = self.cols.concat(&other.cols)?;
        let (rs, cs) = (other.rows.size(), other.cols.size());
        let mut mass = BTreeMap::new();
        for (&(a1, b1), &m1) in &self.mass {
            for (&(a2, b2), &m2) in &other.mass {
                mass.insert((a1 * rs + a2, b1 * cs + b2), m1 * m2);
            }
        }
        Ok(Coupling { rows, cols, mass })
    }

    /// Largest absolute difference of cell masses; infinite when the
    /// alphabets differ.
    pub fn max_abs_diff(&self, other: &Coupling) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.mass
            .keys()
            .chain(other.mass.keys())
            .map(|&(a, b)| (self.mass(a, b) - other.mass(a, b)).abs())
            .fold(0.0, f64::max)
    }

    /// Serialise as sparse `a b mass` triplets preceded by a header comment.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        let fmt = |r: &[usize]| {
            r.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(
            out,
            "# rows={} cols={}",
            fmt(self.rows.radices()),
            fmt(self.cols.radices())
        );
        for (&(a, b), &m) in &self.mass {
            let _ = writeln!(out, "{a} {b} {m:?}");
        }
        out
    }

    /// Inverse of [`Coupling::to_triplets`].
    pub fn from_triplets(text: &str) -> Result<Coupling> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty coupling file".into()))?;
        let parse_radices = |s: &str| -> Result<Alphabet> {
            let r = s
                .split(',')
                .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            Alphabet::new(r)
        };
        let mut rows = None;
        let mut cols = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("rows=") {
                rows = Some(parse_radices(v)?);
            } else if let Some(v) = tok.strip_prefix("cols=") {
                cols = Some(parse_radices(v)?);
            }
        }
        let (rows, cols) = rows
            .zip(cols)
            .ok_or_else(|| Error::Parse(format!("bad header {header:?}")))?;
        let mut entries = Vec::new();
        for line in lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::Parse(format!("bad triplet {line:?}")));
            }
            let perr = |e: &dyn std::fmt::Display| Error::Parse(format!("{line:?}: {e}"));
            entries.push((
                toks[0].parse::<usize>().map_err(|e| perr(&e))?,
                toks[1].parse::<usize>().map_err(|e| perr(&e))?,
                toks[2].parse::<f64>().map_err(|e| perr(&e))?,
            ));
        }
        Coupling::new(rows, cols, entries)
    }
}

/// Quantile-interval overlaps at or below this length are treated as zero.
pub const ROUNDING_OVERLAP: f64 = 1e-14;

/// Overlap lengths of the quantile intervals of two ordered weight lists.
///
/// Each list holds `(symbol, weight)` in increasing symbol order; weights are
/// normalised by their totals so both partition `[0, 1)`. Returns
/// `(a, b, len)` for every pair of intervals overlapping by more than
/// [`ROUNDING_OVERLAP`]; shorter overlaps come from rounding at interval ends.
pub(crate) fn quantile_overlaps(
    left: &[(usize, f64)],
    right: &[(usize, f64)],
) -> Vec<(usize, usize, f64)> {
    let cum = |w: &[(usize, f64)]| -> Vec<(usize, f64, f64)> {
        let w: Vec<_> = w.iter().copied().filter(|e| e.1 > 0.0).collect();
        let total: f64 = w.iter().map(|e| e.1).sum();
        let mut acc = 0.0;
        let n = w.len();
        w.iter()
            .enumerate()
            .map(|(i, &(s, m))| {
                let lo = acc;
                acc += m;
                let hi = if i + 1 == n { 1.0 } else { acc / total };
                (s, lo / total, hi)
            })
            .collect()
    };
    let (l, r) = (cum(left), cum(right));
    let mut out = Vec::with_capacity(l.len() + r.len());
    let (mut i, mut j) = (0, 0);
    while i < l.len() && j < r.len() {
        let (a, alo, ahi) = l[i];
        let (b, blo, bhi) = r[j];
        let len = ahi.min(bhi) - alo.max(blo);
        if len > ROUNDING_OVERLAP {
            out.push((a, b, len));
        }
        if ahi <= bhi {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Quantile coupling of `p` and `q`: both generalised inverse distribution
/// functions applied to one shared uniform variable.
pub fn quantile_coupling(p: &Dist, q: &Dist) -> Coupling {
    let w = |d: &Dist| d.probs().iter().copied().enumerate().collect::<Vec<_>>();
    let overlaps = quantile_overlaps(&w(p), &w(q));
    Coupling::normalized(Alphabet::flat(p.len()), Alphabet::flat(q.len()), overlaps)
        .expect("quantile coupling of valid distributions")
}

/// The `m`-fold independent product of `c` over lexicographically ordered
/// block alphabets.
pub fn product_power(c: &Coupling, m: usize, budget: usize) -> Result<Coupling> {
    if m == 0 {
        return Err(Error::OutOfRange("product power needs m >= 1".into()));
    }
    let needed = (c.support_len() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > budget as u128 {
        return Err(Error::Budget {
            what: format!("product power ({m}-fold)"),
            needed,
            budget: budget as u128,
        });
    }
    let mut acc = c.clone();
    for _ in 1..m {
        acc = acc.product(c, budget)?;
    }
    Ok(acc)
}

/// Refine `alpha` so that at most `|subset| - 1` rows are split in `subset`,
/// keeping both marginals and staying subordinate to `alpha`.
///
/// Cycles in the bipartite support graph on (rows, columns of `subset`) are
/// cancelled one at a time by shifting mass alternately along the cycle until
/// an edge vanishes. The resulting support graph restricted to `subset` is a
/// forest, which bounds the number of split rows.
pub fn marriage_refine(alpha: &Coupling, subset: &BTreeSet<usize>) -> Result<Coupling> {
    if let Some(&b) = subset.iter().find(|&&b| b >= alpha.cols.size()) {
        return Err(Error::OutOfRange(format!("column {b} not in alphabet")));
    }
    let mut mass = alpha.mass.clone();
    while let Some(cycle) = find_cycle(&mass, subset) {
        // Edges at even positions gain, odd positions lose.
        let (pos, shift) = cycle
            .iter()
            .enumerate()
            .filter(|(i, _)| i % 2 == 1)
            .map(|(i, e)| (i, mass[e]))
            .fold((usize::MAX, f64::INFINITY), |best, (i, m)| {
                if m < best.1 {
                    (i, m)
                } else {
                    best
                }
            });
        for (i, e) in cycle.iter().enumerate() {
            if i == pos {
                mass.remove(e);
            } else if i % 2 == 0 {
                *mass.get_mut(e).expect("cycle edge") += shift;
            } else {
                let v = mass.get_mut(e).expect("cycle edge");
                *v -= shift;
                if *v <= ZERO_MASS {
                    mass.remove(e);
                }
            }
        }
    }
    Ok(Coupling {
        rows: alpha.rows.clone(),
        cols: alpha.cols.clone(),
        mass,
    })
}

/// First cycle (lowest-index edge order) in the support graph restricted to
/// columns in `subset`, as an edge list in cycle order.
fn find_cycle(
    mass: &BTreeMap<(usize, usize), f64>,
    subset: &BTreeSet<usize>,
) -> Option<Vec<(usize, usize)>> {
    // Nodes: rows as `2a`, columns as `2b + 1`.
    let row = |a: usize| 2 * a;
    let col = |b: usize| 2 * b + 1;
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    fn find(parent: &mut BTreeMap<usize, usize>, x: usize) -> usize {
        let p = *parent.entry(x).or_insert(x);
        if p == x {
            return x;
        }
        let r = find(parent, p);
        parent.insert(x, r);
        r
    }
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in mass.keys().filter(|(_, b)| subset.contains(b)) {
        let (u, v) = (row(a), col(b));
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            // Path v -> u in the current forest closes the cycle with (u, v).
            let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
            prev.insert(v, v);
            let mut queue = VecDeque::from([v]);
            while let Some(w) = queue.pop_front() {
                if w == u {
                    break;
                }
                for &z in adj.get(&w).map(Vec::as_slice).unwrap_or(&[]) {
                    if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(z) {
                        e.insert(w);
                        queue.push_back(z);
                    }
                }
            }
            let mut nodes = vec![u];
            let mut w = u;
            while w != v {
                w = prev[&w];
                nodes.push(w);
            }
            // nodes: u -> ... -> v along the forest; close with (v, u).
            let edge = |x: usize, y: usize| {
                if x.is_multiple_of(2) {
                    (x / 2, (y - 1) / 2)
                } else {
                    (y / 2, (x - 1) / 2)
                }
            };
            let mut cycle = vec![(a, b)];
            for pair in nodes.windows(2) {
                cycle.push(edge(pair[0], pair[1]));
            }
            return Some(cycle);
        }
        parent.insert(ru, rv);
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> Dist {
        Dist::new(v.to_vec()).unwrap()
    }

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn alphabet_lexicographic_encoding() {
        let a = Alphabet::blocks(3, 2).unwrap();
        assert_eq!(a.size(), 9);
        assert_eq!(a.decode(5), vec![1, 2]);
        assert_eq!(a.encode(&[2, 1]), 7);
        let b = a.concat(&Alphabet::flat(3)).unwrap();
        assert_eq!(b.decode(5 * 3 + 2), vec![1, 2, 2]);
    }

    #[test]
    fn quantile_identical_is_diagonal() {
        let p = d(&[0.2, 0.5, 0.3]);
        assert!(quantile_coupling(&p, &p).max_abs_diff(&Coupling::diagonal(&p)) < 1e-15);
    }

    #[test]
    fn quantile_two_by_two() {
        let c = quantile_coupling(&d(&[0.5, 0.5]), &d(&[2.0 / 3.0, 1.0 / 3.0]));
        assert_eq!(c.support_len(), 3);
        assert!((c.mass(0, 0) - 0.5).abs() < 1e-15);
        assert!((c.mass(1, 0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((c.mass(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!(c.is_monotone().unwrap());
        assert_eq!(c.split_elements(&set(&[0, 1])).unwrap(), set(&[1]));
        assert!(c.split_elements(&set(&[1])).unwrap().is_empty());
        let (p, q) = c.marginals();
        assert!((p.probs()[0] - 0.5).abs() < 1e-15);
        assert!((q.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_violation_detected() {
        let a = Alphabet::flat(2);
        let c = Coupling::new(a.clone(), a, [(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        assert!(!c.is_monotone().unwrap());
    }

    #[test]
    fn incomparable_alphabets_rejected() {
        let c = Coupling::new(Alphabet::flat(2), Alphabet::flat(3), [(0, 0, 1.0)]).unwrap();
        assert!(matches!(c.is_monotone(), Err(Error::Incomparable(_))));
    }

    #[test]
    fn subordination() {
        let p = d(&[0.5, 0.5]);
        let diag = Coupling::diagonal(&p);
        let prod = Coupling::product_of(&p, &p);
        assert!(diag.is_subordinate(&diag).unwrap());
        assert!(diag.is_subordinate(&prod).unwrap());
        assert!(!prod.is_subordinate(&diag).unwrap());
    }

    #[test]
    fn split_elements_rejects_foreign_columns() {
        let c = Coupling::diagonal(&d(&[0.5, 0.5]));
        assert!(c.split_elements(&set(&[2])).is_err());
        assert!(c.split_elements(&set(&[0, 1])).unwrap().is_empty());
    }

    #[test]
    fn marriage_refine_uniform_product() {
        let p = d(&[0.5, 0.5]);
        let alpha = Coupling::product_of(&p, &p);
        let refined = marriage_refine(&alpha, &set(&[0, 1])).unwrap();
        assert!(refined.is_subordinate(&alpha).unwrap());
        assert!(refined.split_elements(&set(&[0, 1])).unwrap().len() <= 1);
        let (r, c) = refined.marginals();
        for i in 0..2 {
            assert!((r.probs()[i] - 0.5).abs() < 1e-12);
            assert!((c.probs()[i] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn marriage_refine_acyclic_is_identity() {
        let c = quantile_coupling(&d(&[0.2, 0.3, 0.5]), &d(&[0.6, 0.3, 0.1]));
        assert_eq!(marriage_refine(&c, &set(&[0, 1, 2])).unwrap(), c);
    }

    #[test]
    fn product_power_two_by_two() {
        let c = quantile_coupling(&d(&[0.5, 0.5]), &d(&[2.0 / 3.0, 1.0 / 3.0]));
        let c2 = product_power(&c, 2, 1000).unwrap();
        assert_eq!(c2.support_len(), 9);
        // (x, y) = ((1,1), (1,0)) -> 1/3 * 1/6.
        assert!((c2.mass(3, 2) - 1.0 / 18.0).abs() < 1e-15);
        assert!(c2.is_monotone().unwrap());
        assert_eq!(product_power(&c, 1, 10).unwrap(), c);
        assert!(matches!(product_power(&c, 3, 26), Err(Error::Budget { .. })));
    }

    #[test]
    fn triplets_round_trip() {
        let c = quantile_coupling(&d(&[0.5, 0.5]), &d(&[2.0 / 3.0, 1.0 / 3.0]));
        let c2 = product_power(&c, 2, 100).unwrap();
        let text = c2.to_triplets();
        assert!(text.starts_with("# rows=2,2 cols=2,2\n"));
        assert_eq!(Coupling::from_triplets(&text).unwrap(), c2);
    }
}
