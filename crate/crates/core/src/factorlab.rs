//! The almost-factor pipeline: good sets, the initial-block coupling, the
//! block map extracted from exact iterated star-couplings, the resampled
//! alternating joining and the parameter search.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{marriage_refine, product_power, Coupling};
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::stats::Estimate;

mod pipeline;
mod search;

pub use pipeline::{
    almost_factor_test, block_stats, AlmostFactorReport, BlockStats, FactorWindow, Pipeline,
};
pub use search::{
    choose_parameters, collision_rate, psi_checks, run_factor, weak_star_ball_bound, Constraint,
    FactorProblem, FactorReport, N0Rule, PsiCheck, RunConfig, SearchConfig, SearchOutcome,
    SearchStep,
};

/// Parameters of the almost-factor construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Params {
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub k: usize,
    pub n0: usize,
    pub n_rel: usize,
    pub k_super: usize,
    pub eta: f64,
    pub smb_eps: f64,
    pub delta: f64,
    pub h_gap: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Precondition(format!("delta = {} must be positive", self.delta)));
        }
        if self.n_rel <= self.n0 {
            return Err(Error::Precondition("n_rel must exceed n0".into()));
        }
        if (self.epsilon_prime - self.epsilon / 10.0).abs() > 1e-15 {
            return Err(Error::Precondition("epsilon' must equal epsilon / 10".into()));
        }
        Ok(())
    }
}

/// Which side of the typical-measure window a good block sequence lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Good iff the prefix measure is below `exp(-(h - eps) L)`.
    Upper,
    /// Good iff the prefix measure is above `exp(-(h + eps) L)`.
    Lower,
}

/// Good-set test for sequences of i.i.d. blocks.
#[derive(Debug, Clone)]
pub struct GoodSetOracle {
    log_mass: Vec<f64>,
    entropy: f64,
    smb_eps: f64,
    direction: Direction,
}

impl GoodSetOracle {
    pub fn new(block_law: &Dist, smb_eps: f64, direction: Direction) -> Self {
        Self {
            log_mass: block_law.probs().iter().map(|m| m.ln()).collect(),
            entropy: block_law.entropy(),
            smb_eps,
            direction,
        }
    }

    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    fn passes(&self, log_prefix: f64, len: usize) -> bool {
        let l = len as f64;
        match self.direction {
            Direction::Upper => log_prefix < -(self.entropy - self.smb_eps) * l,
            Direction::Lower => log_prefix > -(self.entropy + self.smb_eps) * l,
        }
    }

    /// Test the whole sequence.
    pub fn is_good(&self, blocks: &[usize]) -> bool {
        let s: f64 = blocks.iter().map(|&b| self.log_mass[b]).sum();
        self.passes(s, blocks.len())
    }

    /// Test every prefix of length at least `n0`.
    pub fn completely_good(&self, blocks: &[usize], n0: usize) -> bool {
        let mut s = 0.0;
        for (i, &b) in blocks.iter().enumerate() {
            s += self.log_mass[b];
            if i + 1 >= n0 && !self.passes(s, i + 1) {
                return false;
            }
        }
        true
    }

    /// Exact probability that an i.i.d. sequence of `len` blocks is
    /// completely good from `n0` on. `budget` caps the enumeration size.
    pub fn coverage(&self, n0: usize, len: usize, budget: usize) -> Result<f64> {
        let support: Vec<(usize, f64)> = self
            .log_mass
            .iter()
            .copied()
            .enumerate()
            .filter(|e| e.1 > f64::NEG_INFINITY)
            .collect();
        let needed = (support.len() as u128).saturating_pow(len as u32);
        if needed > budget as u128 {
            return Err(Error::Budget {
                what: "good-set enumeration".into(),
                needed,
                budget: budget as u128,
            });
        }
        fn walk(
            o: &GoodSetOracle,
            support: &[(usize, f64)],
            depth: usize,
            log_prefix: f64,
            n0: usize,
            len: usize,
        ) -> f64 {
            if depth >= n0 && depth > 0 && !o.passes(log_prefix, depth) {
                return 0.0;
            }
            if depth == len {
                return log_prefix.exp();
            }
            support
                .iter()
                .map(|&(_, lm)| walk(o, support, depth + 1, log_prefix + lm, n0, len))
                .sum()
        }
        Ok(walk(self, &support, 0, 0.0, n0, len))
    }

    /// Monte Carlo version of [`GoodSetOracle::coverage`].
    pub fn coverage_sampled<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n0: usize,
        len: usize,
        samples: usize,
    ) -> Estimate {
        let law: Vec<f64> = self.log_mass.iter().map(|l| l.exp()).collect();
        let table = crate::star::CdfTable::new(law.iter().copied().enumerate())
            .expect("block law has mass");
        let mut hits = 0;
        let mut seq = vec![0; len];
        for _ in 0..samples {
            for b in seq.iter_mut() {
                *b = table.sample(rng);
            }
            if self.completely_good(&seq, n0) {
                hits += 1;
            }
        }
        Estimate::proportion(hits, samples)
    }
}

/// Completely-good test on a block sequence; prefixes of length `n0` and
/// longer are checked.
pub fn completely_good(oracle: &GoodSetOracle, blocks: &[usize], n0: usize) -> bool {
    oracle.completely_good(blocks, n0)
}

/// Base-`m` digits of `index`, most significant first, padded to `len`.
pub fn block_digits(mut index: usize, m: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for d in out.iter_mut().rev() {
        *d = index % m;
        index /= m;
    }
    out
}

/// The initial-block coupling and the good output set it was refined on.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialBlock {
    pub beta: Coupling,
    pub good_outputs: BTreeSet<usize>,
    pub split: usize,
}

/// Refine the `n0`-fold power of `gamma` so that at most `|good| - 1`
/// inputs are split among the good outputs of the initial block.
pub fn build_beta(
    gamma: &Coupling,
    n0: usize,
    output_oracle: &GoodSetOracle,
    budget: usize,
) -> Result<InitialBlock> {
    let alpha = product_power(gamma, n0, budget)?;
    let m = gamma.cols().size();
    let good_outputs: BTreeSet<usize> = alpha
        .col_weights()
        .iter()
        .enumerate()
        .filter(|&(y, &w)| w > 0.0 && output_oracle.is_good(&block_digits(y, m, n0)))
        .map(|(y, _)| y)
        .collect();
    let beta = marriage_refine(&alpha, &good_outputs)?;
    let split = beta.split_elements(&good_outputs)?.len();
    Ok(InitialBlock {
        beta,
        good_outputs,
        split,
    })
}

/// Deterministic block map read off an exact iterated star-coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PsiTable {
    /// Number of blocks `n0 + j` in each input.
    pub blocks: usize,
    /// Desirable inputs and their images; all other inputs map to block 0.
    pub map: BTreeMap<usize, usize>,
    pub desirable_mass: f64,
    /// `P(Y = Psi(X))` under the coupling.
    pub hit_probability: f64,
    pub input_not_cg: f64,
    pub output_not_cg: f64,
}

impl PsiTable {
    pub fn apply(&self, x: usize) -> usize {
        self.map.get(&x).copied().unwrap_or(0)
    }
}

/// Extract the block map from `w`, the exact iterated star-coupling on
/// `n0 + j` blocks of `m` symbols each. `good_initial` is the set of good
/// initial output blocks used to build the initial-block coupling.
pub fn extract_psi(
    w: &Coupling,
    input_oracle: &GoodSetOracle,
    output_oracle: &GoodSetOracle,
    n0: usize,
    m: usize,
    good_initial: &BTreeSet<usize>,
) -> Result<PsiTable> {
    let total_blocks = w.rows().len() / block_width(m, w)?;
    if total_blocks < n0 {
        return Err(Error::OutOfRange("coupling shorter than the initial block".into()));
    }
    let j = total_blocks - n0;
    let tail = m.checked_pow(j as u32).ok_or_else(|| Error::Budget {
        what: "block index".into(),
        needed: u128::MAX,
        budget: usize::MAX as u128,
    })?;
    let in_j = |y: usize| good_initial.contains(&(y / tail));

    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (x, y, mass) in w.iter() {
        rows.entry(x).or_default().push((y, mass));
    }
    let mut output_cg: BTreeMap<usize, bool> = BTreeMap::new();
    let mut output_not_cg = 0.0;
    for (y, wy) in w.col_weights().into_iter().enumerate() {
        if wy > 0.0 {
            let cg = output_oracle.completely_good(&block_digits(y, m, total_blocks), n0);
            if !cg {
                output_not_cg += wy;
            }
            output_cg.insert(y, cg);
        }
    }

    let mut map = BTreeMap::new();
    let (mut desirable_mass, mut input_not_cg, mut hit) = (0.0, 0.0, 0.0);
    for (&x, entries) in &rows {
        let px: f64 = entries.iter().map(|e| e.1).sum();
        let x_cg = input_oracle.completely_good(&block_digits(x, m, total_blocks), n0);
        if !x_cg {
            input_not_cg += px;
        }
        let partners: Vec<usize> = entries.iter().map(|e| e.0).filter(|&y| in_j(y)).collect();
        let desirable = x_cg && partners.len() == 1 && output_cg[&partners[0]];
        let image = if desirable {
            desirable_mass += px;
            map.insert(x, partners[0]);
            partners[0]
        } else {
            0
        };
        hit += entries
            .iter()
            .filter(|e| e.0 == image)
            .map(|e| e.1)
            .sum::<f64>();
    }
    Ok(PsiTable {
        blocks: total_blocks,
        map,
        desirable_mass,
        hit_probability: hit,
        input_not_cg,
        output_not_cg,
    })
}

/// Number of symbol coordinates per block of a block alphabet of size `m`
/// whose symbols come from `w`'s radices.
fn block_width(m: usize, w: &Coupling) -> Result<usize> {
    let n = w
        .rows()
        .uniform_base()
        .ok_or_else(|| Error::Incomparable("block alphabet must have one radix".into()))?;
    let mut width = 0;
    let mut size = 1usize;
    while size < m {
        size = size.saturating_mul(n);
        width += 1;
    }
    if size != m || width == 0 {
        return Err(Error::OutOfRange(format!("{m} is not a power of {n}")));
    }
    if !w.rows().len().is_multiple_of(width) {
        return Err(Error::OutOfRange("coupling length is not a whole number of blocks".into()));
    }
    Ok(width)
}

/// Upper bound on the non-desirable mass after `j` star steps:
/// `P(X not cg) + P(Y not cg) + e^(-delta n0) + m sum_{i<j} e^(-delta (n0 + i))`.
pub fn desirable_bound(
    input_not_cg: f64,
    output_not_cg: f64,
    delta: f64,
    n0: usize,
    j: usize,
    m: usize,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!("delta = {delta} must be positive")));
    }
    let tail: f64 = (0..j).map(|i| (-delta * (n0 + i) as f64).exp()).sum();
    Ok(input_not_cg + output_not_cg + (-delta * n0 as f64).exp() + m as f64 * tail)
}

/// `m * sum_{i >= n0} e^(-delta i)`.
pub fn pile_tail(delta: f64, n0: usize, m: usize) -> f64 {
    m as f64 * (-delta * n0 as f64).exp() / (1.0 - (-delta).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::Alphabet;

    #[test]
    fn uniform_blocks_are_always_good() {
        let o = GoodSetOracle::new(&Dist::uniform(4), 0.01, Direction::Upper);
        assert!(o.completely_good(&[0, 3, 2, 1, 1], 1));
        let o = GoodSetOracle::new(&Dist::uniform(4), 0.01, Direction::Lower);
        assert!(o.completely_good(&[0, 3, 2, 1, 1], 1));
        assert!((o.coverage(1, 4, 1000).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_input_is_good() {
        // Measure 1 against the threshold e^{eps L} > 1.
        let o = GoodSetOracle::new(&Dist::point(2, 0), 0.1, Direction::Upper);
        assert!(completely_good(&o, &[0, 0, 0], 1));
        let o = GoodSetOracle::new(&Dist::point(2, 0), 0.0, Direction::Upper);
        assert!(!completely_good(&o, &[0, 0, 0], 1));
    }

    #[test]
    fn digits_are_lexicographic() {
        assert_eq!(block_digits(7, 3, 3), vec![0, 2, 1]);
        assert_eq!(block_digits(0, 4, 2), vec![0, 0]);
    }

    #[test]
    fn diagonal_beta_is_the_power() {
        let g = Coupling::diagonal(&Dist::new(vec![0.5, 0.25, 0.25]).unwrap());
        let o = GoodSetOracle::new(&g.marginals().1, 0.2, Direction::Lower);
        let ib = build_beta(&g, 2, &o, 1000).unwrap();
        assert_eq!(ib.beta, product_power(&g, 2, 1000).unwrap());
        assert_eq!(ib.split, 0);
    }

    #[test]
    fn constant_output_gives_constant_map() {
        // Outputs are always block 0.
        let rows = Alphabet::flat(3);
        let w = Coupling::new(rows.clone(), rows, [(0, 0, 0.2), (1, 0, 0.3), (2, 0, 0.5)]).unwrap();
        let law_x = Dist::new(vec![0.2, 0.3, 0.5]).unwrap();
        let ox = GoodSetOracle::new(&law_x, 0.1, Direction::Upper);
        let oy = GoodSetOracle::new(&Dist::point(3, 0), 0.1, Direction::Lower);
        let psi = extract_psi(&w, &ox, &oy, 1, 3, &BTreeSet::from([0])).unwrap();
        assert!((psi.hit_probability - 1.0).abs() < 1e-12);
        assert!(psi.map.values().all(|&y| y == 0));
    }

    #[test]
    fn desirable_bound_base_case() {
        let b = desirable_bound(0.0, 0.0, 0.5, 4, 0, 9).unwrap();
        assert!((b - (-2.0f64).exp()).abs() < 1e-15);
        assert!(desirable_bound(0.0, 0.0, 0.0, 4, 0, 9).is_err());
    }
}
