//! Sampling the resampled alternating joining and measuring it.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{block_digits, build_beta, Direction, GoodSetOracle, InitialBlock, Params};
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::process::{
    decompose, sample_alternating, BlockJoining, IntervalDecomposition, ProcessWindow,
};
use crate::star::IterativeStarSampler;
use crate::stats::Estimate;

/// Everything needed to sample the resampled joining for fixed parameters.
#[derive(Debug, Clone)]
pub struct Pipeline {
    joining: BlockJoining,
    gamma: Coupling,
    initial: InitialBlock,
    sampler: IterativeStarSampler,
    params: Params,
}

/// A sampled window before and after resampling its action blocks.
#[derive(Debug, Clone)]
pub struct FactorWindow {
    pub original: ProcessWindow,
    pub resampled: ProcessWindow,
    pub decomposition: Option<IntervalDecomposition>,
    pub action_blocks: usize,
    pub resampled_intervals: usize,
}

impl Pipeline {
    pub fn new(joining: BlockJoining, params: Params, budget: usize) -> Result<Self> {
        params.validate()?;
        if joining.cfg().k != params.k {
            return Err(Error::Precondition("block length differs from params".into()));
        }
        let gamma = joining.conditioned_block_coupling(budget)?;
        let output_oracle =
            GoodSetOracle::new(&gamma.marginals().1, params.smb_eps, Direction::Lower);
        let initial = build_beta(&gamma, params.n0, &output_oracle, budget)?;
        let sampler = IterativeStarSampler::new(&initial.beta, &gamma)?;
        Ok(Self {
            joining,
            gamma,
            initial,
            sampler,
            params,
        })
    }

    pub fn joining(&self) -> &BlockJoining {
        &self.joining
    }

    pub fn gamma(&self) -> &Coupling {
        &self.gamma
    }

    pub fn initial(&self) -> &InitialBlock {
        &self.initial
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// One star-filler draw of `n0 + j` blocks, returned as block indices
    /// with the initial block first.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, j: usize) -> (Vec<usize>, Vec<usize>) {
        self.sampler.sample(rng, j)
    }

    /// Sample an alternating-joining window and resample the free intervals
    /// of each action block with an independent star-filler draw.
    pub fn sample_window<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        len: usize,
        burn_in: usize,
    ) -> Result<FactorWindow> {
        let original = sample_alternating(rng, &self.joining, len, burn_in)?;
        let mut resampled = original.clone();
        let cfg = *self.joining.cfg();
        let decomposition = match decompose(&original.x, &cfg) {
            Ok(mut d) => {
                d.mark_blocks(self.params.k_super, self.params.n0);
                Some(d)
            }
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        let (mut action_blocks, mut resampled_intervals) = (0, 0);
        if let Some(d) = &decomposition {
            let n = self.joining.alphabet_size();
            let (k, n0) = (cfg.k, self.params.n0);
            for block in d.large_blocks.iter().filter(|b| b.action) {
                action_blocks += 1;
                let (xs, ys) = self.sampler.sample(rng, block.free.len() - n0);
                let x0 = block_digits(xs[0], n, n0 * k);
                let y0 = block_digits(ys[0], n, n0 * k);
                for (slot, &iv) in block.free.iter().enumerate() {
                    let span = d.intervals[iv].span;
                    let (xb, yb) = if slot < n0 {
                        (
                            x0[slot * k..(slot + 1) * k].to_vec(),
                            y0[slot * k..(slot + 1) * k].to_vec(),
                        )
                    } else {
                        let i = slot - n0 + 1;
                        (block_digits(xs[i], n, k), block_digits(ys[i], n, k))
                    };
                    resampled.x[span.lo..=span.hi].copy_from_slice(&xb);
                    resampled.y[span.lo..=span.hi].copy_from_slice(&yb);
                    resampled_intervals += 1;
                }
            }
        }
        Ok(FactorWindow {
            original,
            resampled,
            decomposition,
            action_blocks,
            resampled_intervals,
        })
    }
}

/// Coverage of action blocks over the region between the first and last
/// super marker of each decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockStats {
    /// Fraction of coordinates not in an action block.
    pub not_action: Estimate,
    /// Fraction of coordinates in action blocks with fewer than `n_rel`
    /// block intervals.
    pub short_action: Estimate,
    pub coordinates: usize,
    pub large_blocks: usize,
}

pub fn block_stats(decompositions: &[&IntervalDecomposition], n_rel: usize) -> Result<BlockStats> {
    let mut not_action = Vec::new();
    let mut short_action = Vec::new();
    let mut large_blocks = 0;
    for d in decompositions {
        let Some(region) = d.block_region() else {
            continue;
        };
        large_blocks += d.large_blocks.len();
        for i in region.lo..=region.hi {
            let block = d.large_block_index(i).map(|j| &d.large_blocks[j]);
            let action = block.is_some_and(|b| b.action);
            not_action.push(!action);
            short_action.push(action && block.is_some_and(|b| b.block_intervals < n_rel));
        }
    }
    if not_action.is_empty() {
        return Err(Error::InsufficientSamples(
            "fewer than two super markers in every window".into(),
        ));
    }
    Ok(BlockStats {
        not_action: Estimate::batch_means(&not_action, 100),
        short_action: Estimate::batch_means(&short_action, 100),
        coordinates: not_action.len(),
        large_blocks,
    })
}

/// Prediction error of the best cylinder predictor for each output event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AlmostFactorReport {
    pub radius: usize,
    pub epsilon: f64,
    /// `(event as a symbol bitmask, held-out error)`.
    pub errors: Vec<(u64, Estimate)>,
    pub worst: Estimate,
    /// Worst error over the same events of the best constant predictor.
    pub constant_baseline: f64,
    pub fit_samples: usize,
    pub eval_samples: usize,
    pub passed: bool,
}

/// Estimate, for every event `{y_0 in S}`, the error of the majority-vote
/// predictor measurable in `x[-m, m]`.
///
/// Counts are fitted on the first half of each window and the error is
/// measured on the second half. Votes that tie go to "not in `S`"; input
/// cylinders unseen during fitting use the overall majority. Events `S` and
/// their complements have equal error, so only one of each pair is listed;
/// with more than ten symbols only singletons are tested. The test passes
/// iff the worst error is below `epsilon` by more than four standard errors.
pub fn almost_factor_test(
    windows: &[ProcessWindow],
    alphabet: usize,
    m: usize,
    epsilon: f64,
) -> Result<AlmostFactorReport> {
    let width = 2 * m + 1;
    if (width as f64) * (alphabet as f64).log2() > 127.0 {
        return Err(Error::Budget {
            what: "input cylinder key".into(),
            needed: width as u128,
            budget: (127.0 / (alphabet as f64).log2()) as u128,
        });
    }
    let key_at = |w: &ProcessWindow, c: usize| {
        w.x[c - m..=c + m]
            .iter()
            .fold(0u128, |acc, &s| acc * alphabet as u128 + s as u128)
    };
    let mut fit: HashMap<u128, Vec<usize>> = HashMap::new();
    let mut overall = vec![0usize; alphabet];
    let mut eval: Vec<(u128, usize)> = Vec::new();
    let mut eval_counts = vec![0usize; alphabet];
    let mut fit_samples = 0;
    for w in windows {
        if w.len() < 2 * width {
            continue;
        }
        let mid = w.len() / 2;
        for c in m..w.len() - m {
            let key = key_at(w, c);
            if c + m < mid {
                fit.entry(key).or_insert_with(|| vec![0; alphabet])[w.y[c]] += 1;
                overall[w.y[c]] += 1;
                fit_samples += 1;
            } else if c >= mid + m {
                eval.push((key, w.y[c]));
                eval_counts[w.y[c]] += 1;
            }
        }
    }
    if fit_samples == 0 || eval.is_empty() {
        return Err(Error::InsufficientSamples(format!(
            "no windows longer than {}",
            2 * width
        )));
    }
    let events: Vec<u64> = if alphabet <= 10 {
        let full = (1u64 << alphabet) - 1;
        (1..full).filter(|&s| s < (full ^ s)).collect()
    } else {
        (0..alphabet).map(|i| 1u64 << i).collect()
    };
    let votes_in = |counts: &[usize], s: u64| {
        let inside: usize = (0..alphabet).filter(|&i| s >> i & 1 == 1).map(|i| counts[i]).sum();
        let total: usize = counts.iter().sum();
        inside > total - inside
    };
    let mut errors = Vec::with_capacity(events.len());
    for &s in &events {
        let default = votes_in(&overall, s);
        let flags: Vec<bool> = eval
            .iter()
            .map(|&(key, y)| {
                let predicted = fit.get(&key).map_or(default, |c| votes_in(c, s));
                predicted != (s >> y & 1 == 1)
            })
            .collect();
        errors.push((s, Estimate::batch_means(&flags, 100)));
    }
    let worst = errors
        .iter()
        .map(|e| e.1)
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .ok_or_else(|| Error::InsufficientSamples("alphabet has one symbol".into()))?;
    let total: usize = eval_counts.iter().sum();
    let constant_baseline = events
        .iter()
        .map(|&s| {
            let inside: usize = (0..alphabet).filter(|&i| s >> i & 1 == 1).map(|i| eval_counts[i]).sum();
            inside.min(total - inside) as f64 / total as f64
        })
        .fold(0.0, f64::max);
    Ok(AlmostFactorReport {
        constant_baseline,
        radius: m,
        epsilon,
        passed: worst.clearly_below(epsilon, 4.0),
        errors,
        worst,
        fit_samples,
        eval_samples: eval.len(),
    })
}
