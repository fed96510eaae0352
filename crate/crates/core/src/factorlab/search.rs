//! Parameter search and the end-to-end factor run.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::pipeline::{almost_factor_test, block_stats, AlmostFactorReport, BlockStats, Pipeline};
use super::{
    build_beta, desirable_bound, extract_psi, pile_tail, Direction, GoodSetOracle, InitialBlock,
    Params,
};
use crate::coupling::{quantile_coupling, Coupling};
use crate::dist::{dominates, Relation};
use crate::error::{Error, Result};
use crate::process::{
    build_block_joining_with, decompose, filler_entropies, frozen_stats, sample_alternating,
    weak_star_distance, BlockJoining, CylinderSource, FillerEntropies, FrozenStats, MarkerConfig,
    ProcessWindow, WeakStarReport,
};
use crate::rng::stream;
use crate::star::iterative_star;
use crate::stats::Estimate;

const SIGMAS: f64 = 4.0;

/// How the initial-block count is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "rule")]
pub enum N0Rule {
    /// Smallest `n0` with `M sum_{i >= n0} e^(-delta i) < eta / 4` whose
    /// completely-good coverage exceeds `1 - eta / 4` on both sides.
    Pile,
    /// Smallest `n0` whose exact `P(Y = Psi(X))` is at least `1 - eta` for
    /// every `j` up to `horizon`.
    ExactVerified { horizon: usize },
}

/// Input joining: the seed coupling, the base coupling used on single
/// coordinates, and the relation the output must respect.
#[derive(Debug, Clone)]
pub struct FactorProblem {
    pub seed: Coupling,
    pub base: Coupling,
    pub relation: Option<Relation>,
    pub a: usize,
    pub b: usize,
    pub epsilon: f64,
}

impl FactorProblem {
    /// Monotone problem whose base is the quantile coupling of the seed's
    /// marginals.
    pub fn monotone(seed: Coupling, a: usize, b: usize, epsilon: f64) -> Self {
        let (p, q) = seed.marginals();
        Self {
            base: quantile_coupling(&p, &q),
            seed,
            relation: None,
            a,
            b,
            epsilon,
        }
    }

    /// Problem under a relation; the seed serves as its own base.
    pub fn with_relation(seed: Coupling, relation: Relation, a: usize, b: usize, epsilon: f64) -> Self {
        Self {
            base: seed.clone(),
            seed,
            relation: Some(relation),
            a,
            b,
            epsilon,
        }
    }

    fn respects(&self, x: usize, y: usize) -> bool {
        match &self.relation {
            Some(r) => r.contains(x, y),
            None => x >= y,
        }
    }

    /// Preconditions of the factor pipeline.
    pub fn check(&self) -> Result<()> {
        let (p, q) = self.seed.marginals();
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Precondition(format!("epsilon = {} outside (0, 1)", self.epsilon)));
        }
        match &self.relation {
            None => {
                if !dominates(&p, &q)? {
                    return Err(Error::Precondition("p does not dominate q".into()));
                }
                if !self.seed.is_monotone()? || !self.base.is_monotone()? {
                    return Err(Error::Precondition("seed or base coupling is not monotone".into()));
                }
            }
            Some(r) => {
                if !self.seed.respects_relation(r)? || !self.base.respects_relation(r)? {
                    return Err(Error::Precondition(
                        "seed or base coupling leaves the relation".into(),
                    ));
                }
            }
        }
        if p.entropy() <= q.entropy() + 1e-12 {
            return Err(Error::Precondition(format!(
                "H(p) = {} does not exceed H(q) = {}",
                p.entropy(),
                q.entropy()
            )));
        }
        Ok(())
    }
}

/// Search ranges, sample sizes and budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub n0_max: usize,
    pub k_super_min: usize,
    pub k_super_max: usize,
    pub n0_rule: N0Rule,
    /// Blocks past `n0` covered by the completely-good coverage check.
    pub smb_horizon: usize,
    /// Slack of the good-set tests as a fraction of the filler gap, in
    /// `(0, 1/2)`; `delta` is the gap times `1 - 2 * fraction`.
    pub smb_fraction: f64,
    /// Coordinates simulated for each Monte Carlo check.
    pub trials: usize,
    pub burn_in: usize,
    /// Cap on sparse coupling supports.
    pub budget: usize,
    /// Cap on exhaustive enumerations.
    pub table_limit: usize,
    /// Enumerate good-set coverage when it fits `table_limit`; otherwise
    /// always sample it.
    pub exact: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 12,
            n0_max: 6,
            k_super_min: 1,
            k_super_max: 8,
            n0_rule: N0Rule::Pile,
            smb_horizon: 4,
            smb_fraction: 0.25,
            trials: 200_000,
            burn_in: 1_000,
            budget: 1 << 22,
            table_limit: 1 << 24,
            exact: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchStep {
    pub stage: String,
    pub value: usize,
    pub accepted: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchOutcome {
    pub params: Params,
    pub filler: FillerEntropies,
    pub frozen: FrozenStats,
    pub weak_star_ball: f64,
    pub blocks: BlockStats,
    pub steps: Vec<SearchStep>,
}

/// `sum_i 2^-(i+1) min(1, (2i+1) f)`, an upper bound on the weak-star
/// distance between the seed's product joining and the alternating joining
/// when a coordinate is drawn from the base coupling with probability at
/// most `f`.
pub fn weak_star_ball_bound(f: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    (0..64)
        .map(|i| 0.5f64.powi(i + 1) * ((2 * i + 1) as f64 * f).min(1.0))
        .sum()
}

fn switch_rate(bj: &BlockJoining) -> f64 {
    if bj.seed().max_abs_diff(bj.base()) <= 1e-12 {
        0.0
    } else {
        bj.input_law().get(bj.cfg().a).powi(bj.cfg().k as i32 - 1)
    }
}

fn oracles(gamma: &Coupling, smb_eps: f64) -> (GoodSetOracle, GoodSetOracle) {
    let (gx, gy) = gamma.marginals();
    (
        GoodSetOracle::new(&gx, smb_eps, Direction::Upper),
        GoodSetOracle::new(&gy, smb_eps, Direction::Lower),
    )
}

fn coverage(
    oracle: &GoodSetOracle,
    n0: usize,
    len: usize,
    cfg: &SearchConfig,
    label: &str,
) -> Estimate {
    let exact = if cfg.exact {
        oracle.coverage(n0, len, cfg.table_limit)
    } else {
        Err(Error::Precondition("sampled mode".into()))
    };
    match exact {
        Ok(c) => Estimate {
            mean: c,
            stderr: 0.0,
            n: 0,
        },
        Err(_) => {
            let mut rng = stream(cfg.seed, label, n0 as u64);
            oracle.coverage_sampled(&mut rng, n0, len, cfg.trials)
        }
    }
}

/// Exact determinism check of the block map for one `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PsiCheck {
    pub j: usize,
    pub hit_probability: f64,
    pub desirable_mass: f64,
    pub non_desirable_bound: f64,
    pub hit_ok: bool,
    pub bound_ok: bool,
}

/// Exact `P(Y = Psi(X))` and desirable mass for `j = 0..=horizon`.
pub fn psi_checks(
    gamma: &Coupling,
    initial: &InitialBlock,
    params: &Params,
    horizon: usize,
    budget: usize,
) -> Result<Vec<PsiCheck>> {
    let (ox, oy) = oracles(gamma, params.smb_eps);
    let m = gamma.rows().size();
    let mut out = Vec::with_capacity(horizon + 1);
    for j in 0..=horizon {
        let zs = vec![gamma.clone(); j];
        let w = iterative_star(&initial.beta, &zs, budget)?;
        let psi = extract_psi(&w, &ox, &oy, params.n0, m, &initial.good_outputs)?;
        let bound = desirable_bound(
            psi.input_not_cg,
            psi.output_not_cg,
            params.delta,
            params.n0,
            j,
            m,
        )?;
        out.push(PsiCheck {
            j,
            hit_probability: psi.hit_probability,
            desirable_mass: psi.desirable_mass,
            non_desirable_bound: bound,
            hit_ok: psi.hit_probability >= 1.0 - params.eta,
            bound_ok: 1.0 - psi.desirable_mass <= bound + 1e-12,
        });
    }
    Ok(out)
}

/// Search, in order, for `k`, `n0`, `n_rel` and `k_super` meeting every
/// constraint of the construction at four standard errors.
pub fn choose_parameters(problem: &FactorProblem, cfg: &SearchConfig) -> Result<SearchOutcome> {
    problem.check()?;
    let eps_prime = problem.epsilon / 10.0;
    let eta = eps_prime;
    let mut steps = Vec::new();
    let mut log = |stage: &str, value: usize, accepted: bool, detail: String| {
        steps.push(SearchStep {
            stage: stage.into(),
            value,
            accepted,
            detail,
        })
    };

    // Block length.
    let mut chosen = None;
    let mut binding = "no k in range";
    for k in cfg.k_min.max(1)..=cfg.k_max {
        let mc = MarkerConfig::new(problem.a, problem.b, k)?;
        let bj = build_block_joining_with(&problem.seed, &problem.base, mc)?;
        let filler = filler_entropies(&bj, cfg.table_limit)?;
        if filler.gap <= 0.0 {
            log("k", k, false, format!("filler gap {} <= 0", filler.gap));
            binding = "filler gap";
            continue;
        }
        let ball = weak_star_ball_bound(switch_rate(&bj));
        if ball >= eps_prime {
            log("k", k, false, format!("weak-star ball bound {ball} >= {eps_prime}"));
            binding = "weak-star ball";
            continue;
        }
        let mut rng = stream(cfg.seed, "search-frozen", k as u64);
        let w = sample_alternating(&mut rng, &bj, cfg.trials, cfg.burn_in)?;
        let frozen = frozen_stats(&[w], &mc, bj.input_law().get(problem.a))?;
        if !frozen.frozen.clearly_below(eps_prime, SIGMAS) {
            log(
                "k",
                k,
                false,
                format!("frozen {} +- {} not below {eps_prime}", frozen.frozen.mean, frozen.frozen.stderr),
            );
            binding = "frozen probability";
            continue;
        }
        log("k", k, true, format!("gap {}, frozen {}, ball {ball}", filler.gap, frozen.frozen.mean));
        chosen = Some((bj, filler, frozen, ball));
        break;
    }
    let Some((bj, filler, frozen, ball)) = chosen else {
        return Err(Error::SearchExhausted(binding.into()));
    };
    let k = bj.cfg().k;
    if !(cfg.smb_fraction > 0.0 && cfg.smb_fraction < 0.5) {
        return Err(Error::Precondition(format!("smb fraction {} outside (0, 1/2)", cfg.smb_fraction)));
    }
    let smb_eps = filler.gap * cfg.smb_fraction;
    let delta = filler.gap - 2.0 * smb_eps;
    let gamma = bj.conditioned_block_coupling(cfg.budget)?;
    let m = gamma.rows().size();
    let (ox, oy) = oracles(&gamma, smb_eps);

    // Initial-block count.
    let mut n0_found = None;
    match cfg.n0_rule {
        N0Rule::Pile => {
            let start = (1..=cfg.n0_max).find(|&n| pile_tail(delta, n, m) < eta / 4.0);
            let Some(start) = start else {
                log("n0", cfg.n0_max, false, format!("pile tail {} >= {}", pile_tail(delta, cfg.n0_max, m), eta / 4.0));
                return Err(Error::SearchExhausted("pile tail".into()));
            };
            for n0 in start..=cfg.n0_max {
                let len = n0 + cfg.smb_horizon;
                let cx = coverage(&ox, n0, len, cfg, "search-cover-x");
                let cy = coverage(&oy, n0, len, cfg, "search-cover-y");
                let target = 1.0 - eta / 4.0;
                let ok = cx.mean - SIGMAS * cx.stderr > target && cy.mean - SIGMAS * cy.stderr > target;
                log("n0", n0, ok, format!("coverage {} / {} vs {target}", cx.mean, cy.mean));
                if ok {
                    n0_found = Some(n0);
                    break;
                }
            }
            if n0_found.is_none() {
                return Err(Error::SearchExhausted("completely-good coverage".into()));
            }
        }
        N0Rule::ExactVerified { horizon } => {
            for n0 in 1..=cfg.n0_max {
                let initial = build_beta(&gamma, n0, &oy, cfg.budget)?;
                let trial = Params {
                    epsilon: problem.epsilon,
                    epsilon_prime: eps_prime,
                    k,
                    n0,
                    n_rel: n0 + 1,
                    k_super: 1,
                    eta,
                    smb_eps,
                    delta,
                    h_gap: filler.gap,
                };
                let checks = psi_checks(&gamma, &initial, &trial, horizon, cfg.budget)?;
                let worst = checks
                    .iter()
                    .map(|c| c.hit_probability)
                    .fold(f64::INFINITY, f64::min);
                let ok = checks.iter().all(|c| c.hit_ok);
                log("n0", n0, ok, format!("min exact P(Y = Psi(X)) {worst} vs {}", 1.0 - eta));
                if ok {
                    n0_found = Some(n0);
                    break;
                }
            }
            if n0_found.is_none() {
                return Err(Error::SearchExhausted("exact determinism P(Y = Psi(X))".into()));
            }
        }
    }
    let n0 = n0_found.expect("set above");
    let n_rel = (n0 as f64 / eps_prime).floor() as usize + 1;
    log("nRel", n_rel, true, format!("n0 / nRel = {}", n0 as f64 / n_rel as f64));

    // Super-marker run length.
    let mut rng = stream(cfg.seed, "search-blocks", 0);
    let w = sample_alternating(&mut rng, &bj, cfg.trials, cfg.burn_in)?;
    let base = match decompose(&w.x, bj.cfg()) {
        Ok(d) => d,
        Err(Error::Degenerate(_)) => return Err(Error::SearchExhausted("no markers in the block sample".into())),
        Err(e) => return Err(e),
    };
    let mut binding = "action-block coverage";
    for k_super in cfg.k_super_min.max(1)..=cfg.k_super_max {
        let mut d = base.clone();
        d.mark_blocks(k_super, n0);
        let stats = match block_stats(&[&d], n_rel) {
            Ok(s) => s,
            Err(Error::InsufficientSamples(why)) => {
                log("kSuper", k_super, false, why);
                binding = "too few super markers";
                continue;
            }
            Err(e) => return Err(e),
        };
        let cover = stats.not_action.clearly_below(eps_prime, SIGMAS);
        let short = stats.short_action.clearly_below(eps_prime, SIGMAS);
        log(
            "kSuper",
            k_super,
            cover && short,
            format!(
                "not-action {} +- {}, R-set {} +- {}",
                stats.not_action.mean, stats.not_action.stderr, stats.short_action.mean, stats.short_action.stderr
            ),
        );
        if cover && short {
            let params = Params {
                epsilon: problem.epsilon,
                epsilon_prime: eps_prime,
                k,
                n0,
                n_rel,
                k_super,
                eta,
                smb_eps,
                delta,
                h_gap: filler.gap,
            };
            params.validate()?;
            return Ok(SearchOutcome {
                params,
                filler,
                frozen,
                weak_star_ball: ball,
                blocks: stats,
                steps,
            });
        }
        binding = if cover { "R-set mass" } else { "action-block coverage" };
    }
    Err(Error::SearchExhausted(binding.into()))
}

/// Sizes of the end-to-end run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub windows: usize,
    pub window_len: usize,
    pub burn_in: usize,
    /// Radius of the input cylinders used by the almost-factor test.
    pub radius: usize,
    pub i_max: usize,
    /// Largest `j` of the exact determinism check; skipped when over budget.
    pub psi_horizon: usize,
    /// Filler draws for the sampled collision statistic.
    pub collision_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            windows: 4,
            window_len: 250_000,
            burn_in: 1_000,
            radius: 2,
            i_max: 2,
            psi_horizon: 2,
            collision_samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Constraint {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FactorReport {
    pub params: Params,
    pub filler: FillerEntropies,
    pub search_frozen: FrozenStats,
    pub frozen: FrozenStats,
    pub weak_star_ball_bound: f64,
    pub blocks: BlockStats,
    /// Exact determinism per `j`; empty when over budget.
    pub psi: Vec<PsiCheck>,
    /// Fraction of distinct sampled filler inputs whose outputs disagreed.
    pub collision: Estimate,
    pub weak_star: WeakStarReport,
    pub weak_star_limit: f64,
    pub almost_factor: AlmostFactorReport,
    pub coordinates: usize,
    pub relation_violations: usize,
    pub action_blocks: usize,
    pub constraints: Vec<Constraint>,
    pub passed: bool,
    pub search: Vec<SearchStep>,
}

impl FactorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fraction of distinct filler inputs of `n0 + j` blocks that were drawn
/// with two different outputs.
pub fn collision_rate(pipeline: &Pipeline, master: u64, j: usize, samples: usize) -> Estimate {
    let mut rng = stream(master, "collision", j as u64);
    let mut first: HashMap<Vec<usize>, (Vec<usize>, bool)> = HashMap::new();
    for _ in 0..samples {
        let (x, y) = pipeline.fill(&mut rng, j);
        let e = first.entry(x).or_insert_with(|| (y.clone(), false));
        if e.0 != y {
            e.1 = true;
        }
    }
    Estimate::proportion(first.values().filter(|e| e.1).count(), first.len())
}

/// Choose parameters, sample the resampled joining and measure every
/// constraint.
pub fn run_factor(problem: &FactorProblem, search: &SearchConfig, run: &RunConfig) -> Result<FactorReport> {
    let outcome = choose_parameters(problem, search)?;
    let params = outcome.params;
    let mc = MarkerConfig::new(problem.a, problem.b, params.k)?;
    let bj = build_block_joining_with(&problem.seed, &problem.base, mc)?;
    let n = bj.alphabet_size();
    let p_a = bj.input_law().get(problem.a);
    let pipeline = Pipeline::new(bj, params, search.budget)?;

    let psi = match psi_checks(pipeline.gamma(), pipeline.initial(), &params, run.psi_horizon, search.budget) {
        Ok(c) => c,
        Err(Error::Budget { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let collision = collision_rate(&pipeline, search.seed, run.psi_horizon, run.collision_samples);

    let mut originals = Vec::with_capacity(run.windows);
    let mut resampled = Vec::with_capacity(run.windows);
    let mut decompositions = Vec::with_capacity(run.windows);
    let mut action_blocks = 0;
    for i in 0..run.windows {
        let mut rng = stream(search.seed, "factor-window", i as u64);
        let fw = pipeline.sample_window(&mut rng, run.window_len, run.burn_in)?;
        action_blocks += fw.action_blocks;
        originals.push(fw.original);
        resampled.push(fw.resampled);
        if let Some(d) = fw.decomposition {
            decompositions.push(d);
        }
    }
    let relation_violations = resampled
        .iter()
        .map(|w: &ProcessWindow| {
            w.x.iter()
                .zip(&w.y)
                .filter(|&(&x, &y)| !problem.respects(x, y))
                .count()
        })
        .sum();
    let coordinates = resampled.iter().map(|w| w.len()).sum();
    let frozen = frozen_stats(&originals, &mc, p_a)?;
    let refs: Vec<_> = decompositions.iter().collect();
    let blocks = block_stats(&refs, params.n_rel)?;
    let almost_factor = almost_factor_test(&resampled, n, run.radius, params.epsilon)?;
    let weak_star = weak_star_distance(
        CylinderSource::Iid(&problem.seed),
        CylinderSource::Windows(&resampled),
        n,
        run.i_max,
        search.table_limit,
    )?;
    let weak_star_limit = params.epsilon_prime
        + 2.0 * blocks.short_action.mean
        + params.n0 as f64 / params.n_rel as f64
        + weak_star.truncation_bound;
    let weak_star_error = SIGMAS * (weak_star.stderr + 2.0 * blocks.short_action.stderr);

    let eps_prime = params.epsilon_prime;
    let mut constraints = vec![
        Constraint {
            name: "filler gap".into(),
            passed: outcome.filler.gap > 0.0,
            detail: format!("{}", outcome.filler.gap),
        },
        Constraint {
            name: "frozen probability".into(),
            passed: frozen.frozen.clearly_below(eps_prime, SIGMAS),
            detail: format!("{} +- {} vs {eps_prime}", frozen.frozen.mean, frozen.frozen.stderr),
        },
        Constraint {
            name: "weak-star ball".into(),
            passed: outcome.weak_star_ball < eps_prime,
            detail: format!("{} vs {eps_prime}", outcome.weak_star_ball),
        },
        Constraint {
            name: "n0 / nRel".into(),
            passed: (params.n0 as f64) / (params.n_rel as f64) < eps_prime,
            detail: format!("{} / {}", params.n0, params.n_rel),
        },
        Constraint {
            name: "action-block coverage".into(),
            passed: blocks.not_action.clearly_below(eps_prime, SIGMAS),
            detail: format!("{} +- {}", blocks.not_action.mean, blocks.not_action.stderr),
        },
        Constraint {
            name: "R-set mass".into(),
            passed: blocks.short_action.clearly_below(eps_prime, SIGMAS),
            detail: format!("{} +- {}", blocks.short_action.mean, blocks.short_action.stderr),
        },
    ];
    for c in &psi {
        constraints.push(Constraint {
            name: format!("determinism j={}", c.j),
            passed: c.hit_ok && c.bound_ok,
            detail: format!(
                "P(Y = Psi(X)) = {}, non-desirable {} <= {}",
                c.hit_probability,
                1.0 - c.desirable_mass,
                c.non_desirable_bound
            ),
        });
    }
    constraints.extend([
        Constraint {
            name: "relation on every coordinate".into(),
            passed: relation_violations == 0,
            detail: format!("{relation_violations} violations in {coordinates}"),
        },
        Constraint {
            name: "almost factor".into(),
            passed: almost_factor.passed,
            detail: format!(
                "worst error {} +- {} at radius {} vs {}",
                almost_factor.worst.mean, almost_factor.worst.stderr, run.radius, params.epsilon
            ),
        },
        Constraint {
            name: "weak-star inequality".into(),
            passed: weak_star.estimate <= weak_star_limit + weak_star_error,
            detail: format!("{} vs {weak_star_limit} (+ {weak_star_error})", weak_star.estimate),
        },
    ]);
    let passed = constraints.iter().all(|c| c.passed);
    Ok(FactorReport {
        params,
        filler: outcome.filler,
        search_frozen: outcome.frozen,
        frozen,
        weak_star_ball_bound: outcome.weak_star_ball,
        blocks,
        psi,
        collision,
        weak_star,
        weak_star_limit,
        almost_factor,
        coordinates,
        relation_violations,
        action_blocks,
        constraints,
        passed,
        search: outcome.steps,
    })
}
