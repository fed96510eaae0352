//! Bundled verification suites: randomised invariant checks with fixed seeds.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use sinai_core::factorlab::{build_beta, desirable_bound, extract_psi, Direction, GoodSetOracle};
use sinai_core::process::{sample_alternating_traced, IntervalKind};
use sinai_core::rng::{stream, Stream};
use sinai_core::*;

use crate::{exit, Failure};

pub const SUITES: [&str; 6] = ["dist", "coupling", "star", "process", "factorlab", "empty"];

type CheckResult = std::result::Result<(), String>;
type Check = fn(&mut Stream) -> CheckResult;

struct Suite {
    checks: &'static [(&'static str, Check)],
    /// Instances per check unless overridden.
    trials: usize,
}

fn suite(name: &str) -> Option<Suite> {
    Some(match name {
        "dist" => Suite {
            checks: &[
                ("entropy range", entropy_range),
                ("dominance is reflexive and transitive", dominance_order),
                ("monotone witness iff dominance", witness_iff_dominance),
            ],
            trials: 2_000,
        },
        "coupling" => Suite {
            checks: &[
                ("quantile marginals and monotonicity", quantile_properties),
                ("marriage refinement postconditions", marriage_postconditions),
            ],
            trials: 10_000,
        },
        "star" => Suite {
            checks: &[
                ("star marginals and independence", star_independence),
                ("iterated star keeps the order", iterated_star_monotone),
            ],
            trials: 2_000,
        },
        "process" => Suite {
            checks: &[("decomposition recovers the draws", decomposition_draws)],
            trials: 40,
        },
        "factorlab" => Suite {
            checks: &[("initial block and desirable bound", initial_block)],
            trials: 40,
        },
        "empty" => Suite { checks: &[], trials: 0 },
        _ => return None,
    })
}

pub fn run(name: &str, seed: u64, trials: Option<usize>) -> std::result::Result<(), Failure> {
    let names: Vec<&str> = if name == "all" {
        SUITES.to_vec()
    } else if suite(name).is_some() {
        vec![name]
    } else {
        return Err(Failure::new(
            exit::USAGE,
            format!("unknown suite {name:?}; expected one of {SUITES:?} or \"all\""),
        ));
    };
    let mut failures = 0;
    for name in names {
        let s = suite(name).expect("known suite");
        if s.checks.is_empty() {
            println!("{name}: pass (no checks)");
        }
        for (label, check) in s.checks {
            let n = trials.unwrap_or(s.trials);
            let mut rng = stream(seed, &format!("verify-{name}-{label}"), 0);
            let mut first_error = None;
            let mut failed = 0;
            for _ in 0..n {
                if let Err(e) = check(&mut rng) {
                    failed += 1;
                    first_error.get_or_insert(e);
                }
            }
            match first_error {
                None => println!("{name}: {label}: pass ({n} instances)"),
                Some(e) => {
                    failures += 1;
                    println!("{name}: {label}: FAIL ({failed} of {n}; first: {e})");
                }
            }
        }
    }
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::new(exit::VERIFICATION, format!("{failures} checks failed")))
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn dist(rng: &mut Stream, n: usize) -> Dist {
    loop {
        let w: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0u32..12))).collect();
        if w.iter().any(|&x| x > 0.0) {
            return Dist::from_weights(w).unwrap();
        }
    }
}

fn coupling(rng: &mut Stream, rows: usize, cols: usize) -> Coupling {
    let w = dist(rng, rows * cols);
    let entries = w.probs().iter().enumerate().map(|(i, &m)| (i / cols, i % cols, m));
    Coupling::normalized(Alphabet::flat(rows), Alphabet::flat(cols), entries).unwrap()
}

/// `(p, q)` with `p` dominating `q`, made by pushing mass of `p` down.
fn dominating_pair(rng: &mut Stream, n: usize) -> (Dist, Dist) {
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

fn subset(rng: &mut Stream, n: usize) -> BTreeSet<usize> {
    (0..n).filter(|_| rng.gen_bool(0.5)).collect()
}

fn close(a: &Dist, b: &Dist, tol: f64) -> bool {
    a.probs().iter().zip(b.probs()).all(|(x, y)| (x - y).abs() <= tol)
}

fn entropy_range(rng: &mut Stream) -> CheckResult {
    let n = rng.gen_range(1..=8);
    let p = dist(rng, n);
    let h = entropy(&p);
    ensure!(h >= 0.0 && h <= (n as f64).ln() + 1e-12, "H = {h} for {p:?}");
    Ok(())
}

fn dominance_order(rng: &mut Stream) -> CheckResult {
    let (p, q, r) = (dist(rng, 3), dist(rng, 3), dist(rng, 3));
    ensure!(dominates(&p, &p).unwrap(), "{p:?} does not dominate itself");
    if dominates(&p, &q).unwrap() && dominates(&q, &r).unwrap() {
        ensure!(dominates(&p, &r).unwrap(), "transitivity fails for {p:?} {q:?} {r:?}");
    }
    Ok(())
}

fn witness_iff_dominance(rng: &mut Stream) -> CheckResult {
    let n = rng.gen_range(1..=5);
    let (p, q) = if rng.gen_bool(0.5) {
        dominating_pair(rng, n)
    } else {
        (dist(rng, n), dist(rng, n))
    };
    let w = r_dominates(&p, &q, &Relation::monotone(n)).map_err(|e| e.to_string())?;
    ensure!(
        w.is_some() == dominates(&p, &q).unwrap(),
        "witness and dominance disagree for {p:?} {q:?}"
    );
    if let Some(w) = w {
        ensure!(w.is_monotone().unwrap(), "witness leaves the order");
    }
    Ok(())
}

fn quantile_properties(rng: &mut Stream) -> CheckResult {
    let n = rng.gen_range(1..=8);
    let (p, q) = dominating_pair(rng, n);
    let c = quantile_coupling(&p, &q);
    let (cp, cq) = c.marginals();
    ensure!(close(&cp, &p, 1e-12) && close(&cq, &q, 1e-12), "marginals drift");
    ensure!(c.is_monotone().unwrap(), "quantile coupling of {p:?} {q:?} is not monotone");
    let b = subset(rng, n);
    let split = c.split_elements(&b).unwrap().len();
    ensure!(split <= b.len().saturating_sub(1), "{split} split elements for |B| = {}", b.len());
    Ok(())
}

fn marriage_postconditions(rng: &mut Stream) -> CheckResult {
    let (r, c) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
    let alpha = coupling(rng, r, c);
    let b = subset(rng, c);
    let refined = marriage_refine(&alpha, &b).map_err(|e| e.to_string())?;
    ensure!(refined.is_subordinate(&alpha).unwrap(), "support grew");
    let (ra, rb) = refined.marginals();
    let (aa, ab) = alpha.marginals();
    ensure!(close(&ra, &aa, 1e-10) && close(&rb, &ab, 1e-10), "marginals changed");
    let split = refined.split_elements(&b).unwrap().len();
    ensure!(split <= b.len().saturating_sub(1), "{split} split elements for |B| = {}", b.len());
    Ok(())
}

fn star_independence(rng: &mut Stream) -> CheckResult {
    let (r1, c1) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let (r2, c2) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let z1 = coupling(rng, r1, c1);
    let z2 = coupling(rng, r2, c2);
    let s = star_couple(&z1, &z2).map_err(|e| e.to_string())?;
    ensure!((s.total() - 1.0).abs() < 1e-10, "total {}", s.total());
    ensure!(s.first_pair().unwrap().max_abs_diff(&z1) < 1e-10, "first pair law differs");
    ensure!(s.second_pair().unwrap().max_abs_diff(&z2) < 1e-10, "second pair law differs");
    let i1 = s.info_first_output_vs_second_pair();
    let i2 = s.info_second_input_vs_first_pair();
    ensure!(i1.abs() < 1e-10 && i2.abs() < 1e-10, "dependence {i1} {i2}");
    ensure!(s.max_split_rows() < c2, "{} split rows for {c2} outputs", s.max_split_rows());
    Ok(())
}

fn iterated_star_monotone(rng: &mut Stream) -> CheckResult {
    let n = rng.gen_range(1..=3);
    let (p, q) = dominating_pair(rng, n);
    let (p2, q2) = dominating_pair(rng, n);
    let z = quantile_coupling(&p2, &q2);
    let len = rng.gen_range(1..3);
    let w = iterative_star(&quantile_coupling(&p, &q), &vec![z; len], 1 << 16).map_err(|e| e.to_string())?;
    ensure!(w.is_monotone().unwrap(), "iterate leaves the order");
    Ok(())
}

fn decomposition_draws(rng: &mut Stream) -> CheckResult {
    let n = rng.gen_range(3..=4);
    let (p, q) = dominating_pair(rng, n);
    if !(p.get(0) > 0.05 && p.get(0) < 0.9 && p.get(1) > 0.05) {
        return Ok(());
    }
    let k = rng.gen_range(1..=3);
    let bj = build_block_joining(&quantile_coupling(&p, &q), MarkerConfig::new(0, 1, k).unwrap())
        .map_err(|e| e.to_string())?;
    let (w, draws) = sample_alternating_traced(rng, &bj, 4_000, 100).map_err(|e| e.to_string())?;
    ensure!(w.is_monotone(), "window leaves the order");
    let Ok(d) = decompose(&w.x, bj.cfg()) else {
        return Ok(());
    };
    let by_span: BTreeMap<_, _> = draws.iter().map(|d| ((d.span.lo, d.span.hi), d)).collect();
    for iv in &d.intervals {
        let Some(draw) = by_span.get(&(iv.span.lo, iv.span.hi)) else {
            return Err(format!("interval {:?} is not a draw", iv.span));
        };
        ensure!(draw.block == (iv.kind == IntervalKind::Block), "kind differs at {:?}", iv.span);
        if draw.block {
            ensure!(draw.switch == iv.switch, "switch differs at {:?}", iv.span);
        }
    }
    Ok(())
}

fn initial_block(rng: &mut Stream) -> CheckResult {
    let (p, q) = dominating_pair(rng, 2);
    if !(p.get(0) > 0.01 && p.get(0) < 0.5 && p.get(1) > 0.01) {
        return Ok(());
    }
    let n0 = rng.gen_range(1..=3);
    let frac = rng.gen_range(0.05..0.45);
    let err = |e: Error| e.to_string();
    let bj = build_block_joining(&quantile_coupling(&p, &q), MarkerConfig::new(0, 1, 2).unwrap()).map_err(err)?;
    let gap = filler_entropies(&bj, 1 << 16).map_err(err)?.gap;
    if gap <= 0.0 {
        return Ok(());
    }
    let (smb_eps, delta) = (frac * gap, gap * (1.0 - 2.0 * frac));
    let gamma = bj.conditioned_block_coupling(1 << 16).map_err(err)?;
    let (gx, gy) = gamma.marginals();
    let oy = GoodSetOracle::new(&gy, smb_eps, Direction::Lower);
    let ox = GoodSetOracle::new(&gx, smb_eps, Direction::Upper);
    let ib = build_beta(&gamma, n0, &oy, 1 << 20).map_err(err)?;
    let power = product_power(&gamma, n0, 1 << 20).map_err(err)?;
    ensure!(ib.beta.is_subordinate(&power).unwrap(), "beta leaves the support of the power");
    ensure!(ib.split <= ib.good_outputs.len().saturating_sub(1), "split {} too large", ib.split);
    for j in 0..=2 {
        let w = iterative_star(&ib.beta, &vec![gamma.clone(); j], 1 << 20).map_err(err)?;
        let psi = extract_psi(&w, &ox, &oy, n0, 4, &ib.good_outputs).map_err(err)?;
        let bound = desirable_bound(psi.input_not_cg, psi.output_not_cg, delta, n0, j, 4).map_err(err)?;
        ensure!(
            1.0 - psi.desirable_mass <= bound + 1e-12,
            "non-desirable mass {} above bound {bound} at j = {j}",
            1.0 - psi.desirable_mass
        );
    }
    Ok(())
}
