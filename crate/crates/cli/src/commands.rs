//! The `check`, `simulate` and `factor` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sinai_core::factorlab::Pipeline;
use sinai_core::process::{
    build_block_joining_with, decompose, draw_decomposition, filler_entropies, frozen_stats_of,
    sample_alternating_traced, weak_star_distance, CylinderSource, MarkerConfig, ProcessWindow,
};
use sinai_core::rng::stream;
use sinai_core::{entropy, run_factor, Error};

use crate::config::ExperimentConfig;
use crate::{exit, Common, Failure};

type Outcome = std::result::Result<(), Failure>;

fn load(common: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    Ok(ExperimentConfig::load(&common.config)?)
}

fn master_seed(common: &Common, cfg: &ExperimentConfig) -> u64 {
    common.seed.unwrap_or(cfg.seed)
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct FillerRow {
    k: usize,
    h_input: f64,
    h_output: f64,
    gap: f64,
    lower_bound: f64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckReport {
    p: Vec<f64>,
    q: Vec<f64>,
    relation: Option<Vec<(usize, usize)>>,
    dominance: bool,
    entropy_p: f64,
    entropy_q: f64,
    entropy_gap: f64,
    /// Whether the factor pipeline accepts this instance.
    eligible: bool,
    reason: Option<String>,
    /// Exact filler entropies per block length, up to the table budget.
    fillers: Vec<FillerRow>,
    witness: Option<String>,
}

pub fn check(common: &Common, want_witness: bool) -> Outcome {
    let cfg = load(common)?;
    let (p, q) = cfg.laws()?;
    let (hp, hq) = (entropy(&p), entropy(&q));
    let seed = match cfg.seed_coupling() {
        Ok(c) => Some(c),
        Err(Error::Precondition(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut reason = None;
    if seed.is_none() {
        reason = Some(match cfg.relation {
            None => "p does not dominate q".to_string(),
            Some(_) => "no coupling of p and q inside the relation".to_string(),
        });
    } else if let Err(e) = cfg.problem().and_then(|pr| pr.check()) {
        reason = Some(e.to_string());
    }

    let mut fillers = Vec::new();
    if let Some(seed) = &seed {
        let problem = cfg.problem()?;
        for k in cfg.search.k_min.max(1)..=cfg.search.k_max {
            let mc = MarkerConfig::new(cfg.marker.a, cfg.marker.b, k)?;
            let f = build_block_joining_with(seed, &problem.base, mc)
                .and_then(|bj| filler_entropies(&bj, cfg.budgets.table));
            match f {
                Ok(f) => fillers.push(FillerRow {
                    k,
                    h_input: f.h_input,
                    h_output: f.h_output,
                    gap: f.gap,
                    lower_bound: f.lower_bound,
                }),
                Err(Error::Budget { .. }) => break,
                Err(e) => return Err(e.into()),
            }
        }
    }

    let report = CheckReport {
        p: p.probs().to_vec(),
        q: q.probs().to_vec(),
        relation: cfg.relation.clone(),
        dominance: seed.is_some(),
        entropy_p: hp,
        entropy_q: hq,
        entropy_gap: hp - hq,
        eligible: reason.is_none(),
        reason: reason.clone(),
        fillers,
        witness: if want_witness {
            seed.as_ref().map(|c| c.to_triplets())
        } else {
            None
        },
    };
    let text = json(&report);
    print!("{text}");
    if let Some(dir) = &common.out {
        write(dir, "check.json", &text)?;
        if let (true, Some(c)) = (want_witness, &seed) {
            write(dir, "witness.txt", &c.to_triplets())?;
        }
    }
    match reason {
        None => Ok(()),
        Some(r) => Err(Failure::new(exit::PRECONDITION, format!("not eligible for the factor pipeline: {r}"))),
    }
}

/// Header of the simulation statistics file.
pub const STATS_HEADER: &str =
    "k,pFrozen,frozenBound,weakStarEstimate,truncationBound,samples,pFrozenStderr,weakStarStderr";

pub fn simulate(common: &Common) -> Outcome {
    let cfg = load(common)?;
    let master = master_seed(common, &cfg);
    let sim = &cfg.simulate;
    let length = common.trials.unwrap_or(sim.length);
    let i_max = common.imax.unwrap_or(sim.i_max);
    let problem = cfg.problem()?;
    let p_a = problem.seed.marginals().0.get(cfg.marker.a);
    let out = common.out.clone().unwrap_or_else(|| ".".into());

    let mut csv = String::from(STATS_HEADER);
    csv.push('\n');
    for &k in &sim.ks {
        let mc = MarkerConfig::new(cfg.marker.a, cfg.marker.b, k)?;
        let bj = build_block_joining_with(&problem.seed, &problem.base, mc)?;
        let mut windows = Vec::with_capacity(sim.windows);
        let mut drawn = Vec::with_capacity(sim.windows);
        for w in 0..sim.windows {
            let mut rng = stream(master, &format!("simulate-k{k}"), w as u64);
            let (window, draws) = sample_alternating_traced(&mut rng, &bj, length, sim.burn_in)?;
            drawn.push(draw_decomposition(&window.x, &draws, &mc));
            windows.push(window);
        }
        // Markers a^(2k) b get rare quickly in k, so the frozen statistics use
        // the generator's own intervals.
        let frozen = frozen_stats_of(&drawn, &mc, p_a)?;
        let ws = weak_star_distance(
            CylinderSource::Iid(bj.seed()),
            CylinderSource::Windows(&windows),
            bj.alphabet_size(),
            i_max,
            cfg.budgets.table,
        )?;
        writeln!(
            csv,
            "{k},{},{},{},{},{},{},{}",
            frozen.frozen.mean,
            frozen.bound,
            ws.estimate,
            ws.truncation_bound,
            ws.samples,
            frozen.frozen.stderr,
            ws.stderr
        )
        .expect("string write");

        let first = &windows[0];
        let len = sim.write_length.clamp(1, first.len());
        let slice = ProcessWindow::new(first.x[..len].to_vec(), first.y[..len].to_vec(), len / 2)?;
        write(&out, &format!("window_k{k}.txt"), &slice.to_text())?;
        let mut d = match decompose(&first.x, &mc) {
            Ok(d) => d,
            Err(Error::Degenerate(_)) => drawn[0].clone(),
            Err(e) => return Err(e.into()),
        };
        d.markers.retain(|s| s.hi < len);
        d.intervals.retain(|iv| iv.span.hi < len);
        let mut text = d.to_json();
        text.push('\n');
        write(&out, &format!("decomposition_k{k}.json"), &text)?;
    }
    write(&out, "stats.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn factor(common: &Common) -> Outcome {
    let cfg = load(common)?;
    let master = master_seed(common, &cfg);
    let exact = !common.sampled;
    let problem = cfg.problem()?;
    problem.check()?;
    let search = cfg.search_config(master, common.trials.unwrap_or(cfg.trials), exact);
    let run = cfg.run_config(common.imax);
    let report = run_factor(&problem, &search, &run)?;
    let text = format!("{}\n", report.to_json());
    match &common.out {
        Some(dir) => {
            write(dir, "report.json", &text)?;
            let mc = MarkerConfig::new(problem.a, problem.b, report.params.k)?;
            let bj = build_block_joining_with(&problem.seed, &problem.base, mc)?;
            let pipeline = Pipeline::new(bj, report.params, search.budget)?;
            write(dir, "gamma.txt", &pipeline.gamma().to_triplets())?;
            write(dir, "beta.txt", &pipeline.initial().beta.to_triplets())?;
        }
        None => print!("{text}"),
    }
    for c in report.constraints.iter().filter(|c| !c.passed) {
        eprintln!("constraint failed: {}: {}", c.name, c.detail);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::new(exit::VERIFICATION, "some constraints failed"))
    }
}
