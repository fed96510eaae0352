use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sinai_core::factorlab::{desirable_bound, extract_psi, Direction, GoodSetOracle, Pipeline};
use sinai_core::process::{build_block_joining_with, MarkerConfig};
use sinai_core::rng::stream;
use sinai_core::{
    choose_parameters, iterative_star, quantile_coupling, Dist, Estimate, FactorProblem, N0Rule, SearchConfig,
};

use super::common::*;

const DESK: &str = r#"{
  "schema": "sinai-experiment/1",
  "p": [0.08, 0.92],
  "q": [0.995, 0.005],
  "marker": {"a": 0, "b": 1},
  "epsilon": 0.9,
  "trials": 4000000,
  "search": {"n0Max": 3, "n0Rule": {"rule": "exactVerified", "horizon": 4}},
  "run": {"windows": 4, "windowLength": 1000000, "psiHorizon": 4},
  "simulate": {"ks": [2, 3, 4], "length": 400000, "writeLength": 500}
}"#;

fn desk_problem() -> FactorProblem {
    let p = Dist::new(vec![0.08, 0.92]).unwrap();
    let q = Dist::new(vec![0.995, 0.005]).unwrap();
    FactorProblem::monotone(quantile_coupling(&p, &q), 0, 1, 0.9)
}

pub fn exact_block_map() -> Verdict {
    let problem = desk_problem();
    let cfg = SearchConfig {
        n0_max: 3,
        n0_rule: N0Rule::ExactVerified { horizon: 4 },
        trials: 4_000_000,
        ..SearchConfig::default()
    };
    let mut t = Tally::default();
    let params = match choose_parameters(&problem, &cfg) {
        Ok(o) => o.params,
        Err(e) => {
            return Verdict {
                passed: false,
                detail: format!("parameter search failed: {e}"),
                time_limit: 120.0,
            }
        }
    };
    t.check(params.k == 2 && params.n0 <= 3, || format!("chose k = {}, n0 = {}", params.k, params.n0));
    let mc = MarkerConfig::new(0, 1, params.k).unwrap();
    let bj = build_block_joining_with(&problem.seed, &problem.base, mc).unwrap();
    let pipeline = Pipeline::new(bj, params, cfg.budget).unwrap();
    let gamma = pipeline.gamma();
    let initial = pipeline.initial();
    let m = gamma.rows().size();
    let (gx, gy) = gamma.marginals();
    let ox = GoodSetOracle::new(&gx, params.smb_eps, Direction::Upper);
    let oy = GoodSetOracle::new(&gy, params.smb_eps, Direction::Lower);

    let mut trace = Vec::new();
    for j in 0..=4 - params.n0 {
        let w = iterative_star(&initial.beta, &vec![gamma.clone(); j], cfg.budget).unwrap();
        let psi = extract_psi(&w, &ox, &oy, params.n0, m, &initial.good_outputs).unwrap();
        // Recount P(Y = Psi(X)) straight from the coupling's cells.
        let hit: f64 = w.iter().filter(|&(x, y, _)| psi.apply(x) == y).map(|(_, _, mass)| mass).sum();
        t.check((hit - psi.hit_probability).abs() < 1e-12, || format!("j={j}: hit {hit} vs {}", psi.hit_probability));
        t.check(hit >= 1.0 - params.eta, || format!("j={j}: P(Y = Psi(X)) = {hit} < 1 - {}", params.eta));
        let bound = desirable_bound(psi.input_not_cg, psi.output_not_cg, params.delta, params.n0, j, m).unwrap();
        let tail: f64 = (0..j).map(|i| (-params.delta * (params.n0 + i) as f64).exp()).sum();
        let by_hand = psi.input_not_cg + psi.output_not_cg + (-params.delta * params.n0 as f64).exp() + m as f64 * tail;
        t.check((bound - by_hand).abs() < 1e-12, || format!("j={j}: bound {bound} vs {by_hand}"));
        t.check(1.0 - psi.desirable_mass <= bound + 1e-12, || {
            format!("j={j}: non-desirable {} above {bound}", 1.0 - psi.desirable_mass)
        });

        // The sampler draws from the same law.
        let mut rng = stream(6, "acceptance-psi", j as u64);
        let draws = 200_000;
        let mut hits = 0;
        let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for _ in 0..draws {
            let (xs, ys) = pipeline.fill(&mut rng, j);
            // Blocks are lexicographic, so the initial block is the most significant.
            let fold = |v: &[usize]| v[1..].iter().fold(v[0], |acc, &b| acc * m + b);
            let (x, y) = (fold(&xs), fold(&ys));
            hits += usize::from(psi.apply(x) == y);
            *cells.entry((x, y)).or_insert(0) += 1;
        }
        let e = Estimate::proportion(hits, draws);
        t.check((e.mean - hit).abs() <= 4.0 * e.stderr.max(1e-9), || {
            format!("j={j}: sampled hit {} +- {} vs exact {hit}", e.mean, e.stderr)
        });
        t.check(cells.keys().all(|&(x, y)| w.mass(x, y) > 0.0), || format!("j={j}: sampled cell outside support"));
        trace.push(format!(
            "j={j}: P(Y=Psi(X)) {hit:.4} (sampled {:.4}), non-desirable {:.3} <= {bound:.3}",
            e.mean,
            1.0 - psi.desirable_mass
        ));
    }
    let mut v = t.verdict("block-map", 120.0);
    v.detail = format!(
        "{}; k={} n0={} eta={:.3}; {}",
        v.detail,
        params.k,
        params.n0,
        params.eta,
        trace.join(", ")
    );
    v
}

fn sinai(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sinai")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sinai-acceptance-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("desk.json"), DESK).unwrap();
    dir
}

pub fn end_to_end() -> Verdict {
    let dir = scratch("factor");
    let cfg = dir.join("desk.json");
    let out = dir.join("out");
    let (code, stderr) = sinai(&["factor", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let report: serde_json::Value = match fs::read(out.join("report.json")) {
        Ok(b) => serde_json::from_slice(&b).unwrap(),
        Err(_) => {
            return Verdict {
                passed: false,
                detail: format!("no report (exit {code}): {}", stderr.trim()),
                time_limit: 600.0,
            }
        }
    };
    let _ = fs::remove_dir_all(&dir);
    let mut t = Tally::default();
    let af = &report["almostFactor"];
    let constraint = |name: &str| {
        report["constraints"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["name"] == name)
            .map(|c| (c["passed"] == true, c["detail"].as_str().unwrap_or("").to_string()))
    };
    t.check(af["passed"] == true, || format!("almost factor fails: worst {}", af["worst"]));
    let ws = constraint("weak-star inequality");
    t.check(ws.as_ref().is_some_and(|c| c.0), || format!("weak-star inequality: {ws:?}"));
    let violations = report["relationViolations"].as_u64().unwrap();
    t.check(violations == 0, || format!("{violations} coordinates leave the order"));
    t.check(code == 0 && report["passed"] == true, || format!("exit {code}, {}", stderr.trim()));
    let f = |v: &serde_json::Value| v.as_f64().unwrap_or(f64::NAN);
    let mut v = t.verdict("end-to-end", 600.0);
    v.detail = format!(
        "{}; worst held-out error {:.4} vs epsilon {} (constant predictor {:.4}), weak-star {}, \
         {} coordinates with no order violation, desirable mass at j=0 {:.3}",
        v.detail,
        f(&af["worst"]["mean"]),
        af["epsilon"],
        f(&af["constantBaseline"]),
        ws.map(|c| c.1).unwrap_or_default(),
        report["coordinates"],
        f(&report["psi"][0]["desirableMass"]),
    );
    v
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

pub fn determinism() -> Verdict {
    let dir = scratch("determinism");
    let cfg = dir.join("desk.json");
    let mut t = Tally::default();
    let mut files = 0;
    for command in ["check", "simulate", "factor"] {
        let runs: Vec<_> = ["a", "b"]
            .iter()
            .map(|r| {
                let out = dir.join(format!("{command}-{r}"));
                let args = [command, "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", out.to_str().unwrap()];
                let (code, _) = sinai(&args);
                (code, snapshot(&out))
            })
            .collect();
        t.check(runs[0].0 == runs[1].0, || format!("{command}: exit codes differ"));
        t.check(!runs[0].1.is_empty(), || format!("{command}: no output files"));
        t.check(runs[0].1 == runs[1].1, || format!("{command}: outputs differ"));
        files += runs[0].1.len();
    }
    let _ = fs::remove_dir_all(&dir);
    let mut v = t.verdict("determinism", 600.0);
    v.detail = format!("{}; {files} output files byte-identical across two runs", v.detail);
    v
}
