use rand::Rng;
use sinai_core::process::{
    build_block_joining_with, filler_entropies, gap_threshold, sample_alternating_traced, weak_star_distance,
    CylinderSource, MarkerConfig,
};
use sinai_core::rng::stream;
use sinai_core::{cap_h_check, quantile_coupling, Alphabet, Coupling, Dist, Estimate};

use super::common::*;

pub fn desk_laws() -> (Dist, Dist) {
    (Dist::new(vec![1.0 / 3.0; 3]).unwrap(), Dist::new(vec![0.6, 0.3, 0.1]).unwrap())
}

/// A monotone coupling of the desk laws that differs from the quantile
/// coupling, so that blocks and single coordinates follow different laws.
pub fn desk_seed() -> Coupling {
    let t = 1.0 / 3.0;
    let entries = [
        (0, 0, t),
        (1, 0, 0.6 - t - 0.2),
        (1, 1, t - (0.6 - t - 0.2)),
        (2, 0, 0.2),
        (2, 1, 0.3 - (t - (0.6 - t - 0.2))),
        (2, 2, 0.1),
    ];
    Coupling::new(Alphabet::flat(3), Alphabet::flat(3), entries).unwrap()
}

pub fn alternating() -> Verdict {
    let (p, q) = desk_laws();
    let seed = desk_seed();
    let base = quantile_coupling(&p, &q);
    let (len, i_max) = (1_000_000, 2);
    let mut t = Tally::default();
    let mut rows = Vec::new();
    for k in 4..=10 {
        let mc = MarkerConfig::new(0, 1, k).unwrap();
        let bj = build_block_joining_with(&seed, &base, mc).unwrap();
        let mut rng = stream(4, "acceptance-alternating", k as u64);
        let (w, draws) = sample_alternating_traced(&mut rng, &bj, len, 1_000).unwrap();

        for s in 0..3 {
            let fx: Vec<bool> = w.x.iter().map(|&x| x == s).collect();
            let fy: Vec<bool> = w.y.iter().map(|&y| y == s).collect();
            let (ex, ey) = (Estimate::batch_means(&fx, 100), Estimate::batch_means(&fy, 100));
            t.check((ex.mean - p.get(s)).abs() <= 4.0 * ex.stderr, || {
                format!("k={k}: P(x={s}) = {} +- {}", ex.mean, ex.stderr)
            });
            t.check((ey.mean - q.get(s)).abs() <= 4.0 * ey.stderr, || {
                format!("k={k}: P(y={s}) = {} +- {}", ey.mean, ey.stderr)
            });
        }

        // Frozen coordinates read off the generator's own draws.
        let mut frozen = Vec::with_capacity(len);
        for d in &draws {
            let f = !d.block || d.switch;
            frozen.extend(std::iter::repeat_n(f, d.span.hi - d.span.lo + 1));
        }
        let fz = Estimate::batch_means(&frozen, 100);
        let bound = (1.0f64 / 3.0).powi(k as i32 - 1) + (1.0f64 / 3.0).powi(k as i32);
        t.check(fz.at_most(bound, 4.0), || format!("k={k}: frozen {} +- {} vs {bound}", fz.mean, fz.stderr));
        t.check(w.is_monotone(), || format!("k={k}: a sampled coordinate leaves the order"));

        let ws = weak_star_distance(
            CylinderSource::Iid(&seed),
            CylinderSource::Windows(std::slice::from_ref(&w)),
            3,
            i_max,
            1 << 22,
        )
        .unwrap();
        let trunc = 0.5f64.powi(i_max as i32 + 1);
        t.check(ws.truncation_bound == trunc, || format!("truncation {} vs {trunc}", ws.truncation_bound));
        rows.push((k, fz.mean, ws.estimate, ws.stderr));
    }
    let mut strict = 0;
    for pair in rows.windows(2) {
        let ((k0, _, a, sa), (k1, _, b, sb)) = (pair[0], pair[1]);
        if b < a {
            strict += 1;
        }
        let tol = 4.0 * (sa * sa + sb * sb).sqrt();
        t.check(b <= a + tol, || format!("weak-star grows from k={k0} ({a}) to k={k1} ({b}) beyond {tol}"));
    }
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    t.check(last.2 <= first.2, || format!("weak-star at k=10 ({}) above k=4 ({})", last.2, first.2));
    let mut v = t.verdict("process", 300.0);
    let trace: Vec<String> = rows.iter().map(|r| format!("k={} frozen {:.2e} d* {:.4}", r.0, r.1, r.2)).collect();
    v.detail = format!(
        "{}; weak-star strictly smaller at {strict} of {} steps, no step grows beyond 4 se; {}",
        v.detail,
        rows.len() - 1,
        trace.join(", ")
    );
    v
}

pub fn entropy() -> Verdict {
    let mut rng = stream(5, "acceptance-entropy", 0);
    let mut t = Tally::default();
    let mut evaluated = 0;
    while evaluated < 10_000 {
        let n = rng.gen_range(2..=6);
        let z = coupling(&mut rng, n, n);
        let e = rng.gen_range(0..n);
        if z.row_weights()[e] >= 1.0 - 1e-9 {
            continue;
        }
        evaluated += 1;
        let r = cap_h_check(&z, e).unwrap();
        // Recompute both sides from the raw masses.
        let h = |v: &[f64]| -> f64 { v.iter().filter(|&&m| m > 0.0).map(|&m| -m * m.ln()).sum() };
        let mut x = vec![0.0; n];
        let (mut xt, mut yt) = (vec![0.0; n], vec![0.0; n]);
        let mut y = vec![0.0; n];
        for (a, b, m) in z.iter() {
            x[a] += m;
            y[b] += m;
            if a != e {
                xt[a] += m;
                yt[b] += m;
            }
        }
        let u = x[e];
        let (xt, yt): (Vec<f64>, Vec<f64>) = (xt.iter().map(|m| m / (1.0 - u)).collect(), yt.iter().map(|m| m / (1.0 - u)).collect());
        let phi = h(&[u, 1.0 - u]);
        let lower_ok = h(&xt) >= h(&x) - phi - 1e-9;
        let upper_ok = h(&yt) <= h(&y) + phi + u * (n as f64).ln() + 1e-9;
        t.check(lower_ok && upper_ok, || format!("inequality fails: {r:?}"));
        t.check(r.holds == (lower_ok && upper_ok), || format!("report disagrees with recomputation: {r:?}"));
    }

    let (p, q) = desk_laws();
    let seed = quantile_coupling(&p, &q);
    let predicted = gap_threshold(&p, &q, 0, 10);
    t.check(predicted.is_some(), || "no predicted k up to 10".into());
    let predicted = predicted.unwrap_or(usize::MAX);
    let mut first_positive = None;
    for k in 1..=10 {
        let bj = build_block_joining_with(&seed, &seed, MarkerConfig::new(0, 1, k).unwrap()).unwrap();
        let f = filler_entropies(&bj, 1 << 22).unwrap();
        t.check(f.gap >= f.lower_bound - 1e-9, || format!("k={k}: gap {} below bound {}", f.gap, f.lower_bound));
        t.check((f.lower_bound > 0.0) == (k >= predicted), || format!("k={k}: bound sign disagrees with prediction"));
        if k >= predicted {
            t.check(f.gap > 0.0, || format!("k={k}: gap {} not positive", f.gap));
        }
        if f.gap > 0.0 && first_positive.is_none() {
            first_positive = Some(k);
        }
    }
    let mut v = t.verdict("entropy", 60.0);
    v.detail = format!(
        "{}; predicted k = {predicted}, exact gap first positive at k = {}",
        v.detail,
        first_positive.map_or("none".into(), |k| k.to_string())
    );
    v
}
