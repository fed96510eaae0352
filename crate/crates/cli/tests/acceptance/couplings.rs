use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use sinai_core::rng::stream;
use sinai_core::{dominates, marriage_refine, quantile_coupling, star_couple, Alphabet, Coupling, StarSampler};

use super::common::*;

pub fn quantile() -> Verdict {
    let mut rng = stream(1, "acceptance-quantile", 0);
    let mut t = Tally::default();
    let mut dominated = 0;
    for i in 0..1_000 {
        let n = rng.gen_range(1..=8);
        let (p, q) = if i % 2 == 0 {
            dominating_pair(&mut rng, n)
        } else {
            (dist(&mut rng, n), dist(&mut rng, n))
        };
        let c = quantile_coupling(&p, &q);
        let (cp, cq) = c.marginals();
        let drift = max_diff(&cp, &p).max(max_diff(&cq, &q));
        t.check(drift <= 1e-12, || format!("marginal drift {drift:e}"));
        if dominates(&p, &q).unwrap() {
            dominated += 1;
            t.check(c.iter().all(|(x, y, _)| x >= y), || format!("non-monotone support for {p:?} {q:?}"));
        }
        let all: BTreeSet<usize> = (0..n).collect();
        let split = c.split_elements(&all).unwrap().len();
        t.check(split < n, || format!("{split} split elements for N = {n}"));
    }
    let mut v = t.verdict("quantile", 1.0);
    v.detail = format!("{}; {dominated} of 1000 pairs dominated", v.detail);
    v
}

/// Vertices of the polytope of couplings supported inside `support` with the
/// given marginals. A feasible point is a vertex iff its support graph is a
/// forest, so every acyclic edge subset is solved by peeling leaves.
fn vertices(support: &[(usize, usize)], rows: &[f64], cols: &[f64]) -> Vec<BTreeMap<(usize, usize), f64>> {
    let (nr, nc) = (rows.len(), cols.len());
    let mut found = Vec::new();
    for mask in 0u32..(1 << support.len()) {
        let edges: Vec<(usize, usize)> = (0..support.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| support[i])
            .collect();
        if !acyclic(&edges, nr, nc) {
            continue;
        }
        let mut need: Vec<f64> = rows.iter().chain(cols).copied().collect();
        let mut left: BTreeSet<usize> = (0..edges.len()).collect();
        let mut flow = BTreeMap::new();
        let node = |e: (usize, usize)| [e.0, nr + e.1];
        while let Some(&leaf_edge) = left.iter().find(|&&i| {
            node(edges[i])
                .iter()
                .any(|&v| left.iter().filter(|&&j| node(edges[j]).contains(&v)).count() == 1)
        }) {
            let [a, b] = node(edges[leaf_edge]);
            let deg = |v: usize| left.iter().filter(|&&j| node(edges[j]).contains(&v)).count();
            let (leaf, other) = if deg(a) == 1 { (a, b) } else { (b, a) };
            let m = need[leaf];
            need[leaf] = 0.0;
            need[other] -= m;
            flow.insert(edges[leaf_edge], m);
            left.remove(&leaf_edge);
        }
        let feasible = need.iter().all(|r| r.abs() < 1e-9) && flow.values().all(|&m| m > 1e-12);
        if feasible && flow.len() == edges.len() {
            found.push(flow);
        }
    }
    found
}

fn acyclic(edges: &[(usize, usize)], nr: usize, nc: usize) -> bool {
    let mut parent: Vec<usize> = (0..nr + nc).collect();
    fn root(p: &mut [usize], mut v: usize) -> usize {
        while p[v] != v {
            p[v] = p[p[v]];
            v = p[v];
        }
        v
    }
    for &(r, c) in edges {
        let (a, b) = (root(&mut parent, r), root(&mut parent, nr + c));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

fn split_of(entries: &BTreeMap<(usize, usize), f64>, b: &BTreeSet<usize>) -> usize {
    let mut targets: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(x, y), &m) in entries {
        if m > 0.0 && b.contains(&y) {
            *targets.entry(x).or_insert(0) += 1;
        }
    }
    targets.values().filter(|&&c| c >= 2).count()
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

pub fn marriage() -> Verdict {
    let mut rng = stream(2, "acceptance-marriage", 0);
    let mut t = Tally::default();
    for _ in 0..10_000 {
        let (r, c) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let alpha = coupling(&mut rng, r, c);
        let b = subset(&mut rng, c);
        let refined = marriage_refine(&alpha, &b).unwrap();
        t.check(refined.is_subordinate(&alpha).unwrap(), || "support grew".into());
        let (ra, rb) = refined.marginals();
        let (aa, ab) = alpha.marginals();
        let drift = max_diff(&ra, &aa).max(max_diff(&rb, &ab));
        t.check(drift <= 1e-10, || format!("marginal drift {drift:e}"));
        let split = refined.split_elements(&b).unwrap().len();
        t.check(split <= b.len().saturating_sub(1), || format!("{split} split for |B'| = {}", b.len()));
    }

    // Every 3x3 coupling with masses in (1/d) Z for d <= 5, against every B'.
    let mut instances = 0;
    let mut seen = BTreeSet::new();
    for d in 1..=5usize {
        for comp in compositions(d, 9) {
            let g = comp.iter().fold(d, |g, &x| gcd(g, x));
            if !seen.insert((d / g, comp.iter().map(|x| x / g).collect::<Vec<_>>())) {
                continue;
            }
            let entries: Vec<(usize, usize, f64)> = comp
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0)
                .map(|(i, &m)| (i / 3, i % 3, m as f64 / d as f64))
                .collect();
            let alpha = Coupling::new(Alphabet::flat(3), Alphabet::flat(3), entries.iter().copied()).unwrap();
            let support: Vec<(usize, usize)> = entries.iter().map(|&(x, y, _)| (x, y)).collect();
            let verts = vertices(&support, &alpha.row_weights(), &alpha.col_weights());
            t.check(!verts.is_empty(), || "polytope without vertices".into());
            for mask in 0..8u32 {
                let b: BTreeSet<usize> = (0..3).filter(|&y| mask >> y & 1 == 1).collect();
                let bound = b.len().saturating_sub(1);
                let worst_vertex = verts.iter().map(|v| split_of(v, &b)).max().unwrap_or(0);
                t.check(worst_vertex <= bound, || format!("vertex splits {worst_vertex} > {bound}"));
                let refined = marriage_refine(&alpha, &b).unwrap();
                let out: BTreeMap<(usize, usize), f64> = refined.iter().map(|(x, y, m)| ((x, y), m)).collect();
                let split = split_of(&out, &b);
                t.check(split <= bound, || format!("refinement splits {split} > {bound} on {entries:?}"));
                t.check(out.keys().all(|k| support.contains(k)), || "refinement leaves the support".into());
                // An acyclic support is already a vertex and must come back unchanged.
                if acyclic(&support, 3, 3) {
                    t.check(refined.max_abs_diff(&alpha) < 1e-12, || format!("vertex {entries:?} moved"));
                }
                instances += 1;
            }
        }
    }
    let mut v = t.verdict("refinement", 30.0);
    v.detail = format!("{}; {instances} grid instances cross-checked against vertex enumeration", v.detail);
    v
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn star() -> Verdict {
    let mut rng = stream(3, "acceptance-star", 0);
    let mut t = Tally::default();
    for shape in 0..256usize {
        let [r1, c1, r2, c2] = [shape & 3, shape >> 2 & 3, shape >> 4 & 3, shape >> 6 & 3].map(|x| x + 1);
        for _ in 0..20 {
            let z1 = coupling(&mut rng, r1, c1);
            let z2 = coupling(&mut rng, r2, c2);
            let s = star_couple(&z1, &z2).unwrap();
            let d1 = s.first_pair().unwrap().max_abs_diff(&z1);
            let d2 = s.second_pair().unwrap().max_abs_diff(&z2);
            t.check(d1 <= 1e-10 && d2 <= 1e-10, || format!("pair laws differ by {d1:e}, {d2:e}"));
            let i1 = s.info_first_output_vs_second_pair();
            let i2 = s.info_second_input_vs_first_pair();
            t.check(i1.abs() <= 1e-10 && i2.abs() <= 1e-10, || format!("information {i1:e}, {i2:e}"));
            let split = s.max_split_rows();
            t.check(split < c2, || format!("{split} split rows with {c2} outputs"));
        }
    }

    // Sampler against the exact law, cell by cell.
    let z1 = coupling(&mut rng, 3, 3);
    let z2 = coupling(&mut rng, 3, 3);
    let exact = star_couple(&z1, &z2).unwrap();
    let sampler = StarSampler::new(&z1, &z2).unwrap();
    let draws = 1_000_000;
    let mut counts: BTreeMap<(usize, usize, usize, usize), usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(sampler.sample(&mut rng)).or_insert(0) += 1;
    }
    let mut worst: f64 = 0.0;
    for (cell, m) in exact.iter() {
        let hat = counts.remove(&cell).unwrap_or(0) as f64 / draws as f64;
        let se = (m * (1.0 - m) / draws as f64).sqrt();
        worst = worst.max((hat - m).abs() / se);
    }
    t.check(counts.is_empty(), || format!("{} sampled cells outside the exact support", counts.len()));
    t.check(worst <= 4.0, || format!("sampler off by {worst:.2} standard errors"));
    let mut v = t.verdict("star", 60.0);
    v.detail = format!("{}; sampler worst cell {worst:.2} se over {} cells", v.detail, exact.support_len());
    v
}
