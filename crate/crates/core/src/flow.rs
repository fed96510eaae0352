//! Max flow on small dense networks with real capacities (Edmonds-Karp).

use std::collections::VecDeque;

/// Residual network on `n` nodes with `f64` capacities.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    n: usize,
    cap: Vec<f64>,
    flow: Vec<f64>,
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cap: vec![0.0; n * n],
            flow: vec![0.0; n * n],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, capacity: f64) {
        self.cap[from * self.n + to] += capacity;
    }

    fn residual(&self, u: usize, v: usize) -> f64 {
        self.cap[u * self.n + v] - self.flow[u * self.n + v]
    }

    /// Augment along shortest paths until no path with residual above `tol`
    /// remains; returns the total flow value.
    pub fn max_flow(&mut self, source: usize, sink: usize, tol: f64) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[source] = source;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for v in 0..n {
                    if prev[v] == usize::MAX && self.residual(u, v) > tol {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[sink] == usize::MAX {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let u = prev[v];
                bottleneck = bottleneck.min(self.residual(u, v));
                v = u;
            }
            let mut v = sink;
            while v != source {
                let u = prev[v];
                self.flow[u * n + v] += bottleneck;
                self.flow[v * n + u] -= bottleneck;
                v = u;
            }
            total += bottleneck;
        }
    }

    /// Net flow currently routed on the arc `from -> to`.
    pub fn flow_on(&self, from: usize, to: usize) -> f64 {
        self.flow[from * self.n + to].max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1, max flow 23.
        let mut g = FlowNetwork::new(6);
        for &(u, v, c) in &[
            (0, 1, 16.0),
            (0, 2, 13.0),
            (2, 1, 4.0),
            (1, 3, 12.0),
            (3, 2, 9.0),
            (2, 4, 14.0),
            (4, 3, 7.0),
            (3, 5, 20.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert!((g.max_flow(0, 5, 1e-12) - 23.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_sink_has_zero_flow() {
        let mut g = FlowNetwork::new(3);
        g.add_edge(0, 1, 1.0);
        assert_eq!(g.max_flow(0, 2, 1e-12), 0.0);
    }
}
