//! Experiment configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sinai_core::factorlab::{FactorProblem, N0Rule, RunConfig, SearchConfig};
use sinai_core::{dominates, quantile_coupling, r_dominates, Coupling, Dist, Error, Relation, Result};

pub const SCHEMA: &str = "sinai-experiment/1";

/// A probability written as a number or as a string like `"1/3"` or `"0.25"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Number(f64),
    Text(String),
}

impl Prob {
    pub fn value(&self) -> Result<f64> {
        match self {
            Prob::Number(x) => Ok(*x),
            Prob::Text(s) => {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad probability {s:?}")))
                };
                match s.split_once('/') {
                    Some((num, den)) => {
                        let d = parse(den)?;
                        if d == 0.0 {
                            return Err(Error::Parse(format!("zero denominator in {s:?}")));
                        }
                        Ok(parse(num)? / d)
                    }
                    None => parse(s),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Marker {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct SimulateSection {
    pub ks: Vec<usize>,
    /// Coordinates per window.
    pub length: usize,
    pub windows: usize,
    pub burn_in: usize,
    pub i_max: usize,
    /// Leading coordinates of the first window written as text and JSON.
    pub write_length: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            ks: vec![4, 6, 8, 10],
            length: 1_000_000,
            windows: 1,
            burn_in: 1_000,
            i_max: 2,
            write_length: 2_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Budgets {
    /// Largest sparse coupling support.
    pub support: usize,
    /// Largest exhaustive enumeration.
    pub table: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            support: 1 << 22,
            table: 1 << 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub schema: String,
    pub p: Vec<Prob>,
    pub q: Vec<Prob>,
    #[serde(default)]
    pub relation: Option<Vec<(usize, usize)>>,
    pub marker: Marker,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Monte Carlo coordinates per search check.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub budgets: Budgets,
}

fn default_trials() -> usize {
    200_000
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct SearchSection {
    pub k_min: usize,
    pub k_max: usize,
    pub n0_max: usize,
    pub k_super_min: usize,
    pub k_super_max: usize,
    pub n0_rule: N0Rule,
    pub smb_horizon: usize,
    pub smb_fraction: f64,
    pub burn_in: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = SearchConfig::default();
        Self {
            k_min: d.k_min,
            k_max: d.k_max,
            n0_max: d.n0_max,
            k_super_min: d.k_super_min,
            k_super_max: d.k_super_max,
            n0_rule: d.n0_rule,
            smb_horizon: d.smb_horizon,
            smb_fraction: d.smb_fraction,
            burn_in: d.burn_in,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct RunSection {
    pub windows: usize,
    pub window_length: usize,
    pub burn_in: usize,
    pub radius: usize,
    pub i_max: usize,
    pub psi_horizon: usize,
    pub collision_samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunConfig::default();
        Self {
            windows: d.windows,
            window_length: d.window_len,
            burn_in: d.burn_in,
            radius: d.radius,
            i_max: d.i_max,
            psi_horizon: d.psi_horizon,
            collision_samples: d.collision_samples,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(Error::Parse(format!(
                "schema {:?}, expected {SCHEMA:?}",
                cfg.schema
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let (p, q) = self.laws()?;
        if p.len() != q.len() {
            return Err(Error::AlphabetMismatch {
                left: p.len(),
                right: q.len(),
            });
        }
        if self.marker.a >= self.marker.b || self.marker.b >= p.len() {
            return Err(Error::Precondition(format!(
                "marker symbols a={} < b={} must lie in [0, {})",
                self.marker.a,
                self.marker.b,
                p.len()
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Precondition(format!("epsilon = {} outside (0, 1)", self.epsilon)));
        }
        self.relation()?;
        Ok(())
    }

    pub fn laws(&self) -> Result<(Dist, Dist)> {
        let read = |v: &[Prob]| -> Result<Dist> {
            Dist::new(v.iter().map(Prob::value).collect::<Result<Vec<_>>>()?)
        };
        Ok((read(&self.p)?, read(&self.q)?))
    }

    pub fn relation(&self) -> Result<Option<Relation>> {
        let n = self.p.len();
        self.relation
            .as_ref()
            .map(|pairs| Relation::new(n, pairs.iter().copied()))
            .transpose()
    }

    /// The seed coupling: the quantile coupling under the order, or a
    /// max-flow witness under a relation.
    pub fn seed_coupling(&self) -> Result<Coupling> {
        let (p, q) = self.laws()?;
        match self.relation()? {
            None => {
                if !dominates(&p, &q)? {
                    return Err(Error::Precondition("p does not dominate q".into()));
                }
                Ok(quantile_coupling(&p, &q))
            }
            Some(r) => r_dominates(&p, &q, &r)?
                .ok_or_else(|| Error::Precondition("no coupling of p and q inside the relation".into())),
        }
    }

    pub fn problem(&self) -> Result<FactorProblem> {
        let seed = self.seed_coupling()?;
        let (a, b) = (self.marker.a, self.marker.b);
        Ok(match self.relation()? {
            None => FactorProblem::monotone(seed, a, b, self.epsilon),
            Some(r) => FactorProblem::with_relation(seed, r, a, b, self.epsilon),
        })
    }

    pub fn search_config(&self, seed: u64, trials: usize, exact: bool) -> SearchConfig {
        let s = &self.search;
        SearchConfig {
            k_min: s.k_min,
            k_max: s.k_max,
            n0_max: s.n0_max,
            k_super_min: s.k_super_min,
            k_super_max: s.k_super_max,
            n0_rule: s.n0_rule,
            smb_horizon: s.smb_horizon,
            smb_fraction: s.smb_fraction,
            trials,
            burn_in: s.burn_in,
            budget: self.budgets.support,
            table_limit: self.budgets.table,
            exact,
            seed,
        }
    }

    pub fn run_config(&self, i_max: Option<usize>) -> RunConfig {
        let r = &self.run;
        RunConfig {
            windows: r.windows,
            window_len: r.window_length,
            burn_in: r.burn_in,
            radius: r.radius,
            i_max: i_max.unwrap_or(r.i_max),
            psi_horizon: r.psi_horizon,
            collision_samples: r.collision_samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": "sinai-experiment/1",
        "p": ["1/3", "1/3", "1/3"],
        "q": [0.6, "0.3", "1/10"],
        "marker": {"a": 0, "b": 1},
        "epsilon": 0.3
    }"#;

    #[test]
    fn fractions_and_decimals_parse() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let (p, q) = cfg.laws().unwrap();
        assert!((p.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.probs()[2] - 0.1).abs() < 1e-15);
        assert_eq!(cfg.simulate.ks, vec![4, 6, 8, 10]);
    }

    #[test]
    fn unknown_fields_and_schemas_are_rejected() {
        let extra = MINIMAL.replace("\"epsilon\"", "\"colour\": 1, \"epsilon\"");
        assert!(ExperimentConfig::parse(&extra).is_err());
        let old = MINIMAL.replace("sinai-experiment/1", "sinai-experiment/0");
        assert!(ExperimentConfig::parse(&old).is_err());
        let nested = MINIMAL.replace("\"epsilon\"", "\"run\": {\"window\": 3}, \"epsilon\"");
        assert!(ExperimentConfig::parse(&nested).is_err());
    }

    #[test]
    fn bad_probabilities_are_rejected() {
        let bad = MINIMAL.replace("\"1/10\"", "\"1/0\"");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = MINIMAL.replace("\"1/10\"", "\"0.2\"");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }
}
