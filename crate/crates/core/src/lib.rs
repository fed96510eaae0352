//! Constructive machinery for monotone factors between finite-alphabet
//! Bernoulli shifts.
//!
//! The crate is organised bottom-up:
//!
//! - [`dist`]: probability vectors, entropy, stochastic and relation-constrained domination;
//! - [`coupling`]: sparse couplings on ordered product alphabets, quantile couplings and
//!   the marriage refinement;
//! - [`star`]: the star-coupling of two jointly distributed pairs and its iterates;
//! - [`process`]: markers, the alternating joining sampler, interval decompositions,
//!   weak-star distances and filler entropies;
//! - [`factorlab`]: good sets, the initial-block coupling, the alternating star-joining,
//!   the deterministic block map and the parameter search.

pub mod coupling;
pub mod dist;
pub mod error;
pub mod factorlab;
pub mod flow;
pub mod process;
pub mod rng;
pub mod star;
pub mod stats;

pub use coupling::{marriage_refine, product_power, quantile_coupling, Alphabet, BlockAlphabet, Coupling};
pub use dist::{binary_entropy, cap_h_check, conditioned_pair, dominates, entropy, r_dominates, CapHReport, Dist, Relation};
pub use error::{Error, Result};
pub use factorlab::{
    almost_factor_test, build_beta, choose_parameters, extract_psi, run_factor, FactorProblem,
    FactorReport, GoodSetOracle, N0Rule, Params, Pipeline, PsiTable, RunConfig, SearchConfig,
};
pub use process::{
    build_block_joining, build_block_joining_with, decompose, filler_entropies, frozen_stats,
    sample_alternating, weak_star_distance, BlockJoining, CylinderSource, FillerEntropies,
    FrozenStats, IntervalDecomposition, MarkerConfig, ProcessWindow, WeakStarReport,
};
pub use star::{iterative_star, star_couple, IterativeStarSampler, StarJoint, StarSampler};
pub use stats::Estimate;
