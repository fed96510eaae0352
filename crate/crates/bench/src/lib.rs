//! Shared fixtures for the benchmarks.

use sinai_core::{quantile_coupling, Coupling, Dist};

/// The quantile coupling of `(1/3, 1/3, 1/3)` onto `(0.6, 0.3, 0.1)`.
pub fn three_letter_seed() -> Coupling {
    let p = Dist::uniform(3);
    let q = Dist::new(vec![0.6, 0.3, 0.1]).unwrap();
    quantile_coupling(&p, &q)
}

/// The quantile coupling of `(0.08, 0.92)` onto `(0.995, 0.005)`.
pub fn two_letter_seed() -> Coupling {
    let p = Dist::new(vec![0.08, 0.92]).unwrap();
    let q = Dist::new(vec![0.995, 0.005]).unwrap();
    quantile_coupling(&p, &q)
}
