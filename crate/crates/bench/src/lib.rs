//! Shared inputs for the solver benchmarks.

use whittle::{RestlessArm, SolverOptions, Variant, default_recompute_count};

/// Dense random arm used by every benchmark of size `n`.
pub fn bench_arm(n: usize) -> RestlessArm {
    whittle::generate_dense_uniform(n, 42)
}

/// The configurations compared by the benchmarks, with their labels.
pub fn configurations(n: usize) -> Vec<(&'static str, SolverOptions)> {
    let base = SolverOptions::default();
    vec![
        ("cubic", base.with_variant(Variant::Cubic)),
        (
            "cubic-no-check",
            base.with_variant(Variant::Cubic).with_check(false),
        ),
        (
            "block",
            base.with_variant(Variant::Block(default_recompute_count(n))),
        ),
    ]
}
