//! Wall-clock timing of the solver variants on random dense arms.

use std::time::{Duration, Instant};

use serde::Serialize;
use whittle::{IndexResult, RestlessArm, SolverOptions, compute_indices, generate_dense_uniform};

use crate::{VariantName, variant_label};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub variant: String,
    pub check: bool,
    pub median_ms: f64,
}

/// One timed solve.
pub fn time_solve(
    arm: &RestlessArm,
    opts: &SolverOptions,
) -> anyhow::Result<(Duration, IndexResult)> {
    let t = Instant::now();
    let r = compute_indices(arm, opts)?;
    Ok((t.elapsed(), r))
}

pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty(), "median of nothing");
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median time of every `(n, variant, check)` combination over `repeats`
/// arms. Repeat `j` uses the dense arm seeded `seed + j`, shared by all
/// combinations for the same `n`.
pub fn run_bench(
    ns: &[usize],
    variants: &[VariantName],
    checks: &[bool],
    repeats: usize,
    seed: u64,
) -> anyhow::Result<Vec<BenchRow>> {
    anyhow::ensure!(repeats >= 1, "repeats must be at least 1");
    let mut rows = Vec::new();
    for &n in ns {
        let combos: Vec<_> = variants
            .iter()
            .flat_map(|&v| checks.iter().map(move |&c| (v.resolve(n, None), c)))
            .collect();
        let mut times = vec![Vec::with_capacity(repeats); combos.len()];
        for j in 0..repeats {
            let arm = generate_dense_uniform(n, seed.wrapping_add(j as u64));
            for (t, &(v, c)) in times.iter_mut().zip(&combos) {
                let opts = SolverOptions::default().with_variant(v).with_check(c);
                t.push(time_solve(&arm, &opts)?.0.as_secs_f64() * 1e3);
            }
        }
        for ((v, c), mut t) in combos.into_iter().zip(times) {
            rows.push(BenchRow {
                n,
                variant: variant_label(v),
                check: c,
                median_ms: median(&mut t),
            });
        }
    }
    Ok(rows)
}
