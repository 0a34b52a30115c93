//! Fraction of indexable arms among random arms.

use std::fmt;
use std::str::FromStr;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use whittle::{RestlessArm, SolverOptions, Variant, compute_indices, generate_banded};

/// Band structure of generated arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bandwidth {
    Dense,
    /// Number of nonzero diagonals, odd.
    Band(usize),
}

impl Bandwidth {
    pub fn generate(self, n: usize, seed: u64) -> anyhow::Result<RestlessArm> {
        Ok(match self {
            Bandwidth::Dense => whittle::generate_dense_uniform(n, seed),
            Bandwidth::Band(b) => generate_banded(n, b, seed)?,
        })
    }
}

impl FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "dense" {
            return Ok(Bandwidth::Dense);
        }
        match s.parse::<usize>() {
            Ok(b) if b % 2 == 1 => Ok(Bandwidth::Band(b)),
            _ => Err(format!(
                "bandwidth must be `dense` or an odd integer, got {s:?}"
            )),
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Dense => f.write_str("dense"),
            Bandwidth::Band(b) => write!(f, "{b}"),
        }
    }
}

/// Seed of the `i`-th arm of a run seeded with `seed`.
pub fn arm_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub n: usize,
    pub bandwidth: String,
    pub samples: usize,
    #[serde(rename = "indexable")]
    pub indexable_count: usize,
    pub seed: u64,
}

impl StatsRow {
    pub fn fraction(&self) -> f64 {
        self.indexable_count as f64 / self.samples as f64
    }
}

/// Counts indexable arms among `samples` random arms with `n` states. Arm
/// `i` uses seed `arm_seed(seed, i)`, so the count does not depend on how
/// the work is split across threads.
pub fn stats_cell(n: usize, bw: Bandwidth, samples: usize, seed: u64) -> anyhow::Result<StatsRow> {
    anyhow::ensure!(samples >= 1, "samples must be at least 1");
    let opts = SolverOptions::default().with_variant(Variant::Cubic);
    let flags = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = arm_seed(seed, i);
            let arm = bw.generate(n, s)?;
            let r = compute_indices(&arm, &opts)
                .with_context(|| format!("n = {n}, bandwidth {bw}, arm seed {s}"))?;
            Ok(r.is_indexable())
        })
        .collect::<anyhow::Result<Vec<bool>>>()?;
    Ok(StatsRow {
        n,
        bandwidth: bw.to_string(),
        samples,
        indexable_count: flags.into_iter().filter(|&b| b).count(),
        seed,
    })
}

/// One row per `(n, bandwidth)` pair, in input order, computed on `jobs`
/// threads.
pub fn run_stats(
    ns: &[usize],
    bandwidths: &[Bandwidth],
    samples: usize,
    seed: u64,
    jobs: usize,
) -> anyhow::Result<Vec<StatsRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    pool.install(|| {
        let mut rows = Vec::new();
        for &n in ns {
            for &bw in bandwidths {
                rows.push(stats_cell(n, bw, samples, seed)?);
            }
        }
        Ok(rows)
    })
}

pub fn write_csv<W: std::io::Write, R: Serialize>(out: W, rows: &[R]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
