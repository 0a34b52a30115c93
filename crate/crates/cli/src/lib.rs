//! Support code for the `whittle` command-line tool: file formats, the
//! indexability statistics driver and the timing harness.

pub mod bench;
pub mod check;
pub mod files;
pub mod stats;

use whittle::{Variant, default_recompute_count};

/// Solver variant as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VariantName {
    Naive,
    Cubic,
    Block,
}

impl VariantName {
    /// Resolves the variant for an arm with `n` states. `count` is the number
    /// of full computations for the block variant.
    pub fn resolve(self, n: usize, count: Option<usize>) -> Variant {
        match self {
            VariantName::Naive => Variant::Naive,
            VariantName::Cubic => Variant::Cubic,
            VariantName::Block => {
                Variant::Block(count.unwrap_or_else(|| default_recompute_count(n)))
            }
        }
    }
}

/// Display name of a variant, `block(K)` for the block variant.
pub fn variant_label(v: Variant) -> String {
    match v {
        Variant::Naive => "naive".into(),
        Variant::Cubic => "cubic".into(),
        Variant::Block(k) => format!("block({k})"),
    }
}

/// Environment variable overriding the default solver tolerance.
pub const TOLERANCE_ENV: &str = "BANDIT_INDEX_TOL";

/// Tolerance from the command line, else the environment, else the default.
pub fn resolve_tolerance(flag: Option<f64>) -> anyhow::Result<f64> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var(TOLERANCE_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|e| anyhow::anyhow!("{TOLERANCE_ENV}={s:?} is not a number: {e}")),
        Err(_) => Ok(whittle::index_solver::DEFAULT_TOLERANCE),
    }
}
