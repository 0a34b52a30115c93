//! Cross-checks a solver run against a reference computation.

use std::fmt;

use whittle::oracle::{OracleVerdict, oracle_indexability};
use whittle::{IndexResult, RestlessArm, SolverOptions, Variant, Verdict, compute_indices};

/// Indices agreeing within this distance are reported as agreeing.
pub const AGREE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Agree,
    Disagree,
    UnsupportedByOracle,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Agree => "AGREE",
            Outcome::Disagree => "DISAGREE",
            Outcome::UnsupportedByOracle => "UNSUPPORTED_BY_ORACLE",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub solver: String,
    pub reference: String,
    /// Largest index difference when both sides are indexable.
    pub max_delta: Option<f64>,
    pub outcome: Outcome,
    pub note: Option<String>,
}

fn max_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x == y { 0.0 } else { (x - y).abs() })
        .fold(0.0, f64::max)
}

/// Runs the solver with `opts` and compares it with the exhaustive oracle
/// (`oracle = true`, arms of at most `max_n` states) or with the naive
/// variant.
pub fn check_arm(
    arm: &RestlessArm,
    opts: &SolverOptions,
    oracle: bool,
    max_n: usize,
) -> anyhow::Result<CheckReport> {
    if oracle && arm.n() > max_n {
        anyhow::bail!("arm has {} states, more than --max-n {max_n}", arm.n());
    }
    let got = compute_indices(arm, opts)?;
    if oracle {
        let reference = oracle_indexability(arm)?;
        Ok(against_oracle(&got, &reference))
    } else {
        let reference = compute_indices(arm, &opts.with_variant(Variant::Naive))?;
        let same_status = got.status() == reference.status();
        let delta = match (got.indices(), reference.indices()) {
            (Some(a), Some(b)) => Some(max_delta(a, b)),
            _ => None,
        };
        let agree = same_status && delta.is_none_or(|d| d <= AGREE_TOL);
        Ok(CheckReport {
            solver: got.status().into(),
            reference: reference.status().into(),
            max_delta: delta,
            outcome: if agree {
                Outcome::Agree
            } else {
                Outcome::Disagree
            },
            note: None,
        })
    }
}

fn against_oracle(got: &IndexResult, reference: &OracleVerdict) -> CheckReport {
    let mut report = CheckReport {
        solver: got.status().into(),
        reference: reference.status().into(),
        max_delta: None,
        outcome: Outcome::Disagree,
        note: None,
    };
    match (&got.verdict, reference) {
        (_, OracleVerdict::Unsupported(why)) => {
            report.outcome = Outcome::UnsupportedByOracle;
            report.note = Some(why.clone());
        }
        (Verdict::Indexable(a), OracleVerdict::Indexable(b)) => {
            let d = max_delta(a, b);
            report.max_delta = Some(d);
            if d <= AGREE_TOL {
                report.outcome = Outcome::Agree;
            }
        }
        (Verdict::NonIndexable { .. }, OracleVerdict::NonIndexable) => {
            report.outcome = Outcome::Agree;
        }
        _ => {}
    }
    report
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "solver: {}", self.solver)?;
        writeln!(f, "reference: {}", self.reference)?;
        if let Some(d) = self.max_delta {
            writeln!(f, "max delta: {d:e}")?;
        }
        if let Some(note) = &self.note {
            writeln!(f, "note: {note}")?;
        }
        write!(f, "{}", self.outcome)
    }
}
