use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use whittle::{Criterion, SolverOptions};
use whittle_cli::bench::run_bench;
use whittle_cli::check::{Outcome, check_arm};
use whittle_cli::files::{ResultFile, read_arm, write_arm};
use whittle_cli::stats::{Bandwidth, run_stats, write_csv};
use whittle_cli::{VariantName, resolve_tolerance, variant_label};

/// Whittle index computation for restless bandit arms.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionName {
    Avg,
    Discounted,
}

#[derive(Subcommand)]
enum Command {
    /// Test indexability and compute the indices of an arm file.
    ///
    /// Exit code 0: indexable, 2: not indexable, 3: multichain policy met,
    /// 1: error.
    Compute {
        arm_file: PathBuf,
        /// Defaults to `discounted` when the file sets a discount.
        #[arg(long, value_enum)]
        criterion: Option<CriterionName>,
        /// Discount factor; defaults to the file's `discount`.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_enum, default_value = "block")]
        variant: VariantName,
        /// Number of full computations for the block variant.
        #[arg(long)]
        recompute_count: Option<usize>,
        /// Skip the indexability test (indices are only meaningful for
        /// indexable arms).
        #[arg(long)]
        no_index_check: bool,
        /// Overrides BANDIT_INDEX_TOL and the built-in default.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Result file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver with the exhaustive oracle or the naive variant.
    Check {
        arm_file: PathBuf,
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 10)]
        max_n: usize,
        #[arg(long, value_enum, default_value = "block")]
        variant: VariantName,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Write random arm files with seeds seed, seed+1, ...
    Generate {
        #[arg(long)]
        n: usize,
        /// `dense` or an odd number of nonzero diagonals.
        #[arg(long, default_value = "dense")]
        bandwidth: Bandwidth,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Count indexable arms among random arms, one CSV row per cell.
    Stats {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "dense")]
        bandwidth: Vec<Bandwidth>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        /// CSV output; standard output when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Median solve times on random dense arms.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "cubic,block")]
        variant: Vec<VariantName>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Time runs with the indexability test off as well.
        #[arg(long)]
        with_no_check: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.cmd {
        Command::Compute {
            arm_file,
            criterion,
            beta,
            variant,
            recompute_count,
            no_index_check,
            tolerance,
            out,
        } => {
            let arm = read_arm(&arm_file)?;
            let discounted = match criterion {
                Some(c) => matches!(c, CriterionName::Discounted),
                None => arm.discount().is_some() || beta.is_some(),
            };
            let criterion = if discounted {
                let b = beta
                    .or(arm.discount())
                    .context("discounted criterion needs --beta or a `discount` in the arm file")?;
                anyhow::ensure!(b > 0.0 && b < 1.0, "--beta {b} is not in (0, 1)");
                Criterion::Discounted(b)
            } else {
                Criterion::AverageReward
            };
            let v = variant.resolve(arm.n(), recompute_count);
            let opts = SolverOptions {
                check_indexability: !no_index_check,
                variant: v,
                criterion,
                tolerance: resolve_tolerance(tolerance)?,
            };
            let (elapsed, result) = whittle_cli::bench::time_solve(&arm, &opts)?;
            let file = ResultFile::new(&result, variant_label(v), elapsed.as_secs_f64() * 1e3);
            let mut w = output(out.as_ref())?;
            serde_json::to_writer_pretty(&mut w, &file)?;
            writeln!(w)?;
            Ok(file.exit_code())
        }
        Command::Check {
            arm_file,
            oracle,
            max_n,
            variant,
            tolerance,
        } => {
            let arm = read_arm(&arm_file)?;
            let opts = SolverOptions {
                variant: variant.resolve(arm.n(), None),
                tolerance: resolve_tolerance(tolerance)?,
                ..SolverOptions::default()
            };
            let report = check_arm(&arm, &opts, oracle, max_n)?;
            println!("{report}");
            Ok(if report.outcome == Outcome::Disagree {
                2
            } else {
                0
            })
        }
        Command::Generate {
            n,
            bandwidth,
            seed,
            count,
            out_dir,
        } => {
            anyhow::ensure!(n >= 1, "--n must be at least 1");
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for i in 0..count {
                let s = whittle_cli::stats::arm_seed(seed, i);
                let arm = bandwidth.generate(n, s)?;
                let path = out_dir.join(format!("arm_n{n}_{bandwidth}_s{s}.json"));
                write_arm(&path, &arm)?;
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Stats {
            n,
            bandwidth,
            samples,
            seed,
            jobs,
            csv,
        } => {
            let jobs =
                jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |j| j.get()));
            let rows = run_stats(&n, &bandwidth, samples, seed, jobs)?;
            write_csv(output(csv.as_ref())?, &rows)?;
            Ok(0)
        }
        Command::Bench {
            n,
            variant,
            repeats,
            seed,
            with_no_check,
            csv,
        } => {
            let checks: &[bool] = if with_no_check {
                &[true, false]
            } else {
                &[true]
            };
            let rows = run_bench(&n, &variant, checks, repeats, seed)?;
            write_csv(output(csv.as_ref())?, &rows)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
