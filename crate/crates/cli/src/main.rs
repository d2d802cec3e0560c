use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metanml::harness::experiment::{run_experiment, ExperimentOutput, RunOptions};
use metanml::harness::suites::{self, SuiteResult, SuiteSizes};
use metanml::harness::{emit_tables, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "metanml",
    version,
    about = "NML classification experiments and bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `experiment.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Output directory; beats the config and $METANML_OUT_DIR.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized inequality and numerics suites.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run a tenth of the default instance counts.
        #[arg(long)]
        quick: bool,
    },
    /// The preset Berry-Esseen decay study on a Bernoulli model.
    Decay {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the optimizers against dense grid search.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

fn report(results: &[SuiteResult]) -> ExitCode {
    for r in results {
        println!("{r}");
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn write_outputs(out: &ExperimentOutput, dir: &Path) -> metanml::Result<()> {
    for path in emit_tables(out, dir)? {
        println!("wrote {}", path.display());
    }
    let s = &out.summary;
    for p in &s.per_n {
        println!(
            "n={:<7} records={:<6} skipped={:<4} median_gap={:<12} median_expL-1={:<12} coverage={}",
            p.n,
            p.records,
            p.skipped,
            fmt_opt(p.median_gap),
            fmt_opt(p.median_exp_leakage_minus_1),
            fmt_opt(p.coverage_frequency),
        );
    }
    if let Some(slope) = s.slope {
        println!("log-log slope of median expL-1: {slope:.4}");
    }
    if let (Some(eps), Some(n0)) = (s.n0_epsilon, s.n0) {
        println!("empirical n0 at epsilon {eps}: {n0}");
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4e}"))
}

fn run(cli: Cli) -> metanml::Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seed) = seed {
                cfg.experiment.seed = seed;
            }
            let dir = cfg.resolve_out_dir(out.as_deref());
            let opts = RunOptions {
                workers,
                dataset_dir: cfg.output.export_datasets.then(|| dir.join("datasets")),
            };
            let output = run_experiment(&cfg, &opts)?;
            write_outputs(&output, &dir)?;
            let violations = output.violations().len();
            if violations > 0 {
                eprintln!(
                    "{violations} records violate an inequality; see {}",
                    dir.join(metanml::harness::tables::VIOLATIONS_FILE)
                        .display()
                );
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { seed, quick } => {
            let mut sizes = SuiteSizes::default();
            if quick {
                sizes = SuiteSizes {
                    gap_bound: sizes.gap_bound / 10,
                    redundancy_gap: sizes.redundancy_gap / 10,
                    redundancy_split: sizes.redundancy_split / 10,
                    fisher_bound: sizes.fisher_bound / 10,
                    nested_pairs: sizes.nested_pairs / 10,
                    pinsker: sizes.pinsker / 10,
                    oracle: sizes.oracle / 10,
                };
            }
            Ok(report(&suites::check_suites(&sizes, seed)?))
        }
        Command::Decay {
            seed,
            replications,
            workers,
            out,
        } => {
            let (output, verdict) = suites::decay_suite(replications, seed, workers)?;
            let dir = output.config.resolve_out_dir(out.as_deref());
            write_outputs(&output, &dir)?;
            Ok(report(&verdict))
        }
        Command::Oracle { seed, instances } => Ok(report(&suites::oracle_suite(instances, seed)?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
