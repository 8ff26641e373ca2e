use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrbandit::harness::{
    run_concentration_study, run_experiment, run_theory_report, BudgetSpec, HarnessError, Study,
    StudyConfig,
};

#[derive(Parser)]
#[command(name = "corrbandit", version, about = "Correlated-bandit best-arm identification studies")]
struct Cli {
    #[command(subcommand)]
    study: StudyCmd,
}

#[derive(Subcommand)]
enum StudyCmd {
    /// Seeded replications of the identification algorithms.
    Experiment(CommonArgs),
    /// Monte Carlo tail frequencies of the estimators vs. their bounds.
    Concentration(CommonArgs),
    /// Exact pairwise KLs and the identification lower-bound curve.
    Theory(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<u32>,
    /// Override the budget: a pull count or `auto`.
    #[arg(long)]
    budget: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the worker count (0 = library default).
    #[arg(long)]
    workers: Option<usize>,
    /// Use the experiment dimensions exactly as printed.
    #[arg(long)]
    as_printed: bool,
    /// Pool variance estimates for each arm across its pairs.
    #[arg(long)]
    pooled_variance: bool,
}

fn load_config(study: Study, args: &CommonArgs) -> Result<StudyConfig, HarnessError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = StudyConfig::parse(study, &text)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.replications = reps;
    }
    if let Some(budget) = &args.budget {
        cfg.budget = if budget == "auto" {
            BudgetSpec::Auto
        } else {
            BudgetSpec::Fixed(
                budget
                    .parse()
                    .map_err(|e| HarnessError::Config(format!("bad --budget: {e}")))?,
            )
        };
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    cfg.as_printed |= args.as_printed;
    cfg.pooled_variance |= args.pooled_variance;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match &cli.study {
        StudyCmd::Experiment(args) => {
            let cfg = load_config(Study::Experiment, args)?;
            let report = run_experiment(&cfg)?;
            for point in &report.budgets {
                for alg in &point.algorithms {
                    println!(
                        "n={} {}: error {:.4} (+/- {:.4}), bound {:.3e}",
                        point.budget,
                        alg.algorithm,
                        alg.error_frequency,
                        alg.std_error,
                        alg.theoretical_bound
                    );
                }
            }
            println!("wrote {}", cfg.out_dir.join("results.csv").display());
            println!("wrote {}", cfg.out_dir.join("summary.json").display());
        }
        StudyCmd::Concentration(args) => {
            let cfg = load_config(Study::Concentration, args)?;
            let rows = run_concentration_study(&cfg)?;
            println!("{} tail cells", rows.len());
            println!("wrote {}", cfg.out_dir.join("tails.csv").display());
        }
        StudyCmd::Theory(args) => {
            let cfg = load_config(Study::Theory, args)?;
            let report = run_theory_report(&cfg)?;
            let violations = report.kl_table.iter().filter(|e| !e.bound_satisfied).count();
            println!(
                "K={} rho={} H_lb={:.4} kl-violations={} warning={}",
                report.k, report.rho, report.complexity.h_lb, violations, report.rho_warning
            );
            println!("wrote {}", cfg.out_dir.join("theory.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_error_json());
            ExitCode::FAILURE
        }
    }
}
