use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ipbt::compare::{self, CompareOptions};
use ipbt::config::ExperimentConfig;
use ipbt::runner::{self, RunOptions};
use ipbt::{plotdata, CliError};
use ipbt_core::stats::CiMethod;

/// Iterated population based training and baselines on synthetic tasks.
#[derive(Parser)]
#[command(name = "ipbt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config, one output directory per seed.
    Run {
        config: PathBuf,
        /// Run only these seeds instead of the config's list.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Override a config value, e.g. `--set engine.step_growth=linear`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 1)]
        parallel_seeds: usize,
        /// Training threads per process (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Continue ipbt/pbt runs from their checkpoints.
        #[arg(long)]
        resume: bool,
        /// Root for relative output directories [env: IPBT_OUTPUT_ROOT].
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// IQM, confidence intervals and paired tests over finished runs.
    Compare {
        /// summary.json files, directories holding them, or TSV score tables.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long, default_value_t = 50_000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, value_enum, default_value_t = Ci::Percentile)]
        ci: Ci,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export best-score and hyperparameter-schedule CSVs from a history.
    Plotdata {
        /// history.jsonl or the seed directory containing it.
        history: PathBuf,
        /// Defaults to the history's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Ci {
    Percentile,
    Basic,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ipbt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            overrides,
            parallel_seeds,
            threads,
            resume,
            output_root,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let seeds = if seeds.is_empty() { cfg.seeds.clone() } else { seeds };
            let opts = RunOptions {
                resume,
                parallel_seeds,
                threads,
                output_root,
            };
            let exp = runner::experiment_dir(&cfg, opts.output_root.as_deref());
            let mut worst: Option<CliError> = None;
            for (seed, res) in runner::run_experiment(&cfg, &seeds, &opts)? {
                match res {
                    Ok(s) => println!(
                        "seed {seed}: best {} after {} restarts, {} inner steps -> {}",
                        s.best_score.map_or("n/a".into(), |v| format!("{v:.6}")),
                        s.restart_count,
                        s.consumed_budget,
                        runner::seed_dir(&exp, seed).display()
                    ),
                    Err(e) => {
                        eprintln!("seed {seed}: {e}");
                        if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) {
                            worst = Some(e);
                        }
                    }
                }
            }
            worst.map_or(Ok(()), Err)
        }
        Command::Compare {
            inputs,
            reference,
            replicates,
            seed,
            confidence,
            ci,
            output,
        } => {
            let opts = CompareOptions {
                reference,
                replicates,
                seed,
                confidence,
                ci_method: match ci {
                    Ci::Percentile => CiMethod::Percentile,
                    Ci::Basic => CiMethod::Basic,
                },
                ..Default::default()
            };
            let table = compare::build_table(&compare::load_inputs(&inputs)?)?;
            let text = compare::render(&compare::compare(&table, &opts)?, &opts);
            match output {
                Some(p) => ipbt::checkpoint::write_atomic(&p, text.as_bytes()),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Plotdata { history, out_dir } => {
            let dir = out_dir.unwrap_or_else(|| {
                if history.is_dir() {
                    history.clone()
                } else {
                    history.parent().map(PathBuf::from).unwrap_or_default()
                }
            });
            let (a, b) = plotdata::export(&history, &dir)?;
            println!("{}\n{}", a.display(), b.display());
            Ok(())
        }
    }
}
