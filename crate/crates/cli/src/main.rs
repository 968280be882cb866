//! `pdeid`: generate PDE datasets, extract features, and run the term-detection experiments.

mod cmd_data;
mod cmd_model;
mod error;
mod run;
mod store;
mod table;

use clap::{Parser, Subcommand};
use error::Result;
use pdeid_core::par::Exec;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "pdeid", version, about)]
struct Cli {
    /// Worker threads for generate, featurize and loeo (0 = all cores)
    #[arg(long, global = true, env = "PDEID_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every parameter tuple of the selected classes and store the raw fields
    Generate(cmd_data::GenerateArgs),
    /// Extract the 46 features of every sample into features.csv
    Featurize(cmd_data::FeaturizeArgs),
    /// Train term detectors and/or the multiclass model on a feature table
    Train(cmd_model::TrainCmd),
    /// Stratified split: multiclass and detector-pipeline test accuracy
    Evaluate(cmd_model::EvaluateCmd),
    /// Leave-one-equation-out identification with the detector pipeline
    Loeo(cmd_model::LoeoCmd),
    /// Multiclass accuracy per feature-family subset over several seeds
    Ablation(cmd_model::AblationCmd),
    /// Family and per-feature gain importance
    Importance(cmd_model::ImportanceCmd),
    /// Coefficient regression, wave speed and damping estimates
    Coeff(cmd_data::CoeffArgs),
    /// Plot-ready series for one sample
    Series(cmd_data::SeriesArgs),
}

fn configure_threads(threads: usize) -> Result<Exec> {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| error::CliError::Usage(format!("--threads: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(Exec::default())
}

fn dispatch(cli: Cli) -> Result<()> {
    let exec = configure_threads(cli.threads)?;
    match &cli.command {
        Command::Generate(a) => cmd_data::generate(a, exec),
        Command::Featurize(a) => cmd_data::featurize(a, exec),
        Command::Train(a) => cmd_model::train(a),
        Command::Evaluate(a) => cmd_model::evaluate(a),
        Command::Loeo(a) => cmd_model::loeo(a, exec),
        Command::Ablation(a) => cmd_model::ablation_cmd(a),
        Command::Importance(a) => cmd_model::importance(a),
        Command::Coeff(a) => cmd_data::coeff(a, Exec::Sequential),
        Command::Series(a) => cmd_data::series(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
