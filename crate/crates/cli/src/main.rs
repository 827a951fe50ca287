//! `labelind` command-line harness.
//!
//! Exit codes:
//!
//! | code | meaning                                                      |
//! |------|--------------------------------------------------------------|
//! | 0    | success                                                      |
//! | 2    | bad command line (unknown flag, missing argument)            |
//! | 3    | invalid or unreadable configuration, or a config mismatch    |
//! | 4    | input data rejected (CSV, schema or generator parameters)    |
//! | 5    | imputation, sampling, training or evaluation failed          |
//! | 6    | filesystem or run-artifact error                             |
//! | 7    | a requested case has no predictions                          |

mod commands;
mod error;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelind::{ImputationMethod, ModelKind};

#[derive(Parser)]
#[command(name = "labelind", version, about = "Label-indeterminacy experiments for FTA prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic case file with known counterfactual outcomes.
    Synth(SynthArgs),
    /// Validate a case CSV against a schema and report label counts.
    Ingest(IngestArgs),
    /// Run the method x model x subset grid.
    Run(RunArgs),
    /// Print MCC tables, distribution distances or per-case means of a run.
    Report(ReportArgs),
    /// Print the top features by boosted-tree gain for each method of a run.
    Importance(ImportanceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Confounded,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator config (JSON); missing fields take preset values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
    #[arg(long)]
    n_cases: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    confounding: Option<f64>,
    #[arg(long)]
    detention_rate: Option<f64>,
    /// Case CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Feature schema (JSON) describing the case CSV.
    #[arg(long)]
    schema_out: Option<PathBuf>,
    /// Ground-truth CSV: counterfactual outcome and propensities per case.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Write the encoded feature matrix as CSV.
    #[arg(long)]
    encoded_out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Case CSV; requires --schema.
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    /// Synthetic data from a preset, used when neither --config nor --data
    /// names a data source.
    #[arg(long, value_enum, conflicts_with = "data")]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subsets: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<ImputationMethod>>,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    /// Run directory for artifacts; an existing run with the same config is
    /// resumed.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory written by `run`.
    #[arg(long)]
    run: PathBuf,
    /// Comma-separated case ids; prints their mean predictions instead of
    /// the tables.
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<String>>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 3)]
    top: usize,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Run(a) => commands::run(a),
        Command::Report(a) => commands::report(a),
        Command::Importance(a) => commands::importance(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
