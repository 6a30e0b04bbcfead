//! Command-line harness for the aspair pipeline.
//!
//! Exit status: 0 on success, 1 on validation/usage errors, 2 on I/O
//! errors.

mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aspair",
    about = "Aspect-based sentiment analysis via sentence-pair classification",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct TrainOpts {
    /// Gradient-descent step size.
    #[arg(long, default_value_t = 0.2)]
    pub learning_rate: f64,

    /// Number of passes over the training pairs.
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    /// Mini-batch size.
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,

    /// Seed for the epoch shuffler; identical seeds give bit-identical
    /// models.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Feature-hash exponent; the feature space is 2^hash_bits.
    #[arg(long, default_value_t = 18)]
    pub hash_bits: u32,
}

#[derive(Subcommand)]
pub enum Command {
    /// Convert a dataset into a pair-classification TSV.
    Convert {
        /// Dataset flavor: sentihood | semeval.
        #[arg(long)]
        task: String,
        /// Construction method: qa_m | nli_m | qa_b | nli_b | single.
        #[arg(long)]
        method: String,
        /// Dataset file (SentiHood JSON or SemEval XML).
        #[arg(long)]
        input: PathBuf,
        /// Pair TSV to write.
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated aspect override; defaults to the task's
        /// published set.
        #[arg(long)]
        aspects: Option<String>,
    },
    /// Train the built-in classifier on a pair TSV.
    Train {
        /// Pair TSV produced by `convert`.
        #[arg(long)]
        pairs: PathBuf,
        /// Model file to write.
        #[arg(long)]
        model_out: PathBuf,
        /// Label set: auto | sentihood | semeval | binary.
        #[arg(long, default_value = "auto")]
        label_set: String,
        #[command(flatten)]
        train: TrainOpts,
    },
    /// Score a pair TSV with a trained model.
    Predict {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Score TSV to write.
        #[arg(long)]
        scores_out: PathBuf,
    },
    /// Decode a score file against gold data and write an evaluation
    /// report.
    Eval {
        #[arg(long)]
        task: String,
        #[arg(long)]
        method: String,
        /// Gold dataset file (same format as `convert --input`).
        #[arg(long)]
        gold: PathBuf,
        /// Score TSV (from `predict` or an external stack).
        #[arg(long)]
        scores: PathBuf,
        /// Report JSON to write.
        #[arg(long)]
        report_out: PathBuf,
        /// Optional decoded-predictions TSV to write.
        #[arg(long)]
        predictions_out: Option<PathBuf>,
        /// Row label in the rendered table; defaults to the score file
        /// stem.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        aspects: Option<String>,
    },
    /// Render one or more report JSON files as a comparison table.
    Report {
        /// Report files produced by `eval` or `compare`.
        files: Vec<PathBuf>,
    },
    /// Export the reference fine-tuning configuration for external
    /// transformer stacks.
    ExportConfig {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate the single-sentence framing and one pair method
    /// side by side on the same corpus and seed.
    Compare {
        #[arg(long)]
        task: String,
        /// Pair construction method for the pair arm.
        #[arg(long)]
        method: String,
        /// Training dataset file.
        #[arg(long)]
        train: PathBuf,
        /// Evaluation dataset file.
        #[arg(long)]
        test: PathBuf,
        /// Comparison report JSON to write.
        #[arg(long)]
        report_out: PathBuf,
        #[arg(long)]
        aspects: Option<String>,
        #[command(flatten)]
        train_opts: TrainOpts,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 1; --help/--version exit 0.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run::run(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                aspair::Error::Io(_) => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
