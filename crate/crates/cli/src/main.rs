//! `hearingkit`: command-line pipeline over congressional hearing
//! transcripts. Exit status 0 on success, 1 on usage or validation errors,
//! 2 on internal errors.

mod commands;
mod config;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hearingkit_core::rng::DEFAULT_SEED;
use hearingkit_core::Error;
use serde::Serialize;

/// Environment variable naming the transcript cache directory.
pub const CACHE_ENV: &str = "HEARINGKIT_CACHE";

#[derive(Debug, Parser, Serialize)]
#[command(name = "hearingkit", version, about = "Congressional hearing transcript pipeline")]
pub struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// TOML file whose keys mirror the long flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Download raw transcripts into <out>/<hearing_id>/transcript.txt.
    Fetch(FetchArgs),
    /// Split raw transcripts into speaker-attributed utterances.
    Segment(SegmentArgs),
    /// Train, apply or evaluate the question/answer classifier.
    #[command(subcommand)]
    ClassifyQa(ClassifyQaCommand),
    /// Pair member questions with witness answers.
    Pair(PairArgs),
    /// Extract the linguistic feature matrix.
    Features(FeaturesArgs),
    /// Two-sample KS tests between speaker groups.
    Kstest(KsArgs),
    /// Build split datasets and train party models.
    Train(TrainArgs),
    /// Score trained party models (or external predictions) on held-out data.
    Evaluate(EvaluateArgs),
    /// Render zero-shot party prompts.
    Prompts(PromptArgs),
    /// Draw a segmentation verification sample or score annotated verdicts.
    #[command(subcommand)]
    VerifySample(VerifyCommand),
    /// Generate synthetic hearings or Q/A training text.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args, Serialize)]
pub struct FetchArgs {
    /// Hearing ids, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<String>,
    /// File with one hearing id per line.
    #[arg(long)]
    pub ids_file: Option<PathBuf>,
    /// URL template with `{hearing_id}`, or a base URL.
    #[arg(long, default_value = hearingkit_core::segment::fetch::GOVINFO_ENDPOINT)]
    pub endpoint: String,
    #[arg(long, env = CACHE_ENV, default_value = ".hearingkit-cache")]
    pub cache_dir: PathBuf,
    /// Minimum delay between requests, milliseconds.
    #[arg(long, default_value_t = 1000)]
    pub min_delay_ms: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SegmentArgs {
    /// Directory of <hearing_id>/{meta.json, roster.json, transcript.txt}.
    #[arg(long)]
    pub input: PathBuf,
    /// Segmentation rules (TOML); the bundled rules by default.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Corpus store to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyQaCommand {
    /// Fit the lexical logistic classifier.
    Train(QaTrainArgs),
    /// Label every utterance of a corpus.
    Apply(QaApplyArgs),
    /// Confusion table against labeled text or a labeled corpus.
    Evaluate(QaEvalArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct QaTrainArgs {
    /// Training CSV in the ama layout (repeatable).
    #[arg(long)]
    pub ama: Vec<PathBuf>,
    /// Training CSV in the ukparl layout (repeatable).
    #[arg(long)]
    pub ukparl: Vec<PathBuf>,
    /// Hand-labeled training CSV (repeatable).
    #[arg(long)]
    pub hand: Vec<PathBuf>,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct QaApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Label utterances below this confidence as Other.
    #[arg(long)]
    pub min_confidence: Option<f64>,
    /// Labeled corpus store to create.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TextFormat {
    Ama,
    Ukparl,
    Hand,
}

#[derive(Debug, Args, Serialize)]
pub struct QaEvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled CSV test set.
    #[arg(long, conflicts_with = "corpus")]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hand")]
    pub format: TextFormat,
    /// Corpus whose Question/Answer labels are ground truth; columns per session.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    /// Corpus with Q/A labels.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    #[arg(long, required_unless_present = "export_lexicons")]
    pub corpus: Option<PathBuf>,
    /// Lexicon directory; the bundled lexicons by default.
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    /// Write the bundled lexicons and their manifest to <out>/lexicons.
    #[arg(long)]
    pub export_lexicons: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Question,
    Answer,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct KsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// pairs.jsonl from `pair`.
    #[arg(long)]
    pub pairs: PathBuf,
    /// features.csv from `features`.
    #[arg(long)]
    pub features: PathBuf,
    /// Party control per session (JSON).
    #[arg(long)]
    pub government: PathBuf,
    /// Utterances to compare; `both` runs questions and answers separately.
    #[arg(long, value_enum, default_value = "both")]
    pub kind: Kind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Experiment file (TOML): split, features, model, grid.
    #[arg(long)]
    pub experiment: PathBuf,
    /// Corpus store; overrides the experiment file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub government: PathBuf,
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Output directory of `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// CSV of (id, label) predictions to score instead of the trained models.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PromptArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value = "question")]
    pub kind: Kind,
    /// Keep speaker names instead of replacing them with a placeholder.
    #[arg(long)]
    pub keep_names: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyCommand {
    /// Draw utterances for manual verification.
    Sample(VerifySampleArgs),
    /// Tally annotated verdicts.
    Score(VerifyScoreArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct VerifySampleArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub hearings_per_session: usize,
    #[arg(long, default_value_t = 50)]
    pub utterances_per_hearing: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyScoreArgs {
    /// sample.csv from `verify-sample sample`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// CSV of (utterance_id, verdict).
    #[arg(long)]
    pub verdicts: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthCommand {
    /// Raw transcripts with rosters, metadata and true boundaries.
    Hearings(SynthHearingsArgs),
    /// Labeled Q/A training text.
    Qa(SynthQaArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthHearingsArgs {
    #[arg(long, default_value_t = 3)]
    pub hearings: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [114u32, 115, 116, 117])]
    pub sessions: Vec<u32>,
    #[arg(long, default_value_t = 6)]
    pub min_exchanges: usize,
    #[arg(long, default_value_t = 12)]
    pub max_exchanges: usize,
    /// Use one marker form per speaker.
    #[arg(long)]
    pub consistent_markers: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthQaArgs {
    #[arg(long, value_enum)]
    pub source: TextFormat,
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Http { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(2);
    }
    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal error (see message above)");
            ExitCode::from(2)
        }
    }
}
