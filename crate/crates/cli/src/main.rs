//! `natcode` command-line driver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use natcode::experiment::ModelId;
use natcode::pipeline::PipelineError;
use natcode::transforms::TransformKind;

#[derive(Parser, Debug)]
#[command(name = "natcode", version, about = "Meaning-preserving Java rewrites scored by n-gram language models")]
pub struct Cli {
    /// TOML run configuration; values in the file override command-line flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build, deduplicate and split file manifests.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Inspect how a source file is tokenized and parsed.
    #[command(subcommand)]
    Frontend(FrontendCmd),
    /// Generate transformed variants.
    #[command(subcommand)]
    Transform(TransformCmd),
    /// Train and apply n-gram models.
    #[command(subcommand)]
    Lm(LmCmd),
    /// Score transformations and aggregate the differences.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Statistical tests over delta files.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Build survey pairs and forms, and analyze responses.
    #[command(subcommand)]
    Survey(SurveyCmd),
    /// Run every stage end to end.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand, Debug)]
pub enum CorpusCmd {
    /// List the source files of project directories and drop duplicate files.
    Ingest {
        /// A project directory (repeatable).
        #[arg(long = "root")]
        roots: Vec<PathBuf>,
        /// A directory whose subdirectories are projects.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Keep files whose parent directory and name repeat.
        #[arg(long)]
        no_dedup: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every project train or test.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output manifest (default: overwrite the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-project file counts and split labels.
    Summary {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum FrontendCmd {
    /// Print tokens, expression trees and method scopes.
    Dump {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum TransformCmd {
    /// Transform the test files of a manifest, one JSON record per line.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Transformation kinds (comma separated or repeated).
        #[arg(long = "kind", value_delimiter = ',', default_values_t = TransformKind::ALL.to_vec())]
        kinds: Vec<TransformKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = natcode::corpus::DEFAULT_DUP_THRESHOLD)]
        dup_threshold: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ModelParams {
    #[arg(long, default_value_t = natcode::lm::DEFAULT_ORDER)]
    pub order: usize,
    /// Interpolation weight of each n-gram level.
    #[arg(long, default_value_t = natcode::lm::DEFAULT_LAMBDA_JM)]
    pub lambda_jm: f64,
    /// Weight of the per-file cache in blended scoring.
    #[arg(long, default_value_t = natcode::lm::DEFAULT_LAMBDA_CACHE)]
    pub lambda_cache: f64,
    /// Keep the literal 0 when abstracting.
    #[arg(long)]
    pub keep_zero: bool,
}

#[derive(Subcommand, Debug)]
pub enum LmCmd {
    /// Train a model on the train files of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        params: ModelParams,
        /// Train on abstracted token streams.
        #[arg(long)]
        abstracted: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-token surprisal of a file.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        file: PathBuf,
        /// Blend a per-file cache with this weight.
        #[arg(long)]
        cache: Option<f64>,
        #[arg(long)]
        keep_zero: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum ExperimentCmd {
    /// Score every sampled transformation of the test files.
    Run {
        #[arg(long)]
        train_manifest: PathBuf,
        #[arg(long)]
        test_manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = ModelId::ALL.to_vec())]
        models: Vec<ModelId>,
        #[arg(long, value_delimiter = ',', default_values_t = TransformKind::ALL.to_vec())]
        kinds: Vec<TransformKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: ModelParams,
        #[arg(long, default_value_t = natcode::corpus::DEFAULT_DUP_THRESHOLD)]
        dup_threshold: u64,
        /// Use a saved concrete-token model instead of training one.
        #[arg(long)]
        global_model: Option<PathBuf>,
        /// Use a saved abstracted-token model instead of training one.
        #[arg(long)]
        abstracted_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per (kind, model) medians, tests and intervals.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bonferroni family size (default: number of cells).
        #[arg(long)]
        family_size: Option<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = ModelId::ALL.to_vec())]
        models: Vec<ModelId>,
        #[arg(long, value_delimiter = ',', default_values_t = TransformKind::ALL.to_vec())]
        kinds: Vec<TransformKind>,
    },
}

#[derive(Subcommand, Debug)]
pub enum StatsCmd {
    /// Wilcoxon signed-rank tests of the deltas per group.
    Wilcoxon {
        #[arg(long = "in")]
        input: PathBuf,
        /// Grouping fields: kind, model, file, parent, operator.
        #[arg(long, value_delimiter = ',', default_value = "kind,model")]
        group: Vec<String>,
        #[arg(long, default_value_t = 1)]
        family_size: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Test line-level deltas instead.
        #[arg(long)]
        lines: bool,
        #[arg(long, default_value = "\t")]
        delimiter: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regress deltas on original surprisal and covariates for one cell.
    Regress {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        kind: TransformKind,
        #[arg(long, default_value_t = ModelId::Global)]
        model: ModelId,
        /// Categories seen fewer times are dropped.
        #[arg(long, default_value_t = 100)]
        min_category: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum SurveyCmd {
    /// Choose the lines whose transformation moved surprisal the most.
    Select {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = natcode::survey::DEFAULT_PER_CELL)]
        per_cell: usize,
        #[arg(long, default_value_t = ModelId::Global)]
        model: ModelId,
    },
    /// Write randomized forms and their answer keys.
    Emit {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 1)]
        n_forms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = natcode::survey::DEFAULT_PER_RESPONDENT)]
        per_respondent: usize,
        #[arg(long, default_value = "forms")]
        out: PathBuf,
    },
    /// Agreement between responses and the model.
    Analyze {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Long-format export, one response per row.
        #[arg(long)]
        long: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Directory whose subdirectories are projects.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "natcode-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub params: ModelParams,
    #[arg(long, default_value_t = 0.7)]
    pub split_ratio: f64,
    #[arg(long, default_value_t = natcode::corpus::DEFAULT_DUP_THRESHOLD)]
    pub dup_threshold: u64,
    #[arg(long, value_delimiter = ',', default_values_t = ModelId::ALL.to_vec())]
    pub models: Vec<ModelId>,
    #[arg(long, value_delimiter = ',', default_values_t = TransformKind::ALL.to_vec())]
    pub kinds: Vec<TransformKind>,
    #[arg(long)]
    pub global_model: Option<PathBuf>,
    #[arg(long)]
    pub abstracted_model: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("cannot size the worker pool: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<PipelineError>().map_or(40, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
