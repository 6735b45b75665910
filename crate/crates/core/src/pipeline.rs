//! End-to-end runs: resolved configuration, stage sequencing, artifacts on
//! disk and failure markers.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CorpusError, CorpusManifest, FileEntry, Split, DEFAULT_DUP_THRESHOLD};
use crate::experiment::{aggregate, regress, run_experiment, DeltaRecord, ExperimentConfig, ModelId, Models, TestFile};
use crate::frontend::tokenize;
use crate::lm::{self, abstract_stream, concrete_stream, AbstractionOptions, LmError, NgramModel, DEFAULT_LAMBDA_CACHE, DEFAULT_LAMBDA_JM, DEFAULT_ORDER};
use crate::survey::{emit_survey, select_pairs, PairSet, DEFAULT_PER_CELL, DEFAULT_PER_RESPONDENT};
use crate::stats::OlsOptions;
use crate::transforms::TransformKind;

pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Setup,
    Ingest,
    Split,
    Train,
    Experiment,
    Aggregate,
    Survey,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Setup => "setup",
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Experiment => "experiment",
            Stage::Aggregate => "aggregate",
            Stage::Survey => "survey",
        }
    }

    pub fn number(self) -> i32 {
        self as i32
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

impl ErrorClass {
    pub fn base_code(self) -> i32 {
        match self {
            ErrorClass::Config => 20,
            ErrorClass::Data => 30,
            ErrorClass::Internal => 40,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Internal => "internal",
        }
    }
}

/// A failed stage. The process exit code is the class base plus the stage
/// number, e.g. 34 for a data error in the experiment stage.
#[derive(Debug, Error)]
#[error("{} error in stage {stage}: {message}", class.name())]
pub struct PipelineError {
    pub stage: Stage,
    pub class: ErrorClass,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, class: ErrorClass, message: impl Into<String>) -> PipelineError {
        PipelineError { stage, class, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.class.base_code() + self.stage.number()
    }
}

pub fn corpus_error_class(e: &CorpusError) -> ErrorClass {
    match e {
        CorpusError::BadRatio(_) => ErrorClass::Config,
        _ => ErrorClass::Data,
    }
}

pub fn lm_error_class(e: &LmError) -> ErrorClass {
    match e {
        LmError::BadOrder(_) | LmError::BadLambda(_) => ErrorClass::Config,
        _ => ErrorClass::Data,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory whose immediate subdirectories are projects.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// Additional project directories.
    pub projects: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Pretrained models; when unset the models are trained on the train split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abstracted_model: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { corpus: None, projects: Vec::new(), out_dir: PathBuf::from("natcode-out"), global_model: None, abstracted_model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub order: usize,
    pub lambda_jm: f64,
    pub lambda_cache: f64,
    pub dup_threshold: u64,
    pub split_ratio: f64,
    pub keep_zero: bool,
    pub kinds: Vec<TransformKind>,
    pub models: Vec<ModelId>,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_size: Option<usize>,
    /// Regression categories rarer than this are dropped.
    pub min_category: usize,
    pub per_cell: usize,
    pub per_respondent: usize,
    pub n_forms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            order: DEFAULT_ORDER,
            lambda_jm: DEFAULT_LAMBDA_JM,
            lambda_cache: DEFAULT_LAMBDA_CACHE,
            dup_threshold: DEFAULT_DUP_THRESHOLD,
            split_ratio: 0.7,
            keep_zero: false,
            kinds: TransformKind::ALL.to_vec(),
            models: ModelId::ALL.to_vec(),
            alpha: 0.05,
            family_size: None,
            min_category: 100,
            per_cell: DEFAULT_PER_CELL,
            per_respondent: DEFAULT_PER_RESPONDENT,
            n_forms: 3,
            workers: None,
            paths: Paths::default(),
        }
    }
}

fn config_err(message: impl Into<String>) -> PipelineError {
    PipelineError::new(Stage::Setup, ErrorClass::Config, message)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, PipelineError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// This configuration with every value present in `text` replaced.
    pub fn overlay_toml(&self, text: &str) -> Result<RunConfig, PipelineError> {
        let over: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut base = toml::Table::try_from(self).map_err(|e| PipelineError::new(Stage::Setup, ErrorClass::Internal, e.to_string()))?;
        merge(&mut base, over);
        base.try_into().map_err(|e: toml::de::Error| config_err(e.to_string()))
    }

    pub fn overlay_file(&self, path: &Path) -> Result<RunConfig, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        self.overlay_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(1..=lm::MAX_ORDER).contains(&self.order) {
            return Err(config_err(format!("order must be in 1..={}", lm::MAX_ORDER)));
        }
        if !(self.lambda_jm > 0.0 && self.lambda_jm < 1.0) {
            return Err(config_err("lambda_jm must be in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.lambda_cache) {
            return Err(config_err("lambda_cache must be in [0, 1)"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(config_err("split_ratio must be in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err("alpha must be in (0, 1)"));
        }
        if self.kinds.is_empty() || self.models.is_empty() {
            return Err(config_err("at least one kind and one model must be selected"));
        }
        if self.family_size == Some(0) || self.workers == Some(0) {
            return Err(config_err("family_size and workers must be positive"));
        }
        if self.paths.corpus.is_none() && self.paths.projects.is_empty() {
            return Err(config_err("no corpus configured (paths.corpus or paths.projects)"));
        }
        Ok(())
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            kinds: self.kinds.clone(),
            models: self.models.clone(),
            seed: self.seed,
            dup_threshold: self.dup_threshold,
            lambda_cache: self.lambda_cache,
            keep_zero: self.keep_zero,
        }
    }
}

/// Immediate subdirectories of `dir`, sorted.
pub fn project_dirs(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let io = |source| CorpusError::Io { path: dir.to_path_buf(), source };
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let entry = entry.map_err(io)?;
        if entry.file_type().map_err(io)?.is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

/// Entries labeled `split`, or every entry of an unsplit manifest.
pub fn entries_for(manifest: &CorpusManifest, split: Split) -> Vec<&FileEntry> {
    if manifest.entries.iter().all(|e| e.split.is_none()) {
        manifest.entries.iter().collect()
    } else {
        manifest.with_split(split)
    }
}

/// Reads source files, skipping unreadable ones with a warning.
pub fn read_sources(entries: &[&FileEntry]) -> (Vec<TestFile>, Vec<(String, String)>) {
    let mut files = Vec::new();
    let mut failed = Vec::new();
    for e in entries {
        match fs::read(&e.path) {
            Ok(bytes) => files.push(TestFile { path: e.path.clone(), text: String::from_utf8_lossy(&bytes).into_owned() }),
            Err(err) => {
                log::warn!("cannot read {}: {err}", e.path);
                failed.push((e.path.clone(), err.to_string()));
            }
        }
    }
    (files, failed)
}

/// Trains one model on the token streams of `sources`; files that do not
/// lex are skipped.
pub fn train_model(sources: &[TestFile], order: usize, lambda: f64, abstracted: bool, opts: AbstractionOptions) -> Result<NgramModel, LmError> {
    let streams: Vec<Vec<String>> = sources
        .iter()
        .filter_map(|f| match tokenize(&f.text) {
            Ok(tokens) => Some(if abstracted { abstract_stream(&tokens, opts) } else { concrete_stream(&tokens) }),
            Err(e) => {
                log::warn!("{}: not used for training: {e}", f.path);
                None
            }
        })
        .collect();
    NgramModel::train(&streams, order, lambda, abstracted)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub files_ingested: usize,
    pub duplicates_removed: usize,
    pub train_files: usize,
    pub test_files: usize,
    pub train_projects: Vec<String>,
    pub test_projects: Vec<String>,
    pub transforms: usize,
    /// Distinct transformed sites per kind name.
    pub sites: BTreeMap<String, usize>,
    pub delta_records: usize,
    pub dropped: usize,
    pub failed_files: usize,
    pub survey_pairs: usize,
    pub forms: usize,
}

fn write(stage: Stage, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| PipelineError::new(stage, ErrorClass::Internal, format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| PipelineError::new(stage, ErrorClass::Internal, format!("cannot write {}: {e}", path.display())))
}

/// Line-delimited JSON, one record per line.
pub fn deltas_to_jsonl(records: &[DeltaRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("delta records serialize"));
        out.push('\n');
    }
    out
}

pub fn deltas_from_jsonl(text: &str) -> Result<Vec<DeltaRecord>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

fn obtain_model(stage: Stage, path: Option<&PathBuf>, train: impl FnOnce() -> Result<NgramModel, LmError>, save_to: &Path) -> Result<NgramModel, PipelineError> {
    match path {
        Some(p) => lm::load(p).map_err(|e| PipelineError::new(Stage::Experiment, ErrorClass::Data, format!("model {}: {e}", p.display()))),
        None => {
            let m = train().map_err(|e| PipelineError::new(stage, lm_error_class(&e), e.to_string()))?;
            lm::save(&m, save_to).map_err(|e| PipelineError::new(stage, ErrorClass::Internal, e.to_string()))?;
            Ok(m)
        }
    }
}

fn regression_report(config: &RunConfig, records: &[DeltaRecord]) -> String {
    let mut out = String::from("\nregression: delta ~ original_surprisal + log_num_tokens + parent + operator\n");
    for &kind in &config.kinds {
        for &model in config.models.iter().filter(|m| m.applies_to(kind)) {
            let _ = write!(out, "{kind}\t{model}\t");
            match regress(records, kind, model, config.min_category) {
                Ok(r) => {
                    let c = r.coefficient("original_surprisal").expect("design includes original surprisal");
                    let _ = write!(out, "slope {:.4} (se {:.4})\tR2 {:.3}\tn {}\toutliers removed {}", c.estimate, c.std_error, r.r_squared, r.n_used, r.n_removed_outliers);
                    if !r.vif_warnings.is_empty() {
                        let _ = write!(out, "\tVIF>={} for {}", OlsOptions::default().vif_threshold, r.vif_warnings.join(","));
                    }
                    out.push('\n');
                }
                Err(e) => {
                    let _ = writeln!(out, "NA ({e})");
                }
            }
        }
    }
    out
}

fn stages(config: &RunConfig, out: &Path) -> Result<RunSummary, PipelineError> {
    let mut summary = RunSummary::default();
    write(Stage::Setup, &out.join("config.toml"), config.to_toml())?;

    let mut roots = Vec::new();
    if let Some(dir) = &config.paths.corpus {
        roots.extend(project_dirs(dir).map_err(|e| PipelineError::new(Stage::Ingest, ErrorClass::Data, e.to_string()))?);
    }
    roots.extend(config.paths.projects.iter().cloned());
    let (manifest, stats) = corpus::ingest(&roots).map_err(|e| PipelineError::new(Stage::Ingest, corpus_error_class(&e), e.to_string()))?;
    let (manifest, removed) = corpus::dedup(&manifest);
    summary.files_ingested = stats.files;
    summary.duplicates_removed = removed;

    let manifest = corpus::split_by_project(&manifest, config.split_ratio, config.seed).map_err(|e| PipelineError::new(Stage::Split, corpus_error_class(&e), e.to_string()))?;
    let mut buf = Vec::new();
    manifest.write_to(&mut buf).map_err(|e| PipelineError::new(Stage::Split, ErrorClass::Internal, e.to_string()))?;
    write(Stage::Split, &out.join("manifest.tsv"), buf)?;
    let train_entries = manifest.with_split(Split::Train);
    let test_entries = manifest.with_split(Split::Test);
    summary.train_files = train_entries.len();
    summary.test_files = test_entries.len();
    let projects = |es: &[&FileEntry]| {
        let p: std::collections::BTreeSet<String> = es.iter().map(|e| e.project.clone()).collect();
        p.into_iter().collect::<Vec<_>>()
    };
    summary.train_projects = projects(&train_entries);
    summary.test_projects = projects(&test_entries);

    let opts = AbstractionOptions { keep_zero: config.keep_zero };
    let (train_sources, _) = read_sources(&train_entries);
    let need_global = config.models.iter().any(|m| !m.is_abstracted());
    let need_abs = config.models.iter().any(|m| m.is_abstracted());
    let models_dir = out.join("models");
    fs::create_dir_all(&models_dir).map_err(|e| PipelineError::new(Stage::Train, ErrorClass::Internal, e.to_string()))?;
    let mut models = Models::default();
    if need_global {
        let train = || train_model(&train_sources, config.order, config.lambda_jm, false, opts);
        models.global = Some(obtain_model(Stage::Train, config.paths.global_model.as_ref(), train, &models_dir.join("global.bin"))?);
    }
    if need_abs {
        let train = || train_model(&train_sources, config.order, config.lambda_jm, true, opts);
        models.abstracted = Some(obtain_model(Stage::Train, config.paths.abstracted_model.as_ref(), train, &models_dir.join("abstracted.bin"))?);
    }

    let (test_sources, unreadable) = read_sources(&test_entries);
    let exp = run_experiment(&test_sources, &models, &config.experiment_config()).map_err(|e| PipelineError::new(Stage::Experiment, ErrorClass::Data, e.to_string()))?;
    summary.transforms = exp.transforms;
    summary.sites = exp.sites.iter().map(|(k, n)| (k.to_string(), *n)).collect();
    summary.delta_records = exp.records.len();
    summary.dropped = exp.dropped;
    summary.failed_files = exp.failed_files.len() + unreadable.len();
    write(Stage::Experiment, &out.join("deltas.jsonl"), deltas_to_jsonl(&exp.records))?;

    let table = aggregate(&exp.records, &config.kinds, &config.models, config.alpha, config.family_size).map_err(|e| PipelineError::new(Stage::Aggregate, ErrorClass::Internal, e.to_string()))?;
    write(Stage::Aggregate, &out.join("table.tsv"), table.to_tsv())?;
    let mut report = format!(
        "files {} ({} duplicates removed); train {} files / {} projects; test {} files / {} projects\ntransforms {}; delta records {}; dropped {}\n\n",
        summary.files_ingested,
        summary.duplicates_removed,
        summary.train_files,
        summary.train_projects.len(),
        summary.test_files,
        summary.test_projects.len(),
        summary.transforms,
        summary.delta_records,
        summary.dropped
    );
    let sites: Vec<String> = summary.sites.iter().map(|(k, n)| format!("{k} {n}")).collect();
    let _ = writeln!(report, "sites: {}\n", sites.join(", "));
    report.push_str(&table.render());
    report.push_str(&regression_report(config, &exp.records));
    report.push_str("\nnotes\n");
    for (k, v) in &table.metadata {
        let _ = writeln!(report, "{k}: {v}");
    }
    write(Stage::Aggregate, &out.join("report.txt"), report)?;

    let pairs: PairSet = select_pairs(&exp.records, config.per_cell, ModelId::Global);
    summary.survey_pairs = pairs.pairs.len();
    write(Stage::Survey, &out.join("pairs.json"), serde_json::to_string_pretty(&pairs).expect("pairs serialize") + "\n")?;
    let per_respondent = config.per_respondent.min(pairs.pairs.len());
    if per_respondent < config.per_respondent {
        log::warn!("only {} pairs available; forms hold {per_respondent} questions plus the attention item", pairs.pairs.len());
    }
    if per_respondent > 0 {
        for form in 0..config.n_forms {
            let f = emit_survey(&pairs.pairs, per_respondent, config.seed, form).map_err(|e| PipelineError::new(Stage::Survey, ErrorClass::Internal, e.to_string()))?;
            write(Stage::Survey, &out.join(format!("forms/form_{form:03}.txt")), f.render())?;
            write(Stage::Survey, &out.join(format!("forms/key_{form:03}.tsv")), f.render_key())?;
            summary.forms += 1;
        }
    }
    write(Stage::Survey, &out.join("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    Ok(summary)
}

/// Writes the failure marker for `err` into `out`.
pub fn mark_failure(out: &Path, err: &PipelineError) {
    let text = format!("stage={}\nclass={}\nexit_code={}\nmessage={}\n", err.stage, err.class.name(), err.exit_code(), err.message);
    if fs::create_dir_all(out).and_then(|_| fs::write(out.join(FAILURE_MARKER), text)).is_err() {
        log::error!("cannot write failure marker in {}", out.display());
    }
}

/// Runs every stage. On failure the outputs written so far are kept and a
/// marker naming the failed stage is left in the output directory.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let out = config.paths.out_dir.clone();
    let _ = fs::remove_file(out.join(FAILURE_MARKER));
    let result = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::new(Stage::Setup, ErrorClass::Internal, e.to_string()))
            .and_then(|pool| pool.install(|| stages(config, &out))),
        None => stages(config, &out),
    };
    if let Err(e) = &result {
        mark_failure(&out, e);
    }
    result
}
