use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use natcode::corpus::{self, CorpusManifest, Split};
use natcode::experiment::{aggregate, group_field, regress, run_experiment, DeltaRecord, Models};
use natcode::frontend;
use natcode::lm::{self, abstract_stream, concrete_stream, cross_entropy, score_file, AbstractionOptions};
use natcode::pipeline::{
    corpus_error_class, deltas_from_jsonl, deltas_to_jsonl, entries_for, lm_error_class, project_dirs, read_sources, run_pipeline, train_model, ErrorClass, Paths, PipelineError, RunConfig,
    Stage,
};
use natcode::stats::wilcoxon_signed_rank;
use natcode::survey::{analyze_responses, emit_survey, parse_responses, select_pairs, PairSet, SurveyError};
use natcode::transforms::transform_file;
use rayon::prelude::*;

use crate::{Cli, Command, CorpusCmd, ExperimentCmd, FrontendCmd, LmCmd, ModelParams, StatsCmd, SurveyCmd, TransformCmd};

fn fail(stage: Stage, class: ErrorClass, e: impl Display) -> anyhow::Error {
    PipelineError::new(stage, class, e.to_string()).into()
}

fn read_text(stage: Stage, path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| fail(stage, ErrorClass::Data, format!("cannot read {}: {e}", path.display())))
}

fn write_text(stage: Stage, path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| fail(stage, ErrorClass::Internal, format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| fail(stage, ErrorClass::Internal, format!("cannot write {}: {e}", path.display())))
}

fn load_manifest(stage: Stage, path: &Path) -> Result<CorpusManifest> {
    CorpusManifest::load(path).map_err(|e| fail(stage, corpus_error_class(&e), e))
}

fn load_deltas(stage: Stage, path: &Path) -> Result<Vec<DeltaRecord>> {
    deltas_from_jsonl(&read_text(stage, path)?).map_err(|(line, e)| fail(stage, ErrorClass::Data, format!("{}:{line}: {e}", path.display())))
}

fn load_pairs(path: &Path) -> Result<PairSet> {
    serde_json::from_str(&read_text(Stage::Survey, path)?).map_err(|e| fail(Stage::Survey, ErrorClass::Data, format!("{}: {e}", path.display())))
}

/// The flag-derived configuration with the `--config` file laid over it.
fn resolve(config: Option<&Path>, base: RunConfig) -> Result<RunConfig> {
    Ok(match config {
        Some(path) => base.overlay_file(path)?,
        None => base,
    })
}

fn with_params(base: RunConfig, p: &ModelParams) -> RunConfig {
    RunConfig { order: p.order, lambda_jm: p.lambda_jm, lambda_cache: p.lambda_cache, keep_zero: p.keep_zero, ..base }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit_config(stage: Stage, out: &Path, config: &RunConfig) -> Result<()> {
    write_text(stage, &sidecar(out, ".config.toml"), config.to_toml())
}

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Corpus(cmd) => corpus_cmd(cmd),
        Command::Frontend(FrontendCmd::Dump { file }) => {
            let text = read_text(Stage::Setup, &file)?;
            let parsed = frontend::analyze(&text).map_err(|e| fail(Stage::Setup, ErrorClass::Data, format!("{}: {e}", file.display())))?;
            print!("{}", frontend::dump(&parsed));
            Ok(())
        }
        Command::Transform(cmd) => transform_cmd(cmd, config),
        Command::Lm(cmd) => lm_cmd(cmd, config),
        Command::Experiment(cmd) => experiment_cmd(cmd, config),
        Command::Stats(cmd) => stats_cmd(cmd),
        Command::Survey(cmd) => survey_cmd(cmd),
        Command::Pipeline(args) => {
            let base = RunConfig {
                seed: args.seed,
                split_ratio: args.split_ratio,
                dup_threshold: args.dup_threshold,
                kinds: args.kinds,
                models: args.models,
                workers: cli.workers,
                paths: Paths { corpus: args.corpus, out_dir: args.out, global_model: args.global_model, abstracted_model: args.abstracted_model, ..Paths::default() },
                ..with_params(RunConfig::default(), &args.params)
            };
            let config = resolve(config, base)?;
            let summary = run_pipeline(&config)?;
            println!(
                "{} files, {} transformations, {} delta records, {} survey pairs, {} forms -> {}",
                summary.files_ingested,
                summary.transforms,
                summary.delta_records,
                summary.survey_pairs,
                summary.forms,
                config.paths.out_dir.display()
            );
            Ok(())
        }
    }
}

fn corpus_cmd(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Ingest { mut roots, corpus, no_dedup, out } => {
            if let Some(dir) = corpus {
                roots.extend(project_dirs(&dir).map_err(|e| fail(Stage::Ingest, ErrorClass::Data, e))?);
            }
            if roots.is_empty() {
                return Err(fail(Stage::Ingest, ErrorClass::Config, "give at least one --root or --corpus"));
            }
            let (manifest, stats) = corpus::ingest(&roots).map_err(|e| fail(Stage::Ingest, corpus_error_class(&e), e))?;
            let (manifest, removed) = if no_dedup { (manifest, 0) } else { corpus::dedup(&manifest) };
            manifest.save(&out).map_err(|e| fail(Stage::Ingest, ErrorClass::Internal, e))?;
            println!("{} files ({} duplicates removed, {} unreadable) -> {}", manifest.entries.len(), removed, stats.skipped, out.display());
            Ok(())
        }
        CorpusCmd::Split { manifest, ratio, seed, out } => {
            let m = load_manifest(Stage::Split, &manifest)?;
            let split = corpus::split_by_project(&m, ratio, seed).map_err(|e| fail(Stage::Split, corpus_error_class(&e), e))?;
            let out = out.unwrap_or(manifest);
            split.save(&out).map_err(|e| fail(Stage::Split, ErrorClass::Internal, e))?;
            println!("{} train files, {} test files -> {}", split.with_split(Split::Train).len(), split.with_split(Split::Test).len(), out.display());
            Ok(())
        }
        CorpusCmd::Summary { manifest } => {
            let m = load_manifest(Stage::Split, &manifest)?;
            for (project, (files, split)) in corpus::summary(&m) {
                println!("{project}\t{files}\t{}", split.map_or_else(|| "-".to_string(), |s| s.to_string()));
            }
            Ok(())
        }
    }
}

fn transform_cmd(cmd: TransformCmd, config: Option<&Path>) -> Result<()> {
    let TransformCmd::Run { manifest, kinds, seed, dup_threshold, out } = cmd;
    let cfg = resolve(config, RunConfig { kinds, seed, dup_threshold, ..RunConfig::default() })?;
    let m = load_manifest(Stage::Experiment, &manifest)?;
    let (files, _) = read_sources(&entries_for(&m, Split::Test));
    let texts: Vec<&str> = files.iter().map(|f| f.text.as_str()).collect();
    let counts = corpus::count_lines(&texts);
    let per_file: Vec<Vec<natcode::transforms::TransformRecord>> = files
        .par_iter()
        .map(|f| match frontend::analyze(&f.text) {
            Ok(parsed) => {
                let excluded = corpus::filter_test_lines(&f.text, &counts, cfg.dup_threshold);
                transform_file(&parsed, &f.path, &cfg.kinds, &excluded, cfg.seed)
            }
            Err(e) => {
                log::warn!("{}: skipped: {e}", f.path);
                Vec::new()
            }
        })
        .collect();
    let mut text = String::new();
    let mut n = 0;
    for r in per_file.iter().flatten() {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
        n += 1;
    }
    write_text(Stage::Experiment, &out, text)?;
    emit_config(Stage::Experiment, &out, &cfg)?;
    println!("{n} transformations from {} files -> {}", files.len(), out.display());
    Ok(())
}

fn lm_cmd(cmd: LmCmd, config: Option<&Path>) -> Result<()> {
    match cmd {
        LmCmd::Train { manifest, params, abstracted, out } => {
            let cfg = resolve(config, with_params(RunConfig::default(), &params))?;
            let m = load_manifest(Stage::Train, &manifest)?;
            let (files, _) = read_sources(&entries_for(&m, Split::Train));
            let opts = AbstractionOptions { keep_zero: cfg.keep_zero };
            let model = train_model(&files, cfg.order, cfg.lambda_jm, abstracted, opts).map_err(|e| fail(Stage::Train, lm_error_class(&e), e))?;
            lm::save(&model, &out).map_err(|e| fail(Stage::Train, ErrorClass::Internal, e))?;
            emit_config(Stage::Train, &out, &cfg)?;
            println!("order {} model over {} tokens ({} types) -> {}", model.order(), model.total_tokens(), model.vocab().len(), out.display());
            Ok(())
        }
        LmCmd::Score { model, file, cache, keep_zero } => {
            let model = lm::load(&model).map_err(|e| fail(Stage::Experiment, ErrorClass::Data, format!("{}: {e}", model.display())))?;
            let text = read_text(Stage::Experiment, &file)?;
            let tokens = frontend::tokenize(&text).map_err(|e| fail(Stage::Experiment, ErrorClass::Data, e))?;
            let sig: Vec<_> = tokens.iter().filter(|t| !t.kind.is_trivia()).collect();
            let words = if model.abstracted() { abstract_stream(&tokens, AbstractionOptions { keep_zero }) } else { concrete_stream(&tokens) };
            let ids = model.encode(&words).ids;
            let bits = score_file(&model, &ids, cache, ids.len());
            let mut out = String::new();
            for ((t, w), b) in sig.iter().zip(&words).zip(&bits) {
                let _ = writeln!(out, "{}:{}\t{}\t{b:.4}", t.line, t.col, w);
            }
            let _ = writeln!(out, "cross_entropy\t{}", cross_entropy(&bits).map_or_else(|| "NA".to_string(), |c| format!("{c:.4}")));
            print!("{out}");
            Ok(())
        }
    }
}

fn experiment_cmd(cmd: ExperimentCmd, config: Option<&Path>) -> Result<()> {
    match cmd {
        ExperimentCmd::Run { train_manifest, test_manifest, models, kinds, seed, params, dup_threshold, global_model, abstracted_model, out } => {
            let base = RunConfig {
                models,
                kinds,
                seed,
                dup_threshold,
                paths: Paths { global_model, abstracted_model, ..Paths::default() },
                ..with_params(RunConfig::default(), &params)
            };
            let cfg = resolve(config, base)?;
            let opts = AbstractionOptions { keep_zero: cfg.keep_zero };
            let mut loaded = Models::default();
            let need = |abs: bool| cfg.models.iter().any(|m| m.is_abstracted() == abs);
            let mut train_files = None;
            for abs in [false, true].into_iter().filter(|&a| need(a)) {
                let path = if abs { &cfg.paths.abstracted_model } else { &cfg.paths.global_model };
                let model = match path {
                    Some(p) => lm::load(p).map_err(|e| fail(Stage::Experiment, ErrorClass::Data, format!("{}: {e}", p.display())))?,
                    None => {
                        if train_files.is_none() {
                            let m = load_manifest(Stage::Train, &train_manifest)?;
                            train_files = Some(read_sources(&entries_for(&m, Split::Train)).0);
                        }
                        let files = train_files.as_deref().unwrap_or_default();
                        train_model(files, cfg.order, cfg.lambda_jm, abs, opts).map_err(|e| fail(Stage::Train, lm_error_class(&e), e))?
                    }
                };
                if abs {
                    loaded.abstracted = Some(model);
                } else {
                    loaded.global = Some(model);
                }
            }
            let m = load_manifest(Stage::Experiment, &test_manifest)?;
            let (files, _) = read_sources(&entries_for(&m, Split::Test));
            let result = run_experiment(&files, &loaded, &cfg.experiment_config()).map_err(|e| fail(Stage::Experiment, ErrorClass::Data, e))?;
            write_text(Stage::Experiment, &out, deltas_to_jsonl(&result.records))?;
            emit_config(Stage::Experiment, &out, &cfg)?;
            println!(
                "{} transformations, {} delta records ({} dropped, {} files failed) -> {}",
                result.transforms,
                result.records.len(),
                result.dropped,
                result.failed_files.len(),
                out.display()
            );
            Ok(())
        }
        ExperimentCmd::Aggregate { input, out, alpha, family_size, models, kinds } => {
            let records = load_deltas(Stage::Aggregate, &input)?;
            let table = aggregate(&records, &kinds, &models, alpha, family_size).map_err(|e| fail(Stage::Aggregate, ErrorClass::Config, e))?;
            write_text(Stage::Aggregate, &out, table.to_tsv())?;
            write_text(Stage::Aggregate, &sidecar(&out, ".meta.json"), serde_json::to_string_pretty(&table)? + "\n")?;
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn stats_cmd(cmd: StatsCmd) -> Result<()> {
    match cmd {
        StatsCmd::Wilcoxon { input, group, family_size, alpha, lines, delimiter, out } => {
            let records = load_deltas(Stage::Aggregate, &input)?;
            let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
            for r in &records {
                let key = group
                    .iter()
                    .map(|g| group_field(r, g).ok_or_else(|| fail(Stage::Setup, ErrorClass::Config, format!("unknown group field {g:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                groups.entry(key).or_default().push(if lines { r.line_delta } else { r.delta });
            }
            let d = delimiter.as_str();
            let mut text = group.join(d);
            for h in ["n", "n_nonzero", "W", "p_two_sided", "estimate", "ci_low", "ci_high", "alpha_adjusted"] {
                text.push_str(d);
                text.push_str(h);
            }
            text.push('\n');
            for (key, values) in groups {
                let w = wilcoxon_signed_rank(&values, alpha, family_size).map_err(|e| fail(Stage::Aggregate, ErrorClass::Config, e))?;
                let fields = [w.n.to_string(), w.n_nonzero.to_string(), w.statistic.to_string(), w.p_two_sided.to_string(), w.estimate.to_string(), w.ci_low.to_string(), w.ci_high.to_string(), w.alpha_adjusted.to_string()];
                let _ = writeln!(text, "{}{d}{}", key.join(d), fields.join(d));
            }
            match out {
                Some(path) => write_text(Stage::Aggregate, &path, text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        StatsCmd::Regress { input, kind, model, min_category } => {
            let records = load_deltas(Stage::Aggregate, &input)?;
            let r = regress(&records, kind, model, min_category).map_err(|e| fail(Stage::Aggregate, ErrorClass::Data, e))?;
            println!("term\testimate\tstd_error\tt\tvif");
            for c in &r.coefficients {
                let vif = r.vif.get(&c.name).map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
                println!("{}\t{:.6}\t{:.6}\t{:.3}\t{vif}", c.name, c.estimate, c.std_error, c.t_value);
            }
            println!("r_squared\t{:.4}\nn_used\t{}\nn_removed_outliers\t{}", r.r_squared, r.n_used, r.n_removed_outliers);
            if !r.vif_warnings.is_empty() {
                log::warn!("variance inflation at or above 5: {}", r.vif_warnings.join(", "));
            }
            Ok(())
        }
    }
}

fn survey_cmd(cmd: SurveyCmd) -> Result<()> {
    match cmd {
        SurveyCmd::Select { input, out, per_cell, model } => {
            let records = load_deltas(Stage::Survey, &input)?;
            let set = select_pairs(&records, per_cell, model);
            write_text(Stage::Survey, &out, serde_json::to_string_pretty(&set)? + "\n")?;
            println!("{} pairs -> {}", set.pairs.len(), out.display());
            Ok(())
        }
        SurveyCmd::Emit { pairs, n_forms, seed, per_respondent, out } => {
            let set = load_pairs(&pairs)?;
            for form in 0..n_forms {
                let f = emit_survey(&set.pairs, per_respondent, seed, form).map_err(|e| match e {
                    SurveyError::NotEnoughPairs { .. } => fail(Stage::Survey, ErrorClass::Data, e),
                    other => fail(Stage::Survey, ErrorClass::Internal, other),
                })?;
                write_text(Stage::Survey, &out.join(format!("form_{form:03}.txt")), f.render())?;
                write_text(Stage::Survey, &out.join(format!("key_{form:03}.tsv")), f.render_key())?;
            }
            println!("{n_forms} forms -> {}", out.display());
            Ok(())
        }
        SurveyCmd::Analyze { pairs, responses, out, long } => {
            let set = load_pairs(&pairs)?;
            let raw = parse_responses(&read_text(Stage::Survey, &responses)?).map_err(|e| fail(Stage::Survey, ErrorClass::Data, e))?;
            let report = analyze_responses(&raw, &set.pairs);
            for r in &report.rejected {
                log::warn!("rejected response: {r}");
            }
            if let Some(path) = long {
                write_text(Stage::Survey, &path, report.long_tsv())?;
            }
            match out {
                Some(path) => write_text(Stage::Survey, &path, report.render()),
                None => {
                    print!("{}", report.render());
                    Ok(())
                }
            }
        }
    }
}
