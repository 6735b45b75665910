//! Scores original and transformed variants with every model variant over
//! their shared tokens and aggregates the differences per transformation
//! kind and model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{count_lines, filter_test_lines, DEFAULT_DUP_THRESHOLD};
use crate::frontend::{analyze, tokenize, LexError, Token};
use crate::lm::{abstract_stream, concrete_stream, score_file, AbstractionOptions, NgramModel, DEFAULT_LAMBDA_CACHE};
use crate::stats::{median, ols_fit, wilcoxon_signed_rank, OlsOptions, OlsResult, StatsError};
use crate::transforms::{multiset_intersection, transform_file, Covariates, TransformKind, TransformRecord};

pub const AFFECTED_EXPRESSIONS: &str = "every statement of the method that contains a shuffled name";
pub const CI_METHOD: &str = "Hodges-Lehmann interval from Walsh averages, Bonferroni-widened";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("model {0} was requested but not supplied")]
    MissingModel(ModelId),
    #[error("model {0} was trained on the wrong stream type")]
    WrongStream(ModelId),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Global,
    Cache,
    GlobalAbs,
    CacheAbs,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Global, ModelId::Cache, ModelId::GlobalAbs, ModelId::CacheAbs];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Global => "global",
            ModelId::Cache => "cache",
            ModelId::GlobalAbs => "global_abs",
            ModelId::CacheAbs => "cache_abs",
        }
    }

    pub fn is_cache(self) -> bool {
        matches!(self, ModelId::Cache | ModelId::CacheAbs)
    }

    pub fn is_abstracted(self) -> bool {
        matches!(self, ModelId::GlobalAbs | ModelId::CacheAbs)
    }

    /// Abstracted streams erase identifier names, so renames score identically.
    pub fn applies_to(self, kind: TransformKind) -> bool {
        !(self.is_abstracted() && kind.is_shuffle())
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ModelId::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown model {s:?}"))
    }
}

/// Identifies the transformation a delta was computed for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformRef {
    pub kind: TransformKind,
    pub file: String,
    pub site_index: usize,
    pub variant: usize,
    pub line_span: (u32, u32),
    pub span: (usize, usize),
    pub method: Option<String>,
}

impl From<&TransformRecord> for TransformRef {
    fn from(r: &TransformRecord) -> Self {
        TransformRef {
            kind: r.kind,
            file: r.file.clone(),
            site_index: r.site_index,
            variant: r.variant,
            line_span: r.line_span,
            span: r.span,
            method: r.method.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRecord {
    pub transform: TransformRef,
    pub model_id: ModelId,
    pub mean_surprisal_original: f64,
    pub mean_surprisal_transformed: f64,
    /// Original minus transformed; negative when the original is more probable.
    pub delta: f64,
    pub line_delta: f64,
    pub shared_count: usize,
    /// Trimmed original and transformed line for single-line transformations.
    pub original_line: Option<String>,
    pub transformed_line: Option<String>,
    pub covariates: Covariates,
}

/// Trained models available to an experiment run.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub global: Option<NgramModel>,
    pub abstracted: Option<NgramModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kinds: Vec<TransformKind>,
    pub models: Vec<ModelId>,
    pub seed: u64,
    pub dup_threshold: u64,
    pub lambda_cache: f64,
    pub keep_zero: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kinds: TransformKind::ALL.to_vec(),
            models: ModelId::ALL.to_vec(),
            seed: 0,
            dup_threshold: DEFAULT_DUP_THRESHOLD,
            lambda_cache: DEFAULT_LAMBDA_CACHE,
            keep_zero: false,
        }
    }
}

/// A test-split source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestFile {
    pub path: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<DeltaRecord>,
    pub transforms: usize,
    /// Distinct transformed sites (expressions or methods) per kind.
    pub sites: BTreeMap<TransformKind, usize>,
    /// Transform/model pairs dropped because nothing was shared.
    pub dropped: usize,
    pub failed_files: Vec<(String, String)>,
}

/// One model variant ready to score token streams.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    pub id: ModelId,
    model: &'a NgramModel,
    cache_lambda: Option<f64>,
    abstraction: Option<AbstractionOptions>,
}

impl<'a> Scorer<'a> {
    pub fn new(id: ModelId, models: &'a Models, config: &ExperimentConfig) -> Result<Scorer<'a>, ExperimentError> {
        let model = if id.is_abstracted() { models.abstracted.as_ref() } else { models.global.as_ref() };
        let model = model.ok_or(ExperimentError::MissingModel(id))?;
        if model.abstracted() != id.is_abstracted() {
            return Err(ExperimentError::WrongStream(id));
        }
        Ok(Scorer {
            id,
            model,
            cache_lambda: id.is_cache().then_some(config.lambda_cache),
            abstraction: id.is_abstracted().then_some(AbstractionOptions { keep_zero: config.keep_zero }),
        })
    }

    fn ids(&self, sig: &[Token]) -> Vec<u32> {
        let words = match self.abstraction {
            Some(opts) => abstract_stream(sig, opts),
            None => concrete_stream(sig),
        };
        self.model.encode(&words).ids
    }

    /// Surprisal of every significant token.
    pub fn score_all(&self, sig: &[Token]) -> Vec<f64> {
        let ids = self.ids(sig);
        score_file(self.model, &ids, self.cache_lambda, ids.len())
    }

    /// Surprisal of the significant tokens at `needed`, each in its full
    /// in-file context.
    pub fn score_some(&self, sig: &[Token], needed: &[usize]) -> Vec<f64> {
        let ids = self.ids(sig);
        match self.cache_lambda {
            None => needed.iter().map(|&i| self.model.surprisal(&ids[..i], ids[i])).collect(),
            Some(_) => {
                let upto = needed.iter().max().map_or(0, |m| m + 1);
                let all = score_file(self.model, &ids, self.cache_lambda, upto);
                needed.iter().map(|&i| all[i]).collect()
            }
        }
    }
}

/// A source text with its significant tokens.
#[derive(Debug, Clone)]
pub struct Variant {
    pub text: String,
    pub sig: Vec<Token>,
    line_starts: Vec<usize>,
}

impl Variant {
    pub fn new(text: String) -> Result<Variant, LexError> {
        let sig = tokenize(&text)?.into_iter().filter(|t| !t.kind.is_trivia()).collect();
        let line_starts = std::iter::once(0).chain(text.match_indices('\n').map(|(i, _)| i + 1)).collect();
        Ok(Variant { text, sig, line_starts })
    }

    /// Significant token indices inside the byte range.
    fn tokens_in(&self, (a, b): (usize, usize)) -> std::ops::Range<usize> {
        self.sig.partition_point(|t| t.offset < a)..self.sig.partition_point(|t| t.offset < b)
    }

    /// Byte range of lines `first..=last` (1-based).
    fn line_range(&self, first: u32, last: u32) -> (usize, usize) {
        let start = self.line_starts.get(first as usize - 1).copied().unwrap_or(self.text.len());
        let end = self.line_starts.get(last as usize).map_or(self.text.len(), |&s| s - 1);
        (start, end)
    }

    fn line(&self, n: u32) -> &str {
        let (a, b) = self.line_range(n, n);
        self.text[a..b].trim()
    }
}

fn sig_texts<'v>(v: &'v Variant, idx: &[usize]) -> Vec<&'v str> {
    idx.iter().map(|&i| v.sig[i].text.as_str()).collect()
}

/// Positions of `idx` whose token text is consumed from the `shared`
/// multiset, pairing equal texts in left-to-right order.
pub fn match_shared<S: AsRef<str>>(texts: &[&str], idx: &[usize], shared: &[S]) -> Vec<usize> {
    let mut budget: HashMap<&str, usize> = HashMap::new();
    for s in shared {
        *budget.entry(s.as_ref()).or_default() += 1;
    }
    texts
        .iter()
        .zip(idx)
        .filter_map(|(t, &i)| match budget.get_mut(t) {
            Some(n) if *n > 0 => {
                *n -= 1;
                Some(i)
            }
            _ => None,
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn expand(v: &Variant, units: &[(usize, usize)]) -> Vec<usize> {
    units.iter().flat_map(|&u| v.tokens_in(u)).collect()
}

fn lines_of(v: &Variant, units: &[(usize, usize)]) -> Vec<usize> {
    let mut lines: Vec<(u32, u32)> = units
        .iter()
        .filter_map(|&u| {
            let r = v.tokens_in(u);
            (!r.is_empty()).then(|| (v.sig[r.start].line, v.sig[r.end - 1].line))
        })
        .collect();
    lines.sort_unstable();
    lines.dedup();
    let mut out: Vec<usize> = Vec::new();
    let mut last_line = 0;
    for (a, b) in lines {
        let a = a.max(last_line + 1);
        if a <= b {
            out.extend(v.tokens_in(v.line_range(a, b)));
            last_line = b;
        }
    }
    out
}

struct Selection {
    original: Vec<usize>,
    transformed: Vec<usize>,
}

fn select_expression(orig: &Variant, trans: &Variant, o: Vec<usize>, t: Vec<usize>, shared: Option<&[String]>) -> Selection {
    let ot = sig_texts(orig, &o);
    let tt = sig_texts(trans, &t);
    let computed;
    let shared = match shared {
        Some(s) => s,
        None => {
            computed = multiset_intersection(&ot, &tt);
            &computed
        }
    };
    Selection { original: match_shared(&ot, &o, shared), transformed: match_shared(&tt, &t, shared) }
}

fn line_shift(record: &TransformRecord) -> i32 {
    record.transformed_text.matches('\n').count() as i32 - record.original_text.matches('\n').count() as i32
}

fn selections(record: &TransformRecord, orig: &Variant, trans: &Variant) -> Option<(Selection, Selection)> {
    let o_units = expand(orig, &record.units);
    let t_units = expand(trans, &record.transformed_units);
    let extra_lines = line_shift(record);
    let (l0, l1) = record.line_span;
    if record.kind.is_shuffle() && o_units.len() == t_units.len() {
        let o_lines = lines_of(orig, &record.units);
        let t_lines = lines_of(trans, &record.transformed_units);
        if o_lines.len() == t_lines.len() {
            return Some((Selection { original: o_units, transformed: t_units }, Selection { original: o_lines, transformed: t_lines }));
        }
        return None;
    }
    let expr = select_expression(orig, trans, o_units, t_units, (!record.kind.is_shuffle()).then_some(&record.shared_tokens[..]));
    let o_line = orig.tokens_in(orig.line_range(l0, l1)).collect();
    let t_line = trans.tokens_in(trans.line_range(l0, l1.saturating_add_signed(extra_lines))).collect();
    let line = select_expression(orig, trans, o_line, t_line, None);
    Some((expr, line))
}

/// Delta of one transformation under one model. `original_scores` holds the
/// scorer's surprisal of every significant token of `orig`. Returns `None`
/// when nothing is shared.
pub fn score_transform(record: &TransformRecord, orig: &Variant, original_scores: &[f64], trans: &Variant, scorer: &Scorer) -> Option<DeltaRecord> {
    let (expr, line) = selections(record, orig, trans)?;
    if expr.original.is_empty() || expr.original.len() != expr.transformed.len() {
        return None;
    }
    let mut needed: Vec<usize> = expr.transformed.iter().chain(&line.transformed).copied().collect();
    needed.sort_unstable();
    needed.dedup();
    let scored: HashMap<usize, f64> = needed.iter().copied().zip(scorer.score_some(&trans.sig, &needed)).collect();
    let pick_o = |idx: &[usize]| idx.iter().map(|&i| original_scores[i]).collect::<Vec<_>>();
    let pick_t = |idx: &[usize]| idx.iter().map(|i| scored[i]).collect::<Vec<_>>();
    let mo = mean(&pick_o(&expr.original));
    let mt = mean(&pick_t(&expr.transformed));
    let line_delta = if line.original.is_empty() {
        mo - mt
    } else {
        mean(&pick_o(&line.original)) - mean(&pick_t(&line.transformed))
    };
    let single = record.line_span.0 == record.line_span.1 && !record.kind.is_shuffle() && !record.transformed_text.contains('\n');
    Some(DeltaRecord {
        transform: record.into(),
        model_id: scorer.id,
        mean_surprisal_original: mo,
        mean_surprisal_transformed: mt,
        delta: mo - mt,
        line_delta,
        shared_count: expr.original.len(),
        original_line: single.then(|| orig.line(record.line_span.0).to_string()),
        transformed_line: single.then(|| trans.line(record.line_span.0).to_string()),
        covariates: record.covariates.clone(),
    })
}

/// The same transformation seen from the transformed file back to the original.
pub fn invert_record(record: &TransformRecord) -> TransformRecord {
    TransformRecord {
        span: (record.span.0, record.span.0 + record.transformed_text.len()),
        line_span: (record.line_span.0, record.line_span.1.saturating_add_signed(line_shift(record))),
        original_text: record.transformed_text.clone(),
        transformed_text: record.original_text.clone(),
        units: record.transformed_units.clone(),
        transformed_units: record.units.clone(),
        ..record.clone()
    }
}

struct FileResult {
    records: Vec<DeltaRecord>,
    transforms: usize,
    sites: BTreeMap<TransformKind, usize>,
    dropped: usize,
}

fn run_file(file: &TestFile, excluded: &crate::corpus::ExcludedLines, scorers: &[Scorer], config: &ExperimentConfig) -> Result<FileResult, String> {
    let parsed = analyze(&file.text).map_err(|e| e.to_string())?;
    let transforms = transform_file(&parsed, &file.path, &config.kinds, excluded, config.seed);
    let orig = Variant::new(file.text.clone()).map_err(|e| e.to_string())?;
    let distinct: BTreeSet<(TransformKind, usize)> = transforms.iter().map(|t| (t.kind, t.site_index)).collect();
    let mut sites = BTreeMap::new();
    for (kind, _) in distinct {
        *sites.entry(kind).or_insert(0) += 1;
    }
    let mut out = FileResult { records: Vec::new(), transforms: transforms.len(), sites, dropped: 0 };
    if transforms.is_empty() {
        return Ok(out);
    }
    let base: Vec<Vec<f64>> = scorers.iter().map(|s| s.score_all(&orig.sig)).collect();
    for record in &transforms {
        let trans = match Variant::new(record.transformed_file(&file.text)) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{}: transformed variant does not lex: {e}", file.path);
                continue;
            }
        };
        for (scorer, scores) in scorers.iter().zip(&base) {
            if !scorer.id.applies_to(record.kind) {
                continue;
            }
            match score_transform(record, &orig, scores, &trans, scorer) {
                Some(d) => out.records.push(d),
                None => {
                    log::debug!("{}: {} site {} shares no tokens under {}", file.path, record.kind, record.site_index, scorer.id);
                    out.dropped += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Transforms every test file and scores each sampled transformation with
/// every requested model. Frequent lines are counted over the test files.
pub fn run_experiment(files: &[TestFile], models: &Models, config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    let scorers = config.models.iter().map(|&id| Scorer::new(id, models, config)).collect::<Result<Vec<_>, _>>()?;
    let texts: Vec<&str> = files.iter().map(|f| f.text.as_str()).collect();
    let counts = count_lines(&texts);
    let results: Vec<Result<FileResult, String>> = files
        .par_iter()
        .map(|f| {
            let excluded = filter_test_lines(&f.text, &counts, config.dup_threshold);
            run_file(f, &excluded, &scorers, config)
        })
        .collect();
    let mut out = ExperimentOutput::default();
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(r) => {
                out.records.extend(r.records);
                out.transforms += r.transforms;
                for (kind, n) in r.sites {
                    *out.sites.entry(kind).or_insert(0) += n;
                }
                out.dropped += r.dropped;
            }
            Err(e) => {
                log::warn!("{}: skipped: {e}", f.path);
                out.failed_files.push((f.path.clone(), e));
            }
        }
    }
    Ok(out)
}

/// Summary of one (kind, model) cell. Statistics are `None` when fewer
/// than two records fall in the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub kind: TransformKind,
    pub model: ModelId,
    pub n: usize,
    pub median: Option<f64>,
    pub estimate: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub alpha: f64,
    pub family_size: usize,
    pub cells: Vec<CellSummary>,
    pub metadata: BTreeMap<String, String>,
}

pub fn table_metadata() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("affected_expressions".to_string(), AFFECTED_EXPRESSIONS.to_string()),
        ("ci_method".to_string(), CI_METHOD.to_string()),
        ("zero_differences".to_string(), "dropped from the test statistic".to_string()),
        ("delta".to_string(), "mean surprisal of original minus transformed, in bits".to_string()),
    ])
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl AggregateTable {
    pub fn cell(&self, kind: TransformKind, model: ModelId) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.kind == kind && c.model == model)
    }

    /// One tab-separated row per cell.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("kind\tmodel\tn\tmedian\testimate\tp_value\tci_low\tci_high\n");
        for c in &self.cells {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}", c.kind, c.model, c.n, na(c.median), na(c.estimate), na(c.p_value), na(c.ci_low), na(c.ci_high));
        }
        out
    }

    /// Kinds as rows and models as columns, each cell showing the median and
    /// interval.
    pub fn render(&self) -> String {
        let mut kinds: Vec<TransformKind> = self.cells.iter().map(|c| c.kind).collect();
        let mut models: Vec<ModelId> = self.cells.iter().map(|c| c.model).collect();
        kinds.dedup();
        models.sort();
        models.dedup();
        let mut out = String::new();
        let _ = writeln!(out, "surprisal difference (original - transformed), bits; {:.2}% intervals, family size {}", 100.0 * (1.0 - self.alpha / self.family_size as f64), self.family_size);
        let _ = write!(out, "{:<16}", "kind");
        for m in &models {
            let _ = write!(out, " {:>34}", m.name());
        }
        out.push('\n');
        for k in kinds {
            let _ = write!(out, "{:<16}", k.name());
            for &m in &models {
                let text = match self.cell(k, m) {
                    Some(CellSummary { n, median: Some(med), p_value: Some(p), ci_low: Some(lo), ci_high: Some(hi), .. }) => {
                        format!("{med:.4} [{lo:.4}, {hi:.4}] p={p:.1e} n={n}")
                    }
                    Some(c) if c.n > 0 => format!("NA n={}", c.n),
                    _ => "NA".to_string(),
                };
                let _ = write!(out, " {text:>34}");
            }
            out.push('\n');
        }
        out
    }
}

/// Per-(kind, model) medians, Wilcoxon tests and Bonferroni-widened
/// intervals. `family_size` defaults to the number of cells.
pub fn aggregate(records: &[DeltaRecord], kinds: &[TransformKind], models: &[ModelId], alpha: f64, family_size: Option<usize>) -> Result<AggregateTable, ExperimentError> {
    let cells_spec: Vec<(TransformKind, ModelId)> = kinds.iter().flat_map(|&k| models.iter().filter(move |m| m.applies_to(k)).map(move |&m| (k, m))).collect();
    let family_size = family_size.unwrap_or(cells_spec.len().max(1));
    let mut groups: BTreeMap<(TransformKind, ModelId), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.transform.kind, r.model_id)).or_default().push(r.delta);
    }
    let mut cells = Vec::with_capacity(cells_spec.len());
    for (kind, model) in cells_spec {
        let deltas = groups.remove(&(kind, model)).unwrap_or_default();
        let mut cell = CellSummary { kind, model, n: deltas.len(), median: None, estimate: None, p_value: None, ci_low: None, ci_high: None };
        if deltas.len() >= 2 {
            let w = wilcoxon_signed_rank(&deltas, alpha, family_size)?;
            cell.median = median(&deltas);
            cell.estimate = Some(w.estimate);
            cell.p_value = Some(w.p_two_sided);
            cell.ci_low = Some(w.ci_low);
            cell.ci_high = Some(w.ci_high);
        }
        cells.push(cell);
    }
    Ok(AggregateTable { alpha, family_size, cells, metadata: table_metadata() })
}

/// Regression design for one cell: delta against original surprisal,
/// log token count and one-hot parent/operator categories (first level
/// dropped). Categories seen fewer than `min_category` times are removed
/// together with their rows.
pub fn regression_design(records: &[&DeltaRecord], min_category: usize) -> (Vec<String>, Vec<Vec<f64>>, Vec<f64>) {
    let count = |f: fn(&DeltaRecord) -> &str| {
        let mut m: BTreeMap<&str, usize> = BTreeMap::new();
        for r in records {
            *m.entry(f(r)).or_default() += 1;
        }
        m
    };
    let parent_of: fn(&DeltaRecord) -> &str = |r| &r.covariates.parent_node_kind;
    let op_of: fn(&DeltaRecord) -> &str = |r| &r.covariates.dominant_operator;
    let parents = count(parent_of);
    let ops = count(op_of);
    let kept: Vec<&DeltaRecord> = records.iter().copied().filter(|r| parents[parent_of(r)] >= min_category && ops[op_of(r)] >= min_category).collect();
    let levels = |f: fn(&DeltaRecord) -> &str| {
        let mut l: Vec<&str> = kept.iter().map(|r| f(r)).collect();
        l.sort_unstable();
        l.dedup();
        l.into_iter().skip(1).map(str::to_string).collect::<Vec<_>>()
    };
    let parent_levels = levels(parent_of);
    let op_levels = levels(op_of);
    let mut names = vec!["original_surprisal".to_string(), "log_num_tokens".to_string()];
    names.extend(parent_levels.iter().map(|l| format!("parent={l}")));
    names.extend(op_levels.iter().map(|l| format!("operator={l}")));
    let rows = kept
        .iter()
        .map(|r| {
            let mut row = vec![r.mean_surprisal_original, (r.covariates.num_tokens.max(1) as f64).ln()];
            row.extend(parent_levels.iter().map(|l| f64::from(u8::from(&r.covariates.parent_node_kind == l))));
            row.extend(op_levels.iter().map(|l| f64::from(u8::from(&r.covariates.dominant_operator == l))));
            row
        })
        .collect();
    let y = kept.iter().map(|r| r.delta).collect();
    (names, rows, y)
}

/// Fits the covariate regression for one (kind, model) cell.
pub fn regress(records: &[DeltaRecord], kind: TransformKind, model: ModelId, min_category: usize) -> Result<OlsResult, ExperimentError> {
    let cell: Vec<&DeltaRecord> = records.iter().filter(|r| r.transform.kind == kind && r.model_id == model).collect();
    let (names, rows, y) = regression_design(&cell, min_category);
    Ok(ols_fit(&names, &rows, &y, OlsOptions::default())?)
}

/// Value of a grouping field of a delta record.
pub fn group_field(record: &DeltaRecord, field: &str) -> Option<String> {
    Some(match field {
        "kind" => record.transform.kind.to_string(),
        "model" | "model_id" => record.model_id.to_string(),
        "file" => record.transform.file.clone(),
        "parent" | "parent_node_kind" => record.covariates.parent_node_kind.clone(),
        "operator" | "dominant_operator" => record.covariates.dominant_operator.clone(),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ExcludedLines;

    const TRAIN: &str = "class T {\n  int f(int a, int b) {\n    if (a < 10) { return a + 1; }\n    if (b < 20) { return b + 2; }\n    return a * b;\n  }\n}\n";
    const TEST: &str = "class U {\n  int g(int x, int y, int z) {\n    int s = x + y * z;\n    if (x < 30) {\n      s = s + 1;\n    }\n    return s;\n  }\n}\n";

    fn models() -> Models {
        let train: Vec<Vec<String>> = vec![concrete_stream(&tokenize(TRAIN).unwrap())];
        let abs: Vec<Vec<String>> = vec![abstract_stream(&tokenize(TRAIN).unwrap(), AbstractionOptions::default())];
        Models {
            global: Some(NgramModel::train(&train, 4, 0.5, false).unwrap()),
            abstracted: Some(NgramModel::train(&abs, 4, 0.5, true).unwrap()),
        }
    }

    fn records(kind: TransformKind) -> Vec<TransformRecord> {
        transform_file(&analyze(TEST).unwrap(), "U.java", &[kind], &ExcludedLines::default(), 3)
    }

    fn delta(record: &TransformRecord, base: &str, id: ModelId, ms: &Models, cfg: &ExperimentConfig) -> DeltaRecord {
        let scorer = Scorer::new(id, ms, cfg).unwrap();
        let orig = Variant::new(base.to_string()).unwrap();
        let trans = Variant::new(record.transformed_file(base)).unwrap();
        let scores = scorer.score_all(&orig.sig);
        score_transform(record, &orig, &scores, &trans, &scorer).unwrap()
    }

    #[test]
    fn identity_transform_has_zero_delta() {
        let ms = models();
        let cfg = ExperimentConfig::default();
        for kind in TransformKind::ALL {
            for mut r in records(kind) {
                r.transformed_text = r.original_text.clone();
                r.transformed_units = r.units.clone();
                for id in ModelId::ALL {
                    let d = delta(&r, TEST, id, &ms, &cfg);
                    assert_eq!(d.delta, 0.0, "{kind} {id}");
                    assert_eq!(d.line_delta, 0.0);
                }
            }
        }
    }

    #[test]
    fn delta_is_antisymmetric() {
        let ms = models();
        let cfg = ExperimentConfig::default();
        for kind in TransformKind::ALL {
            for r in records(kind) {
                let other = r.transformed_file(TEST);
                let inv = invert_record(&r);
                for id in ModelId::ALL.into_iter().filter(|m| m.applies_to(kind)) {
                    let a = delta(&r, TEST, id, &ms, &cfg);
                    let b = delta(&inv, &other, id, &ms, &cfg);
                    assert_eq!(a.delta, -b.delta, "{kind} {id}");
                    assert_eq!(a.line_delta, -b.line_delta, "{kind} {id}");
                }
            }
        }
    }

    #[test]
    fn swap_scores_every_expression_token() {
        let ms = models();
        for r in records(TransformKind::RelSwap) {
            let d = delta(&r, TEST, ModelId::Global, &ms, &ExperimentConfig::default());
            assert_eq!(d.shared_count, 2);
            assert_eq!(d.original_line.as_deref(), Some("if (x < 30) {"));
            assert_eq!(d.transformed_line.as_deref(), Some("if (30 > x) {"));
            assert_eq!(d.delta, d.mean_surprisal_original - d.mean_surprisal_transformed);
        }
    }

    #[test]
    fn zero_cache_weight_matches_global() {
        let ms = models();
        let cfg = ExperimentConfig { lambda_cache: 0.0, ..Default::default() };
        for r in records(TransformKind::ArithSwap) {
            let g = delta(&r, TEST, ModelId::Global, &ms, &cfg);
            let c = delta(&r, TEST, ModelId::Cache, &ms, &cfg);
            assert!((g.delta - c.delta).abs() < 1e-12);
        }
    }

    #[test]
    fn paren_tokens_are_not_shared() {
        let ms = models();
        for r in records(TransformKind::ParenAdd) {
            let d = delta(&r, TEST, ModelId::Global, &ms, &ExperimentConfig::default());
            assert_eq!(d.shared_count, r.covariates.num_tokens);
            assert!(!r.shared_tokens.iter().any(|t| t == "(" || t == ")"));
        }
    }

    #[test]
    fn run_and_aggregate() {
        let files = vec![TestFile { path: "U.java".into(), text: TEST.into() }];
        let out = run_experiment(&files, &models(), &ExperimentConfig::default()).unwrap();
        assert!(out.failed_files.is_empty());
        assert!(out.records.iter().all(|r| r.model_id.applies_to(r.transform.kind)));
        assert!(out.records.iter().any(|r| r.transform.kind == TransformKind::ShuffleWithin));
        let table = aggregate(&out.records, &TransformKind::ALL, &ModelId::ALL, 0.05, None).unwrap();
        assert_eq!(table.cells.len(), 20);
        assert_eq!(table.family_size, 20);
        let rel = table.cell(TransformKind::RelSwap, ModelId::Global).unwrap();
        assert_eq!((rel.n, rel.median), (1, None));
        assert!(table.to_tsv().lines().nth(1).unwrap().starts_with("arith_swap\tglobal\t"));
        assert!(table.render().contains("NA"));
    }

    #[test]
    fn missing_model_is_reported() {
        let files = vec![TestFile { path: "U.java".into(), text: TEST.into() }];
        let ms = Models { global: models().global, abstracted: None };
        let err = run_experiment(&files, &ms, &ExperimentConfig::default()).unwrap_err();
        assert!(matches!(err, ExperimentError::MissingModel(ModelId::GlobalAbs)));
    }

    #[test]
    fn all_zero_cell() {
        let r = records(TransformKind::ArithSwap).remove(0);
        let ms = models();
        let mut d = delta(&r, TEST, ModelId::Global, &ms, &ExperimentConfig::default());
        d.delta = 0.0;
        let table = aggregate(&[d.clone(), d.clone(), d], &[TransformKind::ArithSwap], &[ModelId::Global], 0.05, None).unwrap();
        let c = &table.cells[0];
        assert_eq!((c.median, c.p_value, c.ci_low, c.ci_high), (Some(0.0), Some(1.0), Some(0.0), Some(0.0)));
    }

    #[test]
    fn shared_matching_in_text_order() {
        assert_eq!(match_shared(&["a", "(", "b", ")", "a"], &[10, 11, 12, 13, 14], &["a", "b"]), [10, 12]);
    }

    #[test]
    fn regression_design_drops_rare_levels() {
        let r = records(TransformKind::ArithSwap).remove(0);
        let ms = models();
        let base = delta(&r, TEST, ModelId::Global, &ms, &ExperimentConfig::default());
        let mut recs = Vec::new();
        for i in 0..30 {
            let mut d = base.clone();
            d.covariates.parent_node_kind = if i < 28 { ["=", "if"][i % 2].into() } else { "rare".into() };
            d.delta = i as f64;
            recs.push(d);
        }
        let refs: Vec<&DeltaRecord> = recs.iter().collect();
        let (names, rows, y) = regression_design(&refs, 5);
        assert_eq!(names, ["original_surprisal", "log_num_tokens", "parent=if"]);
        assert_eq!((rows.len(), y.len()), (28, 28));
    }
}
