//! Forced-choice survey pairs built from line-level deltas, randomized forms
//! with an attention check, and agreement analysis of collected responses.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{DeltaRecord, ModelId};
use crate::frontend::{tokenize, TokenKind};
use crate::seed::rng_for;
use crate::transforms::TransformKind;

pub const SURVEY_KINDS: [TransformKind; 4] = [TransformKind::RelSwap, TransformKind::ArithSwap, TransformKind::ParenAdd, TransformKind::ParenRemove];
pub const DEFAULT_PER_CELL: usize = 20;
pub const DEFAULT_PER_RESPONDENT: usize = 80;
pub const MAX_LINE_CHARS: usize = 80;
pub const LINE_FILTERS: [&str; 4] = ["hash", "<<", ">>", ">>>"];
pub const ATTENTION_ID: &str = "attention";
pub const ATTENTION_EXPECTED: &str = "for(int i = 0; i < length; i++) {";
pub const ATTENTION_OTHER: &str = "for(int i = 0; length > i; i++) {";
pub const SYMMETRY_RULE: &str = "under && and ||, operands built with the same operator are parenthesized together, never one alone";

#[derive(Debug, Error, PartialEq)]
pub enum SurveyError {
    #[error("{requested} questions per respondent requested but only {available} pairs exist")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "a",
            Side::B => "b",
        })
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Side::A),
            "b" => Ok(Side::B),
            other => Err(format!("choice must be a or b, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    Original,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPair {
    pub id: String,
    pub kind: TransformKind,
    pub text_a: String,
    pub text_b: String,
    pub original_is: Side,
    pub lm_prefers: Preference,
    pub line_delta: f64,
    pub file: String,
    pub span: (usize, usize),
}

impl SurveyPair {
    /// The side the language model finds more probable.
    pub fn lm_side(&self) -> Side {
        match self.lm_prefers {
            Preference::Original => self.original_is,
            Preference::Transformed => self.original_is.other(),
        }
    }
}

/// Selected pairs plus notes on how they were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub metadata: BTreeMap<String, String>,
    pub pairs: Vec<SurveyPair>,
}

/// Candidate lines eligible for the survey.
pub fn line_is_eligible(line: &str) -> bool {
    line.chars().count() <= MAX_LINE_CHARS && !LINE_FILTERS.iter().any(|k| line.contains(k))
}

fn similarity_key(original: &str, transformed: &str) -> Vec<String> {
    let abs = |s: &str| match tokenize(s) {
        Ok(tokens) => tokens
            .iter()
            .filter(|t| !t.kind.is_trivia())
            .map(|t| if t.kind == TokenKind::Identifier { "<id>".to_string() } else { t.text.clone() })
            .collect(),
        Err(_) => vec![s.to_string()],
    };
    let mut key = abs(original);
    key.push("\u{0}".into());
    key.extend(abs(transformed));
    key
}

/// Ascending by line delta, ties by file path then span.
pub fn candidate_order(a: &DeltaRecord, b: &DeltaRecord) -> Ordering {
    a.line_delta
        .total_cmp(&b.line_delta)
        .then_with(|| a.transform.file.cmp(&b.transform.file))
        .then_with(|| a.transform.span.cmp(&b.transform.span))
        .then_with(|| a.transform.variant.cmp(&b.transform.variant))
        .then_with(|| a.transformed_line.cmp(&b.transformed_line))
}

fn candidates(records: &[DeltaRecord], kind: TransformKind, model: ModelId) -> Vec<&DeltaRecord> {
    let mut c: Vec<&DeltaRecord> = records
        .iter()
        .filter(|r| r.transform.kind == kind && r.model_id == model && r.line_delta != 0.0 && r.line_delta.is_finite())
        .filter(|r| match (&r.original_line, &r.transformed_line) {
            (Some(o), Some(t)) => o != t && line_is_eligible(o) && line_is_eligible(t),
            _ => false,
        })
        .collect();
    c.sort_by(|a, b| candidate_order(a, b));
    c
}

fn make_pair(r: &DeltaRecord, id: String) -> SurveyPair {
    SurveyPair {
        id,
        kind: r.transform.kind,
        text_a: r.original_line.clone().unwrap_or_default(),
        text_b: r.transformed_line.clone().unwrap_or_default(),
        original_is: Side::A,
        lm_prefers: if r.line_delta < 0.0 { Preference::Original } else { Preference::Transformed },
        line_delta: r.line_delta,
        file: r.transform.file.clone(),
        span: r.transform.span,
    }
}

/// The `per_cell` lines per kind whose transformation most increased and
/// most decreased line surprisal under `model`. A candidate whose line pair
/// matches an already chosen one up to identifier names is skipped, drawing
/// replacements from ranks up to `2 * per_cell`.
pub fn select_pairs(records: &[DeltaRecord], per_cell: usize, model: ModelId) -> PairSet {
    let mut pairs = Vec::new();
    for kind in SURVEY_KINDS {
        let ranked = candidates(records, kind, model);
        let mut seen: HashSet<Vec<String>> = HashSet::new();
        let mut used: HashSet<usize> = HashSet::new();
        let directions: [(&str, Vec<usize>); 2] = [("inc", (0..ranked.len()).collect()), ("dec", (0..ranked.len()).rev().collect())];
        for (label, order) in directions {
            let mut chosen = 0;
            for i in order.into_iter().take(2 * per_cell) {
                if chosen == per_cell {
                    break;
                }
                let r = ranked[i];
                if used.contains(&i) {
                    continue;
                }
                let key = similarity_key(r.original_line.as_deref().unwrap_or(""), r.transformed_line.as_deref().unwrap_or(""));
                if !seen.insert(key) {
                    continue;
                }
                used.insert(i);
                chosen += 1;
                pairs.push(make_pair(r, format!("{kind}-{label}-{chosen:02}")));
            }
            if chosen < per_cell {
                log::warn!("{kind}: only {chosen} of {per_cell} {label} pairs available");
            }
        }
    }
    let metadata = BTreeMap::from([
        ("model".to_string(), model.to_string()),
        ("per_cell".to_string(), per_cell.to_string()),
        ("inc".to_string(), "transformation raised line surprisal the most (original preferred)".to_string()),
        ("dec".to_string(), "transformation lowered line surprisal the most".to_string()),
        ("similarity".to_string(), "line pairs with identical token sequences once identifiers are masked count as duplicates".to_string()),
        ("symmetry".to_string(), SYMMETRY_RULE.to_string()),
    ]);
    PairSet { metadata, pairs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub number: usize,
    pub pair_id: String,
    pub option_a: String,
    pub option_b: String,
}

/// How a displayed question maps back to its pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub number: usize,
    pub pair_id: String,
    /// True when the displayed options are the pair's `b`, `a`.
    pub swapped: bool,
    pub original_shown_as: Option<Side>,
    pub lm_shown_as: Option<Side>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyForm {
    pub form: usize,
    pub questions: Vec<Question>,
    pub key: Vec<KeyEntry>,
}

impl SurveyForm {
    pub fn render(&self) -> String {
        let mut out = format!("form {}\nFor each question, pick the line you find clearer.\n", self.form);
        for q in &self.questions {
            let _ = write!(out, "\n{}.\n  a) {}\n  b) {}\n", q.number, q.option_a, q.option_b);
        }
        out
    }

    /// Tab-separated answer key.
    pub fn render_key(&self) -> String {
        let mut out = String::from("form\tquestion\tpair_id\tswapped\toriginal\tlm_prefers\n");
        let side = |s: Option<Side>| s.map_or_else(|| "-".to_string(), |s| s.to_string());
        for k in &self.key {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", self.form, k.number, k.pair_id, k.swapped, side(k.original_shown_as), side(k.lm_shown_as));
        }
        out
    }
}

/// One form: `per_respondent` distinct pairs in random order with random
/// option order, plus the attention item at a random position.
pub fn emit_survey(pairs: &[SurveyPair], per_respondent: usize, seed: u64, form: usize) -> Result<SurveyForm, SurveyError> {
    if per_respondent > pairs.len() {
        return Err(SurveyError::NotEnoughPairs { requested: per_respondent, available: pairs.len() });
    }
    let mut rng = rng_for(seed, "survey_form", form as u64);
    let mut picked: Vec<usize> = index::sample(&mut rng, pairs.len(), per_respondent).into_vec();
    picked.shuffle(&mut rng);
    let attention_at = rng.random_range(0..=per_respondent);
    let mut questions = Vec::with_capacity(per_respondent + 1);
    let mut key = Vec::with_capacity(per_respondent + 1);
    let mut slots: Vec<Option<usize>> = picked.into_iter().map(Some).collect();
    slots.insert(attention_at, None);
    for (i, slot) in slots.into_iter().enumerate() {
        let number = i + 1;
        let swapped = rng.random_bool(0.5);
        let (pair_id, a, b, original, lm) = match slot {
            Some(p) => {
                let p = &pairs[p];
                (p.id.clone(), p.text_a.clone(), p.text_b.clone(), Some(p.original_is), Some(p.lm_side()))
            }
            None => (ATTENTION_ID.to_string(), ATTENTION_EXPECTED.to_string(), ATTENTION_OTHER.to_string(), None, None),
        };
        let flip = |s: Option<Side>| s.map(|s| if swapped { s.other() } else { s });
        let (option_a, option_b) = if swapped { (b, a) } else { (a, b) };
        questions.push(Question { number, pair_id: pair_id.clone(), option_a, option_b });
        key.push(KeyEntry { number, pair_id, swapped, original_shown_as: flip(original), lm_shown_as: flip(lm) });
    }
    Ok(SurveyForm { form, questions, key })
}

/// One line of a response file; `choice` refers to the pair's own `a`/`b`
/// (the attention item's `a` is the conventional loop).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub respondent: String,
    pub pair_id: String,
    pub choice: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub respondent: String,
    pub pair_id: String,
    pub choice: Side,
    pub passed_attention: bool,
}

/// Parses `respondent_id, pair_id, choice` lines separated by commas or tabs.
/// Blank lines, `#` comments and a leading header are skipped.
pub fn parse_responses(text: &str) -> Result<Vec<RawResponse>, SurveyError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split([',', '\t']).map(str::trim).collect();
        if out.is_empty() && fields.first().is_some_and(|f| f.starts_with("respondent")) {
            continue;
        }
        let [respondent, pair_id, choice] = fields[..] else {
            return Err(SurveyError::Parse { line: i + 1, message: format!("expected 3 fields, found {}", fields.len()) });
        };
        let choice = choice.parse().map_err(|message| SurveyError::Parse { line: i + 1, message })?;
        out.push(RawResponse { respondent: respondent.to_string(), pair_id: pair_id.to_string(), choice });
    }
    Ok(out)
}

/// One response in long format for external mixed-effects fitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongRow {
    /// 1 when the respondent chose the original line.
    pub outcome: u8,
    /// 1 when the model prefers the original line.
    pub lm_out: u8,
    pub kind: TransformKind,
    pub respondent: String,
    pub question: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub agree: usize,
    pub total: usize,
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.agree as f64 / self.total as f64)
    }

    fn add(&mut self, agree: bool) {
        self.agree += usize::from(agree);
        self.total += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub overall: Rate,
    pub per_kind: BTreeMap<TransformKind, Rate>,
    /// Questions whose strict majority of answers sided with the model.
    pub majority: Rate,
    pub majority_per_kind: BTreeMap<TransformKind, Rate>,
    pub passed_attention: Rate,
    pub failed_attention: Rate,
    pub respondents: usize,
    pub respondents_passed: usize,
    pub records: Vec<ResponseRecord>,
    pub long: Vec<LongRow>,
    pub rejected: Vec<String>,
}

fn pct(r: &Rate) -> String {
    r.value().map_or_else(|| "NA".to_string(), |v| format!("{:.1}% ({}/{})", 100.0 * v, r.agree, r.total))
}

impl AgreementReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "respondents\t{} ({} passed attention)", self.respondents, self.respondents_passed);
        let _ = writeln!(out, "agreement\t{}", pct(&self.overall));
        let _ = writeln!(out, "majority\t{}", pct(&self.majority));
        let _ = writeln!(out, "passed_attention\t{}", pct(&self.passed_attention));
        let _ = writeln!(out, "failed_attention\t{}", pct(&self.failed_attention));
        for (k, r) in &self.per_kind {
            let m = self.majority_per_kind.get(k).map_or_else(|| "NA".into(), pct);
            let _ = writeln!(out, "{k}\t{}\tmajority {m}", pct(r));
        }
        if !self.rejected.is_empty() {
            let _ = writeln!(out, "rejected\t{}", self.rejected.len());
        }
        out
    }

    pub fn long_tsv(&self) -> String {
        let mut out = String::from("outcome\tLM_out\tkind\trespondent\tquestion\n");
        for r in &self.long {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.outcome, r.lm_out, r.kind, r.respondent, r.question);
        }
        out
    }
}

/// Agreement between respondents and the model's preferred side. Responses
/// naming an unknown pair are rejected and listed.
pub fn analyze_responses(responses: &[RawResponse], pairs: &[SurveyPair]) -> AgreementReport {
    let by_id: BTreeMap<&str, &SurveyPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut attention: BTreeMap<&str, bool> = BTreeMap::new();
    for r in responses.iter().filter(|r| r.pair_id == ATTENTION_ID) {
        let ok = r.choice == Side::A;
        attention.entry(r.respondent.as_str()).and_modify(|v| *v &= ok).or_insert(ok);
    }
    let mut report = AgreementReport {
        overall: Rate { agree: 0, total: 0 },
        per_kind: BTreeMap::new(),
        majority: Rate { agree: 0, total: 0 },
        majority_per_kind: BTreeMap::new(),
        passed_attention: Rate { agree: 0, total: 0 },
        failed_attention: Rate { agree: 0, total: 0 },
        respondents: 0,
        respondents_passed: 0,
        records: Vec::new(),
        long: Vec::new(),
        rejected: Vec::new(),
    };
    let mut per_question: BTreeMap<&str, Rate> = BTreeMap::new();
    let mut respondents: BTreeMap<&str, bool> = BTreeMap::new();
    for r in responses {
        let passed = attention.get(r.respondent.as_str()).copied().unwrap_or(false);
        if r.pair_id == ATTENTION_ID {
            respondents.insert(&r.respondent, passed);
            report.records.push(ResponseRecord { respondent: r.respondent.clone(), pair_id: r.pair_id.clone(), choice: r.choice, passed_attention: passed });
            continue;
        }
        let Some(pair) = by_id.get(r.pair_id.as_str()) else {
            log::warn!("response from {} names unknown pair {:?}", r.respondent, r.pair_id);
            report.rejected.push(format!("{}\t{}\tunknown pair", r.respondent, r.pair_id));
            continue;
        };
        respondents.insert(&r.respondent, passed);
        let agree = r.choice == pair.lm_side();
        report.overall.add(agree);
        report.per_kind.entry(pair.kind).or_insert(Rate { agree: 0, total: 0 }).add(agree);
        if passed { &mut report.passed_attention } else { &mut report.failed_attention }.add(agree);
        per_question.entry(pair.id.as_str()).or_insert(Rate { agree: 0, total: 0 }).add(agree);
        report.records.push(ResponseRecord { respondent: r.respondent.clone(), pair_id: r.pair_id.clone(), choice: r.choice, passed_attention: passed });
        report.long.push(LongRow {
            outcome: u8::from(r.choice == pair.original_is),
            lm_out: u8::from(pair.lm_prefers == Preference::Original),
            kind: pair.kind,
            respondent: r.respondent.clone(),
            question: pair.id.clone(),
        });
    }
    for (id, rate) in &per_question {
        let majority = 2 * rate.agree > rate.total;
        report.majority.add(majority);
        report.majority_per_kind.entry(by_id[id].kind).or_insert(Rate { agree: 0, total: 0 }).add(majority);
    }
    report.respondents = respondents.len();
    report.respondents_passed = respondents.values().filter(|p| **p).count();
    report
}
