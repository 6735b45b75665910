//! Meaning-preserving rewrites: operand swaps around commutative and
//! relational operators, redundant-parenthesis edits and identifier shuffles.

pub mod edit;
pub mod sample;
pub mod shuffle;
pub mod sites;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::ExcludedLines;
use crate::frontend::{ExprSite, NodeKind, ParsedFile, Token};
use crate::seed::rng_for;

pub use edit::{apply_checked, node_at_path, node_path, render_edited, Location};
pub use sample::{sample_variants, valid_locations, Variant};
pub use shuffle::{eligible_locals, shuffle_method, ShuffleMode, MAX_SHUFFLE_LOCALS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    ArithSwap,
    RelSwap,
    ParenAdd,
    ParenRemove,
    ShuffleWithin,
    ShuffleBetween,
}

impl TransformKind {
    pub const ALL: [TransformKind; 6] = [
        TransformKind::ArithSwap,
        TransformKind::RelSwap,
        TransformKind::ParenAdd,
        TransformKind::ParenRemove,
        TransformKind::ShuffleWithin,
        TransformKind::ShuffleBetween,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::ArithSwap => "arith_swap",
            TransformKind::RelSwap => "rel_swap",
            TransformKind::ParenAdd => "paren_add",
            TransformKind::ParenRemove => "paren_remove",
            TransformKind::ShuffleWithin => "shuffle_within",
            TransformKind::ShuffleBetween => "shuffle_between",
        }
    }

    pub fn is_shuffle(self) -> bool {
        matches!(self, TransformKind::ShuffleWithin | TransformKind::ShuffleBetween)
    }

    pub fn is_swap(self) -> bool {
        matches!(self, TransformKind::ArithSwap | TransformKind::RelSwap)
    }

    fn shuffle_mode(self) -> Option<ShuffleMode> {
        match self {
            TransformKind::ShuffleWithin => Some(ShuffleMode::Within),
            TransformKind::ShuffleBetween => Some(ShuffleMode::Between),
            _ => None,
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        TransformKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown transformation kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covariates {
    /// Significant tokens in the scored region of the original.
    pub num_tokens: usize,
    pub parent_node_kind: String,
    pub dominant_operator: String,
}

/// One original/transformed pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub kind: TransformKind,
    pub file: String,
    /// Index of the expression site (or method, for shuffles) within the file.
    pub site_index: usize,
    pub variant: usize,
    pub line_span: (u32, u32),
    /// Byte range of the edited region in the original file.
    pub span: (usize, usize),
    pub original_text: String,
    pub transformed_text: String,
    /// Byte ranges scored in the original file.
    pub units: Vec<(usize, usize)>,
    /// The same ranges in the transformed file.
    pub transformed_units: Vec<(usize, usize)>,
    /// Sorted multiset intersection of the two variants' scored tokens.
    pub shared_tokens: Vec<String>,
    pub locations_applied: usize,
    pub locations_available: usize,
    pub covariates: Covariates,
    pub method: Option<String>,
}

impl TransformRecord {
    /// The whole transformed file.
    pub fn transformed_file(&self, original: &str) -> String {
        let mut out = String::with_capacity(original.len() + 16);
        out.push_str(&original[..self.span.0]);
        out.push_str(&self.transformed_text);
        out.push_str(&original[self.span.1..]);
        out
    }
}

/// Sorted multiset intersection.
pub fn multiset_intersection<S: AsRef<str>>(a: &[S], b: &[S]) -> Vec<String> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for t in a {
        counts.entry(t.as_ref()).or_default().0 += 1;
    }
    for t in b {
        counts.entry(t.as_ref()).or_default().1 += 1;
    }
    counts.into_iter().flat_map(|(t, (x, y))| std::iter::repeat_n(t.to_string(), x.min(y))).collect()
}

fn significant_texts(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().filter(|t| !t.kind.is_trivia()).map(|t| t.text.as_str()).collect()
}

fn touches(excluded: &ExcludedLines, first: u32, last: u32, keyword_too: bool) -> bool {
    (first..=last).any(|l| excluded.frequent.contains(&l) || (keyword_too && excluded.keyword.contains(&l)))
}

/// Candidate locations of one kind at one site (before validity checks).
pub fn candidate_locations(kind: TransformKind, site: &ExprSite, tokens: &[Token]) -> Vec<Location> {
    if site.opaque {
        return Vec::new();
    }
    match kind {
        TransformKind::ArithSwap => sites::arith_locations(&site.tree),
        TransformKind::RelSwap => sites::rel_locations(&site.tree),
        TransformKind::ParenAdd => sites::paren_add_locations(&site.tree),
        TransformKind::ParenRemove => sites::paren_remove_locations(&site.tree, tokens),
        TransformKind::ShuffleWithin | TransformKind::ShuffleBetween => Vec::new(),
    }
}

fn neighbors<'a>(file: &'a ParsedFile, site: &ExprSite) -> (Option<&'a Token>, Option<&'a Token>) {
    let before = site.start.checked_sub(1).map(|i| &file.tokens[i]);
    (before, file.tokens.get(site.end))
}

/// Valid locations of one kind at every non-excluded site, keyed by site index.
pub fn find_sites(file: &ParsedFile, kind: TransformKind, excluded: &ExcludedLines) -> Vec<(usize, Vec<Location>)> {
    file.sites
        .iter()
        .enumerate()
        .filter(|(_, s)| !touches(excluded, s.line_span.0, s.line_span.1, true))
        .filter_map(|(i, s)| {
            let (before, after) = neighbors(file, s);
            let valid = valid_locations(&s.tree, &file.tokens, candidate_locations(kind, s, &file.tokens), before, after);
            (!valid.is_empty()).then_some((i, valid))
        })
        .collect()
}

fn parent_label(site: &ExprSite, anchor: usize) -> String {
    let tree = &site.tree;
    match tree.parents()[anchor] {
        Some(p) => {
            let n = tree.node(p);
            match (&n.op, n.kind) {
                (Some(op), NodeKind::Infix | NodeKind::Unary | NodeKind::Other) => op.clone(),
                _ => n.kind.name().to_string(),
            }
        }
        None => site.context.name().to_string(),
    }
}

fn dominant(labels: &[String]) -> String {
    let mut best: Option<(&String, usize)> = None;
    for l in labels {
        let c = labels.iter().filter(|x| *x == l).count();
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.map_or_else(String::new, |(l, _)| l.clone())
}

fn expression_records(file: &ParsedFile, path: &str, kind: TransformKind, excluded: &ExcludedLines, seed: u64) -> Vec<TransformRecord> {
    let mut out = Vec::new();
    for (si, valid) in find_sites(file, kind, excluded) {
        let site = &file.sites[si];
        let (before, after) = neighbors(file, site);
        let mut rng = rng_for(seed, &format!("{kind}:{path}"), si as u64);
        let variants = sample_variants(&site.tree, &file.tokens, &valid, before, after, &mut rng);
        let start = file.tokens[site.start].offset;
        let end = file.tokens[site.end - 1].end();
        let original_text = &file.text[start..end];
        let original_sig = significant_texts(&file.tokens[site.start..site.end]);
        for (vi, v) in variants.into_iter().enumerate() {
            let Ok(new_tokens) = crate::frontend::tokenize(&v.text) else { continue };
            let shared = multiset_intersection(&original_sig, &significant_texts(&new_tokens));
            let applied: Vec<&Location> = v.locations.iter().map(|&i| &valid[i]).collect();
            let ops: Vec<String> = applied.iter().map(|l| sites::operator_label(&site.tree, l.focus(&site.tree))).collect();
            out.push(TransformRecord {
                kind,
                file: path.to_string(),
                site_index: si,
                variant: vi,
                line_span: site.line_span,
                span: (start, end),
                original_text: original_text.to_string(),
                transformed_text: v.text.clone(),
                units: vec![(start, end)],
                transformed_units: vec![(start, start + v.text.len())],
                shared_tokens: shared,
                locations_applied: v.locations.len(),
                locations_available: valid.len(),
                covariates: Covariates {
                    num_tokens: original_sig.len(),
                    parent_node_kind: parent_label(site, applied[0].anchor()),
                    dominant_operator: dominant(&ops),
                },
                method: site.method.map(|m| file.methods[m].name.clone()),
            });
        }
    }
    out
}

fn shuffle_records(file: &ParsedFile, path: &str, kind: TransformKind, excluded: &ExcludedLines, seed: u64) -> Vec<TransformRecord> {
    let Some(mode) = kind.shuffle_mode() else { return Vec::new() };
    let mut out = Vec::new();
    for (mi, m) in file.methods.iter().enumerate() {
        let mut rng = rng_for(seed, &format!("{kind}:{path}"), mi as u64);
        let Some(shuffle) = shuffle_method(file, mi, mode, &mut rng) else { continue };
        let Ok(new_tokens) = crate::frontend::tokenize(&shuffle.new_text) else { continue };
        let mut units = Vec::new();
        let mut transformed_units = Vec::new();
        let mut orig_texts: Vec<&str> = Vec::new();
        let mut new_texts: Vec<&str> = Vec::new();
        for &(a, b) in &m.units {
            if !(a..b).any(|i| shuffle.replaced.contains_key(&i)) {
                continue;
            }
            if touches(excluded, file.tokens[a].line, file.tokens[b - 1].line, false) {
                continue;
            }
            units.push((file.tokens[a].offset, file.tokens[b - 1].end()));
            transformed_units.push((new_tokens[a].offset, new_tokens[b - 1].end()));
            orig_texts.extend(significant_texts(&file.tokens[a..b]));
            new_texts.extend(significant_texts(&new_tokens[a..b]));
        }
        if units.is_empty() {
            continue;
        }
        let (a, b) = m.body_span;
        let span = (file.tokens[a].offset, file.tokens[b - 1].end());
        let new_span_end = new_tokens[b - 1].end();
        out.push(TransformRecord {
            kind,
            file: path.to_string(),
            site_index: mi,
            variant: 0,
            line_span: (file.tokens[a].line, file.tokens[b - 1].line),
            span,
            original_text: file.text[span.0..span.1].to_string(),
            transformed_text: shuffle.new_text[span.0..new_span_end].to_string(),
            units,
            transformed_units,
            shared_tokens: multiset_intersection(&orig_texts, &new_texts),
            locations_applied: shuffle.renames.len(),
            locations_available: eligible_locals(m).len(),
            covariates: Covariates { num_tokens: orig_texts.len(), parent_node_kind: "method".into(), dominant_operator: "rename".into() },
            method: Some(m.name.clone()),
        });
    }
    out
}

/// All sampled transformations of the given kinds in one file.
pub fn transform_file(file: &ParsedFile, path: &str, kinds: &[TransformKind], excluded: &ExcludedLines, seed: u64) -> Vec<TransformRecord> {
    kinds
        .iter()
        .flat_map(|&kind| {
            if kind.is_shuffle() {
                shuffle_records(file, path, kind, excluded, seed)
            } else {
                expression_records(file, path, kind, excluded, seed)
            }
        })
        .collect()
}
