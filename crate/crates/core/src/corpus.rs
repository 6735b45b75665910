//! Corpus manifests: ingesting project trees, name-based file deduplication,
//! project-level train/test splits and the test-set line filters.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::seed::rng_for;

pub const SOURCE_EXTENSION: &str = "java";
pub const DEFAULT_DUP_THRESHOLD: u64 = 100;
pub const FILTER_KEYWORDS: &[&str] = &["hashCode", "other"];
const MANIFEST_MAGIC: &str = "# natcode-manifest v1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("split needs at least 2 projects, found {0}")]
    TooFewProjects(usize),
    #[error("split ratio {0} is outside (0, 1)")]
    BadRatio(f64),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub project: String,
    /// Final directory name, `/`, file name.
    pub dedup_key: String,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub entries: Vec<FileEntry>,
    pub split_seed: Option<u64>,
    pub split_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub files: usize,
    pub skipped: usize,
}

pub fn dedup_key(path: &Path) -> String {
    let file = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let parent = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    format!("{parent}/{file}")
}

/// Walks each project root and lists its source files.
pub fn ingest<P: AsRef<Path>>(roots: &[P]) -> Result<(CorpusManifest, IngestStats), CorpusError> {
    let mut entries = Vec::new();
    let mut stats = IngestStats::default();
    for root in roots {
        let root = root.as_ref();
        let meta = fs::metadata(root).map_err(io_err(root))?;
        if !meta.is_dir() {
            return Err(CorpusError::NotADirectory(root.to_path_buf()));
        }
        fs::read_dir(root).map_err(io_err(root))?;
        let project = root
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| root.to_string_lossy().into_owned());
        for item in WalkDir::new(root).follow_links(false) {
            match item {
                Ok(e) if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == SOURCE_EXTENSION) => {
                    entries.push(FileEntry {
                        path: e.path().to_string_lossy().into_owned(),
                        project: project.clone(),
                        dedup_key: dedup_key(e.path()),
                        split: None,
                    });
                }
                Ok(_) => {}
                Err(err) => {
                    log::warn!("skipping unreadable entry under {}: {err}", root.display());
                    stats.skipped += 1;
                }
            }
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    stats.files = entries.len();
    Ok((CorpusManifest { entries, split_seed: None, split_ratio: None }, stats))
}

/// Keeps the lexicographically first entry per dedup key. Returns the removal count.
pub fn dedup(manifest: &CorpusManifest) -> (CorpusManifest, usize) {
    let mut entries = manifest.entries.clone();
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let mut seen = BTreeSet::new();
    let before = entries.len();
    entries.retain(|e| seen.insert(e.dedup_key.clone()));
    let removed = before - entries.len();
    (CorpusManifest { entries, ..manifest.clone() }, removed)
}

pub fn projects(manifest: &CorpusManifest) -> Vec<String> {
    let set: BTreeSet<&str> = manifest.entries.iter().map(|e| e.project.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Number of training projects for `p` projects at `ratio`.
pub fn train_project_count(p: usize, ratio: f64) -> usize {
    let raw = (ratio * p as f64 - 1e-9).ceil() as usize;
    raw.clamp(1, p - 1)
}

/// Shuffles the sorted project list with a seeded generator and labels the
/// first `ceil(ratio * P)` projects as train.
pub fn split_by_project(manifest: &CorpusManifest, ratio: f64, seed: u64) -> Result<CorpusManifest, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::BadRatio(ratio));
    }
    let mut names = projects(manifest);
    if names.len() < 2 {
        return Err(CorpusError::TooFewProjects(names.len()));
    }
    let n_train = train_project_count(names.len(), ratio);
    names.shuffle(&mut rng_for(seed, "split_by_project", 0));
    let labels: HashMap<&str, Split> = names
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), if i < n_train { Split::Train } else { Split::Test }))
        .collect();
    let entries = manifest
        .entries
        .iter()
        .map(|e| FileEntry { split: Some(labels[e.project.as_str()]), ..e.clone() })
        .collect();
    Ok(CorpusManifest { entries, split_seed: Some(seed), split_ratio: Some(ratio) })
}

impl CorpusManifest {
    pub fn with_split(&self, split: Split) -> Vec<&FileEntry> {
        self.entries.iter().filter(|e| e.split == Some(split)).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "{MANIFEST_MAGIC}")?;
        if let Some(seed) = self.split_seed {
            write!(w, " split_seed={seed}")?;
        }
        if let Some(ratio) = self.split_ratio {
            write!(w, " split_ratio={ratio}")?;
        }
        writeln!(w)?;
        for e in &self.entries {
            let split = e.split.map_or_else(|| "-".to_string(), |s| s.to_string());
            writeln!(w, "{}\t{}\t{}\t{}", e.path, e.project, e.dedup_key, split)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(io_err(path))?;
        fs::write(path, buf).map_err(io_err(path))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<CorpusManifest, CorpusError> {
        let mut m = CorpusManifest::default();
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| CorpusError::Manifest { line: line_no, message: e.to_string() })?;
            if i == 0 {
                let Some(rest) = line.strip_prefix(MANIFEST_MAGIC) else {
                    return Err(CorpusError::Manifest { line: 1, message: "missing manifest header".into() });
                };
                for kv in rest.split_whitespace() {
                    let bad = || CorpusError::Manifest { line: 1, message: format!("bad header field {kv:?}") };
                    match kv.split_once('=') {
                        Some(("split_seed", v)) => m.split_seed = Some(v.parse().map_err(|_| bad())?),
                        Some(("split_ratio", v)) => m.split_ratio = Some(v.parse().map_err(|_| bad())?),
                        _ => return Err(bad()),
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(CorpusError::Manifest { line: line_no, message: format!("expected 4 fields, found {}", fields.len()) });
            }
            let split = match fields[3] {
                "-" => None,
                s => Some(s.parse().map_err(|message| CorpusError::Manifest { line: line_no, message })?),
            };
            m.entries.push(FileEntry {
                path: fields[0].to_string(),
                project: fields[1].to_string(),
                dedup_key: fields[2].to_string(),
                split,
            });
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<CorpusManifest, CorpusError> {
        let file = fs::File::open(path).map_err(io_err(path))?;
        CorpusManifest::read_from(io::BufReader::new(file))
    }
}

/// Trimmed line text with internal whitespace runs collapsed to one space.
pub fn normalize_line(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized line counts over a set of file texts.
pub fn count_lines<S: AsRef<str> + Sync>(texts: &[S]) -> HashMap<String, u64> {
    texts
        .par_iter()
        .map(|t| {
            let mut m = HashMap::new();
            for line in t.as_ref().lines() {
                *m.entry(normalize_line(line)).or_insert(0) += 1;
            }
            m
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// Excluded line numbers (1-based) of one test file, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExcludedLines {
    pub frequent: BTreeSet<u32>,
    pub keyword: BTreeSet<u32>,
}

impl ExcludedLines {
    pub fn all(&self) -> BTreeSet<u32> {
        self.frequent.union(&self.keyword).copied().collect()
    }

    pub fn contains(&self, line: u32) -> bool {
        self.frequent.contains(&line) || self.keyword.contains(&line)
    }

    pub fn is_empty(&self) -> bool {
        self.frequent.is_empty() && self.keyword.is_empty()
    }
}

/// Lines whose normalized text occurs more than `threshold` times in the test
/// split, plus lines containing one of the filter keywords.
pub fn filter_test_lines(text: &str, counts: &HashMap<String, u64>, threshold: u64) -> ExcludedLines {
    let mut out = ExcludedLines::default();
    for (i, line) in text.lines().enumerate() {
        let n = (i + 1) as u32;
        if counts.get(&normalize_line(line)).copied().unwrap_or(0) > threshold {
            out.frequent.insert(n);
        }
        if FILTER_KEYWORDS.iter().any(|k| line.contains(k)) {
            out.keyword.insert(n);
        }
    }
    out
}

/// Methods whose locals are never shuffled.
pub fn is_equals_or_hashcode(method_name: &str) -> bool {
    method_name == "equals" || method_name == "hashCode"
}

/// Per-project file and split counts.
pub fn summary(manifest: &CorpusManifest) -> BTreeMap<String, (usize, Option<Split>)> {
    let mut out: BTreeMap<String, (usize, Option<Split>)> = BTreeMap::new();
    for e in &manifest.entries {
        let slot = out.entry(e.project.clone()).or_insert((0, e.split));
        slot.0 += 1;
    }
    out
}
