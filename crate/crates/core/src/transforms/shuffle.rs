//! Scope-safe identifier shuffles inside one method.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::is_equals_or_hashcode;
use crate::frontend::{analyze, MethodScope, ParsedFile};

pub const MAX_SHUFFLE_LOCALS: usize = 10;
const REDRAWS: usize = 10;
const DERANGEMENT_TRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleMode {
    /// Permute names only among locals of the same declared type.
    Within,
    /// Permute names across all eligible locals.
    Between,
}

/// Whether a method takes part in shuffles at all.
pub fn method_is_shuffleable(m: &MethodScope) -> bool {
    !is_equals_or_hashcode(&m.name) && !m.contains_lambda && !m.contains_nested_class
}

/// Locals declared exactly once with a shuffleable type.
pub fn eligible_locals(m: &MethodScope) -> Vec<usize> {
    m.locals
        .iter()
        .enumerate()
        .filter(|(_, d)| d.decl_count_in_method == 1 && d.has_shuffleable_type() && !d.positions.is_empty())
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shuffle {
    /// `(local index, new name)` for every renamed local.
    pub renames: Vec<(usize, String)>,
    /// Token index → new text.
    pub replaced: HashMap<usize, String>,
    /// Full text of the file after renaming.
    pub new_text: String,
}

fn groups(m: &MethodScope, eligible: &[usize], mode: ShuffleMode) -> Vec<Vec<usize>> {
    match mode {
        ShuffleMode::Between => vec![eligible.to_vec()],
        ShuffleMode::Within => {
            let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for &i in eligible {
                by_type.entry(m.locals[i].declared_type.as_str()).or_default().push(i);
            }
            by_type.into_values().collect()
        }
    }
}

/// A permutation of `0..n` with no fixed points, by Fisher-Yates with rejection.
pub fn derangement<R: Rng>(n: usize, rng: &mut R) -> Option<Vec<usize>> {
    if n < 2 {
        return None;
    }
    let mut p: Vec<usize> = (0..n).collect();
    for _ in 0..DERANGEMENT_TRIES {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Some(p);
        }
    }
    None
}

/// Maps each reference token to the declaration token it resolves to.
fn resolution(m: &MethodScope) -> Vec<(usize, Option<usize>)> {
    m.refs.iter().map(|&(tok, d)| (tok, d.map(|d| m.locals[d].decl_token))).collect()
}

/// Draws a derangement over the method's eligible locals and applies it,
/// redrawing when the renamed file resolves differently.
pub fn shuffle_method<R: Rng>(file: &ParsedFile, method: usize, mode: ShuffleMode, rng: &mut R) -> Option<Shuffle> {
    if !file.balanced {
        return None;
    }
    let m = &file.methods[method];
    if !method_is_shuffleable(m) {
        return None;
    }
    let eligible = eligible_locals(m);
    if eligible.len() < 2 || eligible.len() > MAX_SHUFFLE_LOCALS {
        return None;
    }
    let groups: Vec<Vec<usize>> = groups(m, &eligible, mode).into_iter().filter(|g| g.len() >= 2).collect();
    if groups.is_empty() {
        return None;
    }
    let before = resolution(m);
    for _ in 0..REDRAWS {
        let mut renames = Vec::new();
        for g in &groups {
            let perm = derangement(g.len(), rng)?;
            for (slot, &local) in g.iter().enumerate() {
                renames.push((local, m.locals[g[perm[slot]]].name.clone()));
            }
        }
        renames.sort();
        let mut replaced = HashMap::new();
        for (local, name) in &renames {
            for &tok in &m.locals[*local].positions {
                replaced.insert(tok, name.clone());
            }
        }
        let new_text: String = file
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| replaced.get(&i).map_or(t.text.as_str(), String::as_str))
            .collect();
        let Ok(new_file) = analyze(&new_text) else { continue };
        let same = new_file
            .methods
            .iter()
            .find(|nm| nm.name_token == m.name_token)
            .is_some_and(|nm| resolution(nm) == before);
        if same {
            return Some(Shuffle { renames, replaced, new_text });
        }
    }
    None
}
