use std::collections::HashMap;

use rayon::prelude::*;

use super::LmError;

/// Highest supported model order.
pub const MAX_ORDER: usize = 16;

/// Token interner in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn from_words(words: Vec<String>) -> Result<Vocab, LmError> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(LmError::Corrupt(format!("duplicate vocabulary entry {w:?}")));
            }
        }
        Ok(Vocab { words, index })
    }

    pub fn intern(&mut self, word: &str) -> u32 {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// A token stream encoded against a model vocabulary. Out-of-vocabulary
/// texts get per-file ids at or above the vocabulary size, so repeated
/// unknown tokens still match each other inside a cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileIds {
    pub ids: Vec<u32>,
    pub overlay: Vec<String>,
}

/// Interpolated n-gram model.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    lambda: f64,
    abstracted: bool,
    vocab: Vocab,
    /// `counts[k - 1]` maps k-grams to counts.
    counts: Vec<HashMap<Vec<u32>, u64>>,
    /// `totals[k - 1]` maps (k-1)-token contexts to the summed k-gram counts.
    totals: Vec<HashMap<Vec<u32>, u64>>,
}

pub(crate) fn check_params(order: usize, lambda: f64) -> Result<(), LmError> {
    if order == 0 || order > MAX_ORDER {
        return Err(LmError::BadOrder(order));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(LmError::BadLambda(lambda));
    }
    Ok(())
}

fn count_shard(streams: &[Vec<u32>], order: usize) -> Vec<HashMap<Vec<u32>, u64>> {
    let mut counts = vec![HashMap::new(); order];
    for ids in streams {
        for end in 1..=ids.len() {
            for k in 1..=order.min(end) {
                *counts[k - 1].entry(ids[end - k..end].to_vec()).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn derive_totals(counts: &[HashMap<Vec<u32>, u64>]) -> Vec<HashMap<Vec<u32>, u64>> {
    counts
        .iter()
        .map(|table| {
            let mut totals: HashMap<Vec<u32>, u64> = HashMap::new();
            for (gram, &c) in table {
                *totals.entry(gram[..gram.len() - 1].to_vec()).or_insert(0) += c;
            }
            totals
        })
        .collect()
}

impl NgramModel {
    /// Trains on per-file token streams. N-grams never cross file boundaries.
    pub fn train<S: AsRef<str> + Sync>(files: &[Vec<S>], order: usize, lambda: f64, abstracted: bool) -> Result<NgramModel, LmError> {
        check_params(order, lambda)?;
        let mut vocab = Vocab::default();
        let encoded: Vec<Vec<u32>> = files.iter().map(|f| f.iter().map(|w| vocab.intern(w.as_ref())).collect()).collect();
        if encoded.iter().all(|f| f.is_empty()) {
            return Err(LmError::EmptyCorpus);
        }
        let shard = (encoded.len() / (rayon::current_num_threads() * 4)).max(1);
        let counts = encoded
            .par_chunks(shard)
            .map(|chunk| count_shard(chunk, order))
            .reduce(|| vec![HashMap::new(); order], merge_counts);
        let totals = derive_totals(&counts);
        Ok(NgramModel { order, lambda, abstracted, vocab, counts, totals })
    }

    pub(crate) fn from_parts(order: usize, lambda: f64, abstracted: bool, vocab: Vocab, counts: Vec<HashMap<Vec<u32>, u64>>) -> Result<NgramModel, LmError> {
        check_params(order, lambda)?;
        let totals = derive_totals(&counts);
        Ok(NgramModel { order, lambda, abstracted, vocab, counts, totals })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn abstracted(&self) -> bool {
        self.abstracted
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<NgramModel, LmError> {
        check_params(self.order, lambda)?;
        Ok(NgramModel { lambda, ..self.clone() })
    }

    /// Number of training tokens.
    pub fn total_tokens(&self) -> u64 {
        self.totals[0].get(&[][..]).copied().unwrap_or(0)
    }

    /// Count of one k-gram (k = `gram.len()`).
    pub fn count(&self, gram: &[u32]) -> u64 {
        if gram.is_empty() || gram.len() > self.order {
            return 0;
        }
        self.counts[gram.len() - 1].get(gram).copied().unwrap_or(0)
    }

    /// Summed count of k-grams starting with `context` (k = context length + 1).
    pub fn context_total(&self, context: &[u32]) -> u64 {
        if context.len() >= self.order {
            return 0;
        }
        self.totals[context.len()].get(context).copied().unwrap_or(0)
    }

    pub(crate) fn tables(&self) -> &[HashMap<Vec<u32>, u64>] {
        &self.counts
    }

    /// Adds one training occurrence of `gram` at every order it spans.
    pub fn observe(&mut self, gram: &[u32]) {
        let n = gram.len().min(self.order);
        for k in 1..=n {
            let g = &gram[gram.len() - k..];
            *self.counts[k - 1].entry(g.to_vec()).or_insert(0) += 1;
            *self.totals[k - 1].entry(g[..k - 1].to_vec()).or_insert(0) += 1;
        }
    }

    /// Unigram count of a token text in the training data.
    pub fn unigram_count(&self, word: &str) -> u64 {
        self.vocab.id(word).map_or(0, |id| self.count(&[id]))
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> FileIds {
        let v = self.vocab.len() as u32;
        let mut overlay: Vec<String> = Vec::new();
        let mut local: HashMap<&str, u32> = HashMap::new();
        let ids = words
            .iter()
            .map(|w| {
                let w = w.as_ref();
                self.vocab.id(w).unwrap_or_else(|| {
                    *local.entry(w).or_insert_with(|| {
                        overlay.push(w.to_string());
                        v + overlay.len() as u32 - 1
                    })
                })
            })
            .collect();
        FileIds { ids, overlay }
    }

    fn is_known(&self, id: u32) -> bool {
        (id as usize) < self.vocab.len()
    }

    /// Interpolated probability of `token` after `history` (the preceding
    /// tokens of the same file; only the last `order - 1` are used).
    ///
    /// `P_1 = λ·ML_1 + (1-λ)/(|V|+1)` and `P_k = λ·ML_k + (1-λ)·P_{k-1}`; a
    /// context never seen in training leaves `P_k = P_{k-1}`.
    pub fn prob(&self, history: &[u32], token: u32) -> f64 {
        let lambda = self.lambda;
        let n = self.total_tokens() as f64;
        let uni = if self.is_known(token) { self.count(&[token]) as f64 / n } else { 0.0 };
        let mut p = lambda * uni + (1.0 - lambda) / (self.vocab.len() as f64 + 1.0);
        let max_ctx = (self.order - 1).min(history.len());
        let mut key = [0u32; MAX_ORDER];
        for len in 1..=max_ctx {
            let ctx = &history[history.len() - len..];
            if !self.is_known(ctx[0]) {
                break;
            }
            let total = self.totals[len].get(ctx).copied().unwrap_or(0);
            if total == 0 {
                break;
            }
            key[..len].copy_from_slice(ctx);
            key[len] = token;
            let c = if self.is_known(token) { self.counts[len].get(&key[..=len]).copied().unwrap_or(0) } else { 0 };
            p = lambda * (c as f64 / total as f64) + (1.0 - lambda) * p;
        }
        p
    }

    /// Probability assigned to the single reserved unseen-token slot.
    pub fn unseen_prob(&self, history: &[u32]) -> f64 {
        self.prob(history, u32::MAX)
    }

    pub fn surprisal(&self, history: &[u32], token: u32) -> f64 {
        super::surprisal(self.prob(history, token))
    }
}

fn merge_counts(mut a: Vec<HashMap<Vec<u32>, u64>>, b: Vec<HashMap<Vec<u32>, u64>>) -> Vec<HashMap<Vec<u32>, u64>> {
    for (ta, tb) in a.iter_mut().zip(b) {
        if ta.len() < tb.len() {
            let small = std::mem::replace(ta, tb);
            for (k, v) in small {
                *ta.entry(k).or_insert(0) += v;
            }
        } else {
            for (k, v) in tb {
                *ta.entry(k).or_insert(0) += v;
            }
        }
    }
    a
}
