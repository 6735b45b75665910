use std::collections::HashMap;

use super::model::{NgramModel, MAX_ORDER};

/// N-gram counts over the already-scored prefix of one file.
#[derive(Debug, Clone)]
pub struct CacheState {
    order: usize,
    lambda: f64,
    history: Vec<u32>,
    counts: Vec<HashMap<Vec<u32>, u32>>,
    totals: Vec<HashMap<Vec<u32>, u32>>,
}

impl CacheState {
    /// `lambda` is the weight of the cache component in the blend.
    pub fn new(order: usize, lambda: f64) -> CacheState {
        let order = order.clamp(1, MAX_ORDER);
        CacheState { order, lambda, history: Vec::new(), counts: vec![HashMap::new(); order], totals: vec![HashMap::new(); order] }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn history(&self) -> &[u32] {
        &self.history
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Maximum-likelihood estimate at the longest cache context observed so
    /// far, backing off to shorter contexts. `None` while the cache is empty.
    pub fn p_cache(&self, token: u32) -> Option<f64> {
        let max_ctx = (self.order - 1).min(self.history.len());
        let mut key = [0u32; MAX_ORDER];
        for len in (0..=max_ctx).rev() {
            let ctx = &self.history[self.history.len() - len..];
            let total = self.totals[len].get(ctx).copied().unwrap_or(0);
            if total > 0 {
                key[..len].copy_from_slice(ctx);
                key[len] = token;
                let c = self.counts[len].get(&key[..=len]).copied().unwrap_or(0);
                return Some(c as f64 / total as f64);
            }
        }
        None
    }

    /// Tokens with nonzero cache probability in the current context.
    pub fn support(&self) -> Vec<u32> {
        let max_ctx = (self.order - 1).min(self.history.len());
        for len in (0..=max_ctx).rev() {
            let ctx = &self.history[self.history.len() - len..];
            if self.totals[len].get(ctx).copied().unwrap_or(0) > 0 {
                let mut out: Vec<u32> = self.counts[len].keys().filter(|g| &g[..len] == ctx).map(|g| g[len]).collect();
                out.sort_unstable();
                return out;
            }
        }
        Vec::new()
    }

    /// Blended probability `(1-λc)·P_global + λc·P_cache`; the global model
    /// alone while the cache is empty.
    pub fn prob(&self, model: &NgramModel, token: u32) -> f64 {
        let pg = model.prob(&self.history, token);
        match self.p_cache(token) {
            Some(pc) => (1.0 - self.lambda) * pg + self.lambda * pc,
            None => pg,
        }
    }

    /// Blended mass of every token outside the model vocabulary: the global
    /// unseen slot plus the cache mass on out-of-vocabulary ids.
    pub fn unseen_mass(&self, model: &NgramModel) -> f64 {
        let pg = model.unseen_prob(&self.history);
        if self.p_cache(0).is_none() {
            return pg;
        }
        let v = model.vocab().len() as u32;
        let cache_oov: f64 = self.support().into_iter().filter(|&t| t >= v).filter_map(|t| self.p_cache(t)).sum();
        (1.0 - self.lambda) * pg + self.lambda * cache_oov
    }

    pub fn push(&mut self, token: u32) {
        self.history.push(token);
        let n = self.history.len();
        for k in 1..=self.order.min(n) {
            let gram = &self.history[n - k..];
            *self.counts[k - 1].entry(gram.to_vec()).or_insert(0) += 1;
            *self.totals[k - 1].entry(gram[..k - 1].to_vec()).or_insert(0) += 1;
        }
    }
}

/// Surprisal of the first `upto` tokens of a file, scored left to right.
/// With `cache_lambda` set, each token is scored by the blend and then added
/// to a fresh per-file cache.
pub fn score_file(model: &NgramModel, ids: &[u32], cache_lambda: Option<f64>, upto: usize) -> Vec<f64> {
    let upto = upto.min(ids.len());
    match cache_lambda {
        None => (0..upto).map(|i| model.surprisal(&ids[..i], ids[i])).collect(),
        Some(lambda) => {
            let mut cache = CacheState::new(model.order(), lambda);
            let mut out = Vec::with_capacity(upto);
            for &t in &ids[..upto] {
                out.push(super::surprisal(cache.prob(model, t)));
                cache.push(t);
            }
            out
        }
    }
}
