use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{bonferroni, StatsError};

/// Sample sizes up to this use the exact null distribution.
pub const EXACT_LIMIT: usize = 25;
const ENUMERATE_WALSH_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n: usize,
    pub n_nonzero: usize,
    /// Sum of the ranks of positive differences.
    pub statistic: f64,
    pub p_two_sided: f64,
    pub exact: bool,
    /// Hodges-Lehmann pseudomedian (median of Walsh averages).
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub conf_level: f64,
    pub alpha_adjusted: f64,
}

/// Doubled mid-ranks of `|d|` for the nonzero differences, with their signs.
/// Doubling keeps tied ranks integral.
pub fn signed_ranks(diffs: &[f64]) -> Vec<(u64, bool)> {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut out = Vec::with_capacity(nz.len());
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // Ranks i+1..=j+1 share (i+1 + j+1)/2; doubled: i + j + 2.
        let doubled = (i + j + 2) as u64;
        for d in &nz[i..=j] {
            out.push((doubled, *d > 0.0));
        }
        i = j + 1;
    }
    out
}

/// Number of sign assignments giving each doubled rank sum.
pub fn exact_signed_rank_counts(doubled_ranks: &[u64]) -> Vec<u64> {
    let max: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0u64; max as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn p_value(ranks: &[(u64, bool)]) -> (f64, f64, bool) {
    let n = ranks.len();
    let w2: u64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let statistic = w2 as f64 / 2.0;
    if n == 0 {
        return (statistic, 1.0, true);
    }
    if n <= EXACT_LIMIT {
        let doubled: Vec<u64> = ranks.iter().map(|r| r.0).collect();
        let counts = exact_signed_rank_counts(&doubled);
        let le: u64 = counts[..=w2 as usize].iter().sum();
        let ge: u64 = counts[w2 as usize..].iter().sum();
        let p = (2 * le.min(ge)) as f64 / (1u64 << n) as f64;
        return (statistic, p.min(1.0), true);
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ranks[j + 1].0 == ranks[i].0 {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return (statistic, 1.0, false);
    }
    let z = ((statistic - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let p = 2.0 * (1.0 - standard_normal().cdf(z));
    (statistic, p.min(1.0), false)
}

/// All pairwise averages `(x_i + x_j) / 2`, `i <= j`, sorted.
pub fn walsh_averages(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() * (x.len() + 1) / 2);
    for i in 0..x.len() {
        for j in i..x.len() {
            out.push((x[i] + x[j]) / 2.0);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn count_le(sorted: &[f64], v: f64) -> u64 {
    let n = sorted.len();
    let mut count = 0u64;
    let mut j = n as isize - 1;
    for i in 0..n {
        while j >= i as isize && (sorted[i] + sorted[j as usize]) / 2.0 > v {
            j -= 1;
        }
        if j < i as isize {
            break;
        }
        count += (j - i as isize + 1) as u64;
    }
    count
}

fn largest_le(sorted: &[f64], v: f64) -> f64 {
    let n = sorted.len();
    let mut best = f64::NEG_INFINITY;
    let mut j = n as isize - 1;
    for i in 0..n {
        while j >= i as isize && (sorted[i] + sorted[j as usize]) / 2.0 > v {
            j -= 1;
        }
        if j < i as isize {
            break;
        }
        best = best.max((sorted[i] + sorted[j as usize]) / 2.0);
    }
    best
}

/// The `k`-th smallest (1-based) Walsh average of sorted data, without
/// materializing all of them.
pub fn kth_walsh_average(sorted: &[f64], k: u64) -> f64 {
    let n = sorted.len();
    let (mut lo, mut hi) = (sorted[0], sorted[n - 1]);
    for _ in 0..200 {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if count_le(sorted, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if count_le(sorted, lo) >= k {
        largest_le(sorted, lo)
    } else {
        largest_le(sorted, hi)
    }
}

/// Largest `w` with `P(W+ <= w) <= alpha / 2` under the tie-free null for
/// `n` observations, or -1 when none exists.
fn lower_critical(n: usize, alpha: f64) -> i64 {
    if n <= EXACT_LIMIT {
        let doubled: Vec<u64> = (1..=n as u64).map(|r| 2 * r).collect();
        let counts = exact_signed_rank_counts(&doubled);
        let total = (1u64 << n) as f64;
        let mut cum = 0u64;
        let mut best = -1i64;
        for w in 0..=n * (n + 1) / 2 {
            cum += counts[2 * w];
            if cum as f64 / total <= alpha / 2.0 {
                best = w as i64;
            } else {
                break;
            }
        }
        best
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let sigma = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        let z = standard_normal().inverse_cdf(1.0 - alpha / 2.0);
        (mu - z * sigma - 0.5).floor() as i64
    }
}

struct Walsh {
    sorted: Vec<f64>,
    all: Option<Vec<f64>>,
}

impl Walsh {
    fn new(x: &[f64]) -> Walsh {
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = x.len() * (x.len() + 1) / 2;
        let all = (m <= ENUMERATE_WALSH_LIMIT).then(|| walsh_averages(&sorted));
        Walsh { sorted, all }
    }

    fn kth(&self, k: u64) -> f64 {
        match &self.all {
            Some(all) => all[k as usize - 1],
            None => kth_walsh_average(&self.sorted, k),
        }
    }
}

/// Two-sided paired Wilcoxon signed-rank test on differences. Zeros are
/// dropped for the test; the interval uses every observation so it shifts
/// with the data. `family_size` Bonferroni-widens the interval.
pub fn wilcoxon_signed_rank(diffs: &[f64], alpha: f64, family_size: usize) -> Result<WilcoxonResult, StatsError> {
    if diffs.is_empty() {
        return Err(StatsError::Empty);
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let alpha_adjusted = bonferroni(alpha, family_size)?;
    let ranks = signed_ranks(diffs);
    let (statistic, p_two_sided, exact) = p_value(&ranks);

    let n = diffs.len();
    let m = (n * (n + 1) / 2) as u64;
    let walsh = Walsh::new(diffs);
    let estimate = if m % 2 == 1 { walsh.kth(m.div_ceil(2)) } else { (walsh.kth(m / 2) + walsh.kth(m / 2 + 1)) / 2.0 };
    let c = lower_critical(n, alpha_adjusted);
    let k_lo = ((c + 1).max(1) as u64).min(m);
    let k_hi = (m as i64 - c.max(0)).clamp(1, m as i64) as u64;
    let (ci_low, ci_high) = (walsh.kth(k_lo), walsh.kth(k_hi.max(k_lo)));
    Ok(WilcoxonResult {
        n,
        n_nonzero: ranks.len(),
        statistic,
        p_two_sided,
        exact,
        estimate,
        ci_low,
        ci_high,
        conf_level: 1.0 - alpha_adjusted,
        alpha_adjusted,
    })
}
