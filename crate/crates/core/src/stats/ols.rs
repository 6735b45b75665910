use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::StatsError;

pub const INTERCEPT: &str = "(intercept)";
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsOptions {
    /// Drop rows whose Cook's distance exceeds `4 / n` and refit once.
    pub cook_filter: bool,
    pub vif_threshold: f64,
}

impl Default for OlsOptions {
    fn default() -> Self {
        OlsOptions { cook_filter: true, vif_threshold: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub residual_se: f64,
    pub n_used: usize,
    pub n_removed_outliers: usize,
    pub removed_rows: Vec<usize>,
    pub vif: BTreeMap<String, f64>,
    /// Predictors whose VIF reaches the threshold.
    pub vif_warnings: Vec<String>,
}

impl OlsResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

struct Fit {
    beta: DVector<f64>,
    std_errors: Vec<f64>,
    residuals: DVector<f64>,
    leverage: Vec<f64>,
    rss: f64,
    tss: f64,
    sigma2: f64,
}

fn design(rows: &[&Vec<f64>], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] })
}

fn fit(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<Fit, StatsError> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(StatsError::TooFewRows { rows: n, columns: k });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let scale = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let collinear: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * scale.max(1.0) * (n as f64).sqrt())
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(StatsError::RankDeficient(collinear));
    }
    let qty = q.transpose() * y;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| StatsError::RankDeficient(names.to_vec()))?;
    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let mean = y.mean();
    let tss = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma2 = rss / (n - k) as f64;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or_else(|| StatsError::RankDeficient(names.to_vec()))?;
    let std_errors = (0..k).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt()).collect();
    let leverage = (0..n).map(|i| q.row(i).norm_squared()).collect();
    Ok(Fit { beta, std_errors, residuals, leverage, rss, tss, sigma2 })
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss <= 0.0 {
        return if rss <= 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - rss / tss).clamp(0.0, 1.0)
}

fn cooks_outliers(f: &Fit, p: usize) -> Vec<usize> {
    let n = f.leverage.len();
    if f.rss <= 1e-24 * f.tss.max(1.0) {
        return Vec::new();
    }
    let cutoff = 4.0 / n as f64;
    (0..n)
        .filter(|&i| {
            let h = f.leverage[i];
            if h >= 1.0 - 1e-12 {
                return false;
            }
            let d = f.residuals[i].powi(2) * h / (p as f64 * f.sigma2 * (1.0 - h).powi(2));
            d > cutoff
        })
        .collect()
}

fn vifs(x: &DMatrix<f64>, names: &[String]) -> Result<BTreeMap<String, f64>, StatsError> {
    let k = x.ncols();
    let mut out = BTreeMap::new();
    for j in 1..k {
        let value = if k == 2 {
            1.0
        } else {
            let others: Vec<usize> = (0..k).filter(|&c| c != j).collect();
            let sub = x.select_columns(&others);
            let sub_names: Vec<String> = others.iter().map(|&c| names[c].clone()).collect();
            let target = x.column(j).into_owned();
            let f = fit(&sub, &target, &sub_names)?;
            let r2 = r_squared(f.rss, f.tss);
            if r2 >= 1.0 {
                f64::INFINITY
            } else {
                1.0 / (1.0 - r2)
            }
        };
        out.insert(names[j].clone(), value);
    }
    Ok(out)
}

/// Ordinary least squares of `y` on an intercept plus the columns of `rows`.
pub fn ols_fit(names: &[String], rows: &[Vec<f64>], y: &[f64], options: OlsOptions) -> Result<OlsResult, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::Empty);
    }
    let p = names.len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(StatsError::DimensionMismatch { row: i, found: row.len(), expected: p });
        }
    }
    if rows.len() != y.len() {
        return Err(StatsError::DimensionMismatch { row: rows.len(), found: y.len(), expected: rows.len() });
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut all_names = vec![INTERCEPT.to_string()];
    all_names.extend(names.iter().cloned());

    let mut keep: Vec<usize> = (0..rows.len()).collect();
    let build = |keep: &[usize]| {
        let sel: Vec<&Vec<f64>> = keep.iter().map(|&i| &rows[i]).collect();
        (design(&sel, p), DVector::from_iterator(keep.len(), keep.iter().map(|&i| y[i])))
    };
    let (mut x, mut yv) = build(&keep);
    let mut f = fit(&x, &yv, &all_names)?;
    let mut removed_rows = Vec::new();
    if options.cook_filter {
        let outliers = cooks_outliers(&f, p + 1);
        if !outliers.is_empty() {
            removed_rows = outliers.iter().map(|&i| keep[i]).collect();
            keep.retain(|i| !removed_rows.contains(i));
            (x, yv) = build(&keep);
            f = fit(&x, &yv, &all_names)?;
        }
    }
    let vif = vifs(&x, &all_names)?;
    let vif_warnings = vif.iter().filter(|(_, v)| **v >= options.vif_threshold).map(|(k, _)| k.clone()).collect();
    let coefficients = all_names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient {
            name: name.clone(),
            estimate: f.beta[j],
            std_error: f.std_errors[j],
            t_value: f.beta[j] / f.std_errors[j],
        })
        .collect();
    Ok(OlsResult {
        coefficients,
        r_squared: r_squared(f.rss, f.tss),
        residual_se: f.sigma2.sqrt(),
        n_used: keep.len(),
        n_removed_outliers: removed_rows.len(),
        removed_rows,
        vif,
        vif_warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let r = ols_fit(&names(&["x"]), &rows, &y, OlsOptions::default()).unwrap();
        assert!((r.coefficient("x").unwrap().estimate - 2.0).abs() < 1e-12);
        assert!((r.coefficient(INTERCEPT).unwrap().estimate - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(r.n_removed_outliers, 0);
    }

    #[test]
    fn textbook_standard_errors() {
        // x = 1..5, y = [2, 4, 5, 4, 5]: slope 0.6, intercept 2.2,
        // s^2 = 2.4 / 3, SE(slope) = sqrt(0.8 / 10).
        let rows: Vec<Vec<f64>> = (1..=5).map(|i| vec![i as f64]).collect();
        let y = [2.0, 4.0, 5.0, 4.0, 5.0];
        let opts = OlsOptions { cook_filter: false, ..Default::default() };
        let r = ols_fit(&names(&["x"]), &rows, &y, opts).unwrap();
        let slope = r.coefficient("x").unwrap();
        assert!((slope.estimate - 0.6).abs() < 1e-12);
        assert!((slope.std_error - 0.08f64.sqrt()).abs() < 1e-12);
        assert!((r.r_squared - 0.6).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_named() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        match ols_fit(&names(&["a", "b", "c"]), &rows, &y, OlsOptions::default()) {
            Err(StatsError::RankDeficient(cols)) => assert!(cols.contains(&"b".to_string())),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_checks() {
        let err = ols_fit(&names(&["a"]), &[vec![1.0, 2.0]], &[1.0], OlsOptions::default());
        assert!(matches!(err, Err(StatsError::DimensionMismatch { .. })));
        let err = ols_fit(&names(&["a"]), &[vec![1.0], vec![2.0]], &[1.0, 2.0], OlsOptions::default());
        assert!(matches!(err, Err(StatsError::TooFewRows { .. })));
    }

    #[test]
    fn vif_flags_correlated_predictors() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let a = i as f64;
                vec![a, a + if i % 2 == 0 { 0.1 } else { -0.1 }]
            })
            .collect();
        let y: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
        let opts = OlsOptions { cook_filter: false, ..Default::default() };
        let r = ols_fit(&names(&["a", "b"]), &rows, &y, opts).unwrap();
        assert!(r.vif["a"] > 100.0);
        assert_eq!(r.vif_warnings, names(&["a", "b"]));
    }

    #[test]
    fn planted_outlier_removed() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let mut y: Vec<f64> = (0..40).map(|i| i as f64 + if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
        y[37] += 100.0;
        let r = ols_fit(&names(&["x"]), &rows, &y, OlsOptions::default()).unwrap();
        assert!(r.removed_rows.contains(&37));
        assert!((r.coefficient("x").unwrap().estimate - 1.0).abs() < 0.05);
    }
}
