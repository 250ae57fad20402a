//! Model-agnostic explanations: partial dependence profiles (optionally with
//! nonparametric bootstrap bands), permutation importance, and residual
//! analysis.
//!
//! Partial dependence at a grid value `g` is the mean prediction after
//! overwriting the feature column with `g`. Bootstrap bands resample the
//! explanation rows (the model is never refit) and take point-wise empirical
//! quantiles of the recomputed profiles; the grid stays fixed across
//! replicates. All randomness is seeded per replicate, so results do not
//! depend on the thread count.

use std::fmt::Write as _;

use crate::data::{fmt_full, Dataset};
use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::exec;
use crate::learners::Predictor;
use crate::matrix::Matrix;
use crate::rng::Substream;

/// Per-(model, feature) grid of partial dependence values.
#[derive(Debug, Clone, PartialEq)]
pub struct PDProfile {
    pub model: String,
    pub feature: String,
    pub grid: Vec<f64>,
    pub pd: Vec<f64>,
    /// Empty when `n_boot == 0`.
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub n_boot: usize,
    pub ci_level: f64,
}

/// Permutation importance of every feature for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub model: String,
    pub features: Vec<FeatureImportance>,
    pub n_permutations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub feature: String,
    pub baseline_rmse: f64,
    pub permuted_rmse: f64,
    /// `permuted_rmse - baseline_rmse`.
    pub importance: f64,
}

/// Test-set residuals `y - yhat`, one column per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    pub labels: Vec<String>,
    /// `columns[m][i]` is the residual of model `m` on row `i`.
    pub columns: Vec<Vec<f64>>,
}

/// Equally spaced type-7 quantiles of `values`, deduplicated.
fn quantile_grid(values: &[f64], grid_size: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut grid = Vec::with_capacity(grid_size);
    for k in 0..grid_size {
        let p = k as f64 / (grid_size - 1) as f64;
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let q = if lo + 1 < n { sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) } else { sorted[lo] };
        grid.push(q);
    }
    grid.dedup();
    grid
}

/// Inverse-ECDF quantile (type 1): the smallest order statistic at or above
/// probability mass `p`. With two replicates this degenerates to min/max for
/// the usual band levels.
fn quantile_type1(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let idx = (p * n as f64).ceil().max(1.0) as usize;
    sorted[idx.min(n) - 1]
}

/// Predictions for every (grid value, row) pair of one feature sweep:
/// `out[k]` holds the predictions over all rows with the feature pinned to
/// `grid[k]`.
fn sweep_predictions<P: Predictor + Sync>(
    m: &P,
    x: &Matrix,
    feature_idx: usize,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let results = exec::map_slice(grid, |&g| {
        let mut xg = x.clone();
        xg.fill_column(feature_idx, g);
        m.predict(&xg)
    });
    results.into_iter().collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Partial dependence profile without confidence bands.
pub fn pdp<P: Predictor + Sync>(
    m: &P,
    data: &Dataset,
    feature: &str,
    grid_size: usize,
) -> Result<PDProfile> {
    if data.n_rows() == 0 {
        return Err(Error::Eval("empty explanation dataset".into()));
    }
    if grid_size < 2 {
        return Err(Error::Config("grid_size must be >= 2".into()));
    }
    let j = data.feature_index(feature)?;
    let x = data.features();
    let grid = quantile_grid(&x.column(j), grid_size);
    let preds = sweep_predictions(m, &x, j, &grid)?;
    let pd = preds.iter().map(|row| mean(row)).collect();
    Ok(PDProfile {
        model: m.label().to_string(),
        feature: feature.to_string(),
        grid,
        pd,
        ci_lo: Vec::new(),
        ci_hi: Vec::new(),
        n_boot: 0,
        ci_level: 0.0,
    })
}

/// Partial dependence with point-wise percentile bootstrap bands.
///
/// Replicate `b` draws rows from the substream `explain/boot/{b}` of `seed`;
/// the profile is recomputed as a multiplicity-weighted mean of the fixed
/// sweep predictions, which is the resampled mean evaluated in row order.
pub fn pdp_ci<P: Predictor + Sync>(
    m: &P,
    data: &Dataset,
    feature: &str,
    grid_size: usize,
    n_boot: usize,
    ci_level: f64,
    seed: u64,
) -> Result<PDProfile> {
    if n_boot < 2 {
        return Err(Error::Config("n_boot must be >= 2".into()));
    }
    if !(0.0 < ci_level && ci_level < 1.0) {
        return Err(Error::Config("ci_level must be in (0, 1)".into()));
    }
    let mut profile = pdp(m, data, feature, grid_size)?;
    let j = data.feature_index(feature)?;
    let x = data.features();
    let preds = sweep_predictions(m, &x, j, &profile.grid)?;
    let n = x.nrows();

    let replicates: Vec<Vec<f64>> = exec::map_indexed(n_boot, |b| {
        let mut rng = Substream::new(seed, &format!("explain/boot/{b}"));
        let mut weights = vec![0u32; n];
        for _ in 0..n {
            weights[rng.index(n)] += 1;
        }
        preds
            .iter()
            .map(|row| {
                let mut s = 0.0;
                for (w, p) in weights.iter().zip(row) {
                    if *w > 0 {
                        s += *w as f64 * p;
                    }
                }
                s / n as f64
            })
            .collect()
    });

    let lo_p = (1.0 - ci_level) / 2.0;
    let hi_p = (1.0 + ci_level) / 2.0;
    let mut ci_lo = Vec::with_capacity(profile.grid.len());
    let mut ci_hi = Vec::with_capacity(profile.grid.len());
    let mut column = vec![0.0; n_boot];
    for k in 0..profile.grid.len() {
        for (b, rep) in replicates.iter().enumerate() {
            column[b] = rep[k];
        }
        column.sort_unstable_by(f64::total_cmp);
        ci_lo.push(quantile_type1(&column, lo_p));
        ci_hi.push(quantile_type1(&column, hi_p));
    }
    profile.ci_lo = ci_lo;
    profile.ci_hi = ci_hi;
    profile.n_boot = n_boot;
    profile.ci_level = ci_level;
    Ok(profile)
}

fn importance_with<P, F>(m: &P, test: &Dataset, n_permutations: usize, seed: u64, permute: F) -> Result<ImportanceReport>
where
    P: Predictor + Sync,
    F: Fn(&mut Vec<f64>, usize, usize),
{
    if test.n_rows() == 0 {
        return Err(Error::Eval("empty test set".into()));
    }
    let x = test.features();
    let y = test.target();
    let baseline = rmse(&m.predict(&x)?, &y);
    let mut features = Vec::with_capacity(test.n_features());
    for (j, name) in test.feature_names().iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..n_permutations {
            let mut col = x.column(j);
            permute(&mut col, j, rep);
            let mut xp = x.clone();
            xp.set_column(j, &col);
            total += rmse(&m.predict(&xp)?, &y);
        }
        let permuted = total / n_permutations as f64;
        features.push(FeatureImportance {
            feature: name.clone(),
            baseline_rmse: baseline,
            permuted_rmse: permuted,
            importance: permuted - baseline,
        });
    }
    Ok(ImportanceReport { model: m.label().to_string(), features, n_permutations, seed })
}

/// Permutation importance over all rows: shuffle one feature column, measure
/// the RMSE increase, average over `n_permutations` seeded shuffles.
pub fn permutation_importance<P: Predictor + Sync>(
    m: &P,
    test: &Dataset,
    n_permutations: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if n_permutations == 0 {
        return Err(Error::Config("n_permutations must be >= 1".into()));
    }
    importance_with(m, test, n_permutations, seed, |col, j, rep| {
        let mut rng = Substream::new(seed, &format!("explain/perm/{j}/{rep}"));
        rng.shuffle(col);
    })
}

/// Debug hook: the identity permutation, which must yield importance exactly
/// zero for every feature.
pub fn permutation_importance_identity<P: Predictor + Sync>(
    m: &P,
    test: &Dataset,
) -> Result<ImportanceReport> {
    importance_with(m, test, 1, 0, |_, _, _| {})
}

/// Residuals `y - yhat` for each model on the test set.
pub fn residual_table<P: Predictor + Sync>(models: &[&P], test: &Dataset) -> Result<ResidualTable> {
    if test.n_rows() == 0 {
        return Err(Error::Eval("empty test set".into()));
    }
    let x = test.features();
    let y = test.target();
    let mut labels = Vec::with_capacity(models.len());
    let mut columns = Vec::with_capacity(models.len());
    for m in models {
        let pred = m.predict(&x)?;
        columns.push(y.iter().zip(&pred).map(|(t, p)| t - p).collect());
        labels.push(m.label().to_string());
    }
    Ok(ResidualTable { labels, columns })
}

/// Pearson correlation matrix of the residual columns. Pairs involving a
/// zero-variance column are reported as NaN.
pub fn residual_correlation(rt: &ResidualTable) -> Vec<Vec<f64>> {
    let k = rt.columns.len();
    let n = rt.columns.first().map_or(0, Vec::len) as f64;
    let means: Vec<f64> = rt.columns.iter().map(|c| mean(c)).collect();
    let sds: Vec<f64> = rt
        .columns
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt())
        .collect();
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let r = if sds[a] == 0.0 || sds[b] == 0.0 {
                f64::NAN
            } else if a == b {
                1.0
            } else {
                let cov = rt.columns[a]
                    .iter()
                    .zip(&rt.columns[b])
                    .map(|(u, v)| (u - means[a]) * (v - means[b]))
                    .sum::<f64>()
                    / n;
                cov / (sds[a] * sds[b])
            };
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    out
}

/// True when the profile has an interior peak or valley that exceeds `tol`
/// on both sides.
pub fn is_non_monotonic(pd: &[f64], tol: f64) -> bool {
    let n = pd.len();
    if n < 3 {
        return false;
    }
    for j in 1..n - 1 {
        let left_min = pd[..j].iter().cloned().fold(f64::INFINITY, f64::min);
        let right_min = pd[j + 1..].iter().cloned().fold(f64::INFINITY, f64::min);
        if pd[j] - left_min > tol && pd[j] - right_min > tol {
            return true;
        }
        let left_max = pd[..j].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let right_max = pd[j + 1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if left_max - pd[j] > tol && right_max - pd[j] > tol {
            return true;
        }
    }
    false
}

/// CSV export: `model;feature;grid;pd;ci_lo;ci_hi` (CI cells empty without
/// bands).
pub fn pdp_to_csv(profiles: &[PDProfile]) -> String {
    let mut out = String::from("model;feature;grid;pd;ci_lo;ci_hi\n");
    for p in profiles {
        for k in 0..p.grid.len() {
            let (lo, hi) = if p.n_boot > 0 {
                (fmt_full(p.ci_lo[k]), fmt_full(p.ci_hi[k]))
            } else {
                (String::new(), String::new())
            };
            let _ = writeln!(
                out,
                "{};{};{};{};{};{}",
                p.model,
                p.feature,
                fmt_full(p.grid[k]),
                fmt_full(p.pd[k]),
                lo,
                hi
            );
        }
    }
    out
}

/// CSV export: `model;feature;baseline_rmse;permuted_rmse;importance`.
pub fn importance_to_csv(reports: &[ImportanceReport]) -> String {
    let mut out = String::from("model;feature;baseline_rmse;permuted_rmse;importance\n");
    for r in reports {
        for f in &r.features {
            let _ = writeln!(
                out,
                "{};{};{};{};{}",
                r.model,
                f.feature,
                fmt_full(f.baseline_rmse),
                fmt_full(f.permuted_rmse),
                fmt_full(f.importance)
            );
        }
    }
    out
}

/// CSV export: `row;<model labels...>`.
pub fn residuals_to_csv(rt: &ResidualTable) -> String {
    let mut out = String::from("row");
    for l in &rt.labels {
        out.push(';');
        out.push_str(l);
    }
    out.push('\n');
    let n = rt.columns.first().map_or(0, Vec::len);
    for i in 0..n {
        let _ = write!(out, "{i}");
        for col in &rt.columns {
            out.push(';');
            out.push_str(&fmt_full(col[i]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit_linear, fit_tree, Model, TreeParams};
    use crate::synth::{generate, GenConfig};

    struct Affine<'a> {
        inner: &'a Model,
        a: f64,
        b: f64,
    }

    impl Predictor for Affine<'_> {
        fn label(&self) -> &str {
            "affine"
        }
        fn n_features(&self) -> usize {
            self.inner.n_features()
        }
        fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
            Ok(self.inner.predict(x)?.iter().map(|v| self.a * v + self.b).collect())
        }
    }

    fn default_data(n_train: usize, n_test: usize, seed: u64) -> (Dataset, Dataset) {
        generate(&GenConfig { n_train, n_test, seed, ..GenConfig::default() }).unwrap()
    }

    #[test]
    fn linear_model_pdp_is_affine_in_grid() {
        let (train, test) = default_data(300, 200, 4);
        let m = fit_linear(&train).unwrap();
        let beta1 = match &m {
            Model::Linear(f) => f.coefficients[0],
            _ => unreachable!(),
        };
        let prof = pdp(&m, &test, "x1", 21).unwrap();
        // pd(g) = beta1 * g + constant, to rounding.
        let c = prof.pd[0] - beta1 * prof.grid[0];
        for k in 0..prof.grid.len() {
            let expect = beta1 * prof.grid[k] + c;
            assert!((prof.pd[k] - expect).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn tree_on_x1_has_constant_pdp_for_x3() {
        let (train, test) = default_data(1000, 300, 1);
        let m = fit_tree(&train, &TreeParams::default()).unwrap();
        if let Model::Tree(f) = &m {
            assert_eq!(f.split_features(), vec![0], "tree should split on x1 only");
        }
        let prof = pdp(&m, &test, "x3", 31).unwrap();
        for v in &prof.pd {
            assert_eq!(*v, prof.pd[0]);
        }
    }

    #[test]
    fn pdp_matches_brute_force_double_loop() {
        let (train, test) = default_data(200, 10, 9);
        let m = fit_tree(&train, &TreeParams { max_depth: 3, min_split: 20 }).unwrap();
        let prof = pdp(&m, &test, "x2", 11).unwrap();
        let x = test.features();
        let j = test.feature_index("x2").unwrap();
        for (k, &g) in prof.grid.iter().enumerate() {
            let mut total = 0.0;
            for i in 0..x.nrows() {
                let mut row = x.row(i).to_vec();
                row[j] = g;
                let one = Matrix::from_rows(&[row]);
                total += m.predict(&one).unwrap()[0];
            }
            let brute = total / x.nrows() as f64;
            assert!((prof.pd[k] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn pdp_commutes_with_affine_output_transform() {
        let (train, test) = default_data(300, 150, 6);
        let m = fit_linear(&train).unwrap();
        let wrapped = Affine { inner: &m, a: -2.5, b: 0.75 };
        let base = pdp(&m, &test, "x2", 17).unwrap();
        let tr = pdp(&wrapped, &test, "x2", 17).unwrap();
        for k in 0..base.grid.len() {
            assert!((tr.pd[k] - (-2.5 * base.pd[k] + 0.75)).abs() < 1e-10);
        }
    }

    #[test]
    fn two_replicates_give_min_max_bands() {
        let (train, test) = default_data(200, 100, 8);
        let m = fit_linear(&train).unwrap();
        let prof = pdp_ci(&m, &test, "x1", 11, 2, 0.95, 3).unwrap();
        // Recompute the two replicate profiles directly.
        let j = test.feature_index("x1").unwrap();
        let x = test.features();
        let preds = sweep_predictions(&m, &x, j, &prof.grid).unwrap();
        let n = x.nrows();
        let mut reps = Vec::new();
        for b in 0..2 {
            let mut rng = Substream::new(3, &format!("explain/boot/{b}"));
            let mut w = vec![0u32; n];
            for _ in 0..n {
                w[rng.index(n)] += 1;
            }
            let rep: Vec<f64> = preds
                .iter()
                .map(|row| {
                    row.iter().zip(&w).map(|(p, &wi)| wi as f64 * p).sum::<f64>() / n as f64
                })
                .collect();
            reps.push(rep);
        }
        for k in 0..prof.grid.len() {
            let lo = reps[0][k].min(reps[1][k]);
            let hi = reps[0][k].max(reps[1][k]);
            assert_eq!(prof.ci_lo[k], lo);
            assert_eq!(prof.ci_hi[k], hi);
        }
    }

    #[test]
    fn band_bounds_are_ordered_and_contain_estimate_range() {
        let (train, test) = default_data(400, 300, 10);
        let m = fit_linear(&train).unwrap();
        let prof = pdp_ci(&m, &test, "x2", 21, 30, 0.95, 5).unwrap();
        for k in 0..prof.grid.len() {
            assert!(prof.ci_lo[k] <= prof.ci_hi[k]);
        }
    }

    #[test]
    fn band_width_shrinks_with_data_size() {
        // Median (over seeds) mid-grid band width decreases 250 -> 1000 -> 4000.
        let (train, _) = default_data(500, 10, 2);
        let m = fit_linear(&train).unwrap();
        let mut widths = vec![Vec::new(); 3];
        for (si, &size) in [250usize, 1000, 4000].iter().enumerate() {
            for seed in 0..10u64 {
                let (_, data) = default_data(10, size, 100 + seed);
                let prof = pdp_ci(&m, &data, "x1", 21, 60, 0.95, seed).unwrap();
                let mid = prof.grid.len() / 2;
                widths[si].push(prof.ci_hi[mid] - prof.ci_lo[mid]);
            }
        }
        let median = |v: &mut Vec<f64>| -> f64 {
            v.sort_unstable_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let m250 = median(&mut widths[0]);
        let m1000 = median(&mut widths[1]);
        let m4000 = median(&mut widths[2]);
        assert!(m250 > m1000 && m1000 > m4000, "{m250} {m1000} {m4000}");
    }

    #[test]
    fn identity_permutation_gives_zero_importance() {
        let (train, test) = default_data(300, 200, 12);
        let m = fit_linear(&train).unwrap();
        let rep = permutation_importance_identity(&m, &test).unwrap();
        for f in &rep.features {
            assert_eq!(f.importance, 0.0);
        }
    }

    #[test]
    fn constant_column_has_exactly_zero_importance() {
        let (train, test) = default_data(200, 100, 13);
        let m = fit_linear(&train).unwrap();
        // Rebuild the test set with x3 constant.
        let mut rows = Vec::new();
        for i in 0..test.n_rows() {
            let mut r = vec![test.target()[i]];
            r.extend_from_slice(test.features().row(i));
            r[3] = 1.25;
            rows.push(r);
        }
        let constant = Dataset::new(
            test.column_names().to_vec(),
            "y",
            Matrix::from_rows(&rows),
        )
        .unwrap();
        let rep = permutation_importance(&m, &constant, 1, 5).unwrap();
        assert_eq!(rep.features[2].importance, 0.0);
    }

    #[test]
    fn tree_ignoring_features_scores_them_zero() {
        let (train, test) = default_data(1000, 400, 1);
        let m = fit_tree(&train, &TreeParams::default()).unwrap();
        if let Model::Tree(f) = &m {
            assert_eq!(f.split_features(), vec![0]);
        }
        let rep = permutation_importance(&m, &test, 1, 7).unwrap();
        assert_eq!(rep.features[1].importance, 0.0);
        assert_eq!(rep.features[2].importance, 0.0);
        assert!(rep.features[0].importance > 0.0);
    }

    #[test]
    fn residual_correlation_properties() {
        let (train, test) = default_data(300, 200, 15);
        let m = fit_linear(&train).unwrap();
        // Identical models correlate at 1; a shifted copy also correlates at 1.
        let shifted = Affine { inner: &m, a: 1.0, b: 0.3 };
        let preds: Vec<&dyn Predictor> = vec![];
        drop(preds);
        let rt = ResidualTable {
            labels: vec!["a".into(), "b".into(), "c".into()],
            columns: {
                let x = test.features();
                let y = test.target();
                let p1 = m.predict(&x).unwrap();
                let p2 = m.predict(&x).unwrap();
                let p3 = shifted.predict(&x).unwrap();
                vec![
                    y.iter().zip(&p1).map(|(t, p)| t - p).collect(),
                    y.iter().zip(&p2).map(|(t, p)| t - p).collect(),
                    y.iter().zip(&p3).map(|(t, p)| t - p).collect(),
                ]
            },
        };
        let c = residual_correlation(&rt);
        for i in 0..3 {
            assert_eq!(c[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(c[i][j], c[j][i]);
            }
        }
        assert!((c[0][1] - 1.0).abs() < 1e-12);
        assert!((c[0][2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_residuals_report_nan() {
        let rt = ResidualTable {
            labels: vec!["a".into(), "b".into()],
            columns: vec![vec![0.5, 0.5, 0.5], vec![0.1, -0.3, 0.2]],
        };
        let c = residual_correlation(&rt);
        assert!(c[0][1].is_nan());
        assert!(c[0][0].is_nan());
        assert_eq!(c[1][1], 1.0);
    }

    #[test]
    fn non_monotonic_detector() {
        assert!(!is_non_monotonic(&[0.0, 1.0, 2.0, 3.0], 1e-6));
        assert!(!is_non_monotonic(&[3.0, 2.0, 1.0], 1e-6));
        assert!(is_non_monotonic(&[0.0, 1.0, 0.5], 1e-6));
        assert!(is_non_monotonic(&[1.0, 0.2, 0.9], 1e-6));
        // wiggles below tolerance do not count
        assert!(!is_non_monotonic(&[0.0, 1e-9, 0.0], 1e-6));
    }

    #[test]
    fn csv_exports_have_expected_headers() {
        let (train, test) = default_data(200, 50, 3);
        let m = fit_linear(&train).unwrap();
        let prof = pdp(&m, &test, "x1", 5).unwrap();
        let csv = pdp_to_csv(&[prof]);
        assert!(csv.starts_with("model;feature;grid;pd;ci_lo;ci_hi\n"));
        let rep = permutation_importance(&m, &test, 1, 1).unwrap();
        let csv = importance_to_csv(&[rep]);
        assert!(csv.starts_with("model;feature;baseline_rmse;permuted_rmse;importance\n"));
        let rt = residual_table(&[&m], &test).unwrap();
        let csv = residuals_to_csv(&rt);
        assert!(csv.starts_with("row;linear regression\n"));
    }

    #[test]
    fn unknown_feature_errors() {
        let (train, test) = default_data(100, 50, 2);
        let m = fit_linear(&train).unwrap();
        assert!(matches!(pdp(&m, &test, "zz", 5), Err(Error::UnknownFeature(_))));
    }
}
