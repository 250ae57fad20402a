//! Search machinery for engineering performance-tied quartets: evaluate a
//! `(theta, seed)` candidate end to end, sweep seeds, and grid-search theta.
//!
//! Candidates are independent, so sweeps fan out over the execution helpers
//! and merge in seed order; a sweep returns the same ranking at any thread
//! count. The network is the only family whose fit quality swings with
//! initialization, so each candidate tries `n_inits` init substreams and
//! keeps the best test R² among the converged ones; a candidate with no
//! converged init is marked invalid and drops out of the ranking.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, mse, PerfReport};
use crate::exec;
use crate::explain::{
    is_non_monotonic, pdp, pdp_ci, permutation_importance, residual_correlation, residual_table,
};
use crate::learners::{
    fit_forest, fit_linear, fit_network, fit_tree, ForestParams, Model, NetworkParams, TreeParams,
    LABEL_FOREST, LABEL_LINEAR, LABEL_NETWORK, LABEL_TREE,
};
use crate::synth::{generate, GenConfig};

/// Hyperparameters of the four families used by candidate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartetHyper {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub network: NetworkParams,
    /// Network init substreams tried per candidate.
    pub n_inits: u64,
}

impl Default for QuartetHyper {
    fn default() -> Self {
        Self {
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            network: NetworkParams::default(),
            n_inits: 5,
        }
    }
}

/// The four fitted models of one candidate, in report order.
#[derive(Debug, Clone)]
pub struct QuartetModels {
    pub linear: Model,
    pub tree: Model,
    pub forest: Model,
    pub network: Model,
}

impl QuartetModels {
    pub fn as_array(&self) -> [&Model; 4] {
        [&self.linear, &self.tree, &self.forest, &self.network]
    }
}

/// One evaluated candidate: config, performance, and spread.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuartetRun {
    pub config: GenConfig,
    pub seed: u64,
    pub perf: PerfReport,
    /// `max - min` of the four test R².
    pub spread: f64,
    /// Chosen network init substream.
    pub network_init: u64,
    /// False when no network init converged.
    pub valid: bool,
    #[serde(skip)]
    pub models: Option<QuartetModels>,
}

impl QuartetRun {
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("run serialization cannot fail")
    }

    pub fn from_jsonl(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Grids, seed list, and budget for a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchPlan {
    /// Sizes, noise, and feature count; its theta fields are overridden by
    /// the grids below.
    pub base: GenConfig,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub rho: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Maximum candidate evaluations.
    pub budget: usize,
    pub hyper: QuartetHyper,
}

impl SearchPlan {
    pub fn validate(&self) -> Result<()> {
        if self.theta1.is_empty() || self.theta2.is_empty() || self.rho.is_empty() {
            return Err(Error::Config("theta grids must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list must be nonempty".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be >= 1".into()));
        }
        Ok(())
    }

    /// The config at one grid point.
    pub fn config_at(&self, theta1: f64, theta2: f64, rho: f64) -> GenConfig {
        GenConfig { theta1, theta2, rho, ..self.base.clone() }
    }
}

/// Fit all four families on the candidate's generated data and evaluate on
/// its test set.
pub fn evaluate_candidate(
    config: &GenConfig,
    seed: u64,
    hyper: &QuartetHyper,
    retain_models: bool,
) -> Result<QuartetRun> {
    let config = GenConfig { seed, ..config.clone() };
    config.validate()?;
    let (train, test) = generate(&config)?;

    let linear = fit_linear(&train)?;
    let tree = fit_tree(&train, &hyper.tree)?;
    let forest = fit_forest(&train, &hyper.forest, seed)?;

    // Try the init substreams in parallel and keep the best converged fit by
    // test MSE (ties go to the lowest init index).
    let x_test = test.features();
    let y_test = test.target();
    let candidates: Vec<Result<(Model, bool, f64)>> =
        exec::map_indexed(hyper.n_inits.max(1) as usize, |k| {
            let params = NetworkParams { init_index: k as u64, ..hyper.network.clone() };
            let model = fit_network(&train, &params, seed)?;
            let converged = match &model {
                Model::Network(f) => f.converged,
                _ => unreachable!(),
            };
            let err = mse(&model.predict(&x_test)?, &y_test);
            Ok((model, converged, err))
        });

    let mut best: Option<(Model, u64, f64)> = None;
    let mut any_converged = false;
    for (k, c) in candidates.into_iter().enumerate() {
        let (model, converged, err) = c?;
        if converged {
            any_converged = true;
            if best.as_ref().map_or(true, |(_, _, e)| err < *e) {
                best = Some((model, k as u64, err));
            }
        } else if best.is_none() && k as usize + 1 == hyper.n_inits.max(1) as usize {
            // No converged init at all: keep the last fit for reporting.
            best = Some((model, k as u64, err));
        }
    }
    let (network, network_init, _) = best.expect("at least one network fit");

    let models = QuartetModels { linear, tree, forest, network };
    let perf = evaluate(&models.as_array(), &test)?;
    let spread = perf.r2_spread();
    Ok(QuartetRun {
        config,
        seed,
        perf,
        spread,
        network_init,
        valid: any_converged,
        models: retain_models.then_some(models),
    })
}

/// Evaluate the given seeds in plan order (all runs, including invalid
/// ones), at the plan's first grid point.
pub fn evaluate_seeds(plan: &SearchPlan, seeds: &[u64]) -> Result<Vec<QuartetRun>> {
    plan.validate()?;
    let config = plan.config_at(plan.theta1[0], plan.theta2[0], plan.rho[0]);
    let runs = exec::map_slice(seeds, |&seed| {
        evaluate_candidate(&config, seed, &plan.hyper, false)
    });
    runs.into_iter().collect()
}

fn rank(mut runs: Vec<QuartetRun>) -> Vec<QuartetRun> {
    runs.retain(|r| r.valid);
    runs.sort_by(|a, b| a.spread.total_cmp(&b.spread).then(a.seed.cmp(&b.seed)));
    runs
}

/// Sweep the plan's seeds up to the budget at the first theta grid point.
/// Returns the valid runs ranked by `(spread, seed)` ascending; empty if
/// every run was invalid.
pub fn seed_sweep(plan: &SearchPlan) -> Result<Vec<QuartetRun>> {
    plan.validate()?;
    let n = plan.budget.min(plan.seeds.len());
    Ok(rank(evaluate_seeds(plan, &plan.seeds[..n])?))
}

/// Best run of one theta grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaResult {
    pub theta1: f64,
    pub theta2: f64,
    pub rho: f64,
    pub best: QuartetRun,
}

/// Short inner seed sweep at every grid point; grid points ranked by their
/// best achievable spread. The budget splits evenly across grid points
/// (at least one seed each).
pub fn theta_grid_search(plan: &SearchPlan) -> Result<Vec<ThetaResult>> {
    plan.validate()?;
    let mut points = Vec::new();
    for &t1 in &plan.theta1 {
        for &t2 in &plan.theta2 {
            for &r in &plan.rho {
                points.push((t1, t2, r));
            }
        }
    }
    let inner_budget = (plan.budget / points.len()).max(1).min(plan.seeds.len());
    let mut results = Vec::new();
    for (t1, t2, r) in points {
        let inner = SearchPlan {
            theta1: vec![t1],
            theta2: vec![t2],
            rho: vec![r],
            budget: inner_budget,
            ..plan.clone()
        };
        let ranked = seed_sweep(&inner)?;
        if let Some(best) = ranked.into_iter().next() {
            results.push(ThetaResult { theta1: t1, theta2: t2, rho: r, best });
        }
    }
    results.sort_by(|a, b| {
        a.best
            .spread
            .total_cmp(&b.best.spread)
            .then(a.theta1.total_cmp(&b.theta1))
            .then(a.theta2.total_cmp(&b.theta2))
            .then(a.rho.total_cmp(&b.rho))
    });
    Ok(results)
}

/// Narrative checks that make a low-spread candidate a quartet worth
/// shipping: the four families must tell their four different stories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoryChecks {
    pub tree_splits_only_x1: bool,
    pub tree_importance_x2_x3_zero: bool,
    pub linear_beta1_over_3x_beta2: bool,
    pub linear_beta3_insignificant: bool,
    pub importance_x1_largest_all: bool,
    pub forest_x3_importance_positive: bool,
    pub network_x3_nonmonotonic: bool,
    /// Minimum pairwise residual correlation.
    pub min_residual_correlation: f64,
    /// Minimum over model pairs of the grid fraction where the 95% bands on
    /// x2 are disjoint.
    pub min_disjoint_band_fraction_x2: f64,
    pub all_pass: bool,
}

/// Run the full story battery of a candidate on its test set.
pub fn story_checks(models: &QuartetModels, test: &Dataset, seed: u64) -> Result<StoryChecks> {
    let tree_splits_only_x1 = match &models.tree {
        Model::Tree(f) => f.split_features() == vec![0],
        _ => false,
    };
    let (linear_beta1_over_3x_beta2, linear_beta3_insignificant) = match &models.linear {
        Model::Linear(f) => (f.coefficients[0] > 3.0 * f.coefficients[1], f.p_values[2] > 0.05),
        _ => (false, false),
    };

    let order: [&Model; 4] = models.as_array();
    let mut importance_x1_largest_all = true;
    let mut forest_x3_importance_positive = false;
    let mut tree_importance_x2_x3_zero = false;
    for m in order {
        let rep = permutation_importance(m, test, 1, seed)?;
        let x1 = rep.features[0].importance;
        if !(x1 > rep.features[1].importance && x1 > rep.features[2].importance) {
            importance_x1_largest_all = false;
        }
        if m.label() == LABEL_FOREST {
            forest_x3_importance_positive = rep.features[2].importance > 0.0;
        }
        if m.label() == LABEL_TREE {
            tree_importance_x2_x3_zero =
                rep.features[1].importance == 0.0 && rep.features[2].importance == 0.0;
        }
    }

    let net_pdp_x3 = pdp(&models.network, test, "x3", 101)?;
    let network_x3_nonmonotonic = is_non_monotonic(&net_pdp_x3.pd, 1e-6);

    let rt = residual_table(&order, test)?;
    let corr = residual_correlation(&rt);
    let mut min_residual_correlation = f64::INFINITY;
    for a in 0..4 {
        for b in (a + 1)..4 {
            min_residual_correlation = min_residual_correlation.min(corr[a][b]);
        }
    }

    let bands: Vec<_> = order
        .iter()
        .map(|m| pdp_ci(*m, test, "x2", 101, 100, 0.95, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut min_disjoint = f64::INFINITY;
    for a in 0..4 {
        for b in (a + 1)..4 {
            let (pa, pb) = (&bands[a], &bands[b]);
            let disjoint = pa
                .grid
                .iter()
                .enumerate()
                .filter(|(k, _)| {
                    pa.ci_hi[*k] < pb.ci_lo[*k] || pb.ci_hi[*k] < pa.ci_lo[*k]
                })
                .count();
            min_disjoint = min_disjoint.min(disjoint as f64 / pa.grid.len() as f64);
        }
    }

    let all_pass = tree_splits_only_x1
        && tree_importance_x2_x3_zero
        && linear_beta1_over_3x_beta2
        && linear_beta3_insignificant
        && importance_x1_largest_all
        && forest_x3_importance_positive
        && network_x3_nonmonotonic
        && min_residual_correlation >= 0.8
        && min_disjoint >= 0.5;

    Ok(StoryChecks {
        tree_splits_only_x1,
        tree_importance_x2_x3_zero,
        linear_beta1_over_3x_beta2,
        linear_beta3_insignificant,
        importance_x1_largest_all,
        forest_x3_importance_positive,
        network_x3_nonmonotonic,
        min_residual_correlation,
        min_disjoint_band_fraction_x2: min_disjoint,
        all_pass,
    })
}

/// Labels in report order.
pub fn quartet_labels() -> [&'static str; 4] {
    [LABEL_LINEAR, LABEL_TREE, LABEL_FOREST, LABEL_NETWORK]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_hyper() -> QuartetHyper {
        QuartetHyper {
            tree: TreeParams::default(),
            forest: ForestParams { n_trees: 30, ..ForestParams::default() },
            network: NetworkParams { max_epochs: 2000, ..NetworkParams::default() },
            n_inits: 2,
        }
    }

    fn small_config() -> GenConfig {
        GenConfig { n_train: 400, n_test: 1500, ..GenConfig::default() }
    }

    #[test]
    fn candidate_evaluation_is_deterministic() {
        let cfg = small_config();
        let a = evaluate_candidate(&cfg, 11, &quick_hyper(), false).unwrap();
        let b = evaluate_candidate(&cfg, 11, &quick_hyper(), false).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.perf.models.len(), 4);
        assert!(a.spread >= 0.0);
    }

    #[test]
    fn budget_one_returns_first_candidate() {
        let plan = SearchPlan {
            base: small_config(),
            theta1: vec![0.6],
            theta2: vec![1.0 / 3.0],
            rho: vec![0.9],
            seeds: vec![5, 6, 7],
            budget: 1,
            hyper: quick_hyper(),
        };
        let runs = seed_sweep(&plan).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].seed, 5);
    }

    #[test]
    fn ranking_is_sorted_by_spread() {
        let plan = SearchPlan {
            base: small_config(),
            theta1: vec![0.6],
            theta2: vec![1.0 / 3.0],
            rho: vec![0.9],
            seeds: vec![1, 2, 3, 4],
            budget: 4,
            hyper: quick_hyper(),
        };
        let runs = seed_sweep(&plan).unwrap();
        assert!(!runs.is_empty());
        for w in runs.windows(2) {
            assert!(w[0].spread <= w[1].spread);
        }
        let head = runs[0].spread;
        assert!(runs.iter().all(|r| r.spread >= head));
    }

    #[test]
    fn single_point_grid_matches_seed_sweep() {
        let plan = SearchPlan {
            base: small_config(),
            theta1: vec![0.6],
            theta2: vec![1.0 / 3.0],
            rho: vec![0.9],
            seeds: vec![2, 3],
            budget: 2,
            hyper: quick_hyper(),
        };
        let sweep = seed_sweep(&plan).unwrap();
        let grid = theta_grid_search(&plan).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].best.to_jsonl(), sweep[0].to_jsonl());
    }

    #[test]
    fn near_linear_regime_favors_linear_model() {
        // Tiny nonlinearity and no noise: the linear model is near perfect
        // and the depth-limited tree's plateau error dominates the spread.
        let cfg = GenConfig {
            theta1: 0.05,
            sigma_eps: 0.0,
            n_train: 500,
            n_test: 2000,
            ..GenConfig::default()
        };
        let run = evaluate_candidate(&cfg, 4, &quick_hyper(), false).unwrap();
        let lin = run.perf.get(LABEL_LINEAR).unwrap().r2;
        let tree = run.perf.get(LABEL_TREE).unwrap().r2;
        assert!(lin > 0.99, "linear r2={lin}");
        assert!(tree < lin);
        assert!(run.spread >= lin - tree);
    }

    #[test]
    fn jsonl_roundtrip() {
        let run = evaluate_candidate(&small_config(), 9, &quick_hyper(), false).unwrap();
        let line = run.to_jsonl();
        let back = QuartetRun::from_jsonl(&line).unwrap();
        assert_eq!(back.to_jsonl(), line);
        assert_eq!(back.seed, 9);
    }
}
