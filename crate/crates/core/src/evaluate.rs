//! Cross-validated scoring of prior configurations for binary logistic regression.

use std::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::Family;
use crate::fit::{fit_permissive, predict_design, FitControls, FitResult, PredictScale};
use crate::prior::{prior_from_defaults, PriorDefaults, PriorSpec};
use crate::recipe::{build_recipe, DesignRecipe, RecipeOptions};
use crate::table::DataTable;

/// Probabilities are clamped to at least this before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Intercept prior scale used for every grid point.
pub const GRID_INTERCEPT_SCALE: f64 = 10.0;

/// `-log p_y`, with `p_y` clamped to `[1e-12, 1]`.
pub fn log_score(p_y: f64) -> f64 {
    -p_y.clamp(PROBABILITY_FLOOR, 1.0).ln()
}

/// `(1 - p_y)^2 / 2`.
pub fn brier_score(p_y: f64) -> f64 {
    let p = p_y.clamp(0.0, 1.0);
    (1.0 - p).powi(2) / 2.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded permutation of `0..n` dealt round-robin into `k` folds.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} folds requested for {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignment,
    })
}

/// A prior configuration in the evaluation grid. The intercept always gets scale
/// [`GRID_INTERCEPT_SCALE`] with the same degrees of freedom; `Flat` is maximum likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "snake_case")]
pub enum PriorGridPoint {
    StudentT {
        #[serde(with = "crate::prior::extended_f64")]
        df: f64,
        scale: f64,
    },
    Flat,
}

impl PriorGridPoint {
    pub fn new(df: f64, scale: f64) -> Result<Self> {
        if !(df > 0.0) || !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid point needs positive df and scale, got df={df}, scale={scale}"
            )));
        }
        if scale.is_infinite() {
            return Ok(PriorGridPoint::Flat);
        }
        Ok(PriorGridPoint::StudentT { df, scale })
    }

    pub fn df(&self) -> f64 {
        match self {
            PriorGridPoint::StudentT { df, .. } => *df,
            PriorGridPoint::Flat => f64::INFINITY,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            PriorGridPoint::StudentT { scale, .. } => *scale,
            PriorGridPoint::Flat => f64::INFINITY,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, PriorGridPoint::Flat)
    }

    pub fn prior_for(&self, recipe: &DesignRecipe) -> PriorSpec {
        let defaults = match self {
            PriorGridPoint::StudentT { df, scale } => PriorDefaults {
                scale: *scale,
                df: *df,
                intercept_scale: GRID_INTERCEPT_SCALE,
                intercept_df: *df,
            },
            PriorGridPoint::Flat => PriorDefaults {
                scale: f64::INFINITY,
                df: f64::INFINITY,
                intercept_scale: f64::INFINITY,
                intercept_df: f64::INFINITY,
            },
        };
        prior_from_defaults(recipe, recipe.standardized, &defaults)
    }

    /// Label for the `nu` column: a number, `inf`, or `flat`.
    pub fn df_label(&self) -> String {
        match self {
            PriorGridPoint::Flat => "flat".into(),
            PriorGridPoint::StudentT { df, .. } => format_extended(*df),
        }
    }

    pub fn scale_label(&self) -> String {
        format_extended(self.scale())
    }
}

impl fmt::Display for PriorGridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorGridPoint::Flat => write!(f, "flat"),
            PriorGridPoint::StudentT { df, scale } => {
                write!(f, "t(df={}, scale={})", format_extended(*df), scale)
            }
        }
    }
}

/// `nu` in {1, 7, inf} crossed with scale in {0.75, 2.5, 10}, followed by the flat prior.
pub fn default_grid() -> Vec<PriorGridPoint> {
    let mut grid = Vec::new();
    for df in [1.0, 7.0, f64::INFINITY] {
        for scale in [0.75, 2.5, 10.0] {
            grid.push(PriorGridPoint::StudentT { df, scale });
        }
    }
    grid.push(PriorGridPoint::Flat);
    grid
}

pub(crate) fn format_extended(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub controls: FitControls,
    pub recipe: RecipeOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            seed: 0,
            controls: FitControls::default(),
            recipe: RecipeOptions {
                skip_constant_columns: true,
                ..RecipeOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub n_test: usize,
    pub sum_log_score: f64,
    pub sum_brier_score: f64,
    pub fit_failures: usize,
}

impl FoldScore {
    pub fn mean_log_score(&self) -> f64 {
        self.sum_log_score / self.n_test as f64
    }

    pub fn mean_brier_score(&self) -> f64 {
        self.sum_brier_score / self.n_test as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub point: PriorGridPoint,
    pub folds: Vec<FoldScore>,
}

impl GridScore {
    pub fn n_test(&self) -> usize {
        self.folds.iter().map(|f| f.n_test).sum()
    }

    /// Mean over all test rows pooled across folds.
    pub fn mean_log_score(&self) -> f64 {
        self.folds.iter().map(|f| f.sum_log_score).sum::<f64>() / self.n_test() as f64
    }

    pub fn mean_brier_score(&self) -> f64 {
        self.folds.iter().map(|f| f.sum_brier_score).sum::<f64>() / self.n_test() as f64
    }

    pub fn fit_failures(&self) -> usize {
        self.folds.iter().map(|f| f.fit_failures).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub folds: usize,
    pub seed: u64,
    pub n_rows: usize,
    pub grid: Vec<GridScore>,
}

impl ScoreReport {
    /// Grid point with the lowest pooled mean log score (first wins ties).
    pub fn best_by_log_score(&self) -> Option<&GridScore> {
        self.grid.iter().fold(None, |best: Option<&GridScore>, g| match best {
            Some(b) if b.mean_log_score() <= g.mean_log_score() => Some(b),
            _ => Some(g),
        })
    }

    pub fn get(&self, point: &PriorGridPoint) -> Option<&GridScore> {
        self.grid.iter().find(|g| &g.point == point)
    }
}

/// Builds the recipe on the training rows of `fold` only and fits it.
pub fn train_fold(
    table: &DataTable,
    plan: &FoldPlan,
    fold: usize,
    point: &PriorGridPoint,
    config: &CvConfig,
) -> Result<(DesignRecipe, FitResult)> {
    let train = table.select_rows(&plan.train_rows(fold));
    let recipe = build_recipe(&train, &config.recipe)?;
    let design = recipe.apply(&train)?;
    let response = recipe.response(&train)?;
    let prior = point.prior_for(&recipe);
    let fit = fit_permissive(
        &design,
        &response.y,
        &response.trials,
        &Family::Logistic,
        &prior,
        &config.controls,
    )?;
    Ok((recipe, fit))
}

fn check_binary_outcome(table: &DataTable) -> Result<()> {
    let response = table.response()?;
    let name = table.outcome().unwrap_or_default().to_owned();
    if response.trials.iter().any(|&n| n != 1.0) || response.y.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidColumn {
            column: name,
            message: "cross-validation needs a 0/1 outcome".into(),
        });
    }
    Ok(())
}

/// k-fold cross-validation of every grid point on the same fold plan.
///
/// Fits that do not converge (or are unidentified under a flat prior) are scored with their last
/// iterate and counted in `fit_failures`.
pub fn cross_validate(
    table: &DataTable,
    grid: &[PriorGridPoint],
    config: &CvConfig,
) -> Result<ScoreReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("prior grid is empty".into()));
    }
    check_binary_outcome(table)?;
    let plan = make_folds(table.n_rows(), config.folds, config.seed)?;
    let y = table.response()?.y;

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..plan.k).map(move |f| (g, f)))
        .collect();
    let scored: Vec<Result<FoldScore>> = jobs
        .par_iter()
        .map(|&(g, fold)| {
            let (recipe, fit) = train_fold(table, &plan, fold, &grid[g], config)?;
            let test_rows = plan.test_rows(fold);
            let test = table.select_rows(&test_rows);
            let design = recipe.apply(&test)?;
            let p = predict_design(&fit, &design, PredictScale::Response, Some(&recipe))?;
            let mut sum_log = 0.0;
            let mut sum_brier = 0.0;
            for (k, &row) in test_rows.iter().enumerate() {
                let p_y = if y[row] == 1.0 { p[k] } else { 1.0 - p[k] };
                sum_log += log_score(p_y);
                sum_brier += brier_score(p_y);
            }
            Ok(FoldScore {
                fold,
                n_test: test_rows.len(),
                sum_log_score: sum_log,
                sum_brier_score: sum_brier,
                fit_failures: usize::from(!(fit.converged && fit.rank_ok)),
            })
        })
        .collect();

    let mut report = ScoreReport {
        folds: plan.k,
        seed: plan.seed,
        n_rows: table.n_rows(),
        grid: grid
            .iter()
            .map(|&point| GridScore {
                point,
                folds: Vec::with_capacity(plan.k),
            })
            .collect(),
    };
    for (&(g, _), score) in jobs.iter().zip(scored) {
        report.grid[g].folds.push(score?);
    }
    Ok(report)
}

/// Mean scores across several datasets, weighting datasets equally and by test-row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub point: PriorGridPoint,
    pub equal_weight_log_score: f64,
    pub equal_weight_brier_score: f64,
    pub row_weight_log_score: f64,
    pub row_weight_brier_score: f64,
}

pub fn corpus_summary(reports: &[ScoreReport]) -> Result<Vec<CorpusSummary>> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to summarize".into()))?;
    first
        .grid
        .iter()
        .map(|g| {
            let rows: Vec<&GridScore> = reports
                .iter()
                .map(|r| {
                    r.get(&g.point).ok_or_else(|| {
                        Error::InvalidArgument(format!("grid point {} missing from a report", g.point))
                    })
                })
                .collect::<Result<_>>()?;
            let k = rows.len() as f64;
            let total: usize = rows.iter().map(|r| r.n_test()).sum();
            let weighted = |f: fn(&GridScore) -> f64| {
                rows.iter().map(|r| f(r) * r.n_test() as f64).sum::<f64>() / total as f64
            };
            Ok(CorpusSummary {
                point: g.point,
                equal_weight_log_score: rows.iter().map(|r| r.mean_log_score()).sum::<f64>() / k,
                equal_weight_brier_score: rows.iter().map(|r| r.mean_brier_score()).sum::<f64>() / k,
                row_weight_log_score: weighted(GridScore::mean_log_score),
                row_weight_brier_score: weighted(GridScore::mean_brier_score),
            })
        })
        .collect()
}

/// Prior scale heuristic from Bayesian binary regression software: the number of columns
/// divided by the mean squared row norm of the design.
pub fn bbr_scale_heuristic(x: &DMatrix<f64>) -> Result<f64> {
    let (n, j) = x.shape();
    if n == 0 || j == 0 {
        return Err(Error::InvalidArgument("empty design".into()));
    }
    let mean_norm2 = x.row_iter().map(|r| r.norm_squared()).sum::<f64>() / n as f64;
    if mean_norm2 == 0.0 {
        return Err(Error::InvalidArgument("design is all zeros".into()));
    }
    Ok(j as f64 / mean_norm2)
}
