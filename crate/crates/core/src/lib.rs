//! Generalized linear models with weakly informative Student-t priors.
//!
//! Inputs are standardized by a frozen [`DesignRecipe`]; coefficients are fit as the posterior mode
//! by iteratively weighted least squares on prior-augmented data, with the t prior scales updated
//! by EM. The [`evaluate`] module scores prior configurations by k-fold cross-validation.
//!
//! ```
//! use bayesglm::{build_recipe, default_prior, fit, DataTable, Family, FitControls, IngestOptions,
//!     RecipeOptions};
//!
//! let csv = "log_dose,deaths,animals\n-0.86,0,5\n-0.30,1,5\n-0.05,3,5\n0.73,5,5\n";
//! let table = DataTable::from_csv(csv.as_bytes(), &IngestOptions::with_outcome("deaths").trials("animals"))?;
//! let recipe = build_recipe(&table, &RecipeOptions::default())?;
//! let design = recipe.apply(&table)?;
//! let response = recipe.response(&table)?;
//! let prior = default_prior(&recipe, true);
//! let result = fit(&design, &response.y, &response.trials, &Family::Logistic, &prior, &FitControls::default())?;
//! assert!(result.converged);
//! # Ok::<(), bayesglm::Error>(())
//! ```

pub mod error;
pub mod evaluate;
pub mod family;
pub mod fit;
pub mod prior;
pub mod recipe;
pub mod report;
pub mod table;
pub mod wls;

pub use error::{Error, Result};
pub use evaluate::{
    bbr_scale_heuristic, brier_score, corpus_summary, cross_validate, default_grid, log_score, make_folds, CvConfig,
    FoldPlan, PriorGridPoint, ScoreReport,
};
pub use family::{pseudo_data, Family, PseudoData, ResidualVariance};
pub use fit::{
    augment, em_sigma_update, fit, fit_permissive, predict, predict_design, FitControls, FitResult,
    PredictScale, SigmaUpdate,
};
pub use prior::{default_prior, prior_from_defaults, CoefPrior, PriorDefaults, PriorSpec};
pub use recipe::{
    apply_recipe, build_recipe, unstandardize_coefficients, DesignMatrix, DesignRecipe, RecipeOptions,
};
pub use report::{render_table, SavedFit};
pub use table::{Column, ColumnKind, DataTable, IngestOptions, Response};
pub use wls::{solve_wls, WlsProblem, WlsSolution};
