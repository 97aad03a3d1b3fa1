//! Python bindings: tables, recipes, fits, scoring and cross-validation.

use bayesglm::report::render_table;
use bayesglm::{
    build_recipe, prior_from_defaults, CoefPrior, CvConfig, DataTable, DesignRecipe, Family, FitControls,
    FitResult, IngestOptions, PredictScale, PriorDefaults, PriorGridPoint, RecipeOptions, SavedFit,
    SigmaUpdate, WlsProblem,
};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: bayesglm::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn family(name: &str) -> PyResult<Family> {
    Family::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown family `{name}`")))
}

#[pyclass(name = "Table", module = "bayesglm")]
pub struct PyTable {
    inner: DataTable,
}

#[pymethods]
impl PyTable {
    /// Reads a CSV file.
    #[staticmethod]
    #[pyo3(signature = (path, outcome=None, trials=None))]
    fn from_csv(path: &str, outcome: Option<&str>, trials: Option<&str>) -> PyResult<Self> {
        let options = ingest(outcome, trials);
        Ok(PyTable {
            inner: DataTable::from_path(path, &options).map_err(err)?,
        })
    }

    /// Parses CSV text.
    #[staticmethod]
    #[pyo3(signature = (text, outcome=None, trials=None))]
    fn from_string(text: &str, outcome: Option<&str>, trials: Option<&str>) -> PyResult<Self> {
        let options = ingest(outcome, trials);
        Ok(PyTable {
            inner: DataTable::from_csv(text.as_bytes(), &options).map_err(err)?,
        })
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.columns().iter().map(|c| c.name.clone()).collect()
    }

    #[getter]
    fn outcome(&self) -> Option<String> {
        self.inner.outcome().map(str::to_owned)
    }

    fn __repr__(&self) -> String {
        format!("Table(n_rows={}, columns={:?})", self.inner.n_rows(), self.columns())
    }
}

fn ingest(outcome: Option<&str>, trials: Option<&str>) -> IngestOptions {
    IngestOptions {
        outcome: outcome.map(str::to_owned),
        trials: trials.map(str::to_owned),
        ..IngestOptions::default()
    }
}

#[pyclass(name = "Recipe", module = "bayesglm")]
pub struct PyRecipe {
    inner: DesignRecipe,
}

#[pymethods]
impl PyRecipe {
    #[staticmethod]
    #[pyo3(signature = (table, standardize=true, missing_indicators=true))]
    fn build(table: &PyTable, standardize: bool, missing_indicators: bool) -> PyResult<Self> {
        let options = RecipeOptions {
            standardize,
            add_missing_indicators: missing_indicators,
            ..RecipeOptions::default()
        };
        Ok(PyRecipe {
            inner: build_recipe(&table.inner, &options).map_err(err)?,
        })
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.predictor_names()
    }

    /// Design matrix as a list of rows.
    fn apply(&self, table: &PyTable) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.apply(&table.inner).map_err(err)?.x))
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyRecipe {
            inner: DesignRecipe::from_json(text).map_err(err)?,
        })
    }
}

#[pyclass(name = "Fit", module = "bayesglm")]
pub struct PyFit {
    result: FitResult,
    recipe: DesignRecipe,
}

#[pymethods]
impl PyFit {
    /// Fits a GLM with independent t priors on standardized inputs.
    #[new]
    #[pyo3(signature = (
        table,
        family="logistic",
        prior_scale=2.5,
        prior_df=1.0,
        intercept_scale=10.0,
        standardize=true,
        max_iter=100,
        posterior_expectation=false,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        table: &PyTable,
        family: &str,
        prior_scale: f64,
        prior_df: f64,
        intercept_scale: f64,
        standardize: bool,
        max_iter: usize,
        posterior_expectation: bool,
    ) -> PyResult<Self> {
        let family = self::family(family)?;
        let options = RecipeOptions {
            standardize,
            scale_outcome: standardize && matches!(family, Family::Linear { .. }),
            ..RecipeOptions::default()
        };
        let t = &table.inner;
        let recipe = build_recipe(t, &options).map_err(err)?;
        let design = recipe.apply(t).map_err(err)?;
        let response = recipe.response(t).map_err(err)?;
        let defaults = PriorDefaults {
            scale: prior_scale,
            df: prior_df,
            intercept_scale,
            intercept_df: prior_df,
        };
        let prior = prior_from_defaults(&recipe, standardize, &defaults);
        let prior = bayesglm::PriorSpec::new(prior.coefs).map_err(err)?;
        let controls = FitControls {
            max_iter,
            sigma_update: if posterior_expectation {
                SigmaUpdate::PosteriorExpectation
            } else {
                SigmaUpdate::PointEstimate
            },
            ..FitControls::default()
        };
        let result =
            bayesglm::fit(&design, &response.y, &response.trials, &family, &prior, &controls).map_err(err)?;
        Ok(PyFit { result, recipe })
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.result.predictor_names.clone()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.result.beta.iter().copied().collect()
    }

    #[getter]
    fn std_errors(&self) -> Vec<f64> {
        self.result.std_errors()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        rows(&self.result.cov)
    }

    #[getter]
    fn sigma_hat(&self) -> Vec<f64> {
        self.result.sigma_hat.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.result.converged
    }

    #[getter]
    fn n_iter(&self) -> usize {
        self.result.n_iter
    }

    #[getter]
    fn recipe(&self) -> PyRecipe {
        PyRecipe {
            inner: self.recipe.clone(),
        }
    }

    #[pyo3(signature = (table, link=false))]
    fn predict(&self, table: &PyTable, link: bool) -> PyResult<Vec<f64>> {
        let scale = if link {
            PredictScale::Link
        } else {
            PredictScale::Response
        };
        bayesglm::predict(&self.result, &self.recipe, &table.inner, scale).map_err(err)
    }

    /// Coefficient table with `coef.est` and `coef.sd`.
    fn table(&self) -> String {
        render_table(&self.result)
    }

    fn to_json(&self) -> PyResult<String> {
        SavedFit::new(&self.result, &self.recipe)
            .and_then(|s| s.to_json())
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let saved = SavedFit::from_json(text).map_err(err)?;
        Ok(PyFit {
            result: saved.to_fit_result(),
            recipe: saved.recipe,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(family={:?}, coefficients={}, converged={})",
            self.result.family.name(),
            self.result.n_coef(),
            self.result.converged
        )
    }
}

#[pyfunction]
fn log_score(p: f64) -> f64 {
    bayesglm::log_score(p)
}

#[pyfunction]
fn brier_score(p: f64) -> f64 {
    bayesglm::brier_score(p)
}

/// Fold index of each row.
#[pyfunction]
fn make_folds(n: usize, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(bayesglm::make_folds(n, k, seed).map_err(err)?.assignment)
}

/// Weighted least squares; returns `(beta, cov, rank_ok)`.
#[pyfunction]
fn solve_wls(x: Vec<Vec<f64>>, z: Vec<f64>, w: Vec<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, bool)> {
    let problem = WlsProblem::new(matrix(&x)?, DVector::from_vec(z), DVector::from_vec(w)).map_err(err)?;
    let s = bayesglm::solve_wls(&problem).map_err(err)?;
    Ok((s.beta.iter().copied().collect(), rows(&s.cov), s.rank_ok))
}

#[pyfunction]
#[pyo3(signature = (beta, v_jj, scale, df, mean=0.0))]
fn em_sigma_update(beta: f64, v_jj: f64, scale: f64, df: f64, mean: f64) -> f64 {
    bayesglm::em_sigma_update(beta, v_jj, &CoefPrior { mean, scale, df })
}

#[pyfunction]
fn bbr_scale_heuristic(x: Vec<Vec<f64>>) -> PyResult<f64> {
    bayesglm::bbr_scale_heuristic(&matrix(&x)?).map_err(err)
}

/// Cross-validated scores. `grid` holds `(nu, scale)` pairs or `None` for the flat prior; the
/// default grid is used when omitted. Returns one dict per grid point with pooled means.
#[pyfunction]
#[pyo3(signature = (table, grid=None, folds=5, seed=0))]
fn cross_validate<'py>(
    py: Python<'py>,
    table: &PyTable,
    grid: Option<Vec<Option<(f64, f64)>>>,
    folds: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let grid: Vec<PriorGridPoint> = match grid {
        None => bayesglm::default_grid(),
        Some(g) => g
            .into_iter()
            .map(|p| match p {
                None => Ok(PriorGridPoint::Flat),
                Some((nu, scale)) => PriorGridPoint::new(nu, scale).map_err(err),
            })
            .collect::<PyResult<_>>()?,
    };
    let config = CvConfig {
        folds,
        seed,
        ..CvConfig::default()
    };
    let report = bayesglm::cross_validate(&table.inner, &grid, &config).map_err(err)?;
    report
        .grid
        .iter()
        .map(|g| {
            let d = PyDict::new(py);
            d.set_item("nu", g.point.df())?;
            d.set_item("scale", g.point.scale())?;
            d.set_item("flat", g.point.is_flat())?;
            d.set_item("n_test", g.n_test())?;
            d.set_item("mean_log_score", g.mean_log_score())?;
            d.set_item("mean_brier_score", g.mean_brier_score())?;
            d.set_item("fit_failures", g.fit_failures())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "bayesglm")]
fn bayesglm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTable>()?;
    m.add_class::<PyRecipe>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(log_score, m)?)?;
    m.add_function(wrap_pyfunction!(brier_score, m)?)?;
    m.add_function(wrap_pyfunction!(make_folds, m)?)?;
    m.add_function(wrap_pyfunction!(solve_wls, m)?)?;
    m.add_function(wrap_pyfunction!(em_sigma_update, m)?)?;
    m.add_function(wrap_pyfunction!(bbr_scale_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
