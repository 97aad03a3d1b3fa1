//! Posterior-mode fitting: iteratively weighted least squares on data augmented with one
//! pseudo-observation per coefficient prior, alternated with an EM update of the prior scales.
//!
//! Each t prior is written as a normal with unknown variance `sigma_j^2 ~ Inv-chi^2(nu_j, s_j^2)`.
//! One iteration:
//!
//! 1. compute the working response `z` and pseudo-variances at the current `beta`;
//! 2. append the prior rows (unit row `j`, response `mu_j`, weight `1 / sigma_j^2`) and solve the
//!    weighted least squares problem for `beta` and `V_beta`;
//! 3. update every heavy-tailed `sigma_j^2` as the posterior mode given the squared deviation
//!    `(beta_j - mu_j)^2` (optionally plus `V_jj`, see [`SigmaUpdate`]).
//!
//! Coefficients with normal priors keep `sigma_j = s_j`; flat coefficients get no prior row.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{pseudo_data, Family, ResidualVariance, ETA_CLAMP};
use crate::prior::{CoefPrior, PriorSpec};
use crate::recipe::{DesignMatrix, DesignRecipe};
use crate::table::DataTable;
use crate::wls::{solve_wls, WlsProblem};

/// What the scale update plugs in for `E[(beta_j - mu_j)^2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaUpdate {
    /// `(beta_j - mu_j)^2` alone. The fixed point is then the exact posterior mode under the
    /// t prior.
    #[default]
    PointEstimate,
    /// `(beta_j - mu_j)^2 + (V_beta)_jj`, averaging over the normal approximation to the
    /// conditional posterior of `beta_j`. Pulls heavy-tailed fits away from the mode, most for
    /// weakly identified coefficients.
    PosteriorExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitControls {
    pub max_iter: usize,
    pub tol: f64,
    pub beta_init: Option<Vec<f64>>,
    pub sigma_update: SigmaUpdate,
}

impl Default for FitControls {
    fn default() -> Self {
        FitControls {
            max_iter: 100,
            tol: 1e-8,
            beta_init: None,
            sigma_update: SigmaUpdate::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub family: Family,
    pub predictor_names: Vec<String>,
    pub prior: PriorSpec,
    /// Posterior mode on the design's (standardized) scale.
    pub beta: DVector<f64>,
    /// Covariance from the final augmented weighted least squares solve.
    pub cov: DMatrix<f64>,
    /// Converged prior scales; equal to `s_j` for normal and flat priors.
    pub sigma_hat: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    /// False only for permissive fits of unidentified designs (see [`fit_permissive`]).
    pub rank_ok: bool,
    pub deviance_trace: Vec<f64>,
    pub residual_variance: Option<f64>,
    pub n_obs: usize,
}

impl FitResult {
    pub fn std_errors(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }

    pub fn n_coef(&self) -> usize {
        self.beta.len()
    }
}

/// Stacks the data rows with one prior row per non-flat coefficient.
pub fn augment(
    z: &DVector<f64>,
    sigma_z2: &DVector<f64>,
    x: &DMatrix<f64>,
    prior: &PriorSpec,
    sigma_current: &[f64],
) -> Result<WlsProblem> {
    let (n, p) = x.shape();
    if z.len() != n || sigma_z2.len() != n || prior.len() != p || sigma_current.len() != p {
        return Err(Error::Dimension(format!(
            "X is {n}x{p}; z {}, sigma_z2 {}, prior {}, sigma {}",
            z.len(),
            sigma_z2.len(),
            prior.len(),
            sigma_current.len()
        )));
    }
    let rows: Vec<usize> = (0..p).filter(|&j| !prior.coefs[j].is_flat()).collect();
    let m = n + rows.len();
    let mut xa = DMatrix::zeros(m, p);
    let mut za = DVector::zeros(m);
    let mut wa = DVector::zeros(m);
    xa.rows_mut(0, n).copy_from(x);
    za.rows_mut(0, n).copy_from(z);
    for i in 0..n {
        wa[i] = 1.0 / sigma_z2[i];
    }
    for (k, &j) in rows.iter().enumerate() {
        let s = sigma_current[j];
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prior scale for coefficient {j} must be finite and positive, got {s}"
            )));
        }
        xa[(n + k, j)] = 1.0;
        za[n + k] = prior.coefs[j].mean;
        wa[n + k] = 1.0 / (s * s);
    }
    WlsProblem::new(xa, za, wa)
}

/// Posterior mode of `sigma_j^2` given one squared deviation `(beta_j - mu_j)^2 + v_jj` and an
/// `Inv-chi^2(nu_j, s_j^2)` prior:
/// `((beta_j - mu_j)^2 + v_jj + nu_j s_j^2) / (1 + nu_j)`.
///
/// Returns `s_j^2` when `nu_j` is infinite.
pub fn em_sigma_update(beta_hat: f64, v_jj: f64, prior: &CoefPrior) -> f64 {
    if prior.df.is_infinite() {
        return prior.scale * prior.scale;
    }
    let dev = beta_hat - prior.mean;
    (dev * dev + v_jj + prior.df * prior.scale * prior.scale) / (1.0 + prior.df)
}

/// Fits a GLM with independent t priors.
///
/// `y` is the success count for logistic (out of `n`), the count for Poisson (exposure `n`),
/// the observation for linear (weight `n`). Non-convergence is reported through
/// [`FitResult::converged`], not as an error.
pub fn fit(
    design: &DesignMatrix,
    y: &[f64],
    n: &[f64],
    family: &Family,
    prior: &PriorSpec,
    controls: &FitControls,
) -> Result<FitResult> {
    let result = fit_permissive(design, y, n, family, prior, controls)?;
    if !result.rank_ok {
        return Err(Error::RankDeficient);
    }
    Ok(result)
}

/// Like [`fit`], but a rank-deficient design under flat priors returns the minimum-norm
/// iterate with `rank_ok = false` instead of failing.
pub fn fit_permissive(
    design: &DesignMatrix,
    y: &[f64],
    n: &[f64],
    family: &Family,
    prior: &PriorSpec,
    controls: &FitControls,
) -> Result<FitResult> {
    let x = &design.x;
    let (rows, p) = x.shape();
    if y.len() != rows || n.len() != rows {
        return Err(Error::Dimension(format!(
            "design has {rows} rows but y has {} and n has {}",
            y.len(),
            n.len()
        )));
    }
    if prior.len() != p {
        return Err(Error::Dimension(format!(
            "design has {p} columns but the prior has {} entries",
            prior.len()
        )));
    }
    family.validate_response(y, n)?;
    let mut beta = match &controls.beta_init {
        Some(b) if b.len() != p => {
            return Err(Error::Dimension(format!("beta_init has {} entries, expected {p}", b.len())))
        }
        Some(b) => DVector::from_column_slice(b),
        None => DVector::zeros(p),
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFiniteCoefficients);
    }

    // logistic working data uses proportions
    let y_mean: Vec<f64> = match family {
        Family::Logistic => y.iter().zip(n).map(|(a, b)| a / b).collect(),
        _ => y.to_vec(),
    };
    let mut dispersion = match family {
        Family::Linear {
            variance: ResidualVariance::Fixed(v),
        } => *v,
        Family::Linear {
            variance: ResidualVariance::Estimate,
        } => initial_variance(y, n),
        _ => 1.0,
    };
    let mut sigma: Vec<f64> = prior.coefs.iter().map(|c| c.scale).collect();
    let mut cov = DMatrix::zeros(p, p);
    let mut rank_ok = true;
    let mut converged = false;
    let mut n_iter = 0;
    let mut trace = Vec::new();

    while n_iter < controls.max_iter {
        n_iter += 1;
        let pd = pseudo_data(family, x, &y_mean, n, &beta, dispersion)?;
        let problem = augment(&pd.z, &pd.sigma_z2, x, prior, &sigma)?;
        let sol = solve_wls(&problem)?;
        rank_ok = sol.rank_ok;
        if sol.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFiniteCoefficients);
        }
        let step_ok = beta
            .iter()
            .zip(sol.beta.iter())
            .all(|(old, new)| (new - old).abs() < controls.tol * new.abs().max(1.0));
        beta = sol.beta;
        cov = sol.cov;

        for (j, c) in prior.coefs.iter().enumerate() {
            if c.is_heavy_tailed() {
                let v_jj = match controls.sigma_update {
                    SigmaUpdate::PointEstimate => 0.0,
                    SigmaUpdate::PosteriorExpectation => cov[(j, j)],
                };
                sigma[j] = em_sigma_update(beta[j], v_jj, c).sqrt();
            }
        }
        let eta = x * &beta;
        if let Family::Linear {
            variance: ResidualVariance::Estimate,
        } = family
        {
            dispersion = residual_variance(&eta, y, n, initial_variance(y, n));
        }
        trace.push(family.deviance(&eta, y, n));
        if !rank_ok {
            break;
        }
        if step_ok {
            converged = true;
            break;
        }
    }

    if !converged {
        log::debug!("fit stopped after {n_iter} iterations without converging");
    }
    Ok(FitResult {
        family: *family,
        predictor_names: design.predictor_names.clone(),
        prior: prior.clone(),
        beta,
        cov,
        sigma_hat: sigma,
        n_iter,
        converged,
        rank_ok,
        deviance_trace: trace,
        residual_variance: matches!(family, Family::Linear { .. }).then_some(dispersion),
        n_obs: rows,
    })
}

fn initial_variance(y: &[f64], n: &[f64]) -> f64 {
    let total: f64 = n.iter().sum();
    if y.is_empty() || total <= 0.0 {
        return 1.0;
    }
    let mean = y.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / total;
    let var = y.iter().zip(n).map(|(a, b)| b * (a - mean).powi(2)).sum::<f64>() / total;
    if var > 0.0 {
        var
    } else {
        1.0
    }
}

/// Weighted RSS over the data rows divided by the total weight, floored so that weights stay
/// finite when the fit is exact.
fn residual_variance(eta: &DVector<f64>, y: &[f64], n: &[f64], reference: f64) -> f64 {
    let total: f64 = n.iter().sum();
    let rss: f64 = (0..y.len()).map(|i| n[i] * (y[i] - eta[i]).powi(2)).sum();
    (rss / total).max(1e-10 * reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictScale {
    Link,
    Response,
}

/// Predictions for a design built with the fit's recipe.
///
/// On the response scale: probabilities for logistic (strictly inside (0, 1)), rates per unit
/// exposure for Poisson, and outcomes mapped back through `outcome_transform` for linear.
pub fn predict_design(
    fit: &FitResult,
    design: &DesignMatrix,
    scale: PredictScale,
    recipe: Option<&DesignRecipe>,
) -> Result<Vec<f64>> {
    if design.ncols() != fit.n_coef() {
        return Err(Error::Dimension(format!(
            "design has {} columns but the fit has {} coefficients",
            design.ncols(),
            fit.n_coef()
        )));
    }
    let eta = &design.x * &fit.beta;
    Ok(match scale {
        PredictScale::Link => eta.iter().copied().collect(),
        PredictScale::Response => eta
            .iter()
            .map(|&e| match fit.family {
                Family::Linear { .. } => match recipe.and_then(|r| r.outcome_transform) {
                    Some(t) => t.center + t.scale * e,
                    None => e,
                },
                _ => fit.family.inverse_link(e.clamp(-ETA_CLAMP, ETA_CLAMP)),
            })
            .collect(),
    })
}

/// Applies `recipe` to `table` and predicts.
pub fn predict(
    fit: &FitResult,
    recipe: &DesignRecipe,
    table: &DataTable,
    scale: PredictScale,
) -> Result<Vec<f64>> {
    if recipe.predictor_names() != fit.predictor_names {
        return Err(Error::Dimension(
            "recipe terms do not match the fitted coefficients".into(),
        ));
    }
    let design = recipe.apply(table)?;
    predict_design(fit, &design, scale, Some(recipe))
}
