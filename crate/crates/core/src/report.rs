//! Serialized fits, the coefficient table, and score CSVs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::{format_extended, ScoreReport};
use crate::family::Family;
use crate::fit::FitResult;
use crate::prior::{CoefPrior, PriorSpec};
use crate::recipe::{unstandardize_coefficients, DesignRecipe};

pub const FIT_FORMAT_MAJOR: u32 = 1;
pub const FIT_FORMAT_VERSION: &str = "1.0";

/// A fit together with the recipe that produced its design, as written by `fit --format json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedFit {
    pub format_version: String,
    pub family: Family,
    pub predictor_names: Vec<String>,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Coefficients on the raw input scale; absent when the recipe cannot be inverted.
    pub beta_raw: Option<Vec<f64>>,
    pub std_errors_raw: Option<Vec<f64>>,
    #[serde(with = "crate::prior::extended_f64_vec")]
    pub sigma_hat: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
    pub rank_ok: bool,
    pub n_obs: usize,
    pub residual_variance: Option<f64>,
    pub deviance_trace: Vec<f64>,
    /// Row-major covariance on the standardized scale.
    pub cov: Vec<Vec<f64>>,
    pub prior: PriorSpec,
    pub recipe: DesignRecipe,
}

impl SavedFit {
    pub fn new(fit: &FitResult, recipe: &DesignRecipe) -> Result<Self> {
        if recipe.predictor_names() != fit.predictor_names {
            return Err(Error::Dimension(
                "recipe terms do not match the fitted coefficients".into(),
            ));
        }
        let raw = unstandardize_coefficients(recipe, &fit.beta, &fit.cov).ok();
        let (beta_raw, std_errors_raw) = match raw {
            Some((b, v)) => (
                Some(b.iter().copied().collect()),
                Some(v.diagonal().iter().map(|d| d.max(0.0).sqrt()).collect()),
            ),
            None => (None, None),
        };
        Ok(SavedFit {
            format_version: FIT_FORMAT_VERSION.into(),
            family: fit.family,
            predictor_names: fit.predictor_names.clone(),
            beta: fit.beta.iter().copied().collect(),
            std_errors: fit.std_errors(),
            beta_raw,
            std_errors_raw,
            sigma_hat: fit.sigma_hat.clone(),
            n_iter: fit.n_iter,
            converged: fit.converged,
            rank_ok: fit.rank_ok,
            n_obs: fit.n_obs,
            residual_variance: fit.residual_variance,
            deviance_trace: fit.deviance_trace.clone(),
            cov: fit.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
            prior: fit.prior.clone(),
            recipe: recipe.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a saved fit, rejecting documents whose major format version is not
    /// [`FIT_FORMAT_MAJOR`].
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: String,
        }
        let header: Header = serde_json::from_str(text)?;
        let major = header.format_version.split('.').next().unwrap_or_default();
        if major.parse::<u32>().ok() != Some(FIT_FORMAT_MAJOR) {
            return Err(Error::UnsupportedVersion {
                kind: "fit",
                found: header.format_version,
                supported: FIT_FORMAT_MAJOR,
            });
        }
        let saved: SavedFit = serde_json::from_str(text)?;
        // the embedded recipe goes through its own version check
        DesignRecipe::from_json(&serde_json::to_string(&saved.recipe)?)?;
        let p = saved.beta.len();
        if saved.predictor_names.len() != p
            || saved.std_errors.len() != p
            || saved.sigma_hat.len() != p
            || saved.prior.len() != p
            || saved.cov.len() != p
            || saved.cov.iter().any(|r| r.len() != p)
        {
            return Err(Error::Dimension("saved fit has inconsistent lengths".into()));
        }
        Ok(saved)
    }

    pub fn to_fit_result(&self) -> FitResult {
        let p = self.beta.len();
        FitResult {
            family: self.family,
            predictor_names: self.predictor_names.clone(),
            prior: self.prior.clone(),
            beta: DVector::from_column_slice(&self.beta),
            cov: DMatrix::from_fn(p, p, |i, j| self.cov[i][j]),
            sigma_hat: self.sigma_hat.clone(),
            n_iter: self.n_iter,
            converged: self.converged,
            rank_ok: self.rank_ok,
            deviance_trace: self.deviance_trace.clone(),
            residual_variance: self.residual_variance,
            n_obs: self.n_obs,
        }
    }
}

/// Short label such as `Cauchy(0, 2.5)`, `t_7(0, 2.5)`, `N(0, 2.5)` or `flat`.
pub fn describe_prior(c: &CoefPrior) -> String {
    if c.is_flat() {
        return "flat".into();
    }
    let args = format!("{}, {}", c.mean, c.scale);
    if c.df.is_infinite() {
        format!("N({args})")
    } else if c.df == 1.0 {
        format!("Cauchy({args})")
    } else {
        format!("t_{}({args})", c.df)
    }
}

/// Groups coefficients by prior, in order of first appearance.
pub fn prior_summary(prior: &PriorSpec, names: &[String]) -> String {
    let mut groups: Vec<(String, Vec<&str>)> = Vec::new();
    for (c, name) in prior.coefs.iter().zip(names) {
        let label = describe_prior(c);
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, members)) => members.push(name),
            None => groups.push((label, vec![name])),
        }
    }
    if groups.len() == 1 {
        return format!("{} on all coefficients", groups[0].0);
    }
    groups
        .iter()
        .map(|(label, members)| {
            if members.len() <= 3 {
                format!("{label} on {}", members.join(", "))
            } else {
                format!("{label} on {} coefficients", members.len())
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Coefficient table with `coef.est` and `coef.sd` at two decimals, followed by a footer.
pub fn render_table(fit: &FitResult) -> String {
    let se = fit.std_errors();
    let name_w = fit.predictor_names.iter().map(|n| n.len()).max().unwrap_or(0);
    let cells: Vec<(String, String)> = (0..fit.n_coef())
        .map(|j| (round2(fit.beta[j]), round2(se[j])))
        .collect();
    let est_w = cells.iter().map(|c| c.0.len()).max().unwrap_or(0).max("coef.est".len());
    let sd_w = cells.iter().map(|c| c.1.len()).max().unwrap_or(0).max("coef.sd".len());

    let mut out = format!("{:name_w$} {:>est_w$} {:>sd_w$}\n", "", "coef.est", "coef.sd");
    for (name, (est, sd)) in fit.predictor_names.iter().zip(&cells) {
        out.push_str(&format!("{name:name_w$} {est:>est_w$} {sd:>sd_w$}\n"));
    }
    out.push_str("---\n");
    out.push_str(&format!("family: {}\n", fit.family.name()));
    out.push_str(&format!(
        "prior: {}\n",
        prior_summary(&fit.prior, &fit.predictor_names)
    ));
    if let Some(v) = fit.residual_variance {
        out.push_str(&format!("residual sd: {}\n", round2(v.sqrt())));
    }
    out.push_str(&format!(
        "n = {}, k = {}, iterations = {}{}\n",
        fit.n_obs,
        fit.n_coef(),
        fit.n_iter,
        if fit.converged { "" } else { " (did not converge)" }
    ));
    out
}

fn round2(v: f64) -> String {
    let s = format!("{v:.2}");
    // avoid "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_owned()
    } else {
        s
    }
}

pub const SCORE_COLUMNS: [&str; 7] = [
    "nu",
    "scale",
    "fold",
    "n_test",
    "mean_log_score",
    "mean_brier_score",
    "fit_failures",
];

/// One row per grid point and fold.
pub fn write_score_csv<W: Write>(report: &ScoreReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORE_COLUMNS)?;
    for g in &report.grid {
        for f in &g.folds {
            w.write_record([
                g.point.df_label(),
                g.point.scale_label(),
                f.fold.to_string(),
                f.n_test.to_string(),
                f.mean_log_score().to_string(),
                f.mean_brier_score().to_string(),
                f.fit_failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per grid point with `fold = all` and means pooled over every test row.
pub fn write_pooled_csv<W: Write>(report: &ScoreReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SCORE_COLUMNS)?;
    for g in &report.grid {
        w.write_record([
            g.point.df_label(),
            g.point.scale_label(),
            "all".to_owned(),
            g.n_test().to_string(),
            g.mean_log_score().to_string(),
            g.mean_brier_score().to_string(),
            g.fit_failures().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-fold rows followed by the pooled rows, under one header.
pub fn write_full_csv<W: Write>(report: &ScoreReport, mut writer: W) -> Result<()> {
    let mut folds = Vec::new();
    write_score_csv(report, &mut folds)?;
    let mut pooled = Vec::new();
    write_pooled_csv(report, &mut pooled)?;
    writer.write_all(&folds)?;
    let body = pooled.splitn(2, |&b| b == b'\n').nth(1).unwrap_or_default();
    writer.write_all(body)?;
    Ok(())
}

pub fn score_line(report: &ScoreReport) -> Option<String> {
    let best = report.best_by_log_score()?;
    Some(format!(
        "best prior by mean log score: {} (nu = {}, scale = {}), log score {:.4}, Brier {:.4}",
        best.point,
        best.point.df_label(),
        format_extended(best.point.scale()),
        best.mean_log_score(),
        best.mean_brier_score()
    ))
}
