//! Response families and their IWLS working data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear predictors are clamped to `[-ETA_CLAMP, ETA_CLAMP]` before exponentiation.
pub const ETA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualVariance {
    /// Re-estimated every iteration as the weighted residual sum of squares over the data rows.
    Estimate,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Binomial with logit link; `y` counts successes out of `n` trials.
    Logistic,
    /// Normal with identity link; `n` acts as a precision weight.
    Linear { variance: ResidualVariance },
    /// Poisson with log link; `n` is the exposure.
    Poisson,
}

impl Family {
    pub fn linear() -> Self {
        Family::Linear {
            variance: ResidualVariance::Estimate,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Logistic => "binomial (logit link)",
            Family::Linear { .. } => "gaussian (identity link)",
            Family::Poisson => "poisson (log link)",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logistic" | "binomial" | "logit" => Some(Family::Logistic),
            "linear" | "gaussian" | "normal" => Some(Family::linear()),
            "poisson" => Some(Family::Poisson),
            _ => None,
        }
    }

    /// Checks `y` and `n` against the family's support.
    pub fn validate_response(&self, y: &[f64], n: &[f64]) -> Result<()> {
        for (i, (&yi, &ni)) in y.iter().zip(n).enumerate() {
            if !(ni.is_finite() && ni > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: trial count / weight must be positive, got {ni}"
                )));
            }
            let ok = match self {
                Family::Logistic => yi.is_finite() && (0.0..=ni).contains(&yi),
                Family::Poisson => yi.is_finite() && yi >= 0.0 && yi.fract() == 0.0,
                Family::Linear { .. } => yi.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "row {i}: response {yi} is outside the support of the {} family",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    /// Mean response for a linear predictor (per trial / per unit exposure).
    pub fn inverse_link(&self, eta: f64) -> f64 {
        match self {
            Family::Logistic => logistic(eta.clamp(-ETA_CLAMP, ETA_CLAMP)),
            Family::Poisson => eta.clamp(-ETA_CLAMP, ETA_CLAMP).exp(),
            Family::Linear { .. } => eta,
        }
    }

    /// Deviance at `eta`. `y` is on the count scale for logistic and Poisson.
    pub fn deviance(&self, eta: &DVector<f64>, y: &[f64], n: &[f64]) -> f64 {
        let mut dev = 0.0;
        for i in 0..y.len() {
            let (e, yi, ni) = (eta[i], y[i], n[i]);
            dev += match self {
                Family::Logistic => {
                    // log mu = -softplus(-eta), log(1 - mu) = -softplus(eta)
                    let p = yi / ni;
                    let a = if yi > 0.0 { yi * (p.ln() + softplus(-e)) } else { 0.0 };
                    let b = if yi < ni {
                        (ni - yi) * ((1.0 - p).ln() + softplus(e))
                    } else {
                        0.0
                    };
                    2.0 * (a + b)
                }
                Family::Poisson => {
                    let mu = ni * e.exp();
                    let a = if yi > 0.0 { yi * (yi / mu).ln() } else { 0.0 };
                    2.0 * (a - (yi - mu))
                }
                Family::Linear { .. } => ni * (yi - e).powi(2),
            };
        }
        dev
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoData {
    pub z: DVector<f64>,
    pub sigma_z2: DVector<f64>,
}

/// Working response `z` and pseudo-variances from the local quadratic approximation of the
/// log-likelihood at `beta`.
///
/// `y` is on the mean scale: the success proportion for logistic (with `n` trials), the count
/// for Poisson (with exposure `n`), the observation for linear. `dispersion` is the residual
/// variance for the linear family and ignored otherwise.
pub fn pseudo_data(
    family: &Family,
    x: &DMatrix<f64>,
    y: &[f64],
    n: &[f64],
    beta: &DVector<f64>,
    dispersion: f64,
) -> Result<PseudoData> {
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFiniteCoefficients);
    }
    if x.ncols() != beta.len() || x.nrows() != y.len() || y.len() != n.len() {
        return Err(Error::Dimension(format!(
            "X is {}x{}, beta has {} entries, y {}, n {}",
            x.nrows(),
            x.ncols(),
            beta.len(),
            y.len(),
            n.len()
        )));
    }
    let eta = x * beta;
    let m = y.len();
    let mut z = DVector::zeros(m);
    let mut s2 = DVector::zeros(m);
    for i in 0..m {
        let e = eta[i];
        let ec = e.clamp(-ETA_CLAMP, ETA_CLAMP);
        match family {
            Family::Logistic => {
                // (1 + e^eta)^2 / e^eta
                let curvature_inv = 2.0 + ec.exp() + (-ec).exp();
                z[i] = e + curvature_inv * (y[i] - logistic(ec));
                s2[i] = curvature_inv / n[i];
            }
            Family::Poisson => {
                let rate = n[i] * ec.exp();
                z[i] = e + (y[i] - rate) / rate;
                s2[i] = 1.0 / rate;
            }
            Family::Linear { .. } => {
                z[i] = y[i];
                s2[i] = dispersion / n[i];
            }
        }
    }
    Ok(PseudoData { z, sigma_z2: s2 })
}
