//! Independent Student-t priors on regression coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recipe::{DesignRecipe, TermKind};

/// One coefficient's prior: a t distribution with center `mean`, scale `scale` and `df` degrees
/// of freedom. `df = inf` is a normal prior; `scale = inf` is flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefPrior {
    pub mean: f64,
    #[serde(with = "extended_f64")]
    pub scale: f64,
    #[serde(with = "extended_f64")]
    pub df: f64,
}

impl CoefPrior {
    pub fn student_t(df: f64, scale: f64) -> Self {
        CoefPrior {
            mean: 0.0,
            scale,
            df,
        }
    }

    pub fn cauchy(scale: f64) -> Self {
        CoefPrior::student_t(1.0, scale)
    }

    pub fn normal(scale: f64) -> Self {
        CoefPrior::student_t(f64::INFINITY, scale)
    }

    pub fn flat() -> Self {
        CoefPrior::student_t(f64::INFINITY, f64::INFINITY)
    }

    pub fn is_flat(&self) -> bool {
        self.scale == f64::INFINITY
    }

    /// True when the prior scale is re-estimated by EM (finite df and finite scale).
    pub fn is_heavy_tailed(&self) -> bool {
        self.df.is_finite() && self.scale.is_finite()
    }

    fn validate(&self, j: usize) -> Result<()> {
        if !self.mean.is_finite() {
            return Err(Error::InvalidArgument(format!("prior {j}: center must be finite")));
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("prior {j}: scale must be positive")));
        }
        if !(self.df > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prior {j}: degrees of freedom must be positive"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub coefs: Vec<CoefPrior>,
}

impl PriorSpec {
    pub fn new(coefs: Vec<CoefPrior>) -> Result<Self> {
        for (j, c) in coefs.iter().enumerate() {
            c.validate(j)?;
        }
        Ok(PriorSpec { coefs })
    }

    pub fn uniform(n: usize, prior: CoefPrior) -> Result<Self> {
        PriorSpec::new(vec![prior; n])
    }

    pub fn len(&self) -> usize {
        self.coefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefs.is_empty()
    }

    pub fn is_all_flat(&self) -> bool {
        self.coefs.iter().all(CoefPrior::is_flat)
    }
}

/// Scales and degrees of freedom used to generate a prior from a recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorDefaults {
    pub scale: f64,
    pub df: f64,
    pub intercept_scale: f64,
    pub intercept_df: f64,
}

impl Default for PriorDefaults {
    fn default() -> Self {
        PriorDefaults {
            scale: 2.5,
            df: 1.0,
            intercept_scale: 10.0,
            intercept_df: 1.0,
        }
    }
}

/// Cauchy(0, 10) on the intercept and Cauchy(0, 2.5) on everything else.
///
/// When the inputs were not standardized, numeric terms get scale `2.5 / (2 sd)` from the sd
/// stored in the recipe, which puts them on the same footing as standardized inputs.
pub fn default_prior(recipe: &DesignRecipe, standardized: bool) -> PriorSpec {
    prior_from_defaults(recipe, standardized, &PriorDefaults::default())
}

pub fn prior_from_defaults(
    recipe: &DesignRecipe,
    standardized: bool,
    defaults: &PriorDefaults,
) -> PriorSpec {
    let coefs = recipe
        .terms
        .iter()
        .map(|term| match &term.kind {
            TermKind::Intercept => CoefPrior::student_t(defaults.intercept_df, defaults.intercept_scale),
            TermKind::ScaledNumeric { sd, .. } if !standardized => {
                CoefPrior::student_t(defaults.df, defaults.scale / (2.0 * sd))
            }
            _ => CoefPrior::student_t(defaults.df, defaults.scale),
        })
        .collect();
    PriorSpec { coefs }
}

/// f64 that may be infinite, written as a JSON number or the strings `"inf"` / `"-inf"`.
pub mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "Inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-Inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" | "NaN" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

/// `Vec<f64>` whose entries may be infinite, using the same encoding as [`extended_f64`].
pub mod extended_f64_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Ext(#[serde(with = "super::extended_f64")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| Ext(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Ext>::deserialize(d)?.into_iter().map(|e| e.0).collect())
    }
}
