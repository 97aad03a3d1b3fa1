//! Standardization recipe: the frozen map from raw columns to a design matrix.
//!
//! Built once from training data and re-applied verbatim to new data:
//!
//! * binary inputs are shifted so their observed mean is 0 (the two levels differ by exactly 1);
//! * other numeric inputs are centered at their mean and divided by two sample standard
//!   deviations, giving standard deviation 0.5;
//! * a categorical input with `k` levels becomes `k - 1` indicators, dropping its most frequent
//!   level (ties go to the lexicographically smallest level);
//! * a column with missing cells gets an extra missingness indicator, and the missing cell itself
//!   maps to the training mean.
//!
//! Standard deviations use the `n - 1` denominator over design rows and ignore binomial trial
//! counts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Cells, Column, ColumnKind, DataTable};

pub const RECIPE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeOptions {
    pub standardize: bool,
    pub add_missing_indicators: bool,
    pub intercept: bool,
    /// Rescale the outcome to mean 0 and standard deviation 0.5 (linear models).
    pub scale_outcome: bool,
    /// Drop constant columns with a warning instead of failing. Used when recipes are rebuilt on
    /// cross-validation training folds.
    pub skip_constant_columns: bool,
}

impl Default for RecipeOptions {
    fn default() -> Self {
        RecipeOptions {
            standardize: true,
            add_missing_indicators: true,
            intercept: true,
            scale_outcome: false,
            skip_constant_columns: false,
        }
    }
}

/// The two levels of a binary input; `high` is the level coded 1 before centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinaryLevels {
    Numeric { low: f64, high: f64 },
    Text { low: String, high: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TermKind {
    Intercept,
    CenteredBinary {
        column: String,
        levels: BinaryLevels,
        /// Subtracted from the coded value; the training mean when standardizing.
        offset: f64,
        /// Training mean of the coded value, used to fill missing cells.
        mean: f64,
    },
    ScaledNumeric {
        column: String,
        center: f64,
        half_spread: f64,
        mean: f64,
        sd: f64,
    },
    Dummy {
        column: String,
        level: String,
        reference: String,
    },
    MissingIndicator {
        column: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    #[serde(flatten)]
    pub kind: TermKind,
}

impl Term {
    pub fn source_column(&self) -> Option<&str> {
        match &self.kind {
            TermKind::Intercept => None,
            TermKind::CenteredBinary { column, .. }
            | TermKind::ScaledNumeric { column, .. }
            | TermKind::Dummy { column, .. }
            | TermKind::MissingIndicator { column } => Some(column),
        }
    }

    /// `(a, b)` such that the design value is `a * raw + b`, where `raw` is the value produced by
    /// [`DesignRecipe::raw_design`].
    pub fn affine(&self) -> (f64, f64) {
        match &self.kind {
            TermKind::Intercept => (1.0, 0.0),
            TermKind::CenteredBinary { offset, .. } => (1.0, -offset),
            TermKind::ScaledNumeric {
                center,
                half_spread,
                ..
            } => (1.0 / half_spread, -center / half_spread),
            TermKind::Dummy { .. } | TermKind::MissingIndicator { .. } => (1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTransform {
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecipe {
    pub version: u32,
    pub standardized: bool,
    pub outcome: Option<String>,
    pub trials: Option<String>,
    pub terms: Vec<Term>,
    pub outcome_transform: Option<OutcomeTransform>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub predictor_names: Vec<String>,
    pub intercept_index: Option<usize>,
    pub warnings: Vec<String>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Design without a recipe: columns named `x1..xJ`, no intercept bookkeeping.
    pub fn from_matrix(x: DMatrix<f64>) -> Self {
        let predictor_names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        DesignMatrix {
            x,
            predictor_names,
            intercept_index: None,
            warnings: Vec::new(),
        }
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Learns a recipe from `table`. The outcome and trials columns never become predictors.
pub fn build_recipe(table: &DataTable, options: &RecipeOptions) -> Result<DesignRecipe> {
    let mut terms = Vec::new();
    if options.intercept {
        terms.push(Term {
            name: "(Intercept)".into(),
            kind: TermKind::Intercept,
        });
    }
    for column in table.predictor_columns() {
        match column_terms(column, options) {
            Ok(main) => {
                terms.extend(main);
                if options.add_missing_indicators && column.has_missing() {
                    terms.push(Term {
                        name: format!("{}.missing", column.name),
                        kind: TermKind::MissingIndicator {
                            column: column.name.clone(),
                        },
                    });
                }
            }
            Err(err @ (Error::ConstantColumn(_) | Error::SingleLevel(_)))
                if options.skip_constant_columns =>
            {
                log::warn!("skipping column `{}`: {err}", column.name);
            }
            Err(err) => return Err(err),
        }
    }

    let outcome_transform = if options.scale_outcome {
        let name = table
            .outcome()
            .ok_or_else(|| Error::InvalidArgument("outcome scaling needs an outcome column".into()))?;
        let y = table.response()?.y;
        let (mean, sd) = mean_sd(&y);
        if !(sd > 0.0) {
            return Err(Error::ConstantColumn(name.to_owned()));
        }
        Some(OutcomeTransform {
            center: mean,
            scale: 2.0 * sd,
        })
    } else {
        None
    };

    Ok(DesignRecipe {
        version: RECIPE_VERSION,
        standardized: options.standardize,
        outcome: table.outcome().map(str::to_owned),
        trials: table.trials().map(str::to_owned),
        terms,
        outcome_transform,
    })
}

fn column_terms(column: &Column, options: &RecipeOptions) -> Result<Vec<Term>> {
    let name = &column.name;
    match column.kind {
        ColumnKind::Binary => {
            let levels = binary_levels(column).ok_or_else(|| Error::ConstantColumn(name.clone()))?;
            let coded: Vec<f64> = (0..column.len())
                .filter_map(|i| binary_code(&column.cells, i, &levels))
                .collect();
            let mean = coded.iter().sum::<f64>() / coded.len() as f64;
            let offset = if options.standardize { mean } else { 0.0 };
            let term_name = if options.standardize {
                format!("c.{name}")
            } else {
                name.clone()
            };
            Ok(vec![Term {
                name: term_name,
                kind: TermKind::CenteredBinary {
                    column: name.clone(),
                    levels,
                    offset,
                    mean,
                },
            }])
        }
        ColumnKind::Numeric => {
            let values: Vec<f64> = column
                .numeric_values()
                .expect("numeric column")
                .iter()
                .flatten()
                .copied()
                .collect();
            let (mean, sd) = mean_sd(&values);
            if values.is_empty() || !(sd > 0.0) {
                return Err(Error::ConstantColumn(name.clone()));
            }
            let (center, half_spread, term_name) = if options.standardize {
                (mean, 2.0 * sd, format!("z.{name}"))
            } else {
                (0.0, 1.0, name.clone())
            };
            Ok(vec![Term {
                name: term_name,
                kind: TermKind::ScaledNumeric {
                    column: name.clone(),
                    center,
                    half_spread,
                    mean,
                    sd,
                },
            }])
        }
        ColumnKind::Categorical => {
            let counts = column.level_counts();
            if counts.len() < 2 {
                return Err(Error::SingleLevel(name.clone()));
            }
            let reference = most_frequent(&counts);
            Ok(counts
                .keys()
                .filter(|level| **level != reference)
                .map(|level| Term {
                    name: format!("{name}={level}"),
                    kind: TermKind::Dummy {
                        column: name.clone(),
                        level: level.clone(),
                        reference: reference.clone(),
                    },
                })
                .collect())
        }
    }
}

/// Most frequent level; the lexicographically smallest wins ties.
fn most_frequent(counts: &BTreeMap<String, usize>) -> String {
    let mut best: Option<(&String, usize)> = None;
    for (level, &count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((level, count));
        }
    }
    best.expect("non-empty").0.clone()
}

fn binary_levels(column: &Column) -> Option<BinaryLevels> {
    match &column.cells {
        Cells::Numeric(v) => {
            let mut distinct: Vec<f64> = v.iter().flatten().copied().collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            (distinct.len() == 2).then(|| BinaryLevels::Numeric {
                low: distinct[0],
                high: distinct[1],
            })
        }
        Cells::Text(_) => {
            let counts = column.level_counts();
            let mut keys = counts.into_keys();
            match (keys.next(), keys.next(), keys.next()) {
                (Some(low), Some(high), None) => Some(BinaryLevels::Text { low, high }),
                _ => None,
            }
        }
    }
}

/// Coded value of a binary cell: the number itself for numeric levels, 0/1 for text levels.
/// `None` for missing or unrecognized text.
fn binary_code(cells: &Cells, row: usize, levels: &BinaryLevels) -> Option<f64> {
    match (cells, levels) {
        (Cells::Numeric(v), BinaryLevels::Numeric { .. }) => v[row],
        (Cells::Text(v), BinaryLevels::Text { low, high }) => match v[row].as_deref() {
            Some(s) if s == high => Some(1.0),
            Some(s) if s == low => Some(0.0),
            _ => None,
        },
        (Cells::Text(v), BinaryLevels::Numeric { .. }) => {
            v[row].as_deref().and_then(|s| s.parse::<f64>().ok())
        }
        (Cells::Numeric(v), BinaryLevels::Text { low, high }) => {
            let s = v[row].map(crate::table::format_number)?;
            if &s == high {
                Some(1.0)
            } else if &s == low {
                Some(0.0)
            } else {
                None
            }
        }
    }
}

fn numeric_cell(cells: &Cells, row: usize) -> Option<f64> {
    match cells {
        Cells::Numeric(v) => v[row],
        Cells::Text(v) => v[row].as_deref().and_then(|s| s.parse().ok()),
    }
}

fn text_cell(column: &Column, row: usize) -> Option<String> {
    column.level_at(row)
}

impl DesignRecipe {
    pub fn predictor_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn intercept_index(&self) -> Option<usize> {
        self.terms
            .iter()
            .position(|t| matches!(t.kind, TermKind::Intercept))
    }

    /// Source columns the recipe reads, in first-use order.
    pub fn source_columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in self.terms.iter().filter_map(Term::source_column) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    fn check_columns(&self, table: &DataTable) -> Result<()> {
        let missing: Vec<String> = self
            .source_columns()
            .into_iter()
            .filter(|c| table.column(c).is_none())
            .map(str::to_owned)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingColumns(missing))
        }
    }

    /// Applies the stored constants to `table`; nothing is re-estimated from it.
    pub fn apply(&self, table: &DataTable) -> Result<DesignMatrix> {
        self.check_columns(table)?;
        let n = table.n_rows();
        let mut x = DMatrix::zeros(n, self.terms.len());
        let mut warnings = Vec::new();
        for (j, term) in self.terms.iter().enumerate() {
            let column = term.source_column().map(|c| table.column(c).expect("checked"));
            match (&term.kind, column) {
                (TermKind::Intercept, _) => x.column_mut(j).fill(1.0),
                (
                    TermKind::CenteredBinary {
                        levels,
                        offset,
                        mean,
                        ..
                    },
                    Some(col),
                ) => {
                    let mut unseen = 0usize;
                    for i in 0..n {
                        let code = binary_code(&col.cells, i, levels);
                        if code.is_none() && !col.cells.is_missing(i) {
                            unseen += 1;
                        }
                        x[(i, j)] = code.unwrap_or(*mean) - offset;
                    }
                    if unseen > 0 {
                        warnings.push(format!(
                            "column `{}`: {unseen} value(s) match neither binary level; treated as missing",
                            col.name
                        ));
                    }
                }
                (
                    TermKind::ScaledNumeric {
                        center,
                        half_spread,
                        mean,
                        ..
                    },
                    Some(col),
                ) => {
                    for i in 0..n {
                        let v = numeric_cell(&col.cells, i).unwrap_or(*mean);
                        x[(i, j)] = (v - center) / half_spread;
                    }
                }
                (TermKind::Dummy { level, .. }, Some(col)) => {
                    for i in 0..n {
                        if text_cell(col, i).as_deref() == Some(level.as_str()) {
                            x[(i, j)] = 1.0;
                        }
                    }
                }
                (TermKind::MissingIndicator { .. }, Some(col)) => {
                    for i in 0..n {
                        if col.cells.is_missing(i) {
                            x[(i, j)] = 1.0;
                        }
                    }
                }
                _ => unreachable!("source column checked"),
            }
        }
        warnings.extend(self.unseen_level_warnings(table));
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(DesignMatrix {
            x,
            predictor_names: self.predictor_names(),
            intercept_index: self.intercept_index(),
            warnings,
        })
    }

    fn unseen_level_warnings(&self, table: &DataTable) -> Vec<String> {
        let mut known: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for term in &self.terms {
            if let TermKind::Dummy {
                column,
                level,
                reference,
            } = &term.kind
            {
                let entry = known.entry(column).or_default();
                entry.push(level);
                if !entry.contains(&reference.as_str()) {
                    entry.push(reference);
                }
            }
        }
        let mut out = Vec::new();
        for (column, levels) in known {
            let col = table.column(column).expect("checked");
            let unseen: Vec<String> = col
                .level_counts()
                .into_keys()
                .filter(|l| !levels.contains(&l.as_str()))
                .collect();
            if !unseen.is_empty() {
                out.push(format!(
                    "column `{column}`: unseen level(s) {} coded as all-zero dummies",
                    unseen.join(", ")
                ));
            }
        }
        out
    }

    /// Raw-scale design: the untransformed inputs, with missing cells filled by the training
    /// mean. Satisfies `raw * beta_raw == apply(table) * beta_std` for the coefficients returned
    /// by [`unstandardize_coefficients`].
    pub fn raw_design(&self, table: &DataTable) -> Result<DMatrix<f64>> {
        let std = self.apply(table)?;
        let mut raw = std.x;
        for (j, term) in self.terms.iter().enumerate() {
            let (a, b) = term.affine();
            raw.column_mut(j).apply(|v| *v = (*v - b) / a);
        }
        Ok(raw)
    }

    /// Outcome values mapped through `outcome_transform`, plus trial counts.
    pub fn response(&self, table: &DataTable) -> Result<crate::table::Response> {
        let mut r = table.response()?;
        if let Some(t) = self.outcome_transform {
            for y in &mut r.y {
                *y = (*y - t.center) / t.scale;
            }
        }
        Ok(r)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let recipe: DesignRecipe = serde_json::from_str(text)?;
        if recipe.version != RECIPE_VERSION {
            return Err(Error::UnsupportedVersion {
                kind: "recipe",
                found: recipe.version.to_string(),
                supported: RECIPE_VERSION,
            });
        }
        Ok(recipe)
    }
}

pub fn apply_recipe(recipe: &DesignRecipe, table: &DataTable) -> Result<DesignMatrix> {
    recipe.apply(table)
}

/// Maps standardized-scale coefficients and covariance to the raw input scale (and the raw
/// outcome scale when the recipe rescales the outcome).
pub fn unstandardize_coefficients(
    recipe: &DesignRecipe,
    beta_std: &DVector<f64>,
    v_std: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let j = recipe.n_terms();
    if beta_std.len() != j || v_std.nrows() != j || v_std.ncols() != j {
        return Err(Error::Dimension(format!(
            "recipe has {j} terms, got beta of length {} and a {}x{} covariance",
            beta_std.len(),
            v_std.nrows(),
            v_std.ncols()
        )));
    }
    let intercept = recipe.intercept_index();
    let mut map = DMatrix::zeros(j, j);
    for (t, term) in recipe.terms.iter().enumerate() {
        let (a, b) = term.affine();
        map[(t, t)] = a;
        if b != 0.0 {
            let Some(k) = intercept else {
                return Err(Error::InvalidArgument(format!(
                    "term `{}` is centered but the recipe has no intercept",
                    term.name
                )));
            };
            map[(k, t)] += b;
        }
    }
    let mut shift = DVector::zeros(j);
    if let Some(OutcomeTransform { center, scale }) = recipe.outcome_transform {
        map *= scale;
        match intercept {
            Some(k) => shift[k] = center,
            None if center != 0.0 => {
                return Err(Error::InvalidArgument(
                    "outcome is centered but the recipe has no intercept".into(),
                ))
            }
            None => {}
        }
    }
    let beta_raw = &map * beta_std + shift;
    let v_raw = &map * v_std * map.transpose();
    Ok((beta_raw, v_raw))
}
