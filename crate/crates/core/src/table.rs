//! Tabular input: typed columns with a missingness mask, read from CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a column enters the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Binary,
}

/// Cell storage. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl Cells {
    pub fn len(&self) -> usize {
        match self {
            Cells::Numeric(v) => v.len(),
            Cells::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Cells::Numeric(v) => v[row].is_none(),
            Cells::Text(v) => v[row].is_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub cells: Cells,
}

impl Column {
    /// Numeric column; classified binary when it takes exactly two distinct values.
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        let cells = Cells::Numeric(values);
        let kind = if distinct_count(&cells) == 2 {
            ColumnKind::Binary
        } else {
            ColumnKind::Numeric
        };
        Column {
            name: name.into(),
            kind,
            cells,
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            kind: ColumnKind::Categorical,
            cells: Cells::Text(values),
        }
    }

    /// Builds a column from raw CSV tokens, inferring the kind unless `kind` is given.
    pub fn from_tokens(
        name: impl Into<String>,
        tokens: Vec<Option<String>>,
        kind: Option<ColumnKind>,
    ) -> Result<Self> {
        let name = name.into();
        let parsed: Option<Vec<Option<f64>>> = tokens
            .iter()
            .map(|t| match t {
                None => Some(None),
                Some(s) => parse_finite(s).map(Some),
            })
            .collect();
        let column = match (kind, parsed) {
            (None, Some(values)) => Column::numeric(name, values),
            (None, None) => Column::categorical(name, tokens),
            (Some(ColumnKind::Categorical), _) => Column::categorical(name, tokens),
            (Some(ColumnKind::Numeric), Some(values)) => Column {
                name,
                kind: ColumnKind::Numeric,
                cells: Cells::Numeric(values),
            },
            (Some(ColumnKind::Numeric), None) => {
                return Err(Error::InvalidColumn {
                    column: name,
                    message: "declared numeric but contains non-numeric values".into(),
                })
            }
            (Some(ColumnKind::Binary), parsed) => {
                let cells = match parsed {
                    Some(values) => Cells::Numeric(values),
                    None => Cells::Text(tokens),
                };
                Column {
                    name,
                    kind: ColumnKind::Binary,
                    cells,
                }
            }
        };
        column.validate()?;
        Ok(column)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.cells.is_missing(i)).collect()
    }

    pub fn has_missing(&self) -> bool {
        (0..self.len()).any(|i| self.cells.is_missing(i))
    }

    pub fn numeric_values(&self) -> Option<&[Option<f64>]> {
        match &self.cells {
            Cells::Numeric(v) => Some(v),
            Cells::Text(_) => None,
        }
    }

    /// Observed levels of a text column in lexicographic order with their counts.
    pub fn level_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        match &self.cells {
            Cells::Text(v) => {
                for s in v.iter().flatten() {
                    *counts.entry(s.clone()).or_insert(0) += 1;
                }
            }
            Cells::Numeric(v) => {
                for x in v.iter().flatten() {
                    *counts.entry(format_number(*x)).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    /// Cell rendered as a level label; numeric cells use their shortest round-trip form.
    pub fn level_at(&self, row: usize) -> Option<String> {
        match &self.cells {
            Cells::Text(v) => v[row].clone(),
            Cells::Numeric(v) => v[row].map(format_number),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.kind == ColumnKind::Binary && distinct_count(&self.cells) != 2 {
            return Err(Error::InvalidColumn {
                column: self.name.clone(),
                message: format!(
                    "binary columns need exactly two distinct values, found {}",
                    distinct_count(&self.cells)
                ),
            });
        }
        if self.kind == ColumnKind::Numeric && matches!(self.cells, Cells::Text(_)) {
            return Err(Error::InvalidColumn {
                column: self.name.clone(),
                message: "numeric column holds text cells".into(),
            });
        }
        Ok(())
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

pub(crate) fn format_number(x: f64) -> String {
    format!("{x}")
}

fn distinct_count(cells: &Cells) -> usize {
    match cells {
        Cells::Numeric(v) => v
            .iter()
            .flatten()
            .map(|x| x.to_bits())
            .collect::<BTreeSet<_>>()
            .len(),
        Cells::Text(v) => v.iter().flatten().collect::<BTreeSet<_>>().len(),
    }
}

/// Options for [`DataTable::from_csv`].
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub outcome: Option<String>,
    pub trials: Option<String>,
    pub kinds: BTreeMap<String, ColumnKind>,
}

impl IngestOptions {
    pub fn with_outcome(outcome: impl Into<String>) -> Self {
        IngestOptions {
            outcome: Some(outcome.into()),
            ..Default::default()
        }
    }

    pub fn trials(mut self, trials: impl Into<String>) -> Self {
        self.trials = Some(trials.into());
        self
    }

    pub fn kind(mut self, column: impl Into<String>, kind: ColumnKind) -> Self {
        self.kinds.insert(column.into(), kind);
        self
    }
}

/// Outcome values and binomial denominators, row-aligned with the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub y: Vec<f64>,
    pub trials: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    columns: Vec<Column>,
    n_rows: usize,
    outcome: Option<String>,
    trials: Option<String>,
}

impl DataTable {
    pub fn new(columns: Vec<Column>, outcome: Option<String>, trials: Option<String>) -> Result<Self> {
        let n_rows = columns.first().map(Column::len).unwrap_or(0);
        if columns.is_empty() || n_rows == 0 {
            return Err(Error::EmptyTable);
        }
        let mut seen = BTreeSet::new();
        for c in &columns {
            if c.len() != n_rows {
                return Err(Error::Dimension(format!(
                    "column `{}` has {} cells, expected {}",
                    c.name,
                    c.len(),
                    n_rows
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidColumn {
                    column: c.name.clone(),
                    message: "duplicate column name".into(),
                });
            }
            c.validate()?;
        }
        let table = DataTable {
            columns,
            n_rows,
            outcome,
            trials,
        };
        for name in table.outcome.iter().chain(table.trials.iter()) {
            if table.column(name).is_none() {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
        table.validate_trials()?;
        Ok(table)
    }

    /// Reads a headed, comma-separated table. Empty cells and `NA` are missing.
    pub fn from_csv<R: Read>(reader: R, options: &IngestOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::EmptyTable);
        }
        let mut tokens: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            // header is line 1
            let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            if record.len() != headers.len() {
                return Err(Error::Parse {
                    row: line,
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (j, field) in record.iter().enumerate() {
                let cell = if field.is_empty() || field == "NA" {
                    None
                } else {
                    Some(field.to_owned())
                };
                tokens[j].push(cell);
            }
        }
        if tokens[0].is_empty() {
            return Err(Error::EmptyTable);
        }
        for name in options.kinds.keys() {
            if !headers.contains(name) {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
        let columns = headers
            .into_iter()
            .zip(tokens)
            .map(|(name, toks)| {
                let kind = options.kinds.get(&name).copied();
                Column::from_tokens(name, toks, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        DataTable::new(columns, options.outcome.clone(), options.trials.clone())
    }

    pub fn from_path(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        DataTable::from_csv(std::io::BufReader::new(file), options)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn outcome(&self) -> Option<&str> {
        self.outcome.as_deref()
    }

    pub fn trials(&self) -> Option<&str> {
        self.trials.as_deref()
    }

    /// Columns other than the outcome and trials, in table order.
    pub fn predictor_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(move |c| {
            Some(c.name.as_str()) != self.outcome() && Some(c.name.as_str()) != self.trials()
        })
    }

    /// Outcome values and trial counts (all 1 without a trials column).
    pub fn response(&self) -> Result<Response> {
        let name = self
            .outcome
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("table has no outcome column".into()))?;
        let y = self.numeric_column(name)?;
        let trials = match &self.trials {
            Some(t) => self.numeric_column(t)?,
            None => vec![1.0; self.n_rows],
        };
        Ok(Response { y, trials })
    }

    fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
        let values = col.numeric_values().ok_or_else(|| Error::InvalidColumn {
            column: name.to_owned(),
            message: "must be numeric".into(),
        })?;
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| Error::InvalidColumn {
                    column: name.to_owned(),
                    message: format!("missing value at data row {}", i + 1),
                })
            })
            .collect()
    }

    fn validate_trials(&self) -> Result<()> {
        let Some(trials) = &self.trials else {
            return Ok(());
        };
        let n = self.numeric_column(trials)?;
        for (i, &ni) in n.iter().enumerate() {
            if ni < 1.0 || ni.fract() != 0.0 {
                return Err(Error::InvalidColumn {
                    column: trials.clone(),
                    message: format!("trial count at data row {} must be an integer >= 1, got {ni}", i + 1),
                });
            }
        }
        if let Some(outcome) = &self.outcome {
            let y = self.numeric_column(outcome)?;
            for (i, (&yi, &ni)) in y.iter().zip(&n).enumerate() {
                if !(0.0..=ni).contains(&yi) {
                    return Err(Error::InvalidColumn {
                        column: outcome.clone(),
                        message: format!("successes at data row {} must lie in [0, {ni}], got {yi}", i + 1),
                    });
                }
            }
        }
        Ok(())
    }

    /// Subset of rows, in the given order. Column kinds are kept as declared.
    pub fn select_rows(&self, rows: &[usize]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let cells = match &c.cells {
                    Cells::Numeric(v) => Cells::Numeric(rows.iter().map(|&r| v[r]).collect()),
                    Cells::Text(v) => Cells::Text(rows.iter().map(|&r| v[r].clone()).collect()),
                };
                Column {
                    name: c.name.clone(),
                    kind: c.kind,
                    cells,
                }
            })
            .collect();
        DataTable {
            columns,
            n_rows: rows.len(),
            outcome: self.outcome.clone(),
            trials: self.trials.clone(),
        }
    }

    /// Replaces the column with the same name.
    pub fn replace_column(&mut self, column: Column) -> Result<()> {
        if column.len() != self.n_rows {
            return Err(Error::Dimension(format!(
                "column `{}` has {} cells, expected {}",
                column.name,
                column.len(),
                self.n_rows
            )));
        }
        column.validate()?;
        let slot = self
            .columns
            .iter_mut()
            .find(|c| c.name == column.name)
            .ok_or_else(|| Error::MissingColumn(column.name.clone()))?;
        *slot = column;
        Ok(())
    }
}
