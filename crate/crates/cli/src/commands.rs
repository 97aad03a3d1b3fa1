use std::fs;
use std::io::{self, Write};
use std::path::Path;

use bayesglm::report::{render_table, write_full_csv, write_pooled_csv, score_line};
use bayesglm::{
    build_recipe, cross_validate, default_grid, fit, predict, prior_from_defaults, CvConfig, DataTable, Family,
    FitControls, IngestOptions, PredictScale, PriorDefaults, PriorGridPoint, RecipeOptions, SavedFit,
};

use crate::args::{Cli, Command, CvArgs, DataArgs, FamilyArg, FitArgs, Format, PredictArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(bayesglm::Error),
    /// Data error tied to a file.
    Input(String, bayesglm::Error),
}

impl From<bayesglm::Error> for CliError {
    fn from(e: bayesglm::Error) -> Self {
        CliError::Data(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Cv(a) => cmd_cv(&a),
    }
}

fn family(arg: FamilyArg) -> Family {
    match arg {
        FamilyArg::Logistic => Family::Logistic,
        FamilyArg::Linear => Family::linear(),
        FamilyArg::Poisson => Family::Poisson,
    }
}

fn read_table(data: &DataArgs) -> Result<DataTable> {
    let mut options = IngestOptions::with_outcome(&data.outcome);
    if let Some(t) = &data.trials {
        options = options.trials(t);
    }
    DataTable::from_path(&data.input, &options).map_err(|e| CliError::Input(data.input.display().to_string(), e))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

/// Writes to `path` through a temporary file in the same directory, or to stdout.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| CliError::from(e.error))?;
        }
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let defaults = PriorDefaults {
        scale: positive("prior-scale", a.prior_scale)?,
        df: positive("prior-df", a.prior_df)?,
        intercept_scale: positive("intercept-scale", a.intercept_scale)?,
        intercept_df: a.prior_df,
    };
    if a.max_iter == 0 {
        return Err(CliError::Usage("--max-iter must be at least 1".into()));
    }
    let family = family(a.family);
    let table = read_table(&a.data)?;
    let standardize = !a.data.no_standardize;
    let options = RecipeOptions {
        standardize,
        scale_outcome: standardize && matches!(family, Family::Linear { .. }),
        ..RecipeOptions::default()
    };
    let recipe = build_recipe(&table, &options)?;
    let design = recipe.apply(&table)?;
    let response = recipe.response(&table)?;
    let prior = prior_from_defaults(&recipe, standardize, &defaults);
    let controls = FitControls {
        max_iter: a.max_iter,
        ..FitControls::default()
    };
    let result = fit(&design, &response.y, &response.trials, &family, &prior, &controls)?;
    if !result.converged {
        eprintln!(
            "warning: fit did not converge in {} iterations; reporting the last iterate",
            result.n_iter
        );
    }
    let bytes = match a.format {
        Format::Table => render_table(&result).into_bytes(),
        Format::Json => {
            let mut s = SavedFit::new(&result, &recipe)?.to_json()?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let saved = SavedFit::new(&result, &recipe)?;
            let mut out = String::from("term,coef_est,coef_sd,coef_est_raw,coef_sd_raw\n");
            for j in 0..saved.beta.len() {
                let raw = |v: &Option<Vec<f64>>| v.as_ref().map(|v| v[j].to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_field(&saved.predictor_names[j]),
                    saved.beta[j],
                    saved.std_errors[j],
                    raw(&saved.beta_raw),
                    raw(&saved.std_errors_raw)
                ));
            }
            out.into_bytes()
        }
    };
    emit(a.out.output.as_deref(), &bytes)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    if a.format != Format::Csv {
        return Err(CliError::Usage("predict writes csv only".into()));
    }
    let model = a.model.display().to_string();
    let text = fs::read_to_string(&a.model).map_err(|e| CliError::Input(model.clone(), e.into()))?;
    let saved = SavedFit::from_json(&text).map_err(|e| CliError::Input(model, e))?;
    let table = DataTable::from_path(&a.input, &IngestOptions::default())
        .map_err(|e| CliError::Input(a.input.display().to_string(), e))?;
    let result = saved.to_fit_result();
    let scale = if a.link_scale {
        PredictScale::Link
    } else {
        PredictScale::Response
    };
    let design = saved.recipe.apply(&table)?;
    for w in &design.warnings {
        eprintln!("warning: {w}");
    }
    let values = predict(&result, &saved.recipe, &table, scale)?;
    let label = match (a.link_scale, result.family) {
        (true, _) => "linear_predictor",
        (false, Family::Logistic) => "probability",
        (false, Family::Poisson) => "rate",
        (false, Family::Linear { .. }) => "prediction",
    };
    let mut out = format!("row,{label}\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    emit(a.out.output.as_deref(), out.as_bytes())
}

/// Parses `nu:scale` pairs and `flat`, separated by commas.
pub fn parse_grid(spec: &str) -> std::result::Result<Vec<PriorGridPoint>, String> {
    let mut grid = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item.eq_ignore_ascii_case("flat") {
            grid.push(PriorGridPoint::Flat);
            continue;
        }
        let (nu, scale) = item
            .split_once(':')
            .ok_or_else(|| format!("grid entry `{item}` is not `nu:scale` or `flat`"))?;
        let nu: f64 = nu.trim().parse().map_err(|_| format!("bad nu in `{item}`"))?;
        let scale: f64 = scale.trim().parse().map_err(|_| format!("bad scale in `{item}`"))?;
        grid.push(PriorGridPoint::new(nu, scale).map_err(|e| e.to_string())?);
    }
    if grid.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(grid)
}

fn cmd_cv(a: &CvArgs) -> Result<()> {
    if a.format != Format::Csv {
        return Err(CliError::Usage("cv writes csv only".into()));
    }
    let grid = match &a.grid {
        Some(spec) => parse_grid(spec).map_err(CliError::Usage)?,
        None => default_grid(),
    };
    let table = read_table(&a.data)?;
    let folds = a.folds as usize;
    if folds > table.n_rows() {
        return Err(CliError::Usage(format!(
            "--folds {folds} exceeds the {} rows in the table",
            table.n_rows()
        )));
    }
    let config = CvConfig {
        folds,
        seed: a.seed,
        recipe: RecipeOptions {
            standardize: !a.data.no_standardize,
            ..CvConfig::default().recipe
        },
        ..CvConfig::default()
    };
    let report = cross_validate(&table, &grid, &config)?;
    let mut bytes = Vec::new();
    if a.pooled {
        write_pooled_csv(&report, &mut bytes)?;
    } else {
        write_full_csv(&report, &mut bytes)?;
    }
    emit(a.out.output.as_deref(), &bytes)?;
    if let Some(line) = score_line(&report) {
        if a.out.output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    let failures: usize = report.grid.iter().map(|g| g.fit_failures()).sum();
    if failures > 0 {
        eprintln!("warning: {failures} fold fit(s) did not converge or were unidentified");
    }
    Ok(())
}
