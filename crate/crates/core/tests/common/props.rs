//! Property suites with fixed seeds, shared by the `properties` tests and the acceptance report.

use std::fmt::Debug;

use bayesglm::family::pseudo_data;
use bayesglm::recipe::TermKind;
use bayesglm::{
    augment, build_recipe, default_prior, em_sigma_update, fit, make_folds, predict, solve_wls, CoefPrior,
    Column, DataTable, DesignMatrix, Family, FitControls, IngestOptions, PredictScale, PriorSpec,
    RecipeOptions, SigmaUpdate, WlsProblem,
};
use nalgebra::{DMatrix, DVector};
use num::{BigRational, ToPrimitive, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{logistic_loglik, random_logistic, separated_table};

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub fn all() -> Vec<Suite> {
    vec![
        ("P2 one-dimensional shrinkage", p2_shrinkage),
        ("P3 fixed-point self-consistency", p3_fixed_point),
        ("P4 separation finiteness", p4_separation),
        ("P5 standardization invariance", p5_standardization_invariance),
        ("P6 pseudo-data vs Newton derivatives", p6_pseudo_data),
        ("P7 interaction spread", p7_interaction_spread),
        ("recipe self-application moments", recipe_moments),
        ("recipe idempotence", recipe_idempotence),
        ("recipe scale invariance", recipe_scale_invariance),
        ("dummy coding", dummy_coding),
        ("recipe determinism", recipe_determinism),
        ("unstandardized linear predictor", unstandardize_linear_predictor),
        ("wls exact oracle", wls_oracle),
        ("wls weight scaling", wls_weight_scaling),
        ("wls prior rows restore full rank", wls_augmentation),
        ("wls residual orthogonality", wls_orthogonality),
        ("fold plan", folds),
        ("fit covariance and scales", fit_invariants),
    ]
}

fn runner(cases: u32, seed: u64) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &bytes),
    )
}

fn check<S>(cases: u32, seed: u64, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    runner(cases, seed).run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn dm(x: &DMatrix<f64>) -> DesignMatrix {
    DesignMatrix::from_matrix(x.clone())
}

/// Mixed table: two continuous columns, one 0/1 column, an optional three-level categorical, an
/// optional numeric column with missing cells, and a binary outcome.
fn random_table(rng: &mut ChaCha8Rng, categorical: bool, missing: bool) -> DataTable {
    let n = rng.random_range(8..40);
    let mut cols = vec![
        Column::numeric("a", (0..n).map(|_| Some(rng.random_range(-3.0..3.0))).collect()),
        Column::numeric("b", (0..n).map(|_| Some(rng.random_range(10.0..500.0))).collect()),
    ];
    let mut bin: Vec<Option<f64>> = (0..n).map(|_| Some(f64::from(rng.random_bool(0.3)))).collect();
    bin[0] = Some(0.0);
    bin[1] = Some(1.0);
    cols.push(Column::numeric("flag", bin));
    if categorical {
        let levels = ["red", "green", "blue"];
        let mut v: Vec<Option<String>> = (0..n)
            .map(|_| Some(levels[rng.random_range(0..3)].to_owned()))
            .collect();
        v[2] = Some("red".into());
        v[3] = Some("green".into());
        cols.push(Column::categorical("colour", v));
    }
    if missing {
        let mut v: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(0.0..1.0))).collect();
        v[n - 1] = None;
        if rng.random_bool(0.5) {
            v[n - 2] = None;
        }
        cols.push(Column::numeric("m", v));
    }
    let mut y: Vec<Option<f64>> = (0..n).map(|_| Some(f64::from(rng.random_bool(0.5)))).collect();
    y[0] = Some(0.0);
    y[1] = Some(1.0);
    cols.push(Column::numeric("y", y));
    DataTable::new(cols, Some("y".into()), None).unwrap()
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fit_design(x: &DMatrix<f64>, y: &[f64], n: &[f64], prior: &PriorSpec, controls: &FitControls) -> bayesglm::FitResult {
    fit(&dm(x), y, n, &Family::Logistic, prior, controls).unwrap()
}

pub fn p2_shrinkage() -> Result<(), String> {
    check(64, 2, any::<u64>(), |seed| {
        let mut rng = seeded(seed);
        let rows = rng.random_range(3..25);
        let x = DMatrix::from_fn(rows, 1, |_, _| rng.random_range(-2.0..2.0));
        let n: Vec<f64> = (0..rows).map(|_| f64::from(rng.random_range(1..=4u8))).collect();
        let y: Vec<f64> = n.iter().map(|&t| rng.random_range(0..=t as u32) as f64).collect();
        let score0: f64 = (0..rows).map(|i| x[(i, 0)] * (y[i] - n[i] / 2.0)).sum();
        prop_assume!(score0.abs() > 1e-6);
        let score = |b: f64| -> f64 {
            (0..rows)
                .map(|i| {
                    let mu = 1.0 / (1.0 + (-x[(i, 0)] * b).exp());
                    x[(i, 0)] * (y[i] - n[i] * mu)
                })
                .sum()
        };
        let identified = {
            let pos = (0..rows).any(|i| (x[(i, 0)] > 0.0 && y[i] < n[i]) || (x[(i, 0)] < 0.0 && y[i] > 0.0));
            let neg = (0..rows).any(|i| (x[(i, 0)] > 0.0 && y[i] > 0.0) || (x[(i, 0)] < 0.0 && y[i] < n[i]));
            pos && neg
        };
        for df in [1.0, 7.0, f64::INFINITY] {
            let s = rng.random_range(0.1..50.0);
            let prior = PriorSpec::new(vec![CoefPrior::student_t(df, s)]).unwrap();
            let b = fit_design(&x, &y, &n, &prior, &FitControls::default()).beta[0];
            ensure(b.signum() == score0.signum(), || format!("df {df}: sign of {b} vs score {score0}"))?;
            // between zero and the maximum likelihood estimate: the likelihood still pulls outward
            ensure(score(b) * b.signum() >= -1e-7, || format!("df {df}: {b} overshoots the MLE"))?;
            if identified {
                let mut last = 0.0;
                for scale in [1.0, 10.0, 100.0, 1000.0] {
                    let prior = PriorSpec::new(vec![CoefPrior::student_t(df, scale)]).unwrap();
                    let b = fit_design(&x, &y, &n, &prior, &FitControls::default()).beta[0].abs();
                    ensure(b >= last - 1e-9, || format!("df {df}: |beta| fell from {last} to {b} at scale {scale}"))?;
                    last = b;
                }
            }
        }
        Ok(())
    })
}

pub fn p3_fixed_point() -> Result<(), String> {
    check(64, 3, any::<u64>(), |seed| {
        let mut rng = seeded(seed);
        let p = rng.random_range(1..=4);
        let rows = rng.random_range(5..40);
        let (x, y, n) = random_logistic(&mut rng, rows, p);
        let coefs = (0..p)
            .map(|_| {
                let df = [1.0, 3.0, 7.0, f64::INFINITY][rng.random_range(0..4)];
                let s = [1.0, 2.5, 10.0][rng.random_range(0..3)];
                CoefPrior::student_t(df, s)
            })
            .collect();
        let prior = PriorSpec::new(coefs).unwrap();
        for update in [SigmaUpdate::PointEstimate, SigmaUpdate::PosteriorExpectation] {
            let controls = FitControls {
                sigma_update: update,
                ..FitControls::default()
            };
            let r = fit_design(&x, &y, &n, &prior, &controls);
            prop_assume!(r.converged);
            let prop: Vec<f64> = y.iter().zip(&n).map(|(a, b)| a / b).collect();
            let pd = pseudo_data(&Family::Logistic, &x, &prop, &n, &r.beta, 1.0).unwrap();
            let step = solve_wls(&augment(&pd.z, &pd.sigma_z2, &x, &prior, &r.sigma_hat).unwrap()).unwrap();
            for j in 0..p {
                let moved = (step.beta[j] - r.beta[j]).abs();
                ensure(moved < 1e-6, || format!("{update:?}: coefficient {j} moved {moved}"))?;
                let c = &prior.coefs[j];
                let v = match update {
                    SigmaUpdate::PointEstimate => 0.0,
                    SigmaUpdate::PosteriorExpectation => r.cov[(j, j)],
                };
                let want = if c.is_heavy_tailed() {
                    em_sigma_update(r.beta[j], v, c).sqrt()
                } else {
                    c.scale
                };
                ensure(r.sigma_hat[j] == want, || format!("sigma {j}: {} vs {want}", r.sigma_hat[j]))?;
            }
        }
        Ok(())
    })
}

pub fn p4_separation() -> Result<(), String> {
    check(64, 4, any::<u64>(), |seed| {
        let table = separated_table(&mut seeded(seed));
        let (_, r) = super::fit_logistic(&table, &Default::default(), false);
        ensure(r.beta.iter().all(|b| b.is_finite()), || format!("beta {:?}", r.beta))?;
        for j in 0..r.n_coef() {
            let v = r.cov[(j, j)];
            ensure(v.is_finite() && v > 0.0 && v < 1e6, || format!("V[{j},{j}] = {v}"))?;
        }
        Ok(())
    })
}

pub fn p5_standardization_invariance() -> Result<(), String> {
    check(48, 5, (any::<u64>(), 0.01f64..100.0), |(seed, c)| {
        let table = random_table(&mut seeded(seed), true, true);
        let mut scaled = table.clone();
        let column = table.column("b").unwrap();
        let values = column.numeric_values().unwrap().iter().map(|v| v.map(|v| v * c)).collect();
        scaled.replace_column(Column::numeric("b", values)).unwrap();
        let run = |t: &DataTable| {
            let recipe = build_recipe(t, &RecipeOptions::default()).unwrap();
            let design = recipe.apply(t).unwrap();
            let resp = recipe.response(t).unwrap();
            let prior = default_prior(&recipe, true);
            let r = fit(&design, &resp.y, &resp.trials, &Family::Logistic, &prior, &FitControls::default()).unwrap();
            let p = predict(&r, &recipe, t, PredictScale::Response).unwrap();
            (r, p)
        };
        let (a, pa) = run(&table);
        let (b, pb) = run(&scaled);
        ensure((&a.beta - &b.beta).amax() < 1e-8, || format!("beta {} vs {}", a.beta, b.beta))?;
        ensure((&a.cov - &b.cov).amax() < 1e-8, || "covariance differs".into())?;
        let dp = pa.iter().zip(&pb).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        ensure(dp < 1e-8, || format!("predictions differ by {dp}"))
    })
}

pub fn p6_pseudo_data() -> Result<(), String> {
    check(128, 6, any::<u64>(), |seed| {
        let mut rng = seeded(seed);
        let p = rng.random_range(1..=3);
        let rows = rng.random_range(1..10);
        let x = DMatrix::from_fn(rows, p, |_, _| rng.random_range(-1.0..1.0));
        let beta = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let n: Vec<f64> = (0..rows).map(|_| f64::from(rng.random_range(1..=20u8))).collect();
        let y: Vec<f64> = n.iter().map(|&t| rng.random_range(0..=t as u32) as f64).collect();
        let prop: Vec<f64> = y.iter().zip(&n).map(|(a, b)| a / b).collect();
        let pd = pseudo_data(&Family::Logistic, &x, &prop, &n, &beta, 1.0).unwrap();
        let eta = &x * &beta;
        for i in 0..rows {
            let ll = |e: f64| {
                logistic_loglik(&DMatrix::from_element(1, 1, 1.0), &y[i..=i], &n[i..=i], &[e])
            };
            let e = eta[i];
            let d1 = |h: f64| (ll(e + h) - ll(e - h)) / (2.0 * h);
            let d2 = |h: f64| (ll(e + h) - 2.0 * ll(e) + ll(e - h)) / (h * h);
            // Richardson extrapolation
            let h = 1e-2;
            let g = (4.0 * d1(h / 2.0) - d1(h)) / 3.0;
            let c = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
            let z = e - g / c;
            let s2 = -1.0 / c;
            let rz = (pd.z[i] - z).abs() / pd.z[i].abs().max(1.0);
            let rs = (pd.sigma_z2[i] - s2).abs() / s2;
            ensure(rz < 1e-6 && rs < 1e-6, || format!("row {i}: z rel err {rz}, sigma rel err {rs}"))?;
        }
        Ok(())
    })
}

pub fn p7_interaction_spread() -> Result<(), String> {
    check(32, 7, (1usize..5, any::<u64>()), |(reps, seed)| {
        let mut rng = seeded(seed);
        let mut rows = Vec::new();
        for _ in 0..reps {
            for k in 0..8u8 {
                rows.push([k & 1, (k >> 1) & 1, (k >> 2) & 1].map(|b| f64::from(b) - 0.5));
            }
        }
        let col = |j: usize| rows.iter().map(|r| Some(r[j])).collect::<Vec<_>>();
        let y: Vec<Option<f64>> = (0..rows.len()).map(|i| Some(f64::from(i % 2 == 0 || rng.random_bool(0.5)))).collect();
        let three = rows.iter().map(|r| Some(r[0] * r[1] * r[2])).collect();
        let table = DataTable::new(
            vec![
                Column::numeric("x1", col(0)),
                Column::numeric("x2", col(1)),
                Column::numeric("x3", col(2)),
                Column::numeric("x1x2x3", three),
                Column::numeric("y", y),
            ],
            Some("y".into()),
            None,
        )
        .unwrap();
        let recipe = build_recipe(&table, &RecipeOptions::default()).unwrap();
        let d = recipe.apply(&table).unwrap();
        let spread = |j: usize| {
            let c = d.x.column(j);
            c.max() - c.min()
        };
        for j in 1..=3 {
            ensure((spread(j) - 1.0).abs() < 1e-12, || format!("main effect {j} spread {}", spread(j)))?;
        }
        ensure((spread(4) / spread(1) - 0.25).abs() < 1e-12, || format!("interaction spread {}", spread(4)))?;
        let prior = default_prior(&recipe, true);
        ensure(prior.coefs[4] == prior.coefs[1], || "interaction prior differs from main effect".into())
    })
}

pub fn recipe_moments() -> Result<(), String> {
    check(64, 11, any::<u64>(), |seed| {
        let table = random_table(&mut seeded(seed), true, false);
        let recipe = build_recipe(&table, &RecipeOptions::default()).unwrap();
        let d = recipe.apply(&table).unwrap();
        let n = d.nrows() as f64;
        for (j, term) in recipe.terms.iter().enumerate() {
            let c = d.x.column(j);
            let mean = c.sum() / n;
            match term.kind {
                TermKind::CenteredBinary { .. } => {
                    ensure(mean.abs() < 1e-12, || format!("{}: mean {mean}", term.name))?;
                    ensure((c.max() - c.min() - 1.0).abs() < 1e-12, || format!("{}: spread", term.name))?;
                }
                TermKind::ScaledNumeric { half_spread, .. } => {
                    ensure(half_spread > 0.0, || "half-spread".into())?;
                    let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                    ensure(mean.abs() < 1e-12 && (sd - 0.5).abs() < 1e-12, || {
                        format!("{}: mean {mean}, sd {sd}", term.name)
                    })?;
                }
                _ => {}
            }
        }
        Ok(())
    })
}

pub fn recipe_idempotence() -> Result<(), String> {
    check(64, 12, any::<u64>(), |seed| {
        let table = random_table(&mut seeded(seed), false, false);
        let recipe = build_recipe(&table, &RecipeOptions::default()).unwrap();
        let d = recipe.apply(&table).unwrap();
        let mut cols: Vec<Column> = recipe
            .terms
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, t)| Column::numeric(t.name.clone(), d.x.column(j).iter().map(|&v| Some(v)).collect()))
            .collect();
        cols.push(table.column("y").unwrap().clone());
        let again = DataTable::new(cols, Some("y".into()), None).unwrap();
        let second = build_recipe(&again, &RecipeOptions::default()).unwrap();
        for t in &second.terms {
            let (a, b) = t.affine();
            ensure((a - 1.0).abs() < 1e-10 && b.abs() < 1e-10, || format!("{}: a = {a}, b = {b}", t.name))?;
        }
        Ok(())
    })
}

pub fn recipe_scale_invariance() -> Result<(), String> {
    check(64, 13, (any::<u64>(), 1e-3f64..1e3), |(seed, c)| {
        let table = random_table(&mut seeded(seed), true, true);
        for name in ["a", "b", "m"] {
            let mut scaled = table.clone();
            let values = table.column(name).unwrap().numeric_values().unwrap().iter().map(|v| v.map(|v| v * c)).collect();
            scaled.replace_column(Column::numeric(name, values)).unwrap();
            let x0 = build_recipe(&table, &RecipeOptions::default()).unwrap().apply(&table).unwrap().x;
            let x1 = build_recipe(&scaled, &RecipeOptions::default()).unwrap().apply(&scaled).unwrap().x;
            ensure((&x0 - &x1).amax() < 1e-10, || format!("column {name} scaled by {c}"))?;
        }
        Ok(())
    })
}

pub fn dummy_coding() -> Result<(), String> {
    check(64, 14, any::<u64>(), |seed| {
        let table = random_table(&mut seeded(seed), true, false);
        let recipe = build_recipe(&table, &RecipeOptions::default()).unwrap();
        let counts = table.column("colour").unwrap().level_counts();
        let dummies: Vec<usize> = (0..recipe.terms.len())
            .filter(|&j| matches!(recipe.terms[j].kind, TermKind::Dummy { .. }))
            .collect();
        ensure(dummies.len() == counts.len() - 1, || "dummy count".into())?;
        let top = counts.values().max().copied().unwrap();
        for &j in &dummies {
            if let TermKind::Dummy { reference, .. } = &recipe.terms[j].kind {
                ensure(counts[reference] == top, || format!("reference {reference} is not most frequent"))?;
            }
        }
        let d = recipe.apply(&table).unwrap();
        for i in 0..d.nrows() {
            let active: f64 = dummies.iter().map(|&j| d.x[(i, j)]).sum();
            ensure(active <= 1.0, || format!("row {i} activates {active} dummies"))?;
        }
        Ok(())
    })
}

fn to_csv(table: &DataTable) -> String {
    let mut out = table.columns().iter().map(|c| c.name.clone()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for i in 0..table.n_rows() {
        let row: Vec<String> = table
            .columns()
            .iter()
            .map(|c| match c.numeric_values() {
                Some(v) => v[i].map(|x| format!("{x}")).unwrap_or_default(),
                None => c.level_at(i).unwrap_or_default(),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn recipe_determinism() -> Result<(), String> {
    check(32, 15, any::<u64>(), |seed| {
        let csv = to_csv(&random_table(&mut seeded(seed), true, true));
        let build = || {
            let t = DataTable::from_csv(csv.as_bytes(), &IngestOptions::with_outcome("y")).unwrap();
            build_recipe(&t, &RecipeOptions::default()).unwrap().to_json().unwrap()
        };
        ensure(build() == build(), || "recipes differ".into())
    })
}

pub fn unstandardize_linear_predictor() -> Result<(), String> {
    check(64, 16, any::<u64>(), |seed| {
        let mut rng = seeded(seed);
        let table = random_table(&mut rng, true, false);
        let recipe = build_recipe(&table, &RecipeOptions::default()).unwrap();
        let j = recipe.terms.len();
        let beta = DVector::from_fn(j, |_, _| rng.random_range(-3.0..3.0));
        let (beta_raw, _) = bayesglm::unstandardize_coefficients(&recipe, &beta, &DMatrix::identity(j, j)).unwrap();
        let eta_std = recipe.apply(&table).unwrap().x * &beta;
        let eta_raw = recipe.raw_design(&table).unwrap() * &beta_raw;
        let scale = eta_std.amax().max(1.0);
        ensure((&eta_std - &eta_raw).amax() < 1e-10 * scale, || "linear predictors differ".into())
    })
}

fn random_wls(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let p = rng.random_range(1..=8);
    let m = rng.random_range((2 * p + 2)..=50);
    let x = DMatrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
    let z = DVector::from_fn(m, |_, _| rng.random_range(-5.0..5.0));
    let w = DVector::from_fn(m, |_, _| rng.random_range(0.1..10.0));
    (x, z, w)
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

/// Normal equations solved in exact rational arithmetic.
fn rational_wls(x: &DMatrix<f64>, z: &DVector<f64>, w: &DVector<f64>) -> Vec<f64> {
    let (m, p) = x.shape();
    let mut a = vec![vec![BigRational::zero(); p + 1]; p];
    for i in 0..m {
        let wi = exact(w[i]);
        for r in 0..p {
            let wx = &wi * exact(x[(i, r)]);
            for c in 0..p {
                a[r][c] += &wx * exact(x[(i, c)]);
            }
            a[r][p] += &wx * exact(z[i]);
        }
    }
    for col in 0..p {
        let pivot = (col..p).find(|&r| !a[r][col].is_zero()).expect("nonsingular");
        a.swap(col, pivot);
        for r in 0..p {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..=p {
                    let d = &f * &a[col][c];
                    a[r][c] -= d;
                }
            }
        }
    }
    (0..p).map(|r| (&a[r][p] / &a[r][r]).to_f64().unwrap()).collect()
}

pub fn wls_oracle() -> Result<(), String> {
    check(48, 21, any::<u64>(), |seed| {
        let (x, z, w) = random_wls(&mut seeded(seed));
        let s = solve_wls(&WlsProblem::new(x.clone(), z.clone(), w.clone()).unwrap()).unwrap();
        let want = rational_wls(&x, &z, &w);
        let scale = want.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (j, v) in want.iter().enumerate() {
            ensure((s.beta[j] - v).abs() <= 1e-8 * scale, || format!("beta[{j}] {} vs {v}", s.beta[j]))?;
        }
        Ok(())
    })
}

pub fn wls_weight_scaling() -> Result<(), String> {
    check(64, 22, (any::<u64>(), 1e-3f64..1e3), |(seed, c)| {
        let (x, z, w) = random_wls(&mut seeded(seed));
        let a = solve_wls(&WlsProblem::new(x.clone(), z.clone(), w.clone()).unwrap()).unwrap();
        let b = solve_wls(&WlsProblem::new(x, z, w * c).unwrap()).unwrap();
        let bs = a.beta.amax().max(1.0);
        ensure((&a.beta - &b.beta).amax() < 1e-10 * bs, || "beta changed".into())?;
        let vs = a.cov.amax();
        ensure((&a.cov / c - &b.cov).amax() < 1e-10 * vs / c, || "covariance not divided by c".into())
    })
}

pub fn wls_augmentation() -> Result<(), String> {
    check(64, 23, any::<u64>(), |seed| {
        let mut rng = seeded(seed);
        let p = rng.random_range(2..=6);
        let rows = rng.random_range(1..20);
        let mut x = DMatrix::from_fn(rows, p, |_, _| rng.random_range(-1.0..1.0));
        // duplicate and zero columns
        let src = x.column(0).into_owned();
        x.set_column(1, &src);
        if p > 2 {
            x.column_mut(2).fill(0.0);
        }
        let z = DVector::from_fn(rows, |_, _| rng.random_range(-2.0..2.0));
        let s2 = DVector::from_fn(rows, |_, _| rng.random_range(0.5..4.0));
        let scales: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..20.0)).collect();
        let prior = PriorSpec::new(scales.iter().map(|&s| CoefPrior::normal(s)).collect()).unwrap();
        let bare = solve_wls(&WlsProblem::new(x.clone(), z.clone(), s2.map(|v| 1.0 / v)).unwrap()).unwrap();
        ensure(!bare.rank_ok, || "duplicate columns should be rank deficient".into())?;
        let s = solve_wls(&augment(&z, &s2, &x, &prior, &scales).unwrap()).unwrap();
        ensure(s.rank_ok, || "augmented system should be full rank".into())
    })
}

pub fn wls_orthogonality() -> Result<(), String> {
    check(64, 24, any::<u64>(), |seed| {
        let (x, z, w) = random_wls(&mut seeded(seed));
        let s = solve_wls(&WlsProblem::new(x.clone(), z.clone(), w.clone()).unwrap()).unwrap();
        let r = &z - &x * &s.beta;
        let g = x.transpose() * r.component_mul(&w);
        let scale = x.abs().transpose() * z.abs().component_mul(&w);
        ensure(g.amax() <= 1e-8 * scale.amax(), || format!("X'W r = {g}"))?;
        ensure(s.cov == s.cov.transpose(), || "V not symmetric".into())?;
        ensure(s.rank_ok && s.cov.clone().cholesky().is_some(), || "V not positive definite".into())
    })
}

pub fn folds() -> Result<(), String> {
    check(128, 31, (2usize..200, 2usize..20, any::<u64>()), |(n, k, seed)| {
        prop_assume!(k <= n);
        let plan = make_folds(n, k, seed).unwrap();
        let sizes = plan.fold_sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        ensure(hi - lo <= 1, || format!("sizes {sizes:?}"))?;
        ensure(sizes.iter().sum::<usize>() == n && plan.assignment.iter().all(|&f| f < k), || "assignment".into())?;
        let mut all: Vec<usize> = (0..k).flat_map(|f| plan.test_rows(f)).collect();
        all.sort_unstable();
        ensure(all == (0..n).collect::<Vec<_>>(), || "rows not covered exactly once".into())?;
        ensure(make_folds(n, k, seed).unwrap() == plan, || "not reproducible".into())
    })
}

pub fn fit_invariants() -> Result<(), String> {
    check(64, 32, any::<u64>(), |seed| {
        let mut rng = seeded(seed);
        let p = rng.random_range(1..=4);
        let rows = rng.random_range(3..30);
        let (x, y, n) = random_logistic(&mut rng, rows, p);
        let prior = PriorSpec::uniform(p, CoefPrior::cauchy(2.5)).unwrap();
        let r = fit_design(&x, &y, &n, &prior, &FitControls::default());
        ensure(r.cov == r.cov.transpose() && r.cov.clone().cholesky().is_some(), || "V not SPD".into())?;
        ensure(r.sigma_hat.iter().all(|s| s.is_finite() && *s > 0.0), || format!("sigma {:?}", r.sigma_hat))
    })
}
