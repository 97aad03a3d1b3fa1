//! Dense weighted least squares with covariance, solved by orthogonal factorization of the
//! `sqrt(w)`-scaled system rather than by forming `X'WX`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance on the factorization pivots / singular values below which a direction is
/// treated as unidentified.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsProblem {
    x: DMatrix<f64>,
    z: DVector<f64>,
    w: DVector<f64>,
}

impl WlsProblem {
    pub fn new(x: DMatrix<f64>, z: DVector<f64>, w: DVector<f64>) -> Result<Self> {
        if x.nrows() != z.len() || z.len() != w.len() {
            return Err(Error::Dimension(format!(
                "X is {}x{}, z has {} entries, w has {}",
                x.nrows(),
                x.ncols(),
                z.len(),
                w.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Dimension("weighted least squares needs at least one row".into()));
        }
        if let Some((row, &value)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidWeight { row, value });
        }
        Ok(WlsProblem { x, z, w })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution {
    pub beta: DVector<f64>,
    /// `(X'WX)^-1`, or its pseudo-inverse when `rank_ok` is false.
    pub cov: DMatrix<f64>,
    pub rank_ok: bool,
}

/// Minimizes `sum_i w_i (z_i - X_i beta)^2`.
///
/// Uses a Householder QR of the scaled system; if any pivot of `R` falls below
/// [`RANK_TOLERANCE`] relative to the largest, falls back to an SVD, which decides the rank and
/// returns the minimum-norm solution.
pub fn solve_wls(problem: &WlsProblem) -> Result<WlsSolution> {
    let (m, p) = problem.x.shape();
    let mut xs = problem.x.clone();
    let mut zs = problem.z.clone();
    for i in 0..m {
        let s = problem.w[i].sqrt();
        xs.row_mut(i).scale_mut(s);
        zs[i] *= s;
    }
    if p == 0 {
        return Ok(WlsSolution {
            beta: DVector::zeros(0),
            cov: DMatrix::zeros(0, 0),
            rank_ok: true,
        });
    }
    if m >= p {
        if let Some(sol) = solve_qr(xs.clone(), &zs) {
            return Ok(sol);
        }
    }
    Ok(solve_svd(xs, &zs))
}

fn solve_qr(xs: DMatrix<f64>, zs: &DVector<f64>) -> Option<WlsSolution> {
    let p = xs.ncols();
    let qr = xs.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(diag_max > 0.0) || r.diagonal().iter().any(|v| v.abs() <= RANK_TOLERANCE * diag_max) {
        return None;
    }
    let mut qtz = zs.clone();
    qr.q_tr_mul(&mut qtz);
    let qtz = qtz.rows(0, p).into_owned();
    let beta = r.solve_upper_triangular(&qtz)?;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p))?;
    let cov = &r_inv * r_inv.transpose();
    Some(WlsSolution {
        beta,
        cov: symmetrize(cov),
        rank_ok: true,
    })
}

fn solve_svd(xs: DMatrix<f64>, zs: &DVector<f64>) -> WlsSolution {
    let p = xs.ncols();
    let svd = xs.svd(true, true);
    let u = svd.u.as_ref().expect("computed");
    let v_t = svd.v_t.as_ref().expect("computed");
    let s_max = svd.singular_values.iter().fold(0.0f64, |a, &v| a.max(v));
    let cutoff = RANK_TOLERANCE * s_max;
    let mut beta = DVector::zeros(p);
    let mut cov = DMatrix::zeros(p, p);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if !(s > cutoff) {
            continue;
        }
        rank += 1;
        let v_k = v_t.row(k).transpose();
        let coef = u.column(k).dot(zs) / s;
        beta += &v_k * coef;
        cov += &v_k * v_k.transpose() / (s * s);
    }
    WlsSolution {
        beta,
        cov: symmetrize(cov),
        rank_ok: rank == p,
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
