//! Dense least squares via Householder QR with column pivoting.
//!
//! The production path never forms `XᵀX`. A normal-equations solver is kept
//! alongside as an independent oracle for tests.

use nalgebra::{DMatrix, DVector};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub rank: usize,
    pub rss: f64,
    /// `(XᵀX)⁻¹`, in original column order.
    pub xtx_inverse: DMatrix<f64>,
    /// `n - rank`.
    pub dof: usize,
}

/// Householder QR of `X P`, with the reflectors kept explicitly.
struct PivotedQr {
    /// Upper triangle holds R.
    r: DMatrix<f64>,
    reflectors: Vec<Option<DVector<f64>>>,
    perm: Vec<usize>,
}

impl PivotedQr {
    fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut a = x.clone();
        let mut perm: Vec<usize> = (0..p).collect();
        let steps = n.min(p);
        let mut reflectors = Vec::with_capacity(steps);

        for k in 0..steps {
            // Pivot on the largest remaining column norm; ties keep the column
            // that came first in the caller's order.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..p {
                let norm2 = a.view((k, j), (n - k, 1)).norm_squared();
                if norm2 > best_norm || (norm2 == best_norm && perm[j] < perm[best]) {
                    best = j;
                    best_norm = norm2;
                }
            }
            if best != k {
                a.swap_columns(k, best);
                perm.swap(k, best);
            }

            let mut v: DVector<f64> = a.view((k, k), (n - k, 1)).column(0).into_owned();
            let alpha = v.norm();
            if alpha == 0.0 {
                reflectors.push(None);
                continue;
            }
            let r_kk = if v[0] >= 0.0 { -alpha } else { alpha };
            v[0] -= r_kk;
            let vtv = v.norm_squared();
            if vtv == 0.0 {
                reflectors.push(None);
                continue;
            }
            a[(k, k)] = r_kk;
            for i in k + 1..n {
                a[(i, k)] = 0.0;
            }
            for j in k + 1..p {
                let mut col = a.view_mut((k, j), (n - k, 1));
                let mut col = col.column_mut(0);
                let s = 2.0 * v.dot(&col) / vtv;
                col.axpy(-s, &v, 1.0);
            }
            reflectors.push(Some(v));
        }
        PivotedQr { r: a, reflectors, perm }
    }

    fn apply_qt(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = y.len();
        let mut c = y.clone();
        for (k, v) in self.reflectors.iter().enumerate() {
            let Some(v) = v else { continue };
            let mut tail = c.rows_mut(k, n - k);
            let s = 2.0 * v.dot(&tail) / v.norm_squared();
            tail.axpy(-s, v, 1.0);
        }
        c
    }

    fn diag_abs(&self, k: usize) -> f64 {
        self.r[(k, k)].abs()
    }

    /// Numerical rank under `τ = max(n, p)·ε·|r₀₀|`.
    fn rank(&self) -> usize {
        let (n, p) = self.r.shape();
        let steps = n.min(p);
        if steps == 0 {
            return 0;
        }
        let largest = self.diag_abs(0);
        let tol = n.max(p) as f64 * f64::EPSILON * largest;
        (0..steps)
            .take_while(|&k| self.reflectors[k].is_some() && self.diag_abs(k) > tol)
            .count()
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidSpec(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if p == 0 || n < p {
        return Err(Error::Underdetermined { rows: n, cols: p });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    Ok(())
}

/// Least-squares fit with columns named by index (`x0`, `x1`, ...) in errors.
pub fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LsFit> {
    let labels: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    solve_labeled(x, y, &labels)
}

/// Least-squares fit of a design matrix; rank errors name the design's columns.
pub fn fit_design(design: &DesignMatrix) -> Result<LsFit> {
    solve_labeled(&design.x, &design.y, &design.column_labels)
}

/// Minimises `‖y − Xβ‖²`. A rank-deficient `X` is an error listing the
/// columns rejected by pivoting, never a silently identified solution.
pub fn solve_labeled(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<LsFit> {
    check_inputs(x, y)?;
    let (n, p) = x.shape();
    let qr = PivotedQr::new(x);
    let rank = qr.rank();
    if rank < p {
        let mut dependent: Vec<usize> = qr.perm[rank..].to_vec();
        dependent.sort_unstable();
        return Err(Error::RankDeficient {
            rank,
            cols: p,
            dependent: dependent
                .into_iter()
                .map(|j| labels.get(j).cloned().unwrap_or_else(|| format!("x{j}")))
                .collect(),
        });
    }

    let r = qr.r.view((0, 0), (p, p)).upper_triangle();
    let qty = qr.apply_qt(y);
    let z = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .ok_or(Error::SingularNormalEquations)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularNormalEquations)?;
    let inv_perm = &r_inv * r_inv.transpose();

    let mut coefficients = DVector::zeros(p);
    let mut xtx_inverse = DMatrix::zeros(p, p);
    for (i, &pi) in qr.perm.iter().enumerate() {
        coefficients[pi] = z[i];
        for (j, &pj) in qr.perm.iter().enumerate() {
            xtx_inverse[(pi, pj)] = inv_perm[(i, j)];
        }
    }
    Ok(finish(x, y, coefficients, xtx_inverse, rank, n))
}

fn finish(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    coefficients: DVector<f64>,
    xtx_inverse: DMatrix<f64>,
    rank: usize,
    n: usize,
) -> LsFit {
    let fitted = x * &coefficients;
    let residuals = y - &fitted;
    let rss = residuals.norm_squared();
    LsFit {
        coefficients,
        residuals,
        fitted,
        rank,
        rss,
        xtx_inverse,
        dof: n - rank,
    }
}

/// Test oracle: `β = (XᵀX)⁻¹Xᵀy` by Cholesky on the normal equations.
/// Squares the condition number; do not use on production paths.
pub fn solve_normal_equations_oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LsFit> {
    check_inputs(x, y)?;
    let (n, p) = x.shape();
    let xt = x.transpose();
    let xtx = &xt * x;
    let xty = &xt * y;
    let chol = xtx.cholesky().ok_or(Error::SingularNormalEquations)?;
    let coefficients = chol.solve(&xty);
    let xtx_inverse = chol.inverse();
    Ok(finish(x, y, coefficients, xtx_inverse, p, n))
}
