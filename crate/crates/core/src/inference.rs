//! Coefficient inference and goodness of fit for an intercept model.

use serde::Serialize;

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::lstsq::LsFit;
use crate::special::regularized_incomplete_beta;

pub const DEFAULT_ALPHA: f64 = 0.10;

/// Residual sums of squares at or below `tss · EXACT_FIT_RATIO` are treated
/// as an exact fit: the response is reproduced to round-off and standard
/// errors carry no information.
pub const EXACT_FIT_RATIO: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    /// `None` on an exact fit, where `estimate / 0` has no meaning.
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceTable {
    pub rows: Vec<CoefficientRow>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// `None` on an exact fit (F is unbounded).
    pub f_value: Option<f64>,
    pub f_p_value: Option<f64>,
    pub n: usize,
    /// Regressors excluding the intercept.
    pub k: usize,
    pub rss: f64,
    pub tss: f64,
    pub sigma2_hat: f64,
    pub alpha: f64,
    pub exact_fit: bool,
}

impl InferenceTable {
    pub fn row(&self, label: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.label.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_value: Option<f64>,
    pub tss: f64,
    pub exact_fit: bool,
}

fn total_sum_of_squares(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

/// R², adjusted R² and the overall F statistic of an intercept model with
/// `k` slope regressors.
pub fn goodness_of_fit(fit: &LsFit, y: &[f64], k: usize) -> Result<GoodnessOfFit> {
    let n = y.len();
    if k == 0 {
        return Err(Error::NoRegressors);
    }
    if n <= k + 1 {
        return Err(Error::ZeroDof);
    }
    let tss = total_sum_of_squares(y);
    if tss <= 0.0 {
        return Err(Error::ConstantResponse);
    }
    let df_resid = (n - k - 1) as f64;
    if fit.rss <= tss * EXACT_FIT_RATIO {
        return Ok(GoodnessOfFit {
            r_squared: 1.0,
            adj_r_squared: 1.0,
            f_value: None,
            tss,
            exact_fit: true,
        });
    }
    let r2 = 1.0 - fit.rss / tss;
    let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / df_resid;
    let f = (r2 / k as f64) / ((1.0 - r2) / df_resid);
    Ok(GoodnessOfFit {
        r_squared: r2,
        adj_r_squared: adj,
        f_value: Some(f.max(0.0)),
        tss,
        exact_fit: false,
    })
}

/// Two-sided tail `P(|T| ≥ |t|)` of Student's t with `dof` degrees of freedom.
pub fn student_t_sf(t: f64, dof: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFiniteStatistic);
    }
    if !dof.is_finite() || dof < 1.0 {
        return Err(Error::InvalidDof(dof));
    }
    let x = dof / (dof + t * t);
    Ok(regularized_incomplete_beta(dof / 2.0, 0.5, x).clamp(0.0, 1.0))
}

/// Upper tail of the F distribution, `P(F(d1, d2) ≥ f)`.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let x = d2 / (d2 + d1 * f);
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, x).clamp(0.0, 1.0)
}

/// Standard errors, t-values, two-sided p-values and significance flags at
/// `alpha`, with σ̂² = rss / (n − p).
pub fn compute_inference(fit: &LsFit, design: &DesignMatrix, alpha: f64) -> Result<InferenceTable> {
    if !design.has_intercept {
        return Err(Error::NoIntercept);
    }
    let n = design.nrows();
    let p = design.ncols();
    if fit.rank < p {
        return Err(Error::RankDeficient {
            rank: fit.rank,
            cols: p,
            dependent: Vec::new(),
        });
    }
    if n <= p {
        return Err(Error::ZeroDof);
    }
    let k = p - 1;
    let y: Vec<f64> = design.y.iter().copied().collect();
    let gof = goodness_of_fit(fit, &y, k)?;
    let dof = (n - p) as f64;
    let sigma2 = if gof.exact_fit { 0.0 } else { fit.rss / dof };

    let rows = design
        .column_labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            let estimate = fit.coefficients[j];
            let std_error = (sigma2 * fit.xtx_inverse[(j, j)]).sqrt();
            let (t_value, p_value) = if gof.exact_fit {
                (None, None)
            } else {
                let t = estimate / std_error;
                (Some(t), student_t_sf(t, dof).ok())
            };
            CoefficientRow {
                label: label.clone(),
                estimate,
                std_error,
                t_value,
                p_value,
                significant: p_value.is_some_and(|pv| pv < alpha),
            }
        })
        .collect();

    Ok(InferenceTable {
        rows,
        r_squared: gof.r_squared,
        adj_r_squared: gof.adj_r_squared,
        f_value: gof.f_value,
        f_p_value: gof.f_value.map(|f| f_sf(f, k as f64, dof)),
        n,
        k,
        rss: fit.rss,
        tss: gof.tss,
        sigma2_hat: sigma2,
        alpha,
        exact_fit: gof.exact_fit,
    })
}
