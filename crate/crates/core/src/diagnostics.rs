//! Descriptive statistics, correlation blocks, variance inflation factors and
//! the zoning share of explained variance.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::design::{build_design_matrix, DesignMatrix, ModelSpec, Transform, INTERCEPT, RESPONSE_LABEL};
use crate::error::{Error, Result};
use crate::inference::goodness_of_fit;
use crate::lstsq::{fit_design, solve_labeled};
use crate::parcel::{ParcelTable, Zone};

pub const VIF_FLAG: f64 = 10.0;
pub const DEFAULT_CORR_FLAG: f64 = 0.8;
pub const HYPOTHESIS_SHARE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableStats {
    pub label: String,
    pub mean: f64,
    pub highest: f64,
    pub lowest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneDensity {
    pub zone: Zone,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub n: usize,
    pub variables: Vec<VariableStats>,
    /// Parcel counts for every zone the spec has a dummy for.
    pub densities: Vec<ZoneDensity>,
    pub other_count: usize,
}

/// Raw-scale name and value for a non-dummy term: logs are undone, squares
/// are kept, thresholds report the underlying percentage.
fn raw_term(transform: Transform, source: &str) -> Option<(String, bool)> {
    match transform {
        Transform::Dummy(_) => None,
        Transform::Square => Some((format!("{source}^2"), true)),
        _ => Some((source.to_string(), false)),
    }
}

/// Mean, maximum and minimum of every regressor on its raw scale, plus zone
/// densities.
pub fn descriptive_stats(table: &ParcelTable, spec: &ModelSpec) -> Result<StatsTable> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut variables: Vec<VariableStats> = Vec::new();
    for term in &spec.terms {
        let Some((label, squared)) = raw_term(term.transform, term.source.column()) else {
            continue;
        };
        if variables.iter().any(|v| v.label == label) {
            continue;
        }
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in table.rows() {
            let v = p.numeric(term.source).ok_or_else(|| Error::MissingValue {
                pin: p.pin.clone(),
                field: term.source.column(),
            })?;
            let v = if squared { v * v } else { v };
            sum += v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let mean = (sum / table.len() as f64).clamp(lo, hi);
        variables.push(VariableStats {
            label,
            mean,
            highest: hi,
            lowest: lo,
        });
    }

    let count = |zone: Zone| table.rows().iter().filter(|p| p.zone == Some(zone)).count();
    let densities = spec
        .terms
        .iter()
        .filter_map(|t| match t.transform {
            Transform::Dummy(zone) => Some(ZoneDensity {
                zone,
                count: count(zone),
            }),
            _ => None,
        })
        .collect();
    Ok(StatsTable {
        n: table.len(),
        variables,
        densities,
        other_count: count(Zone::Other),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix {
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl CorrMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[(i, j)])
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values.clone().symmetric_eigen().eigenvalues.min()
    }

    /// Off-diagonal pairs with `|ρ| ≥ threshold`.
    pub fn flagged_pairs(&self, threshold: f64) -> Vec<(String, String, f64)> {
        let m = self.labels.len();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let r = self.values[(i, j)];
                if r.abs() >= threshold {
                    out.push((self.labels[i].clone(), self.labels[j].clone(), r));
                }
            }
        }
        out
    }
}

impl Serialize for CorrMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CorrMatrix", 2)?;
        st.serialize_field("labels", &self.labels)?;
        st.serialize_field("values", &self.rows())?;
        st.end()
    }
}

/// Response plus zones; response plus tax rate, condition and age terms;
/// response plus the lot and building logs.
pub fn default_correlation_groups() -> Vec<Vec<String>> {
    let group = |labels: &[&str]| {
        std::iter::once(RESPONSE_LABEL)
            .chain(labels.iter().copied())
            .map(String::from)
            .collect::<Vec<_>>()
    };
    vec![
        group(&["R1A", "R1B", "R2", "S2"]),
        group(&["taxrate", "condition", "age", "age_sq"]),
        group(&["log_lotdima", "log_lotdimb", "log_lotsqfeet", "log_totbldgft"]),
    ]
}

/// Centered columns scaled to unit length; the correlation matrix is `ZᵀZ`.
fn standardized(label: &str, values: &[f64]) -> Result<DVector<f64>> {
    let first = values.first().copied().unwrap_or(0.0);
    if values.len() < 2 || values.iter().all(|&v| v == first) {
        return Err(Error::ZeroVariance(label.to_string()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut z = DVector::from_iterator(values.len(), values.iter().map(|v| v - mean));
    let norm = z.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVariance(label.to_string()));
    }
    z /= norm;
    Ok(z)
}

/// Pearson correlation of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let zx = standardized("x", x)?;
    let zy = standardized("y", y)?;
    Ok(zx.dot(&zy).clamp(-1.0, 1.0))
}

/// Pearson correlation matrix for each label group. Groups may name the
/// response via [`RESPONSE_LABEL`].
pub fn correlation_matrix(design: &DesignMatrix, groups: &[Vec<String>]) -> Result<Vec<CorrMatrix>> {
    groups
        .iter()
        .map(|labels| {
            let cols: Vec<DVector<f64>> = labels
                .iter()
                .map(|l| standardized(l, &design.series(l)?))
                .collect::<Result<_>>()?;
            let m = cols.len();
            let mut values = DMatrix::<f64>::identity(m, m);
            for i in 0..m {
                for j in i + 1..m {
                    let r = cols[i].dot(&cols[j]).clamp(-1.0, 1.0);
                    values[(i, j)] = r;
                    values[(j, i)] = r;
                }
            }
            Ok(CorrMatrix {
                labels: labels.clone(),
                values,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub label: String,
    pub r_squared: f64,
    pub vif: f64,
    pub flagged: bool,
}

/// `VIF_j = 1 / (1 − R²_j)`, regressing each non-intercept column on all
/// the others (intercept included).
pub fn vif(design: &DesignMatrix) -> Result<Vec<VifEntry>> {
    if !design.has_intercept {
        return Err(Error::NoIntercept);
    }
    // full-rank check with named columns
    solve_labeled(&design.x, &design.y, &design.column_labels)?;
    let p = design.ncols();
    (0..p)
        .filter(|&j| design.column_labels[j] != INTERCEPT)
        .map(|j| {
            let others: Vec<usize> = (0..p).filter(|&c| c != j).collect();
            let x = design.x.select_columns(others.iter());
            let target: DVector<f64> = design.x.column(j).into_owned();
            let labels: Vec<String> = others.iter().map(|&c| design.column_labels[c].clone()).collect();
            let fit = solve_labeled(&x, &target, &labels)?;
            let mean = target.mean();
            let tss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
            let label = design.column_labels[j].clone();
            if tss <= 0.0 {
                return Err(Error::ZeroVariance(label));
            }
            let r2 = (1.0 - fit.rss / tss).clamp(0.0, 1.0);
            let vif = tss / fit.rss;
            Ok(VifEntry {
                label,
                r_squared: r2,
                vif,
                flagged: vif > VIF_FLAG,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssessedVsPredicted {
    pub n: usize,
    pub mean_assessed: f64,
    pub mean_predicted: f64,
    /// Correlation of observed and fitted log values.
    pub log_corr: f64,
    pub mean_abs_pct_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceShare {
    pub r2_full: f64,
    pub r2_zoning: f64,
    pub r2_without_zoning: f64,
    /// `r2_zoning / r2_full`.
    pub zoning_share: f64,
    /// `r2_full − r2_without_zoning`.
    pub delta_r2: f64,
    pub hypothesis_met: bool,
    pub comparison: AssessedVsPredicted,
}

struct SubFit {
    r2: f64,
    fitted: Vec<f64>,
    y: Vec<f64>,
}

fn fit_r2(table: &ParcelTable, spec: &ModelSpec) -> Result<SubFit> {
    let design = build_design_matrix(table, spec)?;
    let y: Vec<f64> = design.y.iter().copied().collect();
    let fit = fit_design(&design)?;
    let k = design.ncols() - usize::from(design.has_intercept);
    let r2 = if k == 0 {
        0.0
    } else {
        goodness_of_fit(&fit, &y, k)?.r_squared
    };
    Ok(SubFit {
        r2,
        fitted: fit.fitted.iter().copied().collect(),
        y,
    })
}

/// Share of explained variance attributable to zoning under the default model.
pub fn zoning_variance_share(table: &ParcelTable) -> Result<VarianceShare> {
    zoning_variance_share_for(table, &crate::design::default_model_spec())
}

/// Fits `spec`, its zone-dummies-only restriction, and its zone-free
/// restriction, and reports both attributions of R² to zoning.
pub fn zoning_variance_share_for(table: &ParcelTable, spec: &ModelSpec) -> Result<VarianceShare> {
    let mut zoning = spec.clone();
    zoning.terms.retain(ModelSpec::is_zone_term);
    let without = spec.without_zoning();

    let (full, zon, wo) = std::thread::scope(|s| {
        let zon = s.spawn(|| fit_r2(table, &zoning));
        let wo = s.spawn(|| fit_r2(table, &without));
        let full = fit_r2(table, spec);
        (
            full,
            zon.join().expect("zoning fit panicked"),
            wo.join().expect("zone-free fit panicked"),
        )
    });
    let (full, zon, wo) = (full?, zon?, wo?);

    let zoning_share = if full.r2 > 0.0 { zon.r2 / full.r2 } else { 0.0 };
    let n = full.y.len();
    let assessed: Vec<f64> = full.y.iter().map(|v| v.exp()).collect();
    let predicted: Vec<f64> = full.fitted.iter().map(|v| v.exp()).collect();
    let mape = assessed
        .iter()
        .zip(&predicted)
        .map(|(a, p)| (p - a).abs() / a)
        .sum::<f64>()
        / n as f64
        * 100.0;
    let comparison = AssessedVsPredicted {
        n,
        mean_assessed: assessed.iter().sum::<f64>() / n as f64,
        mean_predicted: predicted.iter().sum::<f64>() / n as f64,
        log_corr: pearson(&full.y, &full.fitted).unwrap_or(0.0),
        mean_abs_pct_error: mape,
    };
    Ok(VarianceShare {
        r2_full: full.r2,
        r2_zoning: zon.r2,
        r2_without_zoning: wo.r2,
        zoning_share,
        delta_r2: full.r2 - wo.r2,
        hypothesis_met: zoning_share > HYPOTHESIS_SHARE,
        comparison,
    })
}
