//! Published developed-residential estimates, shipped as a fixture, and an
//! internal-consistency check of their t column.

use serde::Serialize;

/// One published coefficient row: label (matching the default spec),
/// estimate, standard error, printed t-value, and whether it was starred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedRow {
    pub label: &'static str,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub starred: bool,
}

const fn row(label: &'static str, estimate: f64, std_error: f64, t_value: f64, starred: bool) -> PublishedRow {
    PublishedRow {
        label,
        estimate,
        std_error,
        t_value,
        starred,
    }
}

pub const PUBLISHED_ROWS: [PublishedRow; 13] = [
    row("R1A", 0.5592927, 0.042187, 13.26, true),
    row("R1B", 0.4670651, 0.03866, 12.08, true),
    row("R2", 0.3999119, 0.041335, 9.67, true),
    row("S2", -10.68838, 0.211277, -50.59, true),
    row("log_lotsqfeet", 0.1535171, 0.044835, 3.42, true),
    row("log_lotdimb", -0.148944, 0.062722, -2.37, true),
    row("log_lotdima", 0.2205652, 0.043684, 5.05, true),
    row("log_totbldgft", 0.0385547, 0.035657, 1.08, false),
    row("log_bathrooms", -0.00315, 0.032486, -0.10, false),
    row("age", -0.002379, 0.000794, -3.00, true),
    row("age_sq", 1.25516, 3.909098, 3.21, true),
    row("condition", 0.1402772, 0.046006, 3.05, true),
    row("taxrate", 0.2144761, 0.088847, 2.41, true),
];

pub const PUBLISHED_F: f64 = 402.3826;
pub const PUBLISHED_R2: f64 = 0.8952;
pub const PUBLISHED_ADJ_R2: f64 = 0.8930;
pub const PUBLISHED_N: usize = 12475;
pub const PUBLISHED_K: usize = 13;
pub const ROWS_COLLECTED: usize = 12507;

/// Parcel counts per zone in the developed-residential sample.
pub const ZONE_DENSITIES: [(crate::parcel::Zone, usize); 4] = [
    (crate::parcel::Zone::R1A, 4192),
    (crate::parcel::Zone::R1B, 5219),
    (crate::parcel::Zone::R2, 628),
    (crate::parcel::Zone::S2, 19),
];

/// Printed t-values carry two decimals; a recomputed value within this
/// distance of the printed one is consistent.
pub const T_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproductionRow {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub published_t: f64,
    pub recomputed_t: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproductionReport {
    pub rows: Vec<ReproductionRow>,
    pub consistent_rows: usize,
    pub anomalies: Vec<String>,
    pub published_r2: f64,
    pub published_adj_r2: f64,
    pub recomputed_adj_r2: f64,
    pub published_f: f64,
    pub recomputed_f: f64,
}

/// Recomputes `t = estimate / SE` for every published row, and the adjusted
/// R² and F implied by the published R², n and k.
pub fn check_published_table() -> ReproductionReport {
    let rows: Vec<ReproductionRow> = PUBLISHED_ROWS
        .iter()
        .map(|r| {
            let recomputed_t = r.estimate / r.std_error;
            ReproductionRow {
                label: r.label.to_string(),
                estimate: r.estimate,
                std_error: r.std_error,
                published_t: r.t_value,
                recomputed_t,
                consistent: (recomputed_t - r.t_value).abs() <= T_TOLERANCE + 1e-12,
            }
        })
        .collect();
    let consistent_rows = rows.iter().filter(|r| r.consistent).count();
    let anomalies = rows.iter().filter(|r| !r.consistent).map(|r| r.label.clone()).collect();
    let (n, k) = (PUBLISHED_N as f64, PUBLISHED_K as f64);
    let r2 = PUBLISHED_R2;
    ReproductionReport {
        rows,
        consistent_rows,
        anomalies,
        published_r2: r2,
        published_adj_r2: PUBLISHED_ADJ_R2,
        recomputed_adj_r2: 1.0 - (1.0 - r2) * (n - 1.0) / (n - k - 1.0),
        published_f: PUBLISHED_F,
        recomputed_f: (r2 / k) / ((1.0 - r2) / (n - k - 1.0)),
    }
}
