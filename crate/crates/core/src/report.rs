//! Text, CSV and JSON renderings of every command's results.
//!
//! Text output prints at the precision of the published tables (estimates and
//! standard errors to 7 significant digits, t to 2 decimals, R² to 4). CSV and
//! JSON carry full precision.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::diagnostics::{CorrMatrix, StatsTable, VarianceShare, VifEntry};
use crate::error::{Error, Result};
use crate::inference::InferenceTable;
use crate::option_value::{write_option_values, OptionValueReport, ZoneEffect};
use crate::parcel::CleanReport;
use crate::reproduction::ReproductionReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidSpec(format!("unknown format `{other}`"))),
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Seven significant digits in positional notation; scientific below 1e-8.
pub fn sig7(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag < -8 {
        return format!("{x:.6e}");
    }
    let decimals = (6 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).expect("in-memory write");
    for r in rows {
        wtr.write_record(r).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub cleaning: CleanReport,
    pub inference: InferenceTable,
    pub zone_effects: Vec<ZoneEffect>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproduction: Option<ReproductionReport>,
}

pub fn render_fit(report: &FitReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => fit_csv(report),
        Format::Text => {
            let mut out = fit_text(report);
            if let Some(r) = &report.reproduction {
                out.push('\n');
                out.push_str(&reproduction_text(r));
            }
            out
        }
    }
}

fn fit_csv(report: &FitReport) -> String {
    let inf = &report.inference;
    let mut rows: Vec<Vec<String>> = inf
        .rows
        .iter()
        .map(|r| {
            vec![
                "coefficient".into(),
                r.label.clone(),
                r.estimate.to_string(),
                r.std_error.to_string(),
                opt(r.t_value),
                opt(r.p_value),
                r.significant.to_string(),
            ]
        })
        .collect();
    let stat = |name: &str, v: String| {
        vec![
            "statistic".into(),
            name.into(),
            v,
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]
    };
    rows.push(stat("F-Value", opt(inf.f_value)));
    rows.push(stat("R-Square", inf.r_squared.to_string()));
    rows.push(stat("Adjusted R-Square", inf.adj_r_squared.to_string()));
    rows.push(stat("n", inf.n.to_string()));
    csv_rows(
        &[
            "kind",
            "label",
            "estimate",
            "std_error",
            "t_value",
            "p_value",
            "significant",
        ],
        &rows,
    )
}

fn fit_text(report: &FitReport) -> String {
    let inf = &report.inference;
    let c = &report.cleaning;
    let mut out = String::new();
    let _ = writeln!(out, "Parameter estimates, developed residential property");
    let _ = writeln!(
        out,
        "rows read {}, dropped {}, used {}",
        c.rows_in, c.rows_dropped, c.rows_kept
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<18} {:>16} {:>14} {:>10}",
        "Variable", "Estimate", "Std. Error", "t-Value"
    );
    for r in &inf.rows {
        let t = match r.t_value {
            Some(t) => format!("{t:.2}{}", if r.significant { "*" } else { " " }),
            None => "exact ".into(),
        };
        let _ = writeln!(
            out,
            "{:<18} {:>16} {:>14} {:>10}",
            r.label,
            sig7(r.estimate),
            sig7(r.std_error),
            t
        );
    }
    let f = match inf.f_value {
        Some(f) => format!("{f:.4}"),
        None => "exact fit".into(),
    };
    let _ = writeln!(out, "{:<18} {:>16}", "F-Value", f);
    let _ = writeln!(out, "{:<18} {:>16.4}", "R-Square", inf.r_squared);
    let _ = writeln!(out, "{:<18} {:>16.4}", "Adj R-Square", inf.adj_r_squared);
    let _ = writeln!(out, "{:<18} {:>16}", "n", inf.n);
    let _ = writeln!(out, "* significant at the {}% level (two-sided)", inf.alpha * 100.0);
    if inf.exact_fit {
        let _ = writeln!(out, "note: exact fit, residual variance is zero; t-values undefined");
    }
    if !report.zone_effects.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Zone effects vs OTHER");
        let _ = writeln!(
            out,
            "{:<6} {:>12} {:>10} {:>10}",
            "Zone", "Estimate", "Naive %", "Exact %"
        );
        for z in &report.zone_effects {
            let _ = writeln!(
                out,
                "{:<6} {:>12} {:>10.2} {:>10.3}{}",
                z.zone.token(),
                sig7(z.estimate),
                z.naive_pct,
                z.exact_pct,
                if z.extreme { "  (extreme)" } else { "" }
            );
        }
    }
    out
}

pub fn render_reproduction(report: &ReproductionReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Text => reproduction_text(report),
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.label.clone(),
                        r.estimate.to_string(),
                        r.std_error.to_string(),
                        r.published_t.to_string(),
                        r.recomputed_t.to_string(),
                        r.consistent.to_string(),
                    ]
                })
                .collect();
            csv_rows(
                &[
                    "label",
                    "estimate",
                    "std_error",
                    "published_t",
                    "recomputed_t",
                    "consistent",
                ],
                &rows,
            )
        }
    }
}

fn reproduction_text(r: &ReproductionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Published t-value consistency (t = estimate / SE)");
    let _ = writeln!(
        out,
        "{:<16} {:>12} {:>12} {:>10} {:>10}  ",
        "Variable", "Estimate", "Std. Error", "printed", "recomp."
    );
    for row in &r.rows {
        let _ = writeln!(
            out,
            "{:<16} {:>12} {:>12} {:>10.2} {:>10.2}  {}",
            row.label,
            row.estimate,
            row.std_error,
            row.published_t,
            row.recomputed_t,
            if row.consistent { "ok" } else { "ANOMALY" }
        );
    }
    let _ = writeln!(
        out,
        "{} of {} rows consistent; anomalous: {}",
        r.consistent_rows,
        r.rows.len(),
        if r.anomalies.is_empty() {
            "none".to_string()
        } else {
            r.anomalies.join(", ")
        }
    );
    let _ = writeln!(
        out,
        "adjusted R-square: printed {:.4}, from R-square/n/k {:.4}",
        r.published_adj_r2, r.recomputed_adj_r2
    );
    let _ = writeln!(
        out,
        "F-value: printed {:.4}, from R-square/n/k {:.4}",
        r.published_f, r.recomputed_f
    );
    out
}

/// Correlation pairs called out in the published discussion.
pub const NAMED_PAIRS: [(&str, &str); 3] = [("R1A", "R1B"), ("condition", "age"), ("log_lotsqfeet", "log_lotdima")];

#[derive(Debug, Clone, Serialize)]
pub struct DescribeReport {
    pub stats: StatsTable,
    pub correlations: Vec<CorrMatrix>,
    pub flag_threshold: f64,
    pub flagged_pairs: Vec<(String, String, f64)>,
    pub named_pairs: Vec<(String, String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vif: Option<Vec<VifEntry>>,
}

pub fn render_describe(report: &DescribeReport, format: Format) -> String {
    match format {
        Format::Json => json(report),
        Format::Csv => describe_csv(report),
        Format::Text => describe_text(report),
    }
}

fn describe_csv(r: &DescribeReport) -> String {
    let mut rows = Vec::new();
    for v in &r.stats.variables {
        rows.push(vec![
            "stats".into(),
            v.label.clone(),
            String::new(),
            v.mean.to_string(),
            v.highest.to_string(),
            v.lowest.to_string(),
        ]);
    }
    for d in &r.stats.densities {
        rows.push(vec![
            "density".into(),
            d.zone.token().into(),
            String::new(),
            d.count.to_string(),
            String::new(),
            String::new(),
        ]);
    }
    for (b, m) in r.correlations.iter().enumerate() {
        for (i, a) in m.labels.iter().enumerate() {
            for (j, c) in m.labels.iter().enumerate() {
                rows.push(vec![
                    format!("corr{}", b + 1),
                    a.clone(),
                    c.clone(),
                    m.values[(i, j)].to_string(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    if let Some(vif) = &r.vif {
        for v in vif {
            rows.push(vec![
                "vif".into(),
                v.label.clone(),
                String::new(),
                v.vif.to_string(),
                v.r_squared.to_string(),
                v.flagged.to_string(),
            ]);
        }
    }
    csv_rows(&["section", "label", "label2", "value", "highest", "lowest"], &rows)
}

fn describe_text(r: &DescribeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Descriptive statistics (n = {})", r.stats.n);
    let _ = writeln!(
        out,
        "{:<16} {:>14} {:>14} {:>14} {:>14}",
        "Variable", "Mean", "Highest", "Lowest", "Value was yes"
    );
    for v in &r.stats.variables {
        let _ = writeln!(
            out,
            "{:<16} {:>14.2} {:>14.2} {:>14.2} {:>14}",
            v.label, v.mean, v.highest, v.lowest, "NA"
        );
    }
    for d in &r.stats.densities {
        let _ = writeln!(
            out,
            "{:<16} {:>14} {:>14} {:>14} {:>14}",
            d.zone.token(),
            "-",
            "-",
            "-",
            d.count
        );
    }
    let _ = writeln!(
        out,
        "{:<16} {:>14} {:>14} {:>14} {:>14}",
        "OTHER", "-", "-", "-", r.stats.other_count
    );

    for (b, m) in r.correlations.iter().enumerate() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Correlation matrix {}", b + 1);
        let _ = write!(out, "{:<16}", "");
        for l in &m.labels {
            let _ = write!(out, " {:>14}", l);
        }
        let _ = writeln!(out);
        for (i, l) in m.labels.iter().enumerate() {
            let _ = write!(out, "{:<16}", l);
            for j in 0..m.labels.len() {
                let _ = write!(out, " {:>14.4}", m.values[(i, j)]);
            }
            let _ = writeln!(out);
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Pairs with |r| >= {}:", r.flag_threshold);
    if r.flagged_pairs.is_empty() {
        let _ = writeln!(out, "  none");
    }
    for (a, b, v) in &r.flagged_pairs {
        let _ = writeln!(out, "  {a} / {b}: {v:.4}");
    }
    if !r.named_pairs.is_empty() {
        let _ = writeln!(out, "Pairs discussed in the published results:");
        for (a, b, v) in &r.named_pairs {
            let _ = writeln!(out, "  {a} / {b}: {v:.4}");
        }
    }
    if let Some(vif) = &r.vif {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16} {:>12} {:>10}", "VIF", "value", "R2_j");
        for v in vif {
            let _ = writeln!(
                out,
                "{:<16} {:>12.3} {:>10.4}{}",
                v.label,
                v.vif,
                v.r_squared,
                if v.flagged { "  > 10" } else { "" }
            );
        }
    }
    out
}

pub fn render_whatif(reports: &[OptionValueReport], format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => json(&reports),
        Format::Csv => {
            let mut buf = Vec::new();
            write_option_values(reports, &mut buf)?;
            String::from_utf8(buf).expect("utf-8")
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{:<14} {:<6} {:<6} {:>12} {:>10} {:>10} {:>14} {:>14}",
                "pin", "from", "to", "delta_log", "naive %", "exact %", "value from", "value to"
            );
            let level = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "NA".into());
            for r in reports {
                let _ = writeln!(
                    out,
                    "{:<14} {:<6} {:<6} {:>12.7} {:>10.2} {:>10.2} {:>14} {:>14}",
                    r.pin,
                    r.from_zone.token(),
                    r.to_zone.token(),
                    r.delta_log,
                    r.naive_pct,
                    r.exact_pct,
                    level(r.predicted_value_from),
                    level(r.predicted_value_to)
                );
            }
            out
        }
    })
}

pub fn hypothesis_verdict(share: &VarianceShare) -> &'static str {
    if share.hypothesis_met {
        "hypothesis MET"
    } else {
        "hypothesis NOT MET"
    }
}

pub fn render_hypothesis(share: &VarianceShare, format: Format) -> String {
    match format {
        Format::Json => json(share),
        Format::Csv => {
            let c = &share.comparison;
            let rows = vec![
                vec!["r2_full".into(), share.r2_full.to_string()],
                vec!["r2_zoning".into(), share.r2_zoning.to_string()],
                vec!["r2_without_zoning".into(), share.r2_without_zoning.to_string()],
                vec!["zoning_share".into(), share.zoning_share.to_string()],
                vec!["delta_r2".into(), share.delta_r2.to_string()],
                vec!["hypothesis_met".into(), share.hypothesis_met.to_string()],
                vec!["mean_assessed".into(), c.mean_assessed.to_string()],
                vec!["mean_predicted".into(), c.mean_predicted.to_string()],
                vec!["log_corr".into(), c.log_corr.to_string()],
                vec!["mean_abs_pct_error".into(), c.mean_abs_pct_error.to_string()],
            ];
            csv_rows(&["quantity", "value"], &rows)
        }
        Format::Text => {
            let mut out = String::new();
            let c = &share.comparison;
            let _ = writeln!(out, "R-square, full model:            {:.4}", share.r2_full);
            let _ = writeln!(out, "R-square, zone dummies only:     {:.4}", share.r2_zoning);
            let _ = writeln!(out, "R-square, without zone dummies:  {:.4}", share.r2_without_zoning);
            let _ = writeln!(out, "zoning share (ratio):            {:.4}", share.zoning_share);
            let _ = writeln!(out, "zoning share (delta R-square):   {:.4}", share.delta_r2);
            let _ = writeln!(out, "assessed vs predicted: n {}, mean assessed {:.2}, mean predicted {:.2}, log corr {:.4}, mean abs error {:.2}%",
                c.n, c.mean_assessed, c.mean_predicted, c.log_corr, c.mean_abs_pct_error);
            let _ = writeln!(out, "{} (zoning share > 0.5)", hypothesis_verdict(share));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_significant_digits() {
        assert_eq!(sig7(0.5592927), "0.5592927");
        assert_eq!(sig7(-10.688381), "-10.68838");
        assert_eq!(sig7(-0.002379), "-0.002379000");
        assert_eq!(sig7(1234567.89), "1234568");
        assert_eq!(sig7(0.0), "0");
        assert_eq!(sig7(1.5e-12), "1.500000e-12");
    }

    #[test]
    fn format_names() {
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
