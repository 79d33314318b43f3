//! Prediction and rezoning counterfactuals ("option value") from a fitted
//! log-value model.

use std::io::Write;

use serde::Serialize;

use crate::design::{build_design_matrix, default_model_spec, ModelSpec, INTERCEPT};
use crate::error::{Error, Result};
use crate::inference::{compute_inference, student_t_sf, CoefficientRow, InferenceTable};
use crate::lstsq::fit_design;
use crate::parcel::{Parcel, ParcelTable, Zone};
use crate::reproduction;

/// A zone effect whose exact multiplier falls outside `[1/10, 10]`.
pub const EXTREME_LOG_EFFECT: f64 = std::f64::consts::LN_10;

/// Estimated model usable as a predictor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub inference: InferenceTable,
    /// False when the intercept is a placeholder, so only differences in log
    /// value are meaningful.
    pub levels_known: bool,
}

impl FittedModel {
    pub fn new(spec: ModelSpec, inference: InferenceTable) -> Result<Self> {
        let expected = spec.column_labels();
        if expected.len() != inference.rows.len() {
            return Err(Error::LabelMismatch {
                expected: expected.join(","),
                found: inference.labels().collect::<Vec<_>>().join(","),
            });
        }
        for (e, row) in expected.iter().zip(&inference.rows) {
            if *e != row.label {
                return Err(Error::LabelMismatch {
                    expected: e.clone(),
                    found: row.label.clone(),
                });
            }
        }
        Ok(FittedModel {
            spec,
            inference,
            levels_known: true,
        })
    }

    /// Builds the design, fits it, and computes inference at `alpha`.
    pub fn fit(table: &ParcelTable, spec: &ModelSpec, alpha: f64) -> Result<Self> {
        let design = build_design_matrix(table, spec)?;
        let fit = fit_design(&design)?;
        let inference = compute_inference(&fit, &design, alpha)?;
        FittedModel::new(spec.clone(), inference)
    }

    /// The published coefficient table as a model. The intercept was not
    /// published and is set to zero, so predicted levels are withheld; zone
    /// effects are exact.
    pub fn published() -> Self {
        let dof = (reproduction::PUBLISHED_N - reproduction::PUBLISHED_K - 1) as f64;
        let mut rows = vec![CoefficientRow {
            label: INTERCEPT.to_string(),
            estimate: 0.0,
            std_error: f64::NAN,
            t_value: None,
            p_value: None,
            significant: false,
        }];
        rows.extend(reproduction::PUBLISHED_ROWS.iter().map(|r| CoefficientRow {
            label: r.label.to_string(),
            estimate: r.estimate,
            std_error: r.std_error,
            t_value: Some(r.t_value),
            p_value: student_t_sf(r.t_value, dof).ok(),
            significant: r.starred,
        }));
        let inference = InferenceTable {
            rows,
            r_squared: reproduction::PUBLISHED_R2,
            adj_r_squared: reproduction::PUBLISHED_ADJ_R2,
            f_value: Some(reproduction::PUBLISHED_F),
            f_p_value: None,
            n: reproduction::PUBLISHED_N,
            k: reproduction::PUBLISHED_K,
            rss: f64::NAN,
            tss: f64::NAN,
            sigma2_hat: f64::NAN,
            alpha: 0.10,
            exact_fit: false,
        };
        let mut model =
            FittedModel::new(default_model_spec(), inference).expect("published labels follow the default spec");
        model.levels_known = false;
        model
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.inference.row(label).map(|r| r.estimate)
    }

    /// Coefficient of a zone relative to the `Other` baseline.
    pub fn zone_coefficient(&self, zone: Zone) -> Result<f64> {
        if zone == Zone::Other {
            return Ok(0.0);
        }
        self.spec
            .zone_label(zone)
            .and_then(|l| self.coefficient(l))
            .ok_or_else(|| Error::MissingZoneCoefficient(zone.to_string()))
    }
}

/// Fitted log value: intercept plus the coefficient-weighted regressors.
pub fn predict_log_value(model: &FittedModel, parcel: &Parcel) -> Result<f64> {
    let row = model.spec.row(parcel)?;
    Ok(row.iter().zip(&model.inference.rows).map(|(x, c)| x * c.estimate).sum())
}

pub fn naive_pct(delta_log: f64) -> f64 {
    100.0 * delta_log
}

pub fn exact_pct(delta_log: f64) -> f64 {
    100.0 * delta_log.exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionValueReport {
    pub pin: String,
    pub from_zone: Zone,
    pub to_zone: Zone,
    pub delta_log: f64,
    pub naive_pct: f64,
    pub exact_pct: f64,
    /// Predicted assessed values; `None` when the model's intercept is unknown.
    pub predicted_value_from: Option<f64>,
    pub predicted_value_to: Option<f64>,
}

/// Value change from moving `parcel` to `to_zone` with every physical
/// attribute held fixed.
pub fn rezone_counterfactual(model: &FittedModel, parcel: &Parcel, to_zone: Zone) -> Result<OptionValueReport> {
    let from_zone = parcel.zone.ok_or_else(|| Error::MissingValue {
        pin: parcel.pin.clone(),
        field: "zone",
    })?;
    let delta_log = model.zone_coefficient(to_zone)? - model.zone_coefficient(from_zone)?;
    let log_from = predict_log_value(model, parcel)?;
    let mut moved = parcel.clone();
    moved.zone = Some(to_zone);
    let log_to = predict_log_value(model, &moved)?;
    let level = |v: f64| model.levels_known.then(|| v.exp());
    Ok(OptionValueReport {
        pin: parcel.pin.clone(),
        from_zone,
        to_zone,
        delta_log,
        naive_pct: naive_pct(delta_log),
        exact_pct: exact_pct(delta_log),
        predicted_value_from: level(log_from),
        predicted_value_to: level(log_to),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneEffect {
    pub zone: Zone,
    pub label: String,
    pub estimate: f64,
    pub naive_pct: f64,
    pub exact_pct: f64,
    pub significant: bool,
    pub extreme: bool,
}

/// One row per modeled zone against the `Other` baseline, largest effect first.
pub fn zone_effect_report(model: &FittedModel) -> Vec<ZoneEffect> {
    let mut rows: Vec<ZoneEffect> = Zone::MODELED
        .into_iter()
        .filter_map(|zone| {
            let label = model.spec.zone_label(zone)?;
            let row = model.inference.row(label)?;
            Some(ZoneEffect {
                zone,
                label: label.to_string(),
                estimate: row.estimate,
                naive_pct: naive_pct(row.estimate),
                exact_pct: exact_pct(row.estimate),
                significant: row.significant,
                extreme: row.estimate.abs() > EXTREME_LOG_EFFECT,
            })
        })
        .collect();
    rows.sort_by(|a, b| b.estimate.total_cmp(&a.estimate));
    rows
}

pub const OPTION_VALUE_HEADER: [&str; 6] = ["pin", "from", "to", "delta_log", "naive_pct", "exact_pct"];

/// Batch what-if rows as CSV.
pub fn write_option_values<W: Write>(reports: &[OptionValueReport], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(OPTION_VALUE_HEADER)?;
    for r in reports {
        wtr.write_record([
            r.pin.clone(),
            r.from_zone.to_string(),
            r.to_zone.to_string(),
            r.delta_log.to_string(),
            r.naive_pct.to_string(),
            r.exact_pct.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parcel(zone: Zone) -> Parcel {
        Parcel {
            pin: "p1".into(),
            assessed_value: None,
            zone: Some(zone),
            lot_width_ft: Some(1.0),
            lot_depth_ft: Some(1.0),
            lot_sqft: Some(1.0),
            total_bldg_sqft: Some(1.0),
            bathrooms: Some(1.0),
            age_years: Some(0.0),
            condition_pct: Some(10.0),
            tax_rate_pct: Some(0.0),
        }
    }

    fn with_intercept(value: f64) -> FittedModel {
        let mut m = FittedModel::published();
        m.inference.rows[0].estimate = value;
        m.levels_known = true;
        m
    }

    #[test]
    fn zero_regressors_predict_the_intercept() {
        let m = with_intercept(11.25);
        assert_eq!(predict_log_value(&m, &parcel(Zone::Other)).unwrap(), 11.25);
    }

    #[test]
    fn identity_rezone_is_zero() {
        let m = FittedModel::published();
        let r = rezone_counterfactual(&m, &parcel(Zone::R2), Zone::R2).unwrap();
        assert_eq!(r.delta_log, 0.0);
        assert_eq!(r.naive_pct, 0.0);
        assert_eq!(r.exact_pct, 0.0);
    }

    #[test]
    fn published_r1a_and_r1b_effects() {
        let m = FittedModel::published();
        let r = rezone_counterfactual(&m, &parcel(Zone::Other), Zone::R1A).unwrap();
        assert_eq!(format!("{:.2}", r.naive_pct), "55.93");
        let r = rezone_counterfactual(&m, &parcel(Zone::Other), Zone::R1B).unwrap();
        assert!((r.exact_pct - 100.0 * (0.4670651f64.exp() - 1.0)).abs() < 1e-12);
        assert!((r.exact_pct - 59.53).abs() < 0.01);
    }

    #[test]
    fn predicted_values_follow_delta() {
        let mut m = with_intercept(3.0);
        let age_sq = m.inference.rows.iter_mut().find(|r| r.label == "age_sq").unwrap();
        age_sq.estimate *= 1e-5;
        let mut p = parcel(Zone::R1B);
        p.lot_sqft = Some(6000.0);
        p.age_years = Some(37.0);
        let r = rezone_counterfactual(&m, &p, Zone::S2).unwrap();
        let want = r.predicted_value_from.unwrap() * r.delta_log.exp();
        assert!((r.predicted_value_to.unwrap() - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn published_model_withholds_levels() {
        let r = rezone_counterfactual(&FittedModel::published(), &parcel(Zone::R2), Zone::R1A).unwrap();
        assert_eq!(r.predicted_value_from, None);
        assert_eq!(r.predicted_value_to, None);
    }

    #[test]
    fn effect_report_ordering_and_extremes() {
        let rows = zone_effect_report(&FittedModel::published());
        let zones: Vec<Zone> = rows.iter().map(|r| r.zone).collect();
        assert_eq!(zones, [Zone::R1A, Zone::R1B, Zone::R2, Zone::S2]);
        let s2 = rows.last().unwrap();
        assert!(s2.extreme);
        assert!((s2.exact_pct + 99.998).abs() < 1e-3, "{}", s2.exact_pct);
        assert!(rows[..3].iter().all(|r| !r.extreme));
    }

    #[test]
    fn zero_zone_effects() {
        let mut m = FittedModel::published();
        for r in m.inference.rows.iter_mut().take(5) {
            r.estimate = 0.0;
        }
        for r in zone_effect_report(&m) {
            assert_eq!(r.naive_pct, 0.0);
            assert_eq!(r.exact_pct, 0.0);
        }
    }

    #[test]
    fn missing_zone_coefficient() {
        let mut m = FittedModel::published();
        m.spec.terms.retain(|t| t.label != "S2");
        m.inference.rows.retain(|r| r.label != "S2");
        let err = rezone_counterfactual(&m, &parcel(Zone::R1A), Zone::S2).unwrap_err();
        assert!(matches!(err, Error::MissingZoneCoefficient(_)));
    }

    #[test]
    fn label_mismatch_rejected() {
        let m = FittedModel::published();
        let mut inf = m.inference.clone();
        inf.rows.swap(1, 2);
        assert!(FittedModel::new(m.spec.clone(), inf).is_err());
    }

    #[test]
    fn csv_rows() {
        let m = FittedModel::published();
        let reports = vec![rezone_counterfactual(&m, &parcel(Zone::Other), Zone::R1A).unwrap()];
        let mut buf = Vec::new();
        write_option_values(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "pin,from,to,delta_log,naive_pct,exact_pct");
        assert!(lines.next().unwrap().starts_with("p1,OTHER,R1A,0.5592927,"));
    }
}
