//! Model specifications and their compilation into a labeled design matrix.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parcel::{Field, Parcel, ParcelTable, Zone};

pub const INTERCEPT: &str = "Intercept";
pub const RESPONSE_LABEL: &str = "log_u1tfcash";
pub const CONDITION_CUT_PCT: f64 = 40.0;

/// Elementwise transform from a raw parcel field to a model column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Transform {
    Identity,
    /// Natural log; input must be strictly positive.
    Log,
    Square,
    /// 1 if the parcel is in the given zone, else 0.
    Dummy(Zone),
    /// 1 if the value is at or above the cut, else 0.
    Threshold(f64),
}

impl Transform {
    fn accepts(self, field: Field) -> bool {
        match self {
            Transform::Dummy(_) => field == Field::Zone,
            _ => field != Field::Zone,
        }
    }

    /// Applies the transform to a parcel's source field.
    pub fn apply(self, parcel: &Parcel, field: Field) -> Result<f64> {
        let missing = || Error::MissingValue {
            pin: parcel.pin.clone(),
            field: field.column(),
        };
        if let Transform::Dummy(level) = self {
            let zone = parcel.zone.ok_or_else(missing)?;
            return Ok(if zone == level { 1.0 } else { 0.0 });
        }
        let v = parcel.numeric(field).ok_or_else(missing)?;
        if !v.is_finite() {
            return Err(Error::NonFinite(field.column()));
        }
        Ok(match self {
            Transform::Identity => v,
            Transform::Log => {
                if v <= 0.0 {
                    return Err(Error::NonPositiveLog {
                        pin: parcel.pin.clone(),
                        field: field.column(),
                        value: v,
                    });
                }
                v.ln()
            }
            Transform::Square => v * v,
            Transform::Threshold(cut) => {
                if v >= cut {
                    1.0
                } else {
                    0.0
                }
            }
            Transform::Dummy(_) => unreachable!(),
        })
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Identity => f.write_str("identity"),
            Transform::Log => f.write_str("log"),
            Transform::Square => f.write_str("square"),
            Transform::Dummy(z) => write!(f, "dummy({z})"),
            Transform::Threshold(c) => write!(f, "threshold({c})"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let arg = |prefix: &str| {
            lower
                .strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
        };
        match lower.as_str() {
            "identity" => return Ok(Transform::Identity),
            "log" => return Ok(Transform::Log),
            "square" => return Ok(Transform::Square),
            _ => {}
        }
        if let Some(level) = arg("dummy") {
            return Ok(Transform::Dummy(level.parse()?));
        }
        if let Some(cut) = arg("threshold") {
            let cut: f64 = cut
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad threshold `{s}`")))?;
            return Ok(Transform::Threshold(cut));
        }
        Err(Error::InvalidSpec(format!("unknown transform `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub label: String,
    pub source: Field,
    pub transform: Transform,
}

impl Term {
    pub fn new(label: impl Into<String>, source: Field, transform: Transform) -> Self {
        Term {
            label: label.into(),
            source,
            transform,
        }
    }
}

/// Declarative regression specification: a response transform and an
/// ordered list of labeled regressors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub response: (Field, Transform),
    pub terms: Vec<Term>,
    pub include_intercept: bool,
}

/// The 13-regressor log-value model in published order, with an intercept.
/// The omitted zone category is `Other`.
pub fn default_model_spec() -> ModelSpec {
    use Field::{Age, AssessedValue, Bathrooms, ConditionPct, LotDepth, LotSqft, LotWidth, TaxRatePct, TotalBldgSqft};
    use Transform::*;
    ModelSpec {
        response: (AssessedValue, Log),
        terms: vec![
            Term::new("R1A", Field::Zone, Dummy(Zone::R1A)),
            Term::new("R1B", Field::Zone, Dummy(Zone::R1B)),
            Term::new("R2", Field::Zone, Dummy(Zone::R2)),
            Term::new("S2", Field::Zone, Dummy(Zone::S2)),
            Term::new("log_lotsqfeet", LotSqft, Log),
            Term::new("log_lotdimb", LotDepth, Log),
            Term::new("log_lotdima", LotWidth, Log),
            Term::new("log_totbldgft", TotalBldgSqft, Log),
            Term::new("log_bathrooms", Bathrooms, Log),
            Term::new("age", Age, Identity),
            Term::new("age_sq", Age, Square),
            Term::new("condition", ConditionPct, Threshold(CONDITION_CUT_PCT)),
            Term::new("taxrate", TaxRatePct, Identity),
        ],
        include_intercept: true,
    }
}

/// Restricted model with the four zone dummies only.
pub fn zoning_only_spec() -> ModelSpec {
    let mut spec = default_model_spec();
    spec.terms.retain(ModelSpec::is_zone_term);
    spec
}

impl ModelSpec {
    pub fn is_zone_term(term: &Term) -> bool {
        matches!(term.transform, Transform::Dummy(_))
    }

    /// Same spec with every zone dummy removed.
    pub fn without_zoning(&self) -> ModelSpec {
        let mut spec = self.clone();
        spec.terms.retain(|t| !Self::is_zone_term(t));
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        if self.include_intercept {
            seen.insert(INTERCEPT);
        }
        for t in &self.terms {
            if !seen.insert(t.label.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate label `{}`", t.label)));
            }
            if !t.transform.accepts(t.source) {
                return Err(Error::InvalidSpec(format!(
                    "transform {} cannot be applied to `{}`",
                    t.transform, t.source
                )));
            }
        }
        let (field, transform) = self.response;
        if !transform.accepts(field) {
            return Err(Error::InvalidSpec("response must be numeric".into()));
        }
        Ok(())
    }

    /// Column labels of the compiled design, intercept first when present.
    pub fn column_labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.terms.len() + 1);
        if self.include_intercept {
            labels.push(INTERCEPT.to_string());
        }
        labels.extend(self.terms.iter().map(|t| t.label.clone()));
        labels
    }

    /// Label of the term carrying the dummy for `zone`, if any.
    pub fn zone_label(&self, zone: Zone) -> Option<&str> {
        self.terms
            .iter()
            .find(|t| t.transform == Transform::Dummy(zone))
            .map(|t| t.label.as_str())
    }

    /// One design row for a parcel.
    pub fn row(&self, parcel: &Parcel) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.terms.len() + 1);
        if self.include_intercept {
            row.push(1.0);
        }
        for t in &self.terms {
            row.push(t.transform.apply(parcel, t.source)?);
        }
        Ok(row)
    }

    pub fn response_value(&self, parcel: &Parcel) -> Result<f64> {
        let (field, transform) = self.response;
        transform.apply(parcel, field)
    }

    /// Plain-text form, one directive per line:
    ///
    /// ```text
    /// response u1tfcash log
    /// intercept true
    /// term R1A zone dummy(R1A)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("response {} {}\n", self.response.0, self.response.1));
        out.push_str(&format!("intercept {}\n", self.include_intercept));
        for t in &self.terms {
            out.push_str(&format!("term {} {} {}\n", t.label, t.source, t.transform));
        }
        out
    }

    /// Parses the format written by [`ModelSpec::to_text`]. Blank lines and
    /// `#` comments are ignored; `response` defaults to log assessed value and
    /// `intercept` to true.
    pub fn from_text(text: &str) -> Result<ModelSpec> {
        let mut spec = ModelSpec {
            response: (Field::AssessedValue, Transform::Log),
            terms: Vec::new(),
            include_intercept: true,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidSpec(format!("line {}: `{}`", lineno + 1, raw.trim()));
            match parts.as_slice() {
                ["response", field, transform] => {
                    spec.response = (Field::from_name(field)?, transform.parse()?);
                }
                ["intercept", flag] => {
                    spec.include_intercept = flag.parse().map_err(|_| bad())?;
                }
                ["term", label, field, transform] => {
                    spec.terms
                        .push(Term::new(*label, Field::from_name(field)?, transform.parse()?));
                }
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Numeric design: `x` is n×p with labeled columns, `y` the transformed response.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub column_labels: Vec<String>,
    pub row_pins: Vec<String>,
    pub has_intercept: bool,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        if label == RESPONSE_LABEL {
            return None;
        }
        self.column_labels.iter().position(|l| l == label)
    }

    /// A named column, or the response for [`RESPONSE_LABEL`].
    pub fn series(&self, label: &str) -> Result<Vec<f64>> {
        if label == RESPONSE_LABEL {
            return Ok(self.y.iter().copied().collect());
        }
        let j = self
            .column_index(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        Ok(self.x.column(j).iter().copied().collect())
    }

    /// Subset of columns, in the given order.
    pub fn select(&self, labels: &[String]) -> Result<DesignMatrix> {
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| self.column_index(l).ok_or_else(|| Error::UnknownLabel(l.clone())))
            .collect::<Result<_>>()?;
        let x = self.x.select_columns(idx.iter());
        Ok(DesignMatrix {
            x,
            y: self.y.clone(),
            column_labels: labels.to_vec(),
            row_pins: self.row_pins.clone(),
            has_intercept: labels.first().map(String::as_str) == Some(INTERCEPT),
        })
    }
}

/// Compiles a table into a design matrix. Fails on the first invalid value
/// rather than emitting non-finite entries.
pub fn build_design_matrix(table: &ParcelTable, spec: &ModelSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let n = table.len();
    let labels = spec.column_labels();
    let p = labels.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    let mut pins = Vec::with_capacity(n);
    for (i, parcel) in table.rows().iter().enumerate() {
        let row = spec.row(parcel)?;
        for (j, v) in row.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("design matrix"));
            }
            x[(i, j)] = v;
        }
        let yi = spec.response_value(parcel)?;
        if !yi.is_finite() {
            return Err(Error::NonFinite("response"));
        }
        y[i] = yi;
        pins.push(parcel.pin.clone());
    }
    Ok(DesignMatrix {
        x,
        y,
        column_labels: labels,
        row_pins: pins,
        has_intercept: spec.include_intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parcel(pin: &str, zone: Zone) -> Parcel {
        Parcel {
            pin: pin.into(),
            assessed_value: Some(100_000.0),
            zone: Some(zone),
            lot_width_ft: Some(60.0),
            lot_depth_ft: Some(100.0),
            lot_sqft: Some(6000.0),
            total_bldg_sqft: Some(1800.0),
            bathrooms: Some(2.0),
            age_years: Some(12.0),
            condition_pct: Some(40.0),
            tax_rate_pct: Some(7.5),
        }
    }

    #[test]
    fn default_spec_layout() {
        let spec = default_model_spec();
        assert_eq!(spec.terms.len(), 13);
        assert!(spec.include_intercept);
        assert_eq!(spec.response, (Field::AssessedValue, Transform::Log));
        assert_eq!(spec.terms[3], Term::new("S2", Field::Zone, Transform::Dummy(Zone::S2)));
        assert_eq!(
            spec.terms[11],
            Term::new("condition", Field::ConditionPct, Transform::Threshold(40.0))
        );
        spec.validate().unwrap();
    }

    #[test]
    fn definitional_columns() {
        let mut p = parcel("a", Zone::R1A);
        p.lot_sqft = Some(1.0);
        let t = ParcelTable::new(vec![p]).unwrap();
        let d = build_design_matrix(&t, &default_model_spec()).unwrap();
        let row: Vec<f64> = d.x.row(0).iter().copied().collect();
        assert_eq!(&row[1..5], &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(row[5], 0.0);
        assert_eq!(row[10], 12.0);
        assert_eq!(row[11], 144.0);
        assert_eq!(row[12], 1.0);
        assert_eq!(d.y[0], 100_000f64.ln());
        assert_eq!(d.column_labels[0], INTERCEPT);
    }

    #[test]
    fn threshold_is_inclusive() {
        let mut p = parcel("a", Zone::Other);
        p.condition_pct = Some(39.999);
        let t = ParcelTable::new(vec![p, parcel("b", Zone::Other)]).unwrap();
        let d = build_design_matrix(&t, &default_model_spec()).unwrap();
        let c = d.series("condition").unwrap();
        assert_eq!(c, vec![0.0, 1.0]);
    }

    #[test]
    fn log_of_nonpositive_cites_pin_and_field() {
        let mut p = parcel("pin-7", Zone::R2);
        p.total_bldg_sqft = Some(0.0);
        let t = ParcelTable::new(vec![p]).unwrap();
        let err = build_design_matrix(&t, &default_model_spec()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pin-7") && msg.contains("totbldgft"), "{msg}");
    }

    #[test]
    fn all_other_zone_gives_zero_dummies() {
        let t = ParcelTable::new(vec![parcel("a", Zone::Other), parcel("b", Zone::Other)]).unwrap();
        let d = build_design_matrix(&t, &zoning_only_spec()).unwrap();
        assert_eq!(d.column_labels, ["Intercept", "R1A", "R1B", "R2", "S2"]);
        assert_eq!(d.x.columns(1, 4).sum(), 0.0);
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = default_model_spec();
        let back = ModelSpec::from_text(&spec.to_text()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn spec_text_errors() {
        assert!(ModelSpec::from_text("term a nosuchfield log").is_err());
        assert!(ModelSpec::from_text("term a zone log").is_err());
        assert!(ModelSpec::from_text("term a age log\nterm a age square").is_err());
        assert!(ModelSpec::from_text("term a age cube").is_err());
        let s = ModelSpec::from_text("# custom\nintercept false\nterm x lot_sqft log\n").unwrap();
        assert!(!s.include_intercept);
        assert_eq!(s.terms[0].source, Field::LotSqft);
    }
}
