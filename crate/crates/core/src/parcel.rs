//! Assessor parcel records: data model, CSV ingestion and listwise-deletion cleaning.
//!
//! The canonical file is a UTF-8 CSV with a header row. Empty cells are
//! missing values; cells that fail to parse are also read as missing so that
//! cleaning, not loading, decides what survives.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "parcel-csv/1";
pub const PIN_COLUMN: &str = "pin";

/// Zoning district of a parcel. `Other` covers every district outside the
/// four residential/institutional zones and is the regression baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Zone {
    R1A,
    R1B,
    R2,
    S2,
    Other,
}

impl Zone {
    pub const ALL: [Zone; 5] = [Zone::R1A, Zone::R1B, Zone::R2, Zone::S2, Zone::Other];
    pub const MODELED: [Zone; 4] = [Zone::R1A, Zone::R1B, Zone::R2, Zone::S2];

    pub fn token(self) -> &'static str {
        match self {
            Zone::R1A => "R1A",
            Zone::R1B => "R1B",
            Zone::R2 => "R2",
            Zone::S2 => "S2",
            Zone::Other => "OTHER",
        }
    }

    /// Lenient reading of assessor zone codes ("R1 A", "r1a" and "R1A" are the
    /// same district). Anything unrecognised is `Other`.
    pub fn from_code(code: &str) -> Zone {
        let norm: String = code
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "R1A" => Zone::R1A,
            "R1B" => Zone::R1B,
            "R2" => Zone::R2,
            "S2" => Zone::S2,
            _ => Zone::Other,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Strict parse, used where an unknown zone is an error (e.g. a rezoning target).
impl FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let zone = Zone::from_code(s);
        let is_other = s.trim().eq_ignore_ascii_case("OTHER");
        if zone == Zone::Other && !is_other {
            return Err(Error::UnknownZone(s.to_string()));
        }
        Ok(zone)
    }
}

/// A parcel attribute that can be mapped to a CSV column and used as a model source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Field {
    AssessedValue,
    Zone,
    LotWidth,
    LotDepth,
    LotSqft,
    TotalBldgSqft,
    Bathrooms,
    Age,
    ConditionPct,
    TaxRatePct,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::AssessedValue,
        Field::Zone,
        Field::LotWidth,
        Field::LotDepth,
        Field::LotSqft,
        Field::TotalBldgSqft,
        Field::Bathrooms,
        Field::Age,
        Field::ConditionPct,
        Field::TaxRatePct,
    ];

    /// Fields that enter the model through a log and must be strictly positive.
    pub const LOG_SOURCES: [Field; 6] = [
        Field::AssessedValue,
        Field::LotWidth,
        Field::LotDepth,
        Field::LotSqft,
        Field::TotalBldgSqft,
        Field::Bathrooms,
    ];

    /// Canonical CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Field::AssessedValue => "u1tfcash",
            Field::Zone => "zone",
            Field::LotWidth => "lotdima",
            Field::LotDepth => "lotdimb",
            Field::LotSqft => "lotsqfeet",
            Field::TotalBldgSqft => "totbldgft",
            Field::Bathrooms => "bathrooms",
            Field::Age => "age",
            Field::ConditionPct => "condition_pct",
            Field::TaxRatePct => "taxrate",
        }
    }

    fn long_name(self) -> &'static str {
        match self {
            Field::AssessedValue => "assessed_value",
            Field::Zone => "zone",
            Field::LotWidth => "lot_width_ft",
            Field::LotDepth => "lot_depth_ft",
            Field::LotSqft => "lot_sqft",
            Field::TotalBldgSqft => "total_bldg_sqft",
            Field::Bathrooms => "bathrooms",
            Field::Age => "age_years",
            Field::ConditionPct => "condition_pct",
            Field::TaxRatePct => "tax_rate_pct",
        }
    }

    /// Accepts either the canonical column name or the record field name.
    pub fn from_name(name: &str) -> Result<Field> {
        let name = name.trim();
        Field::ALL
            .into_iter()
            .find(|f| f.column().eq_ignore_ascii_case(name) || f.long_name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    pub fn is_log_source(self) -> bool {
        Field::LOG_SOURCES.contains(&self)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

/// One assessor record. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parcel {
    pub pin: String,
    pub assessed_value: Option<f64>,
    pub zone: Option<Zone>,
    pub lot_width_ft: Option<f64>,
    pub lot_depth_ft: Option<f64>,
    pub lot_sqft: Option<f64>,
    pub total_bldg_sqft: Option<f64>,
    pub bathrooms: Option<f64>,
    pub age_years: Option<f64>,
    pub condition_pct: Option<f64>,
    pub tax_rate_pct: Option<f64>,
}

impl Parcel {
    /// A record with every field missing.
    pub fn empty(pin: impl Into<String>) -> Self {
        Parcel {
            pin: pin.into(),
            assessed_value: None,
            zone: None,
            lot_width_ft: None,
            lot_depth_ft: None,
            lot_sqft: None,
            total_bldg_sqft: None,
            bathrooms: None,
            age_years: None,
            condition_pct: None,
            tax_rate_pct: None,
        }
    }

    /// Numeric value of a field. `Zone` is not numeric and always yields `None`.
    pub fn numeric(&self, field: Field) -> Option<f64> {
        match field {
            Field::AssessedValue => self.assessed_value,
            Field::Zone => None,
            Field::LotWidth => self.lot_width_ft,
            Field::LotDepth => self.lot_depth_ft,
            Field::LotSqft => self.lot_sqft,
            Field::TotalBldgSqft => self.total_bldg_sqft,
            Field::Bathrooms => self.bathrooms,
            Field::Age => self.age_years,
            Field::ConditionPct => self.condition_pct,
            Field::TaxRatePct => self.tax_rate_pct,
        }
    }

    pub fn set_numeric(&mut self, field: Field, value: Option<f64>) {
        let slot = match field {
            Field::AssessedValue => &mut self.assessed_value,
            Field::Zone => return,
            Field::LotWidth => &mut self.lot_width_ft,
            Field::LotDepth => &mut self.lot_depth_ft,
            Field::LotSqft => &mut self.lot_sqft,
            Field::TotalBldgSqft => &mut self.total_bldg_sqft,
            Field::Bathrooms => &mut self.bathrooms,
            Field::Age => &mut self.age_years,
            Field::ConditionPct => &mut self.condition_pct,
            Field::TaxRatePct => &mut self.tax_rate_pct,
        };
        *slot = value;
    }

    fn is_present(&self, field: Field) -> bool {
        match field {
            Field::Zone => self.zone.is_some(),
            f => self.numeric(f).is_some(),
        }
    }

    /// Fields that would get this record dropped by [`clean`]: missing,
    /// non-finite, nonpositive log sources, negative age, or a condition
    /// rating outside `[0, 100]`.
    pub fn defects(&self) -> Vec<Field> {
        Field::ALL
            .into_iter()
            .filter(|&field| {
                if !self.is_present(field) {
                    return true;
                }
                let Some(v) = self.numeric(field) else {
                    return false;
                };
                !v.is_finite()
                    || (field.is_log_source() && v <= 0.0)
                    || (field == Field::Age && v < 0.0)
                    || (field == Field::ConditionPct && !(0.0..=100.0).contains(&v))
            })
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        self.defects().is_empty()
    }
}

/// Maps each parcel field onto a CSV column name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub pin: String,
    columns: BTreeMap<Field, String>,
}

impl Schema {
    pub fn canonical() -> Self {
        Schema {
            pin: PIN_COLUMN.to_string(),
            columns: Field::ALL.into_iter().map(|f| (f, f.column().to_string())).collect(),
        }
    }

    pub fn with_column(mut self, field: Field, column: impl Into<String>) -> Self {
        self.columns.insert(field, column.into());
        self
    }

    pub fn column(&self, field: Field) -> &str {
        &self.columns[&field]
    }
}

impl Default for Schema {
    fn default() -> Self {
        Schema::canonical()
    }
}

/// Ordered parcel records with unique pins.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelTable {
    rows: Vec<Parcel>,
    pub schema_version: String,
}

impl ParcelTable {
    pub fn new(rows: Vec<Parcel>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for (i, p) in rows.iter().enumerate() {
            if p.pin.trim().is_empty() {
                return Err(Error::EmptyPin { row: i + 1 });
            }
            if !seen.insert(p.pin.as_str()) {
                return Err(Error::DuplicatePin(p.pin.clone()));
            }
        }
        Ok(ParcelTable {
            rows,
            schema_version: SCHEMA_VERSION.to_string(),
        })
    }

    pub fn rows(&self) -> &[Parcel] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, pin: &str) -> Option<&Parcel> {
        self.rows.iter().find(|p| p.pin == pin)
    }

    pub fn into_rows(self) -> Vec<Parcel> {
        self.rows
    }
}

/// Outcome of listwise deletion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleanReport {
    pub rows_in: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    /// Defect counts per column. A dropped row counts once under every
    /// defective field it has.
    pub dropped_by_field: BTreeMap<String, usize>,
    pub dropped_pins: Vec<String>,
}

pub fn load_parcels(path: impl AsRef<Path>, schema: &Schema) -> Result<ParcelTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    read_parcels(file, schema)
}

pub fn read_parcels<R: Read>(reader: R, schema: &Schema) -> Result<ParcelTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let pin_idx = index_of(&schema.pin)?;
    let field_idx: Vec<(Field, usize)> = Field::ALL
        .into_iter()
        .map(|f| index_of(schema.column(f)).map(|i| (f, i)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let pin = record.get(pin_idx).unwrap_or("").to_string();
        if pin.is_empty() {
            return Err(Error::EmptyPin { row: line + 1 });
        }
        if seen.insert(pin.clone(), line).is_some() {
            return Err(Error::DuplicatePin(pin));
        }
        let mut parcel = Parcel::empty(pin);
        for &(field, idx) in &field_idx {
            let cell = record.get(idx).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            if field == Field::Zone {
                parcel.zone = Some(Zone::from_code(cell));
            } else {
                parcel.set_numeric(field, cell.parse::<f64>().ok());
            }
        }
        rows.push(parcel);
    }
    ParcelTable::new(rows)
}

pub fn write_parcels(table: &ParcelTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })?;
    write_parcels_to(table, file)?;
    Ok(())
}

/// Writes the canonical CSV layout. Floats use the shortest representation
/// that parses back to the same value, so write/read is lossless.
pub fn write_parcels_to<W: Write>(table: &ParcelTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![PIN_COLUMN];
    header.extend(Field::ALL.iter().map(|f| f.column()));
    wtr.write_record(&header)?;
    for p in table.rows() {
        let mut record = Vec::with_capacity(header.len());
        record.push(p.pin.clone());
        for field in Field::ALL {
            let cell = match field {
                Field::Zone => p.zone.map(|z| z.token().to_string()),
                f => p.numeric(f).map(|v| v.to_string()),
            };
            record.push(cell.unwrap_or_default());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Listwise deletion: keeps only records with every field present and valid.
pub fn clean(table: &ParcelTable) -> (ParcelTable, CleanReport) {
    let mut kept = Vec::with_capacity(table.len());
    let mut dropped_by_field = BTreeMap::new();
    let mut dropped_pins = Vec::new();
    for p in table.rows() {
        let defects = p.defects();
        if defects.is_empty() {
            kept.push(p.clone());
            continue;
        }
        for f in defects {
            *dropped_by_field.entry(f.column().to_string()).or_insert(0) += 1;
        }
        dropped_pins.push(p.pin.clone());
    }
    let report = CleanReport {
        rows_in: table.len(),
        rows_kept: kept.len(),
        rows_dropped: dropped_pins.len(),
        dropped_by_field,
        dropped_pins,
    };
    let cleaned = ParcelTable {
        rows: kept,
        schema_version: table.schema_version.clone(),
    };
    (cleaned, report)
}
