#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use hedonic::parcel::{Field, Parcel, ParcelTable, Zone};
use hedonic::synth::{generate_parcels, TrueModel, TARGET_R2};

/// Noise level that puts the default truth at the target population R².
/// It depends only on the truth, not the seed, so it is computed once.
pub fn published_sigma() -> f64 {
    static SIGMA: OnceLock<f64> = OnceLock::new();
    *SIGMA.get_or_init(|| {
        TrueModel::published_defaults(0)
            .calibrated(TARGET_R2)
            .expect("calibration")
            .noise_sigma
    })
}

pub fn published_truth(seed: u64) -> TrueModel {
    TrueModel::published_defaults(seed).with_noise(published_sigma())
}

pub fn synth_table(truth: &TrueModel, n: usize) -> ParcelTable {
    generate_parcels(truth, n).expect("generation").0
}

/// One way of breaking a record, and the columns it should be charged to.
pub struct Defect {
    pub apply: fn(&mut Parcel),
    pub fields: &'static [Field],
}

pub fn defect_catalogue() -> Vec<Defect> {
    vec![
        Defect {
            apply: |p| p.lot_sqft = None,
            fields: &[Field::LotSqft],
        },
        Defect {
            apply: |p| p.assessed_value = None,
            fields: &[Field::AssessedValue],
        },
        Defect {
            apply: |p| p.assessed_value = Some(0.0),
            fields: &[Field::AssessedValue],
        },
        Defect {
            apply: |p| p.lot_width_ft = Some(-12.0),
            fields: &[Field::LotWidth],
        },
        Defect {
            apply: |p| p.lot_depth_ft = None,
            fields: &[Field::LotDepth],
        },
        Defect {
            apply: |p| p.total_bldg_sqft = Some(0.0),
            fields: &[Field::TotalBldgSqft],
        },
        Defect {
            apply: |p| p.bathrooms = None,
            fields: &[Field::Bathrooms],
        },
        Defect {
            apply: |p| p.age_years = Some(-3.0),
            fields: &[Field::Age],
        },
        Defect {
            apply: |p| p.condition_pct = Some(140.0),
            fields: &[Field::ConditionPct],
        },
        Defect {
            apply: |p| p.tax_rate_pct = None,
            fields: &[Field::TaxRatePct],
        },
        Defect {
            apply: |p| p.zone = None,
            fields: &[Field::Zone],
        },
        Defect {
            apply: |p| {
                p.lot_sqft = None;
                p.age_years = None;
            },
            fields: &[Field::LotSqft, Field::Age],
        },
    ]
}

pub struct DefectFixture {
    pub table: ParcelTable,
    pub defective_pins: Vec<String>,
    pub expected_by_field: BTreeMap<String, usize>,
}

/// `clean_rows` valid synthetic parcels with `defective` of them broken
/// (cycling through the catalogue), spread evenly through the table.
pub fn defect_fixture(clean_rows: usize, defective: usize, seed: u64) -> DefectFixture {
    let truth = published_truth(seed);
    let mut rows = synth_table(&truth, clean_rows + defective).into_rows();
    let catalogue = defect_catalogue();
    let stride = rows.len() / defective.max(1);
    let mut defective_pins = Vec::new();
    let mut expected_by_field = BTreeMap::new();
    for k in 0..defective {
        let d = &catalogue[k % catalogue.len()];
        let row = &mut rows[k * stride + stride / 2];
        (d.apply)(row);
        defective_pins.push(row.pin.clone());
        for f in d.fields {
            *expected_by_field.entry(f.column().to_string()).or_insert(0) += 1;
        }
    }
    DefectFixture {
        table: ParcelTable::new(rows).unwrap(),
        defective_pins,
        expected_by_field,
    }
}

/// A single valid parcel with given zone.
pub fn parcel(pin: &str, zone: Zone) -> Parcel {
    Parcel {
        pin: pin.to_string(),
        assessed_value: Some(150_000.0),
        zone: Some(zone),
        lot_width_ft: Some(66.0),
        lot_depth_ft: Some(125.0),
        lot_sqft: Some(8250.0),
        total_bldg_sqft: Some(1900.0),
        bathrooms: Some(2.0),
        age_years: Some(35.0),
        condition_pct: Some(60.0),
        tax_rate_pct: Some(7.1),
    }
}
