//! Synthetic zoned housing market with known coefficients.
//!
//! Generation is deterministic: the RNG is ChaCha8 seeded with
//! `seed_from_u64(seed)`, and parcels draw their attributes in a fixed order.
//! Changing either is a breaking change to [`RNG_CONTRACT`].

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::design::{default_model_spec, ModelSpec};
use crate::error::{Error, Result};
use crate::inference::InferenceTable;
use crate::parcel::{Parcel, ParcelTable, Zone};
use crate::reproduction::{PUBLISHED_N, PUBLISHED_ROWS, ZONE_DENSITIES};

pub const RNG_CONTRACT: &str = "chacha8/rand_chacha-0.9/seed_from_u64/v1";

/// Intercept for the default truth; puts typical log values near 11.5.
pub const DEFAULT_INTERCEPT: f64 = 7.5;

/// The published age² estimate read at the scale its t-value implies.
pub const AGE_SQ_TRUE_SCALE: f64 = 1e-5;

pub const TARGET_R2: f64 = 0.895;

const PILOT_SEED: u64 = 0x0005_eed0_fa11;
const PILOT_N: usize = 200_000;

/// Clamped log-normal: `exp(ln(median) + log_sd·z)` limited to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogNormalRange {
    pub low: f64,
    pub median: f64,
    pub high: f64,
    pub log_sd: f64,
}

impl LogNormalRange {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = self.low > 0.0
            && self.low <= self.median
            && self.median <= self.high
            && self.log_sd >= 0.0
            && self.high.is_finite();
        if !ok {
            return Err(Error::InvalidTruth(format!("bad range for {name}: {self:?}")));
        }
        Ok(())
    }

    fn at_z(&self, z: f64) -> f64 {
        (self.median.ln() + self.log_sd * z).exp().clamp(self.low, self.high)
    }
}

/// Per-field sampling bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateRanges {
    pub lot_width_ft: LogNormalRange,
    pub lot_depth_ft: LogNormalRange,
    /// Correlation of log width and log depth.
    pub width_depth_corr: f64,
    /// `lot_sqft = width · depth · (1 + u)`, `u ~ U(−jitter, jitter)`.
    pub lot_sqft_jitter: f64,
    pub lot_sqft_bounds: (f64, f64),
    pub total_bldg_sqft: LogNormalRange,
    /// Rounded to whole bathrooms.
    pub bathrooms: LogNormalRange,
    /// Integer ages, inclusive.
    pub age_years: (u32, u32),
    pub condition_pct: (f64, f64),
    pub tax_rate_pct: (f64, f64),
}

impl Default for CovariateRanges {
    /// Bounds bracket the published sample extremes.
    fn default() -> Self {
        CovariateRanges {
            lot_width_ft: LogNormalRange {
                low: 20.0,
                median: 65.0,
                high: 2384.0,
                log_sd: 0.30,
            },
            lot_depth_ft: LogNormalRange {
                low: 77.0,
                median: 118.0,
                high: 2032.5,
                log_sd: 0.20,
            },
            width_depth_corr: 0.40,
            lot_sqft_jitter: 0.05,
            lot_sqft_bounds: (666.0, 250_000.0),
            total_bldg_sqft: LogNormalRange {
                low: 645.0,
                median: 2000.0,
                high: 256_609.0,
                log_sd: 0.35,
            },
            bathrooms: LogNormalRange {
                low: 1.0,
                median: 2.5,
                high: 336.0,
                log_sd: 0.35,
            },
            age_years: (0, 120),
            condition_pct: (0.0, 100.0),
            tax_rate_pct: (6.29, 7.69),
        }
    }
}

impl CovariateRanges {
    fn validate(&self) -> Result<()> {
        self.lot_width_ft.validate("lot_width_ft")?;
        self.lot_depth_ft.validate("lot_depth_ft")?;
        self.total_bldg_sqft.validate("total_bldg_sqft")?;
        self.bathrooms.validate("bathrooms")?;
        let bad = |m: &str| Err(Error::InvalidTruth(m.to_string()));
        if !(-1.0..=1.0).contains(&self.width_depth_corr) {
            return bad("width_depth_corr outside [-1, 1]");
        }
        if !(0.0..1.0).contains(&self.lot_sqft_jitter) {
            return bad("lot_sqft_jitter outside [0, 1)");
        }
        let (lo, hi) = self.lot_sqft_bounds;
        if !(lo > 0.0 && lo <= hi) {
            return bad("lot_sqft bounds must be positive and ordered");
        }
        if self.age_years.0 > self.age_years.1 {
            return bad("age range reversed");
        }
        let (c0, c1) = self.condition_pct;
        if !(0.0 <= c0 && c0 <= c1 && c1 <= 100.0) {
            return bad("condition range must lie in [0, 100]");
        }
        if self.tax_rate_pct.0.is_nan() || self.tax_rate_pct.1.is_nan() || self.tax_rate_pct.0 > self.tax_rate_pct.1 {
            return bad("tax rate range reversed");
        }
        Ok(())
    }
}

/// How zones are assigned to generated parcels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ZoneSampling {
    /// Zone counts are `n·p` rounded by largest remainder, then shuffled.
    /// Rare zones keep their share at every `n`.
    #[default]
    Stratified,
    /// Each parcel draws its zone independently.
    Independent,
}

/// Ground truth for the generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueModel {
    pub spec: ModelSpec,
    /// Aligned with `spec.column_labels()`.
    pub beta: Vec<f64>,
    pub noise_sigma: f64,
    pub zone_probs: Vec<(Zone, f64)>,
    pub zone_sampling: ZoneSampling,
    pub covariate_ranges: CovariateRanges,
    pub seed: u64,
}

/// Zone shares implied by the published zone densities; the remainder is `Other`.
pub fn published_zone_probs() -> Vec<(Zone, f64)> {
    let n = PUBLISHED_N as f64;
    let mut probs: Vec<(Zone, f64)> = ZONE_DENSITIES.iter().map(|&(z, c)| (z, c as f64 / n)).collect();
    let rest = 1.0 - probs.iter().map(|(_, p)| p).sum::<f64>();
    probs.push((Zone::Other, rest));
    probs
}

impl TrueModel {
    /// Default spec, published coefficients, published zone shares, no noise.
    pub fn published_defaults(seed: u64) -> Self {
        let mut beta = vec![DEFAULT_INTERCEPT];
        beta.extend(PUBLISHED_ROWS.iter().map(|r| {
            if r.label == "age_sq" {
                r.estimate * AGE_SQ_TRUE_SCALE
            } else {
                r.estimate
            }
        }));
        TrueModel {
            spec: default_model_spec(),
            beta,
            noise_sigma: 0.0,
            zone_probs: published_zone_probs(),
            zone_sampling: ZoneSampling::default(),
            covariate_ranges: CovariateRanges::default(),
            seed,
        }
    }

    /// Only the zone dummies carry signal.
    pub fn zoning_only(seed: u64) -> Self {
        let mut truth = Self::published_defaults(seed);
        truth.set_non_zone(0.0);
        truth
    }

    /// Every zone coefficient is zero.
    pub fn without_zone_effects(seed: u64) -> Self {
        let mut truth = Self::published_defaults(seed);
        for (j, term) in truth.spec.terms.iter().enumerate() {
            if ModelSpec::is_zone_term(term) {
                truth.beta[j + 1] = 0.0;
            }
        }
        truth
    }

    fn set_non_zone(&mut self, value: f64) {
        let offset = usize::from(self.spec.include_intercept);
        for (j, term) in self.spec.terms.iter().enumerate() {
            if !ModelSpec::is_zone_term(term) {
                self.beta[j + offset] = value;
            }
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_zone_sampling(mut self, sampling: ZoneSampling) -> Self {
        self.zone_sampling = sampling;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn labels(&self) -> Vec<String> {
        self.spec.column_labels()
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate().map_err(|e| Error::InvalidTruth(e.to_string()))?;
        if self.beta.len() != self.spec.column_labels().len() {
            return Err(Error::InvalidTruth(format!(
                "{} coefficients for {} columns",
                self.beta.len(),
                self.spec.column_labels().len()
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidTruth("noise_sigma must be finite and >= 0".into()));
        }
        if self.zone_probs.iter().any(|(_, p)| p.is_nan() || *p < 0.0) {
            return Err(Error::InvalidTruth("negative zone probability".into()));
        }
        let total: f64 = self.zone_probs.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTruth(format!("zone probabilities sum to {total}")));
        }
        self.covariate_ranges.validate()
    }

    /// Variance of the noiseless log value under the covariate distribution,
    /// estimated on a fixed pilot sample so it does not depend on `seed`.
    pub fn signal_variance(&self) -> Result<f64> {
        let pilot = self.clone().with_seed(PILOT_SEED).with_noise(0.0);
        let (_, log) = generate_parcels(&pilot, PILOT_N)?;
        let v = &log.true_log_values;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Ok(v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64)
    }

    /// Sets `noise_sigma` so that the population R² equals `target_r2`.
    pub fn calibrated(mut self, target_r2: f64) -> Result<Self> {
        if !(target_r2 > 0.0 && target_r2 < 1.0) {
            return Err(Error::InvalidTruth(format!("target R² {target_r2} outside (0, 1)")));
        }
        let signal = self.signal_variance()?;
        self.noise_sigma = (signal * (1.0 - target_r2) / target_r2).sqrt();
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationLog {
    pub rng: String,
    pub seed: u64,
    pub n: usize,
    pub labels: Vec<String>,
    pub beta: Vec<f64>,
    pub noise_sigma: f64,
    /// Noiseless log value per parcel, in table order.
    pub true_log_values: Vec<f64>,
}

impl GenerationLog {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("log serializes");
        std::fs::write(path, text).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Largest-remainder allocation of `n` parcels to zones.
pub fn stratified_zone_counts(probs: &[(Zone, f64)], n: usize) -> Vec<(Zone, usize)> {
    let mut counts: Vec<(Zone, usize, f64)> = probs
        .iter()
        .map(|&(z, p)| {
            let exact = p * n as f64;
            (z, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i].1 += 1;
    }
    counts.into_iter().map(|(z, c, _)| (z, c)).collect()
}

fn zone_sequence(rng: &mut ChaCha8Rng, truth: &TrueModel, n: usize) -> Result<Vec<Zone>> {
    match truth.zone_sampling {
        ZoneSampling::Stratified => {
            let mut zones: Vec<Zone> = stratified_zone_counts(&truth.zone_probs, n)
                .into_iter()
                .flat_map(|(z, c)| std::iter::repeat_n(z, c))
                .collect();
            zones.shuffle(rng);
            Ok(zones)
        }
        ZoneSampling::Independent => {
            let dist = WeightedIndex::new(truth.zone_probs.iter().map(|(_, p)| *p))
                .map_err(|e| Error::InvalidTruth(e.to_string()))?;
            Ok((0..n).map(|_| truth.zone_probs[dist.sample(rng)].0).collect())
        }
    }
}

fn sample_parcel(rng: &mut ChaCha8Rng, i: usize, truth: &TrueModel, zone: Zone) -> Parcel {
    let r = &truth.covariate_ranges;

    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let rho = r.width_depth_corr;
    let width = r.lot_width_ft.at_z(z1);
    let depth = r.lot_depth_ft.at_z(rho * z1 + (1.0 - rho * rho).sqrt() * z2);
    let jitter = if r.lot_sqft_jitter > 0.0 {
        rng.random_range(-r.lot_sqft_jitter..r.lot_sqft_jitter)
    } else {
        0.0
    };
    let sqft = (width * depth * (1.0 + jitter)).clamp(r.lot_sqft_bounds.0, r.lot_sqft_bounds.1);

    let bldg = r.total_bldg_sqft.at_z(StandardNormal.sample(rng));
    let baths = r
        .bathrooms
        .at_z(StandardNormal.sample(rng))
        .round()
        .clamp(r.bathrooms.low.ceil(), r.bathrooms.high);
    let age = rng.random_range(r.age_years.0..=r.age_years.1) as f64;
    let (c0, c1) = r.condition_pct;
    let condition = if c0 < c1 {
        rng.random_range(c0..=c1).round().clamp(c0, c1)
    } else {
        c0
    };
    let (t0, t1) = r.tax_rate_pct;
    let tax = if t0 < t1 { rng.random_range(t0..=t1) } else { t0 };

    Parcel {
        pin: format!("SYN{i:07}"),
        assessed_value: None,
        zone: Some(zone),
        lot_width_ft: Some(width),
        lot_depth_ft: Some(depth),
        lot_sqft: Some(sqft),
        total_bldg_sqft: Some(bldg),
        bathrooms: Some(baths),
        age_years: Some(age),
        condition_pct: Some(condition),
        tax_rate_pct: Some(tax),
    }
}

/// Draws `n` parcels; `log(assessed_value) = x·β + ε`, `ε ~ N(0, σ²)`.
pub fn generate_parcels(truth: &TrueModel, n: usize) -> Result<(ParcelTable, GenerationLog)> {
    if n == 0 {
        return Err(Error::InvalidTruth("n must be at least 1".into()));
    }
    truth.validate()?;
    let noise = Normal::new(0.0, truth.noise_sigma).map_err(|e| Error::InvalidTruth(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    let zones = zone_sequence(&mut rng, truth, n)?;

    let mut rows = Vec::with_capacity(n);
    let mut true_log_values = Vec::with_capacity(n);
    for (i, zone) in zones.into_iter().enumerate() {
        let mut parcel = sample_parcel(&mut rng, i, truth, zone);
        let x = truth.spec.row(&parcel)?;
        let mean: f64 = x.iter().zip(&truth.beta).map(|(a, b)| a * b).sum();
        let eps = if truth.noise_sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        parcel.assessed_value = Some((mean + eps).exp());
        true_log_values.push(mean);
        rows.push(parcel);
    }
    let log = GenerationLog {
        rng: RNG_CONTRACT.to_string(),
        seed: truth.seed,
        n,
        labels: truth.labels(),
        beta: truth.beta.clone(),
        noise_sigma: truth.noise_sigma,
        true_log_values,
    };
    Ok((ParcelTable::new(rows)?, log))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub label: String,
    pub truth: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `(estimate − truth) / std_error`; `None` on an exact fit.
    pub standardized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
    /// Fraction of standardized errors within ±3; `None` on an exact fit.
    pub fraction_within_3: Option<f64>,
    pub exact_fit: bool,
}

/// Standardized estimation error of every coefficient against the truth.
pub fn recovery_error(truth: &TrueModel, fitted: &InferenceTable) -> Result<RecoveryReport> {
    let labels = truth.labels();
    if labels.len() != fitted.rows.len() {
        return Err(Error::LabelMismatch {
            expected: labels.join(","),
            found: fitted.labels().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::with_capacity(labels.len());
    for ((label, &b), row) in labels.iter().zip(&truth.beta).zip(&fitted.rows) {
        if *label != row.label {
            return Err(Error::LabelMismatch {
                expected: label.clone(),
                found: row.label.clone(),
            });
        }
        let standardized = if fitted.exact_fit || row.std_error == 0.0 {
            None
        } else {
            Some((row.estimate - b) / row.std_error)
        };
        rows.push(RecoveryRow {
            label: label.clone(),
            truth: b,
            estimate: row.estimate,
            std_error: row.std_error,
            standardized,
        });
    }
    let z: Vec<f64> = rows.iter().filter_map(|r| r.standardized).collect();
    let fraction_within_3 = if fitted.exact_fit || z.is_empty() {
        None
    } else {
        Some(z.iter().filter(|v| v.abs() <= 3.0).count() as f64 / z.len() as f64)
    };
    Ok(RecoveryReport {
        rows,
        fraction_within_3,
        exact_fit: fitted.exact_fit,
    })
}
