//! Hedonic valuation of assessor parcels: log-value regression with zoning
//! dummies, coefficient inference, correlation and collinearity diagnostics,
//! rezoning counterfactuals, and a synthetic market with known coefficients.

pub mod design;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod lstsq;
pub mod option_value;
pub mod parcel;
pub mod report;
pub mod reproduction;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
