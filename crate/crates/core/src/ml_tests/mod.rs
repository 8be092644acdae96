//! Staged tests and the two conversions between tests and martingales.

mod family;
mod to_martingale;

pub use family::{verify_family, FamilyError, FamilyReport, FamilyViolation, StagedTestFamily};
pub use to_martingale::{
    hitting_witness, test_to_martingale, BundleApproximant, ConversionBundle, ConversionError, HitWitness,
};
pub use to_test::{martingale_to_test, ToTestError};
