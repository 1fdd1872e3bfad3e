//! Optimal data-release mechanisms under robust local differential privacy.
//!
//! The privacy and utility constraints are required to hold for every joint
//! distribution in a chi-squared confidence ball around the empirical
//! distribution. Each robust constraint is replaced by a closed-form dual
//! certificate and the resulting problem is solved as a conic program.

pub mod duality;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod problems;
pub mod seed;
pub mod simplex;
pub mod special;
pub mod uncertainty;

pub use error::{Error, Result};
