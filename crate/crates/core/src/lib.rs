//! Distance standard deviation, Gini mean difference and related measures of spread.

pub mod asymptotics;
pub mod error;
pub mod closed_forms;
pub mod dist;
pub mod estimators;
pub mod samples;
pub mod quad;
pub mod spacings;
pub mod special;
pub mod simulate;
pub mod sum;

pub use error::{Error, Result};
pub use samples::Sample;
