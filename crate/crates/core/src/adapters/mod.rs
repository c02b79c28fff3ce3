//! Builders turning data summaries into posterior and default prior
//! families for the engine.

pub mod bartlett;
pub mod corr;
pub mod gauss;
pub mod lm;
pub mod ttest;

pub use bartlett::{BartlettFamily, VarianceGroup};
pub use corr::{CorrFamily, CorrGroup};
pub use gauss::gaussian_family;
pub use lm::{lm_family, LmFamily, LmGroup, LmSummary};
pub use ttest::{ttest_family, SampleStats};
