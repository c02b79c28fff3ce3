//! Densities, region probabilities and samplers, all driven by explicit
//! [`RandomStream`]s so results are reproducible.

mod bvn;
mod correlation;
mod gamma;
mod normal;
mod region;
pub mod rng;
mod student;
mod wishart;

pub use bvn::{bvn_upper, norm_cdf, norm_pdf, norm_quantile, norm_sf};
pub use correlation::{sample_uniform_corr, UniformCorrelation};
pub use gamma::{
    chi_squared_log_pdf, chi_squared_pdf, f_log_pdf, f_pdf, invgamma_pdf, invgamma_region_prob, InverseGamma,
};
pub use normal::{mvn_log_pdf, mvn_pdf, mvn_region_prob, GaussianSpec};
pub use region::{PreparedRegion, Region, RegionProb};
pub use rng::{RandomStream, CHUNK};
pub use student::{mvt_log_pdf, mvt_pdf, mvt_region_prob, StudentTSpec};
pub use wishart::{sample_inverse_wishart, InverseWishart};
