//! Luria-Delbrück mutant count distribution: probabilities, sampling,
//! parameter estimation and stochastic growth models.

pub mod error;
pub mod estimate;
pub mod gf;
pub mod gof;
pub mod growth;
pub mod inference;
pub mod lddist;
pub mod ml;
pub mod montecarlo;
pub mod numerics;
pub mod sample;
pub mod yule;

pub use error::{Error, Result};
pub use estimate::{EstimateResult, Method};
pub use gf::{gf_fit, p0_estimate, GfControls, GfFit};
pub use growth::{GenerationModel, GenerationTimeLaw};
pub use inference::{wald_inference, Hypothesis};
pub use lddist::{ld_pmf_table, ld_sample, LdParams, PmfTable};
pub use ml::{ml_fit, ml_fit_winsorized, MlOptions};
pub use sample::Sample;
pub use yule::Fitness;
