use serde::{Deserialize, Serialize};

use crate::lddist::LdParams;

/// Estimation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ML")]
    Ml,
    #[serde(rename = "ML_WINSOR")]
    MlWinsor,
    #[serde(rename = "GF")]
    Gf,
    #[serde(rename = "P0")]
    P0,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ml => "ML",
            Method::MlWinsor => "ML_WINSOR",
            Method::Gf => "GF",
            Method::P0 => "P0",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Point estimates with their 2×2 covariance (order α, ρ).
///
/// `rho_hat` is `None` for estimators that do not estimate ρ (P0); the ρ row
/// and column of `cov` are then zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub method: Method,
    pub alpha_hat: f64,
    pub rho_hat: Option<f64>,
    pub cov: [[f64; 2]; 2],
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl EstimateResult {
    /// Fitted parameters, when both are strictly positive.
    pub fn params(&self) -> Option<LdParams> {
        LdParams::new(self.alpha_hat, self.rho_hat?).ok()
    }

    pub fn se_alpha(&self) -> f64 {
        self.cov[0][0].max(0.0).sqrt()
    }

    pub fn se_rho(&self) -> Option<f64> {
        self.rho_hat.map(|_| self.cov[1][1].max(0.0).sqrt())
    }
}
