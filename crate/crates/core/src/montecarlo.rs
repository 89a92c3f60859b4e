//! Seeded replication and the mean-squared-error harness.
//!
//! Replicate `i` of a run seeded with `s` draws from ChaCha8 stream `i` of
//! key `s`, so results do not depend on thread count or scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::estimate::{EstimateResult, Method};
use crate::gf::{gf_fit, p0_estimate, GfControls};
use crate::lddist::{ld_sample, LdParams};
use crate::ml::{ml_fit, ml_fit_winsorized, MlOptions};
use crate::sample::Sample;

/// Independent generator for replicate `stream` of a run keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(i, rng_i)` for `i in 0..replicates` in parallel; output in index order.
pub fn replicate<T, F>(seed: u64, replicates: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|i| f(i, &mut stream_rng(seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseConfig {
    pub grid: Vec<LdParams>,
    pub sample_size: usize,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub controls: GfControls,
    pub winsor_bound: u64,
    pub ml: MlOptions,
    pub seed: u64,
}

impl MseConfig {
    pub fn new(grid: Vec<LdParams>, sample_size: usize, replicates: usize, seed: u64) -> Self {
        Self {
            grid,
            sample_size,
            replicates,
            methods: vec![Method::Gf],
            controls: GfControls::default(),
            winsor_bound: crate::ml::DEFAULT_WINSOR_BOUND,
            ml: MlOptions::default(),
            seed,
        }
    }
}

/// Mean squared errors of one method at one grid point, over the
/// replicates where the fit succeeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseCell {
    pub alpha: f64,
    pub rho: f64,
    pub method: Method,
    pub mse_alpha: f64,
    pub mse_rho: Option<f64>,
    pub successes: usize,
    pub failures: usize,
}

/// Fit `sample` with `method`; failures (errors or non-convergence) give `None`.
pub fn fit_with(method: Method, sample: &Sample, cfg: &MseConfig) -> Option<EstimateResult> {
    let r = match method {
        Method::Gf => gf_fit(sample, &cfg.controls).map(|f| f.estimate),
        Method::P0 => p0_estimate(sample),
        Method::Ml => ml_fit(sample, None, &cfg.ml),
        Method::MlWinsor => ml_fit_winsorized(sample, cfg.winsor_bound, None, &cfg.ml),
    };
    r.ok().filter(|e| e.converged && e.alpha_hat.is_finite())
}

/// Estimates for every replicate of one grid point: `out[replicate][method]`.
pub fn replicate_fits(cfg: &MseConfig, cell: usize) -> Result<Vec<Vec<Option<EstimateResult>>>> {
    let p = cfg.grid[cell];
    (0..cfg.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, ((cell as u64) << 32) | i as u64);
            let sample = ld_sample(p.alpha, p.rho, cfg.sample_size, &mut rng)?;
            Ok(cfg.methods.iter().map(|&m| fit_with(m, &sample, cfg)).collect())
        })
        .collect()
}

/// MSE table over the grid, one cell per (grid point, method), grid-major.
pub fn mse_table(cfg: &MseConfig) -> Result<Vec<MseCell>> {
    let mut out = Vec::with_capacity(cfg.grid.len() * cfg.methods.len());
    for (cell, p) in cfg.grid.iter().enumerate() {
        let fits = replicate_fits(cfg, cell)?;
        for (m_idx, &method) in cfg.methods.iter().enumerate() {
            let ok: Vec<&EstimateResult> = fits.iter().filter_map(|f| f[m_idx].as_ref()).collect();
            let k = ok.len();
            let mean = |f: &dyn Fn(&EstimateResult) -> f64| ok.iter().map(|e| f(e)).sum::<f64>() / k as f64;
            let rho = p.rho.get();
            let mse_rho = (method != Method::P0 && k > 0)
                .then(|| mean(&|e| (e.rho_hat.unwrap_or(f64::NAN) - rho).powi(2)));
            out.push(MseCell {
                alpha: p.alpha,
                rho,
                method,
                mse_alpha: if k > 0 { mean(&|e| (e.alpha_hat - p.alpha).powi(2)) } else { f64::NAN },
                mse_rho,
                successes: k,
                failures: cfg.replicates - k,
            });
        }
    }
    Ok(out)
}
