//! Maximum likelihood for LD(α, ρ).
//!
//! The log-likelihood `ℓ = Σ_j c_j ln q_j` and its first and second
//! derivatives are evaluated exactly through the pmf recursion and the
//! convolution recursions for `∂q_k/∂α`, `∂q_k/∂ρ` and the second
//! derivatives. Newton's method is damped by step halving.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::estimate::{EstimateResult, Method};
use crate::gf::{gf_fit, GfControls};
use crate::lddist::{check_budget, LdParams, LdRecursion, DEFAULT_TABLE_BUDGET};
use crate::numerics::CompensatedSum;
use crate::sample::Sample;

/// Log-likelihood with its gradient and Hessian in (α, ρ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodParts {
    pub loglik: f64,
    pub score: [f64; 2],
    pub hessian: [[f64; 2]; 2],
    /// Some `q_j` with `c_j > 0` underflowed to zero; `loglik` is -∞.
    pub underflow: bool,
}

fn loglik_rec(sample: &Sample, params: LdParams, budget: usize) -> Result<(f64, LdRecursion)> {
    check_budget(sample.max(), budget)?;
    let mut rec = LdRecursion::new(params, false);
    rec.extend_to(sample.max() as usize);
    let q = rec.q();
    let mut ll = CompensatedSum::new();
    for (&k, &c) in sample.frequencies() {
        let qk = q[k as usize];
        if qk <= 0.0 {
            return Ok((f64::NEG_INFINITY, rec));
        }
        ll.add(c as f64 * qk.ln());
    }
    Ok((ll.value(), rec))
}

fn loglik_only(sample: &Sample, params: LdParams, budget: usize) -> Result<f64> {
    Ok(loglik_rec(sample, params, budget)?.0)
}

/// Log-likelihood, score and Hessian of `sample` at `params`.
pub fn likelihood_parts(sample: &Sample, params: LdParams, budget: usize) -> Result<LikelihoodParts> {
    check_budget(sample.max(), budget)?;
    let mut rec = LdRecursion::new(params, true);
    rec.extend_to(sample.max() as usize);
    Ok(parts_from(sample, &rec))
}

// `rec` must track derivatives and reach the sample maximum.
fn parts_from(sample: &Sample, rec: &LdRecursion) -> LikelihoodParts {
    let alpha = rec.alpha();
    let (q, qa, qr) = (rec.q(), rec.dq_dalpha(), rec.dq_drho());
    let (p, dp, d2p) = (rec.yule(), rec.yule_drho(), rec.yule_d2rho());

    let mut ll = CompensatedSum::new();
    let mut score = [CompensatedSum::new(), CompensatedSum::new()];
    let mut hess = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    let mut underflow = false;

    for (&k, &c) in sample.frequencies() {
        let k = k as usize;
        let c = c as f64;
        let qk = q[k];
        if qk <= 0.0 {
            underflow = true;
            continue;
        }
        let (da, dr) = (qa[k], qr[k]);
        let (daa, dar, drr) = if k == 0 {
            (qk, 0.0, 0.0)
        } else {
            let mut saa = CompensatedSum::new();
            let mut sar = CompensatedSum::new();
            let mut srr = CompensatedSum::new();
            for h in 1..=k {
                let j = k - h;
                saa.add(p[h] * qa[j]);
                sar.add(dp[h] * (q[j] + alpha * qa[j]));
                srr.add(d2p[h] * q[j] + dp[h] * qr[j]);
            }
            (saa.value() - da, sar.value(), alpha * srr.value())
        };
        ll.add(c * qk.ln());
        let (ga, gr) = (da / qk, dr / qk);
        score[0].add(c * ga);
        score[1].add(c * gr);
        hess[0].add(c * (daa / qk - ga * ga));
        hess[1].add(c * (dar / qk - ga * gr));
        hess[2].add(c * (drr / qk - gr * gr));
    }
    let h01 = hess[1].value();
    LikelihoodParts {
        loglik: if underflow { f64::NEG_INFINITY } else { ll.value() },
        score: [score[0].value(), score[1].value()],
        hessian: [[hess[0].value(), h01], [h01, hess[2].value()]],
        underflow,
    }
}

/// `ℓ = Σ_{j=0..M} c_j ln q_j`; -∞ when an observed `q_j` underflows.
pub fn ld_loglik(sample: &Sample, params: LdParams) -> Result<f64> {
    loglik_only(sample, params, DEFAULT_TABLE_BUDGET)
}

/// Gradient of the log-likelihood in (α, ρ).
pub fn ld_score(sample: &Sample, params: LdParams) -> Result<[f64; 2]> {
    Ok(likelihood_parts(sample, params, DEFAULT_TABLE_BUDGET)?.score)
}

/// Hessian of the log-likelihood in (α, ρ).
pub fn ld_hessian(sample: &Sample, params: LdParams) -> Result<[[f64; 2]; 2]> {
    Ok(likelihood_parts(sample, params, DEFAULT_TABLE_BUDGET)?.hessian)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    pub max_iter: usize,
    /// Converged once an accepted step has Euclidean norm below this.
    pub step_tol: f64,
    pub max_halvings: usize,
    pub budget: usize,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            step_tol: 1e-8,
            max_halvings: 30,
            budget: DEFAULT_TABLE_BUDGET,
        }
    }
}

pub(crate) fn invert_2x2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !det.is_finite() || det == 0.0 {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

fn default_start(sample: &Sample, warnings: &mut Vec<String>) -> LdParams {
    match gf_fit(sample, &GfControls::default()) {
        Ok(fit) => {
            if let Some(p) = fit.estimate.params() {
                return p;
            }
        }
        Err(e) => warnings.push(format!("GF initialization failed ({e}); using fallback start")),
    }
    let n = sample.len() as f64;
    let z = sample.zeros() as f64;
    let alpha = if z > 0.0 && z < n { -(z / n).ln() } else { 1.0 };
    LdParams::new(alpha, 1.0).expect("positive")
}

/// Maximum-likelihood fit by damped Newton iteration.
///
/// `init = None` starts from the GF estimate. Returns `Err(Budget)` when the
/// sample maximum exceeds the table budget; non-convergence is reported
/// through `converged = false`.
pub fn ml_fit(sample: &Sample, init: Option<LdParams>, opts: &MlOptions) -> Result<EstimateResult> {
    fit_inner(sample, init, opts, Method::Ml, Vec::new())
}

fn fit_inner(
    sample: &Sample,
    init: Option<LdParams>,
    opts: &MlOptions,
    method: Method,
    mut warnings: Vec<String>,
) -> Result<EstimateResult> {
    let n = sample.len();
    let failure = |alpha: f64, rho: f64, iterations: usize, warnings: Vec<String>| EstimateResult {
        method,
        alpha_hat: alpha,
        rho_hat: Some(rho),
        cov: [[f64::NAN; 2]; 2],
        n,
        iterations,
        converged: false,
        warnings,
    };

    if sample.all_zero() {
        warnings.push(
            "all counts are zero: likelihood is maximized at the boundary alpha -> 0 \
             and rho is unidentifiable"
                .into(),
        );
        let rho = init.map_or(1.0, |p| p.rho.get());
        return Ok(EstimateResult {
            alpha_hat: 0.0,
            ..failure(0.0, rho, 0, warnings)
        });
    }
    check_budget(sample.max(), opts.budget)?;

    let mut theta = match init {
        Some(p) => p,
        None => default_start(sample, &mut warnings),
    };
    let mut parts = likelihood_parts(sample, theta, opts.budget)?;
    if !parts.loglik.is_finite() {
        warnings.push("log-likelihood is -inf at the starting point (pmf underflow)".into());
        return Ok(failure(theta.alpha, theta.rho.get(), 0, warnings));
    }

    let mut warned_direction = false;
    for iter in 1..=opts.max_iter {
        let g = parts.score;
        let h = parts.hessian;
        let mut delta = invert_2x2(h).map(|hi| {
            [
                -(hi[0][0] * g[0] + hi[0][1] * g[1]),
                -(hi[1][0] * g[0] + hi[1][1] * g[1]),
            ]
        });
        let ascent = delta.is_some_and(|d| d[0].is_finite() && d[1].is_finite() && d[0] * g[0] + d[1] * g[1] > 0.0);
        if !ascent {
            // Hessian not negative definite here: fall back to a scaled gradient step.
            let scale = h[0][0].abs().max(h[1][1].abs()).max(1.0);
            delta = Some([g[0] / scale, g[1] / scale]);
            if !warned_direction {
                warnings.push(format!("Hessian not negative definite at iteration {iter}; gradient step used"));
                warned_direction = true;
            }
        }
        let delta = delta.expect("set above");
        let norm = delta[0].hypot(delta[1]);
        if norm < opts.step_tol {
            return finish(theta, parts, iter, method, n, warnings);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let a = theta.alpha + t * delta[0];
            let r = theta.rho.get() + t * delta[1];
            if a > 0.0 && r > 0.0 && a.is_finite() && r.is_finite() {
                let cand = LdParams::new(a, r)?;
                let (ll, rec) = loglik_rec(sample, cand, opts.budget)?;
                if ll >= parts.loglik {
                    accepted = Some((cand, rec));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((next, mut rec)) => {
                theta = next;
                rec.track_derivatives();
                parts = parts_from(sample, &rec);
                if t * norm < opts.step_tol {
                    return finish(theta, parts, iter, method, n, warnings);
                }
            }
            None => {
                if norm < 1e-6 * (1.0 + theta.alpha.hypot(theta.rho.get())) {
                    // No representable improvement left: stationary to rounding.
                    return finish(theta, parts, iter, method, n, warnings);
                }
                warnings.push(format!(
                    "line search failed at iteration {iter} after {} halvings",
                    opts.max_halvings
                ));
                return Ok(failure(theta.alpha, theta.rho.get(), iter, warnings));
            }
        }
    }
    warnings.push(format!("no convergence after {} iterations", opts.max_iter));
    Ok(failure(theta.alpha, theta.rho.get(), opts.max_iter, warnings))
}

fn finish(
    theta: LdParams,
    parts: LikelihoodParts,
    iterations: usize,
    method: Method,
    n: usize,
    mut warnings: Vec<String>,
) -> Result<EstimateResult> {
    let info = [
        [-parts.hessian[0][0], -parts.hessian[0][1]],
        [-parts.hessian[1][0], -parts.hessian[1][1]],
    ];
    let pd = info[0][0] > 0.0 && info[0][0] * info[1][1] - info[0][1] * info[1][0] > 0.0;
    let cov = invert_2x2(info).filter(|_| pd);
    let converged = cov.is_some();
    if !converged {
        warnings.push("observed information is not positive definite at the final iterate".into());
    }
    let cov = cov.unwrap_or([[f64::NAN; 2]; 2]);
    Ok(EstimateResult {
        method,
        alpha_hat: theta.alpha,
        rho_hat: Some(theta.rho.get()),
        cov: [[cov[0][0], cov[0][1]], [cov[0][1], cov[1][1]]],
        n,
        iterations,
        converged,
        warnings,
    })
}

/// A sample with values above a bound replaced by the bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Winsorized {
    pub sample: Sample,
    pub bound: u64,
    pub clipped: usize,
}

impl Winsorized {
    pub fn warning(&self) -> Option<String> {
        (self.clipped > 0).then(|| format!("{} value(s) clipped at winsorization bound {}", self.clipped, self.bound))
    }
}

pub const DEFAULT_WINSOR_BOUND: u64 = 500;

pub fn winsorize(sample: &Sample, bound: u64) -> Result<Winsorized> {
    if bound < 1 {
        return Err(domain("winsorization bound", bound as f64));
    }
    let (clipped_sample, clipped) = sample.clipped(bound);
    Ok(Winsorized {
        sample: clipped_sample,
        bound,
        clipped,
    })
}

/// ML on the winsorized sample, clipped values treated as exact observations.
pub fn ml_fit_winsorized(
    sample: &Sample,
    bound: u64,
    init: Option<LdParams>,
    opts: &MlOptions,
) -> Result<EstimateResult> {
    let w = winsorize(sample, bound)?;
    let warnings = w.warning().into_iter().collect();
    fit_inner(&w.sample, init, opts, Method::MlWinsor, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherOptions {
    pub rel_tol: f64,
    /// Number of terms over which the relative increment is measured.
    pub window: usize,
    pub max_terms: usize,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            window: 1000,
            max_terms: 20_000,
        }
    }
}

/// Truncated expected information per observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherInfo {
    pub matrix: [[f64; 2]; 2],
    pub terms: usize,
    /// Relative increment of the last window fell below `rel_tol`.
    pub converged: bool,
    /// Partial sums were cut by the term budget; the inverse overstates variances.
    pub conservative: bool,
    pub last_relative_increment: f64,
}

/// Fisher information `I(α, ρ)` from partial sums of
/// `Σ_k (∂q_k/∂θ_i)(∂q_k/∂θ_j)/q_k`.
pub fn fisher_info(params: LdParams, rel_tol: f64) -> Result<FisherInfo> {
    fisher_info_with(
        params,
        &FisherOptions {
            rel_tol,
            ..FisherOptions::default()
        },
    )
}

pub fn fisher_info_with(params: LdParams, opts: &FisherOptions) -> Result<FisherInfo> {
    if !(opts.rel_tol > 0.0) {
        return Err(domain("rel_tol", opts.rel_tol));
    }
    if opts.window == 0 || opts.max_terms == 0 {
        return Err(Error::Domain {
            what: "fisher window/term budget",
            value: 0.0,
        });
    }
    let mut rec = LdRecursion::new(params, true);
    let mut sums = [CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new()];
    let mut next = 0usize;
    loop {
        let upto = (next + opts.window).min(opts.max_terms) - 1;
        rec.extend_to(upto);
        let before = sums.map(|s| s.value());
        for k in next..=upto {
            let qk = rec.q()[k];
            if qk <= 0.0 {
                continue;
            }
            let (a, r) = (rec.dq_dalpha()[k], rec.dq_drho()[k]);
            sums[0].add(a * a / qk);
            sums[1].add(a * r / qk);
            sums[2].add(r * r / qk);
        }
        next = upto + 1;
        let after = sums.map(|s| s.value());
        let rel = (0..3)
            .map(|i| {
                let scale = if i == 1 { (after[0] * after[2]).sqrt() } else { after[i].abs() };
                if scale > 0.0 {
                    (after[i] - before[i]).abs() / scale
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        let converged = rel < opts.rel_tol;
        if converged || next >= opts.max_terms {
            let m = [[after[0], after[1]], [after[1], after[2]]];
            return Ok(FisherInfo {
                matrix: m,
                terms: next,
                converged,
                conservative: !converged,
                last_relative_increment: rel,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: &[u64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    fn params(a: f64, r: f64) -> LdParams {
        LdParams::new(a, r).unwrap()
    }

    fn draw(a: f64, r: f64, n: usize, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::lddist::ld_sample(a, crate::yule::Fitness::new(r).unwrap(), n, &mut rng).unwrap()
    }

    #[test]
    fn loglik_closed_forms() {
        let ll = ld_loglik(&s(&[0; 7]), params(1.7, 0.4)).unwrap();
        assert_relative_eq!(ll, -7.0 * 1.7, max_relative = 1e-15);
        let (a, r) = (1.3f64, 0.6f64);
        let ll = ld_loglik(&s(&[1]), params(a, r)).unwrap();
        assert_relative_eq!(ll, a.ln() - a + (r / (r + 1.0)).ln(), max_relative = 1e-13);
    }

    #[test]
    fn loglik_budget() {
        let big = s(&[0, 200_000]);
        assert!(matches!(ld_loglik(&big, params(1.0, 1.0)), Err(Error::Budget { .. })));
        assert!(matches!(
            ml_fit(&big, None, &MlOptions::default()),
            Err(Error::Budget { .. })
        ));
    }

    fn fd_check(sm: &Sample, a: f64, r: f64) {
        let parts = likelihood_parts(sm, params(a, r), DEFAULT_TABLE_BUDGET).unwrap();
        let ll = |a: f64, r: f64| ld_loglik(sm, params(a, r)).unwrap();
        let sc = |a: f64, r: f64| ld_score(sm, params(a, r)).unwrap();
        let (ha, hr) = (1e-5 * a, 1e-5 * r);
        let ga = (ll(a + ha, r) - ll(a - ha, r)) / (2.0 * ha);
        let gr = (ll(a, r + hr) - ll(a, r - hr)) / (2.0 * hr);
        assert_relative_eq!(parts.score[0], ga, max_relative = 1e-4, epsilon = 1e-6);
        assert_relative_eq!(parts.score[1], gr, max_relative = 1e-4, epsilon = 1e-6);
        let haa = (sc(a + ha, r)[0] - sc(a - ha, r)[0]) / (2.0 * ha);
        let har = (sc(a, r + hr)[0] - sc(a, r - hr)[0]) / (2.0 * hr);
        let hra = (sc(a + ha, r)[1] - sc(a - ha, r)[1]) / (2.0 * ha);
        let hrr = (sc(a, r + hr)[1] - sc(a, r - hr)[1]) / (2.0 * hr);
        let h = parts.hessian;
        assert_relative_eq!(h[0][0], haa, max_relative = 1e-4, epsilon = 1e-6);
        assert_relative_eq!(h[0][1], har, max_relative = 1e-4, epsilon = 1e-6);
        assert_relative_eq!(h[1][0], hra, max_relative = 1e-4, epsilon = 1e-6);
        assert_relative_eq!(h[1][1], hrr, max_relative = 1e-4, epsilon = 1e-6);
    }

    #[test]
    fn score_and_hessian_match_finite_differences() {
        let sm = s(&[0, 0, 1, 1, 2, 3, 5, 8, 13, 40, 150, 200, 7, 0, 4]);
        for &a in &[0.5, 2.0, 5.0] {
            for &r in &[0.5, 1.0, 2.0] {
                fd_check(&sm, a, r);
            }
        }
    }

    #[test]
    fn recursion_derivatives_match_table_differences() {
        let (a, r) = (1.7, 0.9);
        let mut rec = LdRecursion::new(params(a, r), true);
        rec.extend_to(60);
        let tab = |a: f64, r: f64| crate::lddist::ld_pmf_table(params(a, r), 60).unwrap().q;
        let (ha, hr) = (1e-6, 1e-6);
        let (ap, am) = (tab(a + ha, r), tab(a - ha, r));
        let (rp, rm) = (tab(a, r + hr), tab(a, r - hr));
        for k in 0..=60 {
            let fa = (ap[k] - am[k]) / (2.0 * ha);
            let fr = (rp[k] - rm[k]) / (2.0 * hr);
            assert_relative_eq!(rec.dq_dalpha()[k], fa, max_relative = 1e-6, epsilon = 1e-12);
            assert_relative_eq!(rec.dq_drho()[k], fr, max_relative = 1e-6, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_zero_sample_is_boundary() {
        let e = ml_fit(&s(&[0; 20]), None, &MlOptions::default()).unwrap();
        assert_eq!(e.alpha_hat, 0.0);
        assert!(!e.converged);
        assert!(!e.warnings.is_empty());
    }

    #[test]
    fn fit_is_stationary_and_deterministic() {
        let sm = draw(2.0, 1.0, 200, 3);
        let e1 = ml_fit(&sm, None, &MlOptions::default()).unwrap();
        let e2 = ml_fit(&sm, None, &MlOptions::default()).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.converged, "{e1:?}");
        let p = e1.params().unwrap();
        let g = ld_score(&sm, p).unwrap();
        assert!(g[0].abs() < 1e-5 && g[1].abs() < 1e-5, "{g:?}");
        let best = ld_loglik(&sm, p).unwrap();
        for (da, dr) in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.01), (0.0, -0.01)] {
            let q = params(p.alpha + da, p.rho.get() + dr);
            assert!(ld_loglik(&sm, q).unwrap() < best);
        }
        let c = e1.cov;
        assert_eq!(c[0][1], c[1][0]);
        assert!(c[0][0] > 0.0 && c[0][0] * c[1][1] > c[0][1] * c[0][1]);
    }

    #[test]
    fn fit_from_explicit_start_agrees() {
        let sm = draw(1.5, 0.8, 300, 21);
        let a = ml_fit(&sm, None, &MlOptions::default()).unwrap();
        let b = ml_fit(&sm, Some(params(0.5, 3.0)), &MlOptions::default()).unwrap();
        assert!(a.converged && b.converged);
        assert_relative_eq!(a.alpha_hat, b.alpha_hat, max_relative = 1e-6);
        assert_relative_eq!(a.rho_hat.unwrap(), b.rho_hat.unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn winsorize_examples() {
        let w = winsorize(&s(&[0, 10, 600, 5000]), 500).unwrap();
        assert_eq!(w.sample.counts(), &[0, 10, 500, 500]);
        assert_eq!(w.clipped, 2);
        assert!(w.warning().unwrap().contains('2'));
        let w = winsorize(&s(&[0, 1, 2]), 500).unwrap();
        assert_eq!(w.clipped, 0);
        assert!(w.warning().is_none());
        assert!(winsorize(&s(&[1]), 0).is_err());
    }

    #[test]
    fn winsorized_fit_handles_jackpots() {
        let mut v = draw(2.0, 0.8, 100, 8).counts().to_vec();
        v[0] = 250_000;
        let sm = Sample::new(v).unwrap();
        assert!(ml_fit(&sm, None, &MlOptions::default()).is_err());
        let e = ml_fit_winsorized(&sm, DEFAULT_WINSOR_BOUND, None, &MlOptions::default()).unwrap();
        assert_eq!(e.method, Method::MlWinsor);
        assert!(e.converged);
        assert!(e.warnings.iter().any(|w| w.contains("clipped")));
    }

    #[test]
    fn fisher_information_properties() {
        let f = fisher_info(params(1.0, 1.0), 1e-6).unwrap();
        let m = f.matrix;
        assert!(m[0][0] > 0.0 && m[1][1] > 0.0);
        assert!(m[0][0] * m[1][1] - m[0][1] * m[0][1] > 0.0);
        assert!(f.terms >= 1000);
        // information in α alone is bounded by that of observing the Poisson count
        assert!(m[0][0] < 1.0);
        let small = fisher_info_with(
            params(1.0, 0.5),
            &FisherOptions {
                rel_tol: 1e-12,
                window: 100,
                max_terms: 300,
            },
        )
        .unwrap();
        assert!(small.conservative && !small.converged);
        assert_eq!(small.terms, 300);
    }

    #[test]
    fn fisher_alpha_entry_matches_series() {
        // I_αα = Σ (∂_α q_k)² / q_k computed from an independent table difference
        let p = params(0.7, 2.0);
        let f = fisher_info_with(
            p,
            &FisherOptions {
                rel_tol: 1e-10,
                window: 200,
                max_terms: 4000,
            },
        )
        .unwrap();
        let k = 4000;
        let h = 1e-6;
        let q = crate::lddist::ld_pmf_table(p, k).unwrap().q;
        let up = crate::lddist::ld_pmf_table(params(0.7 + h, 2.0), k).unwrap().q;
        let dn = crate::lddist::ld_pmf_table(params(0.7 - h, 2.0), k).unwrap().q;
        let want: f64 = (0..f.terms)
            .map(|i| {
                let d = (up[i] - dn[i]) / (2.0 * h);
                d * d / q[i]
            })
            .sum();
        assert_relative_eq!(f.matrix[0][0], want, max_relative = 1e-5);
    }

    #[test]
    fn invert_2x2_round_trip() {
        let m = [[4.0, 1.0], [1.0, 3.0]];
        let i = invert_2x2(m).unwrap();
        assert_relative_eq!(m[0][0] * i[0][0] + m[0][1] * i[1][0], 1.0);
        assert_relative_eq!(m[0][0] * i[0][1] + m[0][1] * i[1][1], 0.0);
        assert!(invert_2x2([[1.0, 2.0], [2.0, 4.0]]).is_none());
    }
}
