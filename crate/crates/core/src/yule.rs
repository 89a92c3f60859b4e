//! The Yule distribution: law of the size of a mutant clone.
//!
//! With fitness ρ the clone size Y ≥ 1 has probabilities
//! `p_k = ρ B(ρ+1, k)` and generating function
//! `h_ρ(z) = ρ z ∫_0^1 v^ρ / (1 - z + z v) dv`. It is an exponential mixture
//! of geometric laws: `Y | V ~ Geometric(V)` on {1, 2, …} with `P(V ≤ x) = x^ρ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::numerics::special::{digamma_pos, ln_gamma_pos, ln_gamma_ratio, trigamma_pos};
use crate::numerics::{integrate, QuadSpec};

/// Relative fitness ρ = ν/μ of normal cells compared to mutants.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Fitness(f64);

impl Fitness {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > 0.0 {
            Ok(Self(rho))
        } else {
            Err(domain("fitness rho", rho))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Fitness {
    type Error = crate::Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Fitness> for f64 {
    fn from(f: Fitness) -> f64 {
        f.0
    }
}

impl std::fmt::Display for Fitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

fn check_k(k: u64) -> Result<()> {
    if k < 1 {
        Err(domain("Yule support index k", k as f64))
    } else {
        Ok(())
    }
}

fn check_z(z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(domain("generating function argument z", z))
    }
}

/// `p_k = exp(ln ρ + ln B(ρ+1, k))`.
pub fn yule_pmf(k: u64, rho: Fitness) -> Result<f64> {
    check_k(k)?;
    let r = rho.get();
    let kf = k as f64;
    let ln_b = ln_gamma_pos(r + 1.0) - ln_gamma_ratio(kf, r + 1.0);
    Ok((r.ln() + ln_b).exp())
}

/// `P(Y > k) = Γ(ρ+1) Γ(k+1) / Γ(ρ+k+1)`, valid for any `k ≥ 0`.
pub fn yule_tail(k: u64, rho: Fitness) -> f64 {
    if k == 0 {
        return 1.0;
    }
    // P(Y > k) = (k/ρ) p_k
    let r = rho.get();
    let kf = k as f64;
    (kf.ln() + ln_gamma_pos(r + 1.0) - ln_gamma_ratio(kf, r + 1.0)).exp()
}

/// Smallest `K ≤ cap` such that `P(Y > K) < eps`, or `cap` when the power-law
/// tail is too heavy to reach `eps` within it.
pub fn yule_tail_rule(rho: Fitness, eps: f64, cap: u64) -> u64 {
    if yule_tail(cap, rho) >= eps {
        return cap;
    }
    // P(Y > k) is decreasing in k: bisect on [0, cap].
    let (mut lo, mut hi) = (0u64, cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if yule_tail(mid, rho) < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `p_1..=p_kmax` by the recurrence `p_{k+1} = p_k k / (ρ + k + 1)`.
/// Index 0 of the returned vector holds 0.
pub fn yule_pmf_table(rho: Fitness, kmax: usize) -> Vec<f64> {
    let r = rho.get();
    let mut p = Vec::with_capacity(kmax + 1);
    p.push(0.0);
    if kmax == 0 {
        return p;
    }
    let mut pk = r / (r + 1.0);
    p.push(pk);
    for k in 1..kmax {
        let kf = k as f64;
        pk *= kf / (r + kf + 1.0);
        p.push(pk);
    }
    p
}

/// Logarithmic ρ-derivatives of `p_k`: returns `(D_k, D'_k)` where
/// `D_k = ∂ ln p_k / ∂ρ = 1/ρ + ψ(ρ+1) - ψ(ρ+k+1)` and
/// `D'_k = -1/ρ² + ψ′(ρ+1) - ψ′(ρ+k+1)`.
pub(crate) fn log_derivatives(k: u64, rho: f64) -> (f64, f64) {
    let kf = k as f64;
    let d = 1.0 / rho + digamma_pos(rho + 1.0) - digamma_pos(rho + kf + 1.0);
    let dd = -1.0 / (rho * rho) + trigamma_pos(rho + 1.0) - trigamma_pos(rho + kf + 1.0);
    (d, dd)
}

/// ∂p_k/∂ρ.
pub fn yule_dp_drho(k: u64, rho: Fitness) -> Result<f64> {
    let p = yule_pmf(k, rho)?;
    let (d, _) = log_derivatives(k, rho.get());
    Ok(p * d)
}

/// ∂²p_k/∂ρ².
pub fn yule_d2p_drho2(k: u64, rho: Fitness) -> Result<f64> {
    let p = yule_pmf(k, rho)?;
    let (d, dd) = log_derivatives(k, rho.get());
    Ok(p * (d * d + dd))
}

pub(crate) fn quad_spec() -> QuadSpec {
    QuadSpec {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_subdivisions: 400,
    }
}

/// `1 - h_ρ(z)`, evaluated without cancellation when z is close to 1.
///
/// Uses `1 - h = (1-z) ρ ∫ v^{ρ-1} / (1 - z + z v) dv` under `u = v^ρ`,
/// which leaves a smooth integrand for small and large ρ alike.
pub fn yule_pgf_complement(z: f64, rho: Fitness) -> Result<f64> {
    check_z(z)?;
    if z == 0.0 {
        return Ok(1.0);
    }
    if z == 1.0 {
        return Ok(0.0);
    }
    let inv = 1.0 / rho.get();
    let c = 1.0 - z;
    let integral = integrate(|u: f64| 1.0 / (c + z * u.powf(inv)), 0.0, 1.0, &quad_spec())?;
    Ok((c * integral).clamp(0.0, 1.0))
}

/// Yule generating function `h_ρ(z)` for `z ∈ [0, 1]`.
pub fn yule_pgf(z: f64, rho: Fitness) -> Result<f64> {
    Ok(1.0 - yule_pgf_complement(z, rho)?)
}

/// `h¹_ρ(z) = ∂h_ρ(z)/∂ρ`, nonnegative and zero at both z = 0 and z = 1.
pub fn yule_pgf_drho(z: f64, rho: Fitness) -> Result<f64> {
    check_z(z)?;
    if z == 0.0 || z == 1.0 {
        return Ok(0.0);
    }
    let r = rho.get();
    let inv = 1.0 / r;
    let c = 1.0 - z;
    // h¹ = (1-z) z/ρ² ∫ u^{1/ρ} (-ln u) / (1 - z + z u^{1/ρ})² du
    let integral = integrate(
        |u: f64| {
            let w = u.powf(inv);
            let den = c + z * w;
            -w * u.ln() / (den * den)
        },
        0.0,
        1.0,
        &quad_spec(),
    )?;
    Ok(c * z / (r * r) * integral)
}

/// Geometric variate on {1, 2, …} with success probability `v`, by inversion.
/// Saturates at `u64::MAX` when `v` underflows.
pub(crate) fn geometric_from_one<R: Rng + ?Sized>(v: f64, rng: &mut R) -> u64 {
    if v >= 1.0 {
        return 1;
    }
    let u: f64 = open01(rng);
    let denom = (-v).ln_1p();
    // `as` saturates on overflow and maps +inf to u64::MAX.
    (1.0 + (u.ln() / denom).floor()) as u64
}

pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One Yule clone size: `V = U^{1/ρ}`, then a geometric draw with parameter V.
pub fn yule_sample<R: Rng + ?Sized>(rho: Fitness, rng: &mut R) -> u64 {
    let u = open01(rng);
    let v = (u.ln() / rho.get()).exp();
    geometric_from_one(v, rng)
}
