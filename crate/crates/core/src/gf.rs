//! Generating-function estimators of (α, ρ).
//!
//! The empirical pgf `ĝ(z) = n⁻¹ Σ z^{X_i}` is matched to
//! `g(z) = exp(α (h_ρ(z) - 1))` at three control points. ρ comes from the
//! log-ratio `ln ĝ(z1) / ln ĝ(z2)`, which depends on ρ only; α then follows
//! from `z3`. Before fitting, the sample is rescaled by its q-quantile `b`,
//! which amounts to using the controls `z^{1/b}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimate::{EstimateResult, Method};
use crate::numerics::{find_root, CompensatedSum, RootSpec};
use crate::sample::Sample;
use crate::yule::{yule_pgf_complement, yule_pgf_drho, Fitness};

/// Control points and the rescaling quantile level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfControls {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub q: f64,
}

impl Default for GfControls {
    fn default() -> Self {
        Self {
            z1: 0.1,
            z2: 0.9,
            z3: 0.8,
            q: 0.1,
        }
    }
}

impl GfControls {
    pub fn validate(&self) -> Result<()> {
        let open = |x: f64| x > 0.0 && x < 1.0;
        if !open(self.z1) {
            return Err(domain("z1", self.z1));
        }
        if !open(self.z2) || self.z2 <= self.z1 {
            return Err(domain("z2 (need z1 < z2 < 1)", self.z2));
        }
        if !open(self.z3) {
            return Err(domain("z3", self.z3));
        }
        if !open(self.q) {
            return Err(domain("rescaling quantile q", self.q));
        }
        Ok(())
    }
}

/// Quantities computed on the way to the estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GfDiagnostics {
    /// Scaling factor: the q-quantile of the sample, floored at 1.
    pub b: f64,
    /// Effective controls `z_i^{1/b}`.
    pub z_eff: [f64; 3],
    /// `ĝ` at the effective controls.
    pub g_hat: [f64; 3],
    /// `ln ĝ(z1') / ln ĝ(z2')`.
    pub y_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfFit {
    pub estimate: EstimateResult,
    pub diagnostics: GfDiagnostics,
}

/// `ĝ_n(z) = n⁻¹ Σ z^{X_i}`, each term evaluated as `exp(X_i ln z)`.
pub fn empirical_pgf(sample: &Sample, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(domain("generating function argument z", z));
    }
    Ok(empirical_pgf_log(sample, z.ln()))
}

// `ln_z = ln z`, possibly -inf (z = 0, where only zeros contribute).
fn empirical_pgf_log(sample: &Sample, ln_z: f64) -> f64 {
    let mut s = CompensatedSum::new();
    for (&x, &c) in sample.frequencies() {
        let term = if x == 0 { 1.0 } else { (x as f64 * ln_z).exp() };
        s.add(c as f64 * term);
    }
    s.value() / sample.len() as f64
}

fn check_pair(z1: f64, z2: f64) -> Result<()> {
    let open = |x: f64| x > 0.0 && x < 1.0;
    if !open(z1) {
        return Err(domain("z1", z1));
    }
    if !open(z2) {
        return Err(domain("z2", z2));
    }
    if z1 == z2 {
        return Err(domain("z2 (must differ from z1)", z2));
    }
    Ok(())
}

/// `f_{z1,z2}(ρ) = (h_ρ(z1) - 1) / (h_ρ(z2) - 1)`.
pub fn ratio_f(rho: Fitness, z1: f64, z2: f64) -> Result<f64> {
    check_pair(z1, z2)?;
    Ok(yule_pgf_complement(z1, rho)? / yule_pgf_complement(z2, rho)?)
}

const RHO_BRACKETS: [(f64, f64); 3] = [(1e-4, 100.0), (1e-5, 1e3), (1e-6, 1e4)];

/// Inverse of [`ratio_f`] in ρ, by bracketed root finding on `[1e-4, 100]`,
/// widened tenfold at each end up to `[1e-6, 1e4]`.
pub fn ratio_f_inverse(y: f64, z1: f64, z2: f64) -> Result<Fitness> {
    check_pair(z1, z2)?;
    if !y.is_finite() {
        return Err(Error::OutOfRange {
            y,
            min: f64::NAN,
            max: f64::NAN,
        });
    }
    let f = |r: f64| ratio_f(Fitness::new(r).expect("positive bracket"), z1, z2);
    let mut last = (f64::NAN, f64::NAN);
    for &(lo, hi) in &RHO_BRACKETS {
        let (flo, fhi) = (f(lo)?, f(hi)?);
        last = (flo.min(fhi), flo.max(fhi));
        if (flo - y) * (fhi - y) <= 0.0 {
            let mut failure = None;
            let root = find_root(
                |r| match f(r) {
                    Ok(v) => v - y,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                &RootSpec::new(lo, hi).tol(1e-12),
            );
            if let Some(e) = failure {
                return Err(e);
            }
            return Fitness::new(root?);
        }
    }
    Err(Error::OutOfRange {
        y,
        min: last.0,
        max: last.1,
    })
}

/// GF estimates at explicit control points, without rescaling.
/// Returns `(α̂, ρ̂, ŷ, [ĝ(z1), ĝ(z2), ĝ(z3)])`.
pub fn gf_estimate_at(sample: &Sample, z: [f64; 3]) -> Result<(f64, Fitness, f64, [f64; 3])> {
    check_pair(z[0], z[1])?;
    if !(z[2] > 0.0 && z[2] < 1.0) {
        return Err(domain("z3", z[2]));
    }
    if sample.all_zero() {
        return Err(Error::Degenerate(
            "all counts are zero, so ln ĝ(z) = 0; use the p0 estimator".into(),
        ));
    }
    gf_estimate_log(sample, z.map(f64::ln), z)
}

fn gf_estimate_log(sample: &Sample, ln_z: [f64; 3], z: [f64; 3]) -> Result<(f64, Fitness, f64, [f64; 3])> {
    let g = ln_z.map(|l| empirical_pgf_log(sample, l));
    let ln_g = g.map(f64::ln);
    if ln_g.iter().any(|l| !(l.is_finite() && *l < 0.0)) {
        return Err(Error::Degenerate(format!(
            "empirical pgf values {g:?} leave no usable log-ratio"
        )));
    }
    let y = ln_g[0] / ln_g[1];
    let rho = ratio_f_inverse(y, z[0], z[1])?;
    let alpha = -ln_g[2] / yule_pgf_complement(z[2], rho)?;
    Ok((alpha, rho, y, g))
}

/// GF fit with quantile rescaling and the asymptotic covariance evaluated
/// at the fitted parameters and the effective controls.
pub fn gf_fit(sample: &Sample, controls: &GfControls) -> Result<GfFit> {
    controls.validate()?;
    if sample.all_zero() {
        return Err(Error::Degenerate(
            "all counts are zero, so ln ĝ(z) = 0; use the p0 estimator".into(),
        ));
    }
    let mut warnings = Vec::new();
    let quant = sample.quantile(controls.q);
    let b = (quant as f64).max(1.0);
    if quant == 0 {
        warnings.push(format!("{}-quantile of the sample is 0; scaling factor floored at 1", controls.q));
    }
    let zs = [controls.z1, controls.z2, controls.z3];
    let ln_z = zs.map(|z| z.ln() / b);
    let z_eff = ln_z.map(f64::exp);
    let (alpha, rho, y_hat, g_hat) = gf_estimate_log(sample, ln_z, z_eff)?;
    let cov = gf_covariance(alpha, rho.get(), z_eff, sample.len())?;
    if b > 1.0 {
        warnings.push(format!(
            "covariance evaluated at data-dependent controls z^(1/b), b = {b}"
        ));
    }
    Ok(GfFit {
        estimate: EstimateResult {
            method: Method::Gf,
            alpha_hat: alpha,
            rho_hat: Some(rho.get()),
            cov,
            n: sample.len(),
            iterations: 0,
            converged: true,
            warnings,
        },
        diagnostics: GfDiagnostics { b, z_eff, g_hat, y_hat },
    })
}

/// Jacobian of `(ĝ1, ĝ2, ĝ3) ↦ (α̂, ρ̂)` at the true pgf values, as a 3×2
/// matrix with rows `(A_i, R_i)`.
pub fn gf_jacobian(alpha: f64, rho: f64, z: [f64; 3]) -> Result<[[f64; 2]; 3]> {
    check_pair(z[0], z[1])?;
    if !(z[2] > 0.0 && z[2] < 1.0) {
        return Err(domain("z3", z[2]));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain("alpha", alpha));
    }
    let r = Fitness::new(rho)?;
    // hm = h - 1 = -(1 - h), h1 = ∂h/∂ρ
    let mut hm = [0.0; 3];
    let mut h1 = [0.0; 3];
    let mut g = [0.0; 3];
    for i in 0..3 {
        let c = yule_pgf_complement(z[i], r)?;
        hm[i] = -c;
        h1[i] = yule_pgf_drho(z[i], r)?;
        g[i] = (-alpha * c).exp();
    }
    let r1 = hm[1] / (alpha * g[0] * (hm[1] * h1[0] - hm[0] * h1[1]));
    let r2 = hm[0] / (alpha * g[1] * (hm[0] * h1[1] - hm[1] * h1[0]));
    let r3 = 0.0;
    let k = alpha * h1[2] / (-hm[2]);
    let a1 = k * r1;
    let a2 = k * r2;
    let a3 = 1.0 / (g[2] * hm[2]);
    let m = [[a1, r1], [a2, r2], [a3, r3]];
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain {
            what: "GF Jacobian (degenerate controls)",
            value: rho,
        });
    }
    Ok(m)
}

/// `Mᵗ C M / n` with `C_ij = g(z_i z_j) - g(z_i) g(z_j)`.
pub fn gf_covariance(alpha: f64, rho: f64, z: [f64; 3], n: usize) -> Result<[[f64; 2]; 2]> {
    if n == 0 {
        return Err(domain("sample size", 0.0));
    }
    let m = gf_jacobian(alpha, rho, z)?;
    let r = Fitness::new(rho)?;
    let g = |x: f64| -> Result<f64> { Ok((-alpha * yule_pgf_complement(x, r)?).exp()) };
    let gz = [g(z[0])?, g(z[1])?, g(z[2])?];
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = g(z[i] * z[j])? - gz[i] * gz[j];
            c[i][j] = v;
            c[j][i] = v;
        }
    }
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += m[i][a] * c[i][j] * m[j][b];
                }
            }
            out[a][b] = s / n as f64;
        }
    }
    let off = 0.5 * (out[0][1] + out[1][0]);
    out[0][1] = off;
    out[1][0] = off;
    Ok(out)
}

/// `α̂ = -ln(fraction of zeros)`, with delta-method variance `(e^α̂ - 1)/n`.
pub fn p0_estimate(sample: &Sample) -> Result<EstimateResult> {
    let zeros = sample.zeros();
    if zeros == 0 {
        return Err(Error::Undefined("p0 estimator needs at least one zero count".into()));
    }
    let n = sample.len();
    let alpha = -(zeros as f64 / n as f64).ln();
    let var = alpha.exp_m1() / n as f64;
    Ok(EstimateResult {
        method: Method::P0,
        alpha_hat: alpha,
        rho_hat: None,
        cov: [[var, 0.0], [0.0, 0.0]],
        n,
        iterations: 0,
        converged: true,
        warnings: vec!["variance (e^alpha - 1)/n from the delta method; rho is not estimated".into()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadSpec};
    use approx::assert_relative_eq;

    fn s(v: &[u64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn controls_defaults_and_validation() {
        let c = GfControls::default();
        assert_eq!((c.z1, c.z2, c.z3, c.q), (0.1, 0.9, 0.8, 0.1));
        assert!(c.validate().is_ok());
        assert!(GfControls { z1: 0.9, z2: 0.1, ..c }.validate().is_err());
        assert!(GfControls { q: 1.0, ..c }.validate().is_err());
        assert!(GfControls { z3: 0.0, ..c }.validate().is_err());
    }

    #[test]
    fn empirical_pgf_small_cases() {
        let zeros = s(&[0, 0, 0]);
        for &z in &[0.1, 0.5, 1.0] {
            assert_eq!(empirical_pgf(&zeros, z).unwrap(), 1.0);
        }
        assert_eq!(empirical_pgf(&s(&[0, 1]), 0.5).unwrap(), 0.75);
        assert_eq!(empirical_pgf(&s(&[0, 1, 5]), 1.0).unwrap(), 1.0);
        // huge counts do not overflow
        let g = empirical_pgf(&s(&[0, 1_320_000_000_000_000]), 0.9).unwrap();
        assert_eq!(g, 0.5);
        assert!(empirical_pgf(&zeros, 1.5).is_err());
    }

    #[test]
    fn empirical_pgf_monotone() {
        let sm = s(&[0, 1, 2, 3, 10, 40, 900]);
        let mut prev = 0.0;
        for i in 1..=100 {
            let g = empirical_pgf(&sm, i as f64 / 100.0).unwrap();
            assert!(g >= prev);
            prev = g;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn ratio_direct_quadrature_oracle() {
        let spec = QuadSpec {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_subdivisions: 1000,
        };
        let h = |z: f64| z * integrate(|v: f64| v / (1.0 - z + z * v), 0.0, 1.0, &spec).unwrap();
        let want = (h(0.1) - 1.0) / (h(0.9) - 1.0);
        let got = ratio_f(Fitness::new(1.0).unwrap(), 0.1, 0.9).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }

    #[test]
    fn ratio_near_zero_z1() {
        // numerator (h(z1) - 1) -> -1 as z1 -> 0
        let r = Fitness::new(0.7).unwrap();
        let f = ratio_f(r, 1e-9, 0.9).unwrap();
        let den = -yule_pgf_complement(0.9, r).unwrap();
        assert_relative_eq!(f * den, -1.0, max_relative = 1e-8);
    }

    #[test]
    fn ratio_inverse_round_trip() {
        for &r in &[0.01, 0.3, 1.0, 2.0, 10.0, 80.0] {
            let y = ratio_f(Fitness::new(r).unwrap(), 0.1, 0.9).unwrap();
            let back = ratio_f_inverse(y, 0.1, 0.9).unwrap();
            let y2 = ratio_f(back, 0.1, 0.9).unwrap();
            assert!((y - y2).abs() < 1e-8);
            assert_relative_eq!(back.get(), r, max_relative = 1e-6);
        }
    }

    #[test]
    fn ratio_inverse_uses_widened_bracket() {
        let r = 2000.0;
        let y = ratio_f(Fitness::new(r).unwrap(), 0.1, 0.9).unwrap();
        let back = ratio_f_inverse(y, 0.1, 0.9).unwrap();
        assert_relative_eq!(back.get(), r, max_relative = 1e-3);
    }

    #[test]
    fn ratio_inverse_out_of_range() {
        // f lies in (1, (1 - z1)/(1 - z2)) = (1, 9)
        assert!(matches!(ratio_f_inverse(0.5, 0.1, 0.9), Err(Error::OutOfRange { .. })));
        assert!(matches!(ratio_f_inverse(9.5, 0.1, 0.9), Err(Error::OutOfRange { .. })));
        assert!(ratio_f_inverse(2.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        let zeros = s(&[0; 100]);
        assert!(matches!(gf_fit(&zeros, &GfControls::default()), Err(Error::Degenerate(_))));
        assert!(matches!(
            gf_jacobian(1.0, 1.0, [0.5, 0.5, 0.8]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn jacobian_third_row_rho_entry_is_zero() {
        let m = gf_jacobian(2.0, 0.8, [0.1, 0.9, 0.8]).unwrap();
        assert_eq!(m[2][1], 0.0);
    }

    #[test]
    fn jacobian_matches_finite_differences_of_estimator_map() {
        let (alpha, rho) = (2.0, 0.8);
        let z = [0.1, 0.9, 0.8];
        let r = Fitness::new(rho).unwrap();
        let g: Vec<f64> = z
            .iter()
            .map(|&zi| (-alpha * yule_pgf_complement(zi, r).unwrap()).exp())
            .collect();
        // H(g1, g2, g3) = (ψ, φ), written out independently of gf_estimate_log
        let map = |g: [f64; 3]| {
            let y = g[0].ln() / g[1].ln();
            let rh = ratio_f_inverse(y, z[0], z[1]).unwrap();
            let a = g[2].ln() / (-yule_pgf_complement(z[2], rh).unwrap());
            (a, rh.get())
        };
        let m = gf_jacobian(alpha, rho, z).unwrap();
        for i in 0..3 {
            let step = 1e-6 * g[i];
            let mut up = [g[0], g[1], g[2]];
            let mut dn = up;
            up[i] += step;
            dn[i] -= step;
            let (au, ru) = map(up);
            let (ad, rd) = map(dn);
            let fa = (au - ad) / (2.0 * step);
            let fr = (ru - rd) / (2.0 * step);
            assert_relative_eq!(m[i][0], fa, max_relative = 1e-4, epsilon = 1e-8);
            assert_relative_eq!(m[i][1], fr, max_relative = 1e-4, epsilon = 1e-8);
        }
    }

    #[test]
    fn covariance_symmetric_psd_and_scales_with_n() {
        for &(a, r) in &[(1.0, 1.0), (2.0, 0.5), (6.0, 2.0)] {
            let c = gf_covariance(a, r, [0.1, 0.9, 0.8], 100).unwrap();
            assert_eq!(c[0][1], c[1][0]);
            assert!(c[0][0] > 0.0 && c[1][1] > 0.0);
            assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= 0.0);
            let c2 = gf_covariance(a, r, [0.1, 0.9, 0.8], 200).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(c2[i][j] * 2.0, c[i][j], max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn covariance_allows_z3_equal_to_z1() {
        assert!(gf_covariance(2.0, 1.0, [0.1, 0.9, 0.1], 100).is_ok());
    }

    #[test]
    fn p0_cases() {
        let e = p0_estimate(&s(&[0, 0, 0])).unwrap();
        assert_eq!(e.alpha_hat, 0.0);
        assert_eq!(e.rho_hat, None);
        assert!(matches!(p0_estimate(&s(&[1, 2])), Err(Error::Undefined(_))));
        // a frequency of zeros of exactly e^{-2} is not representable with
        // integer counts; invert the definition instead.
        let n = 1_000_000usize;
        let zeros = ((-2.0f64).exp() * n as f64).round() as usize;
        let mut v = vec![0u64; zeros];
        v.resize(n, 3);
        let e = p0_estimate(&Sample::new(v).unwrap()).unwrap();
        assert_relative_eq!(e.alpha_hat, -(zeros as f64 / n as f64).ln(), max_relative = 1e-15);
        assert!((e.alpha_hat - 2.0).abs() < 1e-5);
        assert_relative_eq!(e.cov[0][0], e.alpha_hat.exp_m1() / n as f64);
    }

    #[test]
    fn rescaling_equivariance() {
        // every value a multiple of b: ĝ of the divided sample at z equals
        // ĝ of the raw sample at z^{1/b}
        let b = 7u64;
        let base = [0u64, 1, 1, 2, 3, 5, 8, 13, 40, 2, 0, 1, 6, 9];
        let raw = Sample::new(base.iter().map(|x| x * b).collect()).unwrap();
        let divided = Sample::new(base.to_vec()).unwrap();
        for &z in &[0.1, 0.5, 0.8, 0.9] {
            let zb = f64::powf(z, 1.0 / b as f64);
            assert_relative_eq!(
                empirical_pgf(&divided, z).unwrap(),
                empirical_pgf(&raw, zb).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn fit_equals_estimate_at_effective_controls() {
        let raw = s(&[0, 3, 4, 7, 7, 9, 12, 30, 55, 200, 4, 5, 6, 2, 14, 8, 9, 10, 11, 3]);
        let c = GfControls::default();
        let fit = gf_fit(&raw, &c).unwrap();
        let b = fit.diagnostics.b;
        assert_eq!(b, raw.quantile(c.q) as f64);
        assert!(b > 1.0);
        let z = [c.z1, c.z2, c.z3].map(|z: f64| (z.ln() / b).exp());
        let (a, r, y, g) = gf_estimate_at(&raw, z).unwrap();
        // equal up to the rounding of ln(exp(ln z / b))
        assert_relative_eq!(fit.estimate.alpha_hat, a, max_relative = 1e-12);
        assert_relative_eq!(fit.estimate.rho_hat.unwrap(), r.get(), max_relative = 1e-12);
        assert_relative_eq!(fit.diagnostics.y_hat, y, max_relative = 1e-12);
        for i in 0..3 {
            assert_relative_eq!(fit.diagnostics.g_hat[i], g[i], max_relative = 1e-12);
        }
        assert!(fit.estimate.warnings.iter().any(|w| w.contains("data-dependent")));
    }

    #[test]
    fn zero_quantile_floors_scale_at_one() {
        let sm = s(&[0, 0, 0, 1, 2, 5, 9, 0, 3, 4]);
        let fit = gf_fit(&sm, &GfControls::default()).unwrap();
        assert_eq!(fit.diagnostics.b, 1.0);
        assert_eq!(fit.diagnostics.z_eff, [0.1, 0.9, 0.8].map(|z: f64| z.ln().exp()));
        assert!(fit.estimate.warnings.iter().any(|w| w.contains("floored")));
    }

    #[test]
    fn consistency_on_large_sample() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sm = crate::lddist::ld_sample(2.0, Fitness::new(0.8).unwrap(), 1_000_000, &mut rng).unwrap();
        let fit = gf_fit(&sm, &GfControls::default()).unwrap();
        assert!((fit.estimate.alpha_hat - 2.0).abs() < 0.05, "{:?}", fit.estimate);
        assert!((fit.estimate.rho_hat.unwrap() - 0.8).abs() < 0.05, "{:?}", fit.estimate);
    }

    #[test]
    fn empirical_pgf_clt_bound() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let r = Fitness::new(1.0).unwrap();
        let n = 100_000;
        let sm = crate::lddist::ld_sample(1.0, r, n, &mut rng).unwrap();
        let g = |x: f64| (-yule_pgf_complement(x, r).unwrap()).exp();
        let z = 0.8;
        let var = g(z * z) - g(z) * g(z);
        let sigma = (var / n as f64).sqrt();
        assert!((empirical_pgf(&sm, z).unwrap() - g(z)).abs() < 4.0 * sigma);
    }
}
