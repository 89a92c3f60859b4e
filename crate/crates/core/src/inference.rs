//! Wald confidence intervals, confidence ellipses and tests from an
//! estimate and its asymptotic covariance.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::estimate::EstimateResult;

/// A point null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Hypothesis {
    Alpha(f64),
    Rho(f64),
    Joint { alpha: f64, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Both ends multiplied by `factor` (e.g. to convert α to a mutation rate).
    pub fn scaled(self, factor: f64) -> Interval {
        Interval {
            lo: self.lo * factor,
            hi: self.hi * factor,
        }
    }
}

/// `{θ : (θ - c)ᵗ Σ⁻¹ (θ - c) ≤ χ²₂(level)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Half-lengths along `axes[0]` and `axes[1]`.
    pub semi_axes: [f64; 2],
    /// Unit eigenvectors of the covariance, larger eigenvalue first.
    pub axes: [[f64; 2]; 2],
    pub chi2: f64,
    inverse: [[f64; 2]; 2],
}

impl Ellipse {
    pub fn contains(&self, point: [f64; 2]) -> bool {
        self.distance2(point) <= self.chi2
    }

    /// Squared Mahalanobis distance from the center.
    pub fn distance2(&self, point: [f64; 2]) -> f64 {
        let d = [point[0] - self.center[0], point[1] - self.center[1]];
        let m = self.inverse;
        d[0] * (m[0][0] * d[0] + m[0][1] * d[1]) + d[1] * (m[1][0] * d[0] + m[1][1] * d[1])
    }

    /// `count` points on the boundary, for plotting.
    pub fn boundary(&self, count: usize) -> Vec<[f64; 2]> {
        (0..count)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / count as f64;
                let (a, b) = (self.semi_axes[0] * t.cos(), self.semi_axes[1] * t.sin());
                [
                    self.center[0] + a * self.axes[0][0] + b * self.axes[1][0],
                    self.center[1] + a * self.axes[0][1] + b * self.axes[1][1],
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldTest {
    pub hypothesis: Hypothesis,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inference {
    pub level: f64,
    pub ci_alpha: Interval,
    pub ci_rho: Option<Interval>,
    pub ellipse: Option<Ellipse>,
    pub test: Option<WaldTest>,
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn normal_half_width_factor(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(domain("confidence level", level));
    }
    Ok(std_normal().inverse_cdf(0.5 + level / 2.0))
}

/// Eigenvalues (descending) and unit eigenvectors of a symmetric 2×2 matrix.
pub fn symmetric_eigen(m: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b);
    let (l1, l2) = (mean + rad, mean - rad);
    let v1 = if b != 0.0 {
        let v = [l1 - d, b];
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    } else if a >= d {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    ([l1, l2], [v1, [-v1[1], v1[0]]])
}

fn check_cov(result: &EstimateResult) -> Result<()> {
    let c = result.cov;
    if c.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NotPsd(format!("covariance has non-finite entries: {c:?}")));
    }
    if c[0][1] != c[1][0] {
        return Err(Error::NotPsd(format!("covariance is not symmetric: {c:?}")));
    }
    let (ev, _) = symmetric_eigen(c);
    let tol = 1e-12 * ev[0].abs().max(f64::MIN_POSITIVE);
    if ev[1] < -tol || c[0][0] < 0.0 || c[1][1] < 0.0 {
        return Err(Error::NotPsd(format!("covariance eigenvalues {ev:?}")));
    }
    Ok(())
}

fn two_sided(z: f64) -> f64 {
    2.0 * std_normal().sf(z.abs())
}

/// Marginal normal intervals, the joint confidence ellipse (when ρ is
/// estimated) and an optional Wald test.
pub fn wald_inference(result: &EstimateResult, level: f64, null: Option<Hypothesis>) -> Result<Inference> {
    let zq = normal_half_width_factor(level)?;
    if !result.converged {
        return Err(Error::Undefined(format!(
            "{} estimate did not converge; no valid covariance",
            result.method
        )));
    }
    check_cov(result)?;
    let c = result.cov;
    let ha = zq * c[0][0].sqrt();
    let ci_alpha = Interval {
        lo: result.alpha_hat - ha,
        hi: result.alpha_hat + ha,
    };
    let chi2 = -2.0 * (1.0 - level).ln();
    let (ci_rho, ellipse) = match result.rho_hat {
        Some(r) => {
            let hr = zq * c[1][1].sqrt();
            let (ev, axes) = symmetric_eigen(c);
            let ellipse = crate::ml::invert_2x2(c).map(|inverse| Ellipse {
                center: [result.alpha_hat, r],
                semi_axes: ev.map(|l| (chi2 * l.max(0.0)).sqrt()),
                axes,
                chi2,
                inverse,
            });
            (Some(Interval { lo: r - hr, hi: r + hr }), ellipse)
        }
        None => (None, None),
    };
    let test = null.map(|h| wald_test(result, h)).transpose()?;
    Ok(Inference {
        level,
        ci_alpha,
        ci_rho,
        ellipse,
        test,
    })
}

/// Wald test of a point null using the estimate's covariance.
pub fn wald_test(result: &EstimateResult, hypothesis: Hypothesis) -> Result<WaldTest> {
    check_cov(result)?;
    let c = result.cov;
    let need_rho = || {
        result
            .rho_hat
            .ok_or_else(|| Error::Undefined(format!("{} does not estimate rho", result.method)))
    };
    let (statistic, df) = match hypothesis {
        Hypothesis::Alpha(a0) => {
            let z = (result.alpha_hat - a0) / c[0][0].sqrt();
            (z * z, 1)
        }
        Hypothesis::Rho(r0) => {
            let z = (need_rho()? - r0) / c[1][1].sqrt();
            (z * z, 1)
        }
        Hypothesis::Joint { alpha, rho } => {
            let inv = crate::ml::invert_2x2(c)
                .ok_or_else(|| Error::NotPsd("singular covariance in joint test".into()))?;
            let d = [result.alpha_hat - alpha, need_rho()? - rho];
            let w = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
            (w, 2)
        }
    };
    if !statistic.is_finite() {
        return Err(Error::NotPsd(format!("Wald statistic is {statistic}")));
    }
    let p_value = if df == 1 {
        two_sided(statistic.sqrt())
    } else {
        (-statistic / 2.0).exp()
    };
    Ok(WaldTest {
        hypothesis,
        statistic,
        df,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::Method;
    use approx::assert_relative_eq;

    fn est(cov: [[f64; 2]; 2]) -> EstimateResult {
        EstimateResult {
            method: Method::Gf,
            alpha_hat: 2.0,
            rho_hat: Some(0.8),
            cov,
            n: 100,
            iterations: 0,
            converged: true,
            warnings: vec![],
        }
    }

    #[test]
    fn interval_half_width() {
        let v = 0.09;
        let inf = wald_inference(&est([[v, 0.0], [0.0, 0.01]]), 0.95, None).unwrap();
        assert_relative_eq!(inf.ci_alpha.width() / 2.0, 1.959964 * v.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(inf.ci_rho.unwrap().width() / 2.0, 1.959964 * 0.1, max_relative = 1e-6);
        assert!(normal_half_width_factor(1.0).is_err());
    }

    #[test]
    fn ellipse_geometry() {
        let c = [[0.5, 0.3], [0.3, 0.4]];
        let inf = wald_inference(&est(c), 0.95, None).unwrap();
        let e = inf.ellipse.unwrap();
        assert_relative_eq!(e.chi2, 5.991464547107979, max_relative = 1e-12);
        let (ev, axes) = symmetric_eigen(c);
        for (l, v) in ev.iter().zip(axes) {
            // C v = λ v
            assert_relative_eq!(c[0][0] * v[0] + c[0][1] * v[1], l * v[0], epsilon = 1e-12);
            assert_relative_eq!(c[1][0] * v[0] + c[1][1] * v[1], l * v[1], epsilon = 1e-12);
        }
        for p in e.boundary(16) {
            assert_relative_eq!(e.distance2(p), e.chi2, max_relative = 1e-10);
        }
        assert!(e.contains(e.center));
    }

    #[test]
    fn wald_p_values() {
        let r = est([[0.04, 0.0], [0.0, 0.01]]);
        // (0.8 - 1)/0.1 = -2
        let t = wald_test(&r, Hypothesis::Rho(1.0)).unwrap();
        assert_relative_eq!(t.statistic, 4.0, max_relative = 1e-12);
        assert_relative_eq!(t.p_value, 0.04550026389635842, max_relative = 1e-9);
        let t = wald_test(&r, Hypothesis::Alpha(2.0)).unwrap();
        assert_eq!(t.p_value, 1.0);
        let t = wald_test(&r, Hypothesis::Joint { alpha: 2.0, rho: 1.0 }).unwrap();
        assert_eq!(t.df, 2);
        assert_relative_eq!(t.p_value, (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn refuses_invalid_covariance() {
        let bad = est([[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(wald_inference(&bad, 0.95, None), Err(Error::NotPsd(_))));
        let nan = est([[f64::NAN, 0.0], [0.0, 1.0]]);
        assert!(wald_inference(&nan, 0.95, None).is_err());
        let mut nc = est([[1.0, 0.0], [0.0, 1.0]]);
        nc.converged = false;
        assert!(wald_inference(&nc, 0.95, None).is_err());
    }

    #[test]
    fn p0_has_no_rho_inference() {
        let mut r = est([[0.04, 0.0], [0.0, 0.0]]);
        r.method = Method::P0;
        r.rho_hat = None;
        let inf = wald_inference(&r, 0.9, Some(Hypothesis::Alpha(1.5))).unwrap();
        assert!(inf.ci_rho.is_none() && inf.ellipse.is_none());
        assert!(wald_test(&r, Hypothesis::Rho(1.0)).is_err());
    }
}
