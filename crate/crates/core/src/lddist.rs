//! The Luria-Delbrück distribution LD(α, ρ): compound Poisson (mean α) of
//! Yule(ρ) clone sizes.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{convolve_at, CompensatedSum};
use crate::sample::Sample;
use crate::yule::{log_derivatives, yule_pgf_complement, yule_pmf_table, yule_sample, yule_tail, Fitness};

/// Default cap on the number of pmf entries any table may hold. The
/// recursion is quadratic in the table length.
pub const DEFAULT_TABLE_BUDGET: usize = 100_000;

/// Parameters (α, ρ): expected number of mutations and relative fitness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdParams {
    pub alpha: f64,
    pub rho: Fitness,
}

impl LdParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(domain("alpha", alpha));
        }
        Ok(Self {
            alpha,
            rho: Fitness::new(rho)?,
        })
    }
}

/// Incremental evaluator of `q_k = (α/k) Σ_{i=1..k} i p_i q_{k-i}` and,
/// optionally, of the first derivatives `∂q_k/∂α` and `∂q_k/∂ρ`.
///
/// The arrays only ever grow: extending from K to K' costs O(K'² - K²).
#[derive(Debug, Clone)]
pub struct LdRecursion {
    alpha: f64,
    rho: f64,
    with_derivatives: bool,
    p: Vec<f64>,
    ip: Vec<f64>,
    dp: Vec<f64>,
    d2p: Vec<f64>,
    q: Vec<f64>,
    dq_da: Vec<f64>,
    dq_dr: Vec<f64>,
}

impl LdRecursion {
    pub fn new(params: LdParams, with_derivatives: bool) -> Self {
        let alpha = params.alpha;
        let q0 = (-alpha).exp();
        let mut r = Self {
            alpha,
            rho: params.rho.get(),
            with_derivatives,
            p: vec![0.0],
            ip: vec![0.0],
            dp: vec![0.0],
            d2p: vec![0.0],
            q: vec![q0],
            dq_da: Vec::new(),
            dq_dr: Vec::new(),
        };
        if with_derivatives {
            r.dq_da.push(-q0);
            r.dq_dr.push(0.0);
        }
        r
    }

    fn extend_yule(&mut self, kmax: usize) {
        let have = self.p.len() - 1;
        if kmax <= have {
            return;
        }
        let rho = Fitness::new(self.rho).expect("validated");
        // Rebuild the multiplicative recurrence from scratch; it is O(K).
        self.p = yule_pmf_table(rho, kmax);
        self.ip = self.p.iter().enumerate().map(|(i, p)| i as f64 * p).collect();
        if self.with_derivatives {
            for k in (have + 1)..=kmax {
                let (d, dd) = log_derivatives(k as u64, self.rho);
                let pk = self.p[k];
                self.dp.push(pk * d);
                self.d2p.push(pk * (d * d + dd));
            }
        }
    }

    /// Extends all tracked arrays up to index `kmax` inclusive.
    pub fn extend_to(&mut self, kmax: usize) {
        let start = self.q.len();
        if kmax < start {
            return;
        }
        self.extend_yule(kmax);
        self.q.reserve(kmax + 1 - start);
        for k in start..=kmax {
            if self.with_derivatives {
                let [s, sa, sr] = convolve_at([&self.ip, &self.p, &self.dp], &self.q, k);
                let qk = self.alpha / k as f64 * s;
                self.q.push(qk);
                self.dq_da.push(sa - qk);
                self.dq_dr.push(self.alpha * sr);
            } else {
                let [s] = convolve_at([&self.ip], &self.q, k);
                self.q.push(self.alpha / k as f64 * s);
            }
        }
    }

    /// Starts tracking the derivatives of an existing q-only recursion.
    /// They are convolutions of the already computed `q`, so this costs two
    /// convolution passes instead of a fresh recursion.
    pub fn track_derivatives(&mut self) {
        if self.with_derivatives {
            return;
        }
        self.with_derivatives = true;
        let kmax = self.kmax();
        self.dp.truncate(1);
        self.d2p.truncate(1);
        for k in 1..=kmax {
            let (d, dd) = log_derivatives(k as u64, self.rho);
            let pk = self.p[k];
            self.dp.push(pk * d);
            self.d2p.push(pk * (d * d + dd));
        }
        self.dq_da = Vec::with_capacity(kmax + 1);
        self.dq_dr = Vec::with_capacity(kmax + 1);
        self.dq_da.push(-self.q[0]);
        self.dq_dr.push(0.0);
        for k in 1..=kmax {
            let [sa, sr] = convolve_at([&self.p, &self.dp], &self.q, k);
            self.dq_da.push(sa - self.q[k]);
            self.dq_dr.push(self.alpha * sr);
        }
    }

    /// Largest index currently held.
    pub fn kmax(&self) -> usize {
        self.q.len() - 1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn yule(&self) -> &[f64] {
        &self.p
    }

    pub fn yule_drho(&self) -> &[f64] {
        &self.dp
    }

    pub fn yule_d2rho(&self) -> &[f64] {
        &self.d2p
    }

    /// `∂q_k/∂α`; empty unless derivatives are tracked.
    pub fn dq_dalpha(&self) -> &[f64] {
        &self.dq_da
    }

    /// `∂q_k/∂ρ`; empty unless derivatives are tracked.
    pub fn dq_drho(&self) -> &[f64] {
        &self.dq_dr
    }
}

/// `q_0 ..= q_K` of LD(α, ρ) together with the mass the table does not cover.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfTable {
    pub params: LdParams,
    pub q: Vec<f64>,
    /// `1 - Σ q_k`, floored at 0: probability of values above K.
    pub tail_bound: f64,
}

impl PmfTable {
    fn from_q(params: LdParams, q: Vec<f64>) -> Self {
        let s: CompensatedSum = q.iter().copied().collect();
        let tail_bound = (1.0 - s.value()).max(0.0);
        Self { params, q, tail_bound }
    }

    /// Largest index K.
    pub fn kmax(&self) -> usize {
        self.q.len() - 1
    }

    /// `P(X ≤ k)`; beyond the table this is `1 - tail_bound`.
    pub fn cdf(&self, k: u64) -> f64 {
        let upto = (k as usize).min(self.kmax());
        let s: CompensatedSum = self.q[..=upto].iter().copied().collect();
        s.value().min(1.0)
    }

    /// Smallest k ≤ K with `cdf(k) ≥ u`, if the table reaches it.
    pub fn quantile(&self, u: f64) -> Option<u64> {
        let mut s = CompensatedSum::new();
        for (k, &qk) in self.q.iter().enumerate() {
            s.add(qk);
            if s.value() >= u {
                return Some(k as u64);
            }
        }
        None
    }
}

/// pmf table up to K with the default entry budget.
pub fn ld_pmf_table(params: LdParams, kmax: u64) -> Result<PmfTable> {
    ld_pmf_table_with_budget(params, kmax, DEFAULT_TABLE_BUDGET)
}

pub fn ld_pmf_table_with_budget(params: LdParams, kmax: u64, budget: usize) -> Result<PmfTable> {
    check_budget(kmax, budget)?;
    let mut rec = LdRecursion::new(params, false);
    rec.extend_to(kmax as usize);
    Ok(PmfTable::from_q(params, rec.q))
}

pub(crate) fn check_budget(kmax: u64, budget: usize) -> Result<()> {
    if kmax >= budget as u64 {
        Err(Error::Budget {
            requested: kmax.saturating_add(1),
            budget,
        })
    } else {
        Ok(())
    }
}

/// Smallest K (capped) for which twice the asymptotic tail `α P(Y > K)` of
/// LD(α, ρ) drops below `eps`.
pub fn ld_tail_rule(params: LdParams, eps: f64, cap: u64) -> u64 {
    // α P(Y > K) underestimates the compound tail at moderate K
    // (sums of several clones also cross K), hence the factor 2.
    crate::yule::yule_tail_rule(params.rho, eps / (2.0 * params.alpha), cap)
}

/// Asymptotic tail `P(X > K) ≈ α P(Y > K)` of a compound Poisson of
/// subexponential summands.
pub fn ld_tail_estimate(params: LdParams, k: u64) -> f64 {
    params.alpha * yule_tail(k, params.rho)
}

/// `g_{α,ρ}(z) = exp(α (h_ρ(z) - 1))`.
pub fn ld_pgf(params: LdParams, z: f64) -> Result<f64> {
    Ok((-params.alpha * yule_pgf_complement(z, params.rho)?).exp())
}

/// `P(X ≤ k)`.
pub fn ld_cdf(params: LdParams, k: u64) -> Result<f64> {
    Ok(ld_pmf_table(params, k)?.cdf(k))
}

/// Smallest k with `P(X ≤ k) ≥ u`, growing the table on demand within the
/// default budget.
pub fn ld_quantile(params: LdParams, u: f64) -> Result<u64> {
    ld_quantile_with_budget(params, u, DEFAULT_TABLE_BUDGET)
}

pub fn ld_quantile_with_budget(params: LdParams, u: f64, budget: usize) -> Result<u64> {
    if !(0.0..1.0).contains(&u) {
        return Err(domain("quantile level u", u));
    }
    let mut rec = LdRecursion::new(params, false);
    let mut s = CompensatedSum::new();
    let mut k = 0usize;
    let mut target = 64usize;
    loop {
        rec.extend_to(target.min(budget - 1));
        while k <= rec.kmax() {
            s.add(rec.q()[k]);
            if s.value() >= u {
                return Ok(k as u64);
            }
            k += 1;
        }
        if rec.kmax() + 1 >= budget {
            return Err(Error::Budget {
                requested: 2 * budget as u64,
                budget,
            });
        }
        target *= 2;
    }
}

// A Poisson(α) number of independent Yule(ρ) clones, summed.
fn draw<R: Rng + ?Sized>(poisson: Option<&Poisson<f64>>, rho: Fitness, rng: &mut R) -> u64 {
    let Some(pois) = poisson else { return 0 };
    let mutations = pois.sample(rng) as u64;
    (0..mutations).fold(0u64, |acc, _| acc.saturating_add(yule_sample(rho, rng)))
}

/// `n` independent draws from LD(α, ρ). `alpha = 0` yields all zeros.
pub fn ld_sample<R: Rng + ?Sized>(alpha: f64, rho: Fitness, n: usize, rng: &mut R) -> Result<Sample> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(domain("alpha", alpha));
    }
    if n == 0 {
        return Err(domain("sample size", 0.0));
    }
    let pois = if alpha > 0.0 {
        Some(Poisson::new(alpha).map_err(|_| domain("alpha", alpha))?)
    } else {
        None
    };
    let counts = (0..n).map(|_| draw(pois.as_ref(), rho, rng)).collect();
    Sample::new(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(a: f64, r: f64) -> LdParams {
        LdParams::new(a, r).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(LdParams::new(0.0, 1.0).is_err());
        assert!(LdParams::new(1.0, 0.0).is_err());
        assert!(LdParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn first_entries() {
        for &(a, r) in &[(1.0, 1.0), (2.0, 0.8), (0.3, 4.0)] {
            let t = ld_pmf_table(params(a, r), 1).unwrap();
            assert_eq!(t.q[0], (-a).exp());
            assert_relative_eq!(t.q[1], a * r / (r + 1.0) * (-a).exp(), max_relative = 1e-14);
        }
        let t0 = ld_pmf_table(params(3.0, 1.0), 0).unwrap();
        assert_eq!(t0.q, vec![(-3.0f64).exp()]);
    }

    #[test]
    fn second_entry_by_enumeration() {
        // X = 2: one clone of size 2, or two clones of size 1.
        let (a, r) = (1.3f64, 0.7f64);
        let p1 = r / (r + 1.0);
        let p2 = r / (r + 1.0) / (r + 2.0);
        let want = (-a).exp() * (a * p2 + a * a / 2.0 * p1 * p1);
        let t = ld_pmf_table(params(a, r), 2).unwrap();
        assert_relative_eq!(t.q[2], want, max_relative = 1e-14);
    }

    #[test]
    fn budget_enforced() {
        let err = ld_pmf_table_with_budget(params(1.0, 1.0), 1000, 500).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
        assert!(ld_pmf_table_with_budget(params(1.0, 1.0), 499, 500).is_ok());
    }

    #[test]
    fn pgf_values() {
        let p = params(1.0, 1.0);
        assert_eq!(ld_pgf(p, 1.0).unwrap(), 1.0);
        assert_relative_eq!(ld_pgf(p, 0.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        // h_1(1/2) = 1 - ln 2, so g(1/2) = exp(-ln 2)
        assert_relative_eq!(ld_pgf(p, 0.5).unwrap(), 0.5, max_relative = 1e-12);
        assert!(ld_pgf(p, 1.01).is_err());
    }

    #[test]
    fn normalization_grid() {
        for &a in &[1.0, 2.0, 4.0] {
            for &r in &[0.5, 1.0, 2.0] {
                let p = params(a, r);
                let k = ld_tail_rule(p, 1e-6, 20_000);
                let t = ld_pmf_table(p, k).unwrap();
                let s: f64 = t.q.iter().sum();
                assert!(s <= 1.0 + 1e-12, "({a},{r}) sum {s}");
                assert!(t.q.iter().all(|&q| q >= 0.0));
                assert!((s + t.tail_bound - 1.0).abs() <= 1e-9);
                if k < 20_000 {
                    // the tail rule was satisfiable within the cap
                    assert!(s >= 1.0 - 1e-6, "({a},{r}) K={k} sum {s}");
                } else {
                    // heavy tail: uncovered mass is the power-law tail
                    let est = ld_tail_estimate(p, k);
                    assert!((1.0 - s) <= 1.5 * est + 1e-6, "({a},{r}) {} vs {est}", 1.0 - s);
                }
            }
        }
    }

    #[test]
    fn pgf_matches_table() {
        for &(a, r) in &[(1.0, 1.0), (2.0, 0.5), (4.0, 2.0)] {
            let p = params(a, r);
            let t = ld_pmf_table(p, 2000).unwrap();
            for &z in &[0.1, 0.5, 0.9] {
                let mut s = 0.0;
                let mut zk = 1.0;
                for q in &t.q {
                    s += q * zk;
                    zk *= z;
                }
                assert!((ld_pgf(p, z).unwrap() - s).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn infinitely_divisible() {
        let full = ld_pmf_table(params(2.0, 0.8), 200).unwrap();
        let half = ld_pmf_table(params(1.0, 0.8), 200).unwrap();
        for k in 0..=200 {
            let conv: f64 = (0..=k).map(|i| half.q[i] * half.q[k - i]).sum();
            assert!((conv - full.q[k]).abs() < 1e-8);
            assert_relative_eq!(conv, full.q[k], max_relative = 1e-11);
        }
    }

    #[test]
    fn incremental_extension_matches_one_shot() {
        let p = params(2.5, 0.6);
        let mut rec = LdRecursion::new(p, true);
        rec.extend_to(40);
        rec.extend_to(300);
        let mut once = LdRecursion::new(p, true);
        once.extend_to(300);
        assert_eq!(rec.q(), once.q());
        assert_eq!(rec.dq_dalpha(), once.dq_dalpha());
        assert_eq!(rec.dq_drho(), once.dq_drho());
    }

    #[test]
    fn late_derivative_tracking_matches_tracking_from_start() {
        let p = params(1.4, 1.7);
        let mut late = LdRecursion::new(p, false);
        late.extend_to(250);
        late.track_derivatives();
        let mut early = LdRecursion::new(p, true);
        early.extend_to(250);
        assert_eq!(late.q(), early.q());
        assert_eq!(late.dq_dalpha(), early.dq_dalpha());
        assert_eq!(late.dq_drho(), early.dq_drho());
        assert_eq!(late.yule_d2rho(), early.yule_d2rho());
        late.extend_to(300);
        early.extend_to(300);
        assert_eq!(late.dq_drho(), early.dq_drho());
    }

    #[test]
    fn cdf_and_quantile() {
        let p = params(2.0, 0.8);
        let a = p.alpha;
        assert_eq!(ld_quantile(p, 0.5 * (-a).exp()).unwrap(), 0);
        assert_eq!(ld_quantile(p, 0.0).unwrap(), 0);
        assert!(ld_quantile(p, 1.0).is_err());
        let t = ld_pmf_table(p, 5000).unwrap();
        assert!((t.cdf(u64::MAX) - 1.0).abs() <= t.tail_bound + 1e-12);
        let m = ld_quantile(p, 0.5).unwrap();
        assert!(t.cdf(m) >= 0.5 && (m == 0 || t.cdf(m - 1) < 0.5));
        assert_eq!(ld_cdf(p, m).unwrap(), t.cdf(m));
        // beyond the budget
        assert!(matches!(
            ld_quantile_with_budget(params(2.0, 0.3), 0.999, 1000),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn sampler_alpha_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = ld_sample(0.0, Fitness::new(1.0).unwrap(), 50, &mut rng).unwrap();
        assert!(s.counts().iter().all(|&x| x == 0));
        assert!(ld_sample(-1.0, Fitness::new(1.0).unwrap(), 5, &mut rng).is_err());
    }

    #[test]
    fn sampler_seed_reproducible() {
        let rho = Fitness::new(0.8).unwrap();
        let a = ld_sample(2.0, rho, 1000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = ld_sample(2.0, rho, 1000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
