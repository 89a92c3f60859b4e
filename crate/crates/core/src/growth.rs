//! Bellman-Harris growth of normal cells with Markovian mutants (G/M/0).
//!
//! Normal cells have i.i.d. generation times with law G and divide into two
//! normal cells, or into one normal and one mutant cell with probability p.
//! Mutants divide at rate μ. The Malthusian parameter ν solves
//! `2 E[e^{-νS}] = 1`, and `E[N(t)] e^{-νt} → C` for non-lattice G.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::montecarlo::replicate;
use crate::numerics::{find_root, integrate, QuadSpec, RootSpec};
use crate::yule::{geometric_from_one, Fitness};

/// Generation-time distribution of normal cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum GenerationTimeLaw {
    Deterministic { period: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Lognormal { mu_log: f64, sigma_log: f64 },
}

const LOGNORMAL_CUT: f64 = 12.0;

impl GenerationTimeLaw {
    pub fn validate(&self) -> Result<()> {
        let pos = |what, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(domain(what, x))
            }
        };
        match *self {
            Self::Deterministic { period } => pos("period", period),
            Self::Exponential { rate } => pos("rate", rate),
            Self::Gamma { shape, rate } => pos("shape", shape).and(pos("rate", rate)),
            Self::Lognormal { mu_log, sigma_log } => {
                if !mu_log.is_finite() {
                    return Err(domain("mu_log", mu_log));
                }
                pos("sigma_log", sigma_log)
            }
        }
    }

    /// Lattice span for laws concentrated on a lattice, `None` otherwise.
    pub fn lattice_span(&self) -> Option<f64> {
        match *self {
            Self::Deterministic { period } => Some(period),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Deterministic { period } => period,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Lognormal { mu_log, sigma_log } => (mu_log + 0.5 * sigma_log * sigma_log).exp(),
        }
    }

    // E[f(S)] for the lognormal law, integrating against the normal density.
    fn lognormal_expect(mu_log: f64, sigma_log: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        let spec = QuadSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_subdivisions: 400,
        };
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        integrate(
            |x: f64| (-0.5 * x * x).exp() / norm * f((mu_log + sigma_log * x).exp()),
            -LOGNORMAL_CUT,
            LOGNORMAL_CUT,
            &spec,
        )
    }

    /// Laplace transform `E[e^{-νS}]`.
    pub fn laplace(&self, nu: f64) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            Self::Deterministic { period } => (-nu * period).exp(),
            Self::Exponential { rate } => rate / (rate + nu),
            Self::Gamma { shape, rate } => (rate / (rate + nu)).powf(shape),
            Self::Lognormal { mu_log, sigma_log } => {
                Self::lognormal_expect(mu_log, sigma_log, |s| (-nu * s).exp())?
            }
        })
    }

    /// `E[S e^{-νS}] = ∫ s e^{-νs} dG(s)`.
    pub fn weighted_mean(&self, nu: f64) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            Self::Deterministic { period } => period * (-nu * period).exp(),
            Self::Exponential { rate } => rate / (rate + nu).powi(2),
            Self::Gamma { shape, rate } => shape / (rate + nu) * (rate / (rate + nu)).powf(shape),
            Self::Lognormal { mu_log, sigma_log } => {
                Self::lognormal_expect(mu_log, sigma_log, |s| s * (-nu * s).exp())?
            }
        })
    }

    fn sampler(&self) -> Result<LawSampler> {
        self.validate()?;
        let bad = |e: &dyn std::fmt::Display| Error::Degenerate(format!("generation-time law: {e}"));
        Ok(match *self {
            Self::Deterministic { period } => LawSampler::Fixed(period),
            Self::Exponential { rate } => LawSampler::Exp(Exp::new(rate).map_err(|e| bad(&e))?),
            Self::Gamma { shape, rate } => {
                LawSampler::Gamma(Gamma::new(shape, 1.0 / rate).map_err(|e| bad(&e))?)
            }
            Self::Lognormal { mu_log, sigma_log } => {
                LawSampler::LogNormal(LogNormal::new(mu_log, sigma_log).map_err(|e| bad(&e))?)
            }
        })
    }

    /// One generation time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler()?.draw(rng))
    }
}

enum LawSampler {
    Fixed(f64),
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    LogNormal(LogNormal<f64>),
}

impl LawSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Fixed(t) => *t,
            Self::Exp(d) => d.sample(rng),
            Self::Gamma(d) => d.sample(rng),
            Self::LogNormal(d) => d.sample(rng),
        }
    }
}

/// Malthusian parameter: the root ν > 0 of `2 E[e^{-νS}] = 1`.
pub fn malthusian(law: &GenerationTimeLaw) -> Result<f64> {
    law.validate()?;
    match *law {
        GenerationTimeLaw::Deterministic { period } => Ok(std::f64::consts::LN_2 / period),
        GenerationTimeLaw::Exponential { rate } => Ok(rate),
        GenerationTimeLaw::Gamma { shape, rate } => Ok(rate * (2f64.powf(1.0 / shape) - 1.0)),
        GenerationTimeLaw::Lognormal { .. } => {
            let mut failure = None;
            let root = find_root(
                |nu| match law.laplace(nu) {
                    Ok(l) => 2.0 * l - 1.0,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                &RootSpec::new(1e-8, 1e4).tol(1e-14),
            );
            if let Some(e) = failure {
                return Err(e);
            }
            root.map_err(|_| Error::Domain {
                what: "Malthusian parameter (no root in [1e-8, 1e4])",
                value: law.mean(),
            })
        }
    }
}

/// Which expression of the Harris constant to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HarrisForm {
    /// `C = 1 / (4ν ∫ s e^{-νs} dG(s))`.
    #[default]
    BellmanHarris,
    /// `C = 1 / (4 ∫ s e^{-νs} dG(s))`, which has the wrong dimension and
    /// gives `C = λ` for exponential G. Kept for comparison only.
    WithoutNu,
}

/// Harris constant `C = lim E[N(t)] e^{-νt}` for a single newborn ancestor.
pub fn harris_constant(law: &GenerationTimeLaw, nu: f64, form: HarrisForm) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(domain("nu", nu));
    }
    let m = law.weighted_mean(nu)?;
    Ok(match form {
        HarrisForm::BellmanHarris => 1.0 / (4.0 * nu * m),
        HarrisForm::WithoutNu => 1.0 / (4.0 * m),
    })
}

/// G/M/0 experiment: `n0` newborn normal cells at time 0, observed at `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationModel {
    pub law: GenerationTimeLaw,
    /// Division rate of mutant cells.
    pub mu: f64,
    /// Mutation probability per normal division.
    pub p: f64,
    pub n0: u64,
    pub t_end: f64,
}

impl GenerationModel {
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(domain("mu", self.mu));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(domain("mutation probability p", self.p));
        }
        if self.n0 < 1 {
            return Err(domain("n0", 0.0));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(domain("t_end", self.t_end));
        }
        Ok(())
    }

    pub fn nu(&self) -> Result<f64> {
        malthusian(&self.law)
    }

    /// Limit fitness `ρ = ν/μ`.
    pub fn rho(&self) -> Result<Fitness> {
        Fitness::new(self.nu()? / self.mu)
    }

    /// `α = p n0 C e^{νt}` implied by the current `p`.
    pub fn implied_alpha(&self) -> Result<f64> {
        let nu = self.nu()?;
        let c = harris_constant(&self.law, nu, HarrisForm::BellmanHarris)?;
        Ok(self.p * self.n0 as f64 * c * (nu * self.t_end).exp())
    }
}

pub const DEFAULT_DIVISION_BUDGET: u64 = 10_000_000;

/// State of the population at `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gm0Outcome {
    /// Mutant cells (saturating at `u64::MAX`).
    pub mutants: u64,
    /// Mutation events, i.e. divisions that produced a mutant.
    pub mutations: u64,
    /// Normal-cell divisions up to `t_end`.
    pub divisions: u64,
    pub normal_cells: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event(f64);

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Event-driven simulation of one culture.
///
/// Normal cells are kept in a queue of division times (ties broken by
/// insertion order). A mutant born at τ is not followed cell by cell: its
/// clone at `t_end` is a Yule population of age `t_end - τ`, i.e. geometric
/// on {1, 2, …} with success probability `e^{-μ(t_end-τ)}`. A division at
/// exactly `t_end` is counted.
pub fn simulate_gm0<R: Rng + ?Sized>(model: &GenerationModel, budget: u64, rng: &mut R) -> Result<Gm0Outcome> {
    model.validate()?;
    let law = model.law.sampler()?;
    let t_end = model.t_end;
    let mut queue: BinaryHeap<Reverse<(Event, u64)>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut out = Gm0Outcome {
        mutants: 0,
        mutations: 0,
        divisions: 0,
        normal_cells: 0,
    };
    // Cells whose next division falls after t_end are final; count them
    // instead of queueing them.
    let mut push = |queue: &mut BinaryHeap<Reverse<(Event, u64)>>, out: &mut Gm0Outcome, t: f64| {
        if t > t_end {
            out.normal_cells += 1;
        } else {
            queue.push(Reverse((Event(t), seq)));
            seq += 1;
        }
    };
    for _ in 0..model.n0 {
        let t = law.draw(rng);
        push(&mut queue, &mut out, t);
    }
    while let Some(Reverse((Event(tau), _))) = queue.pop() {
        if out.divisions >= budget {
            return Err(Error::CellBudget {
                budget,
                divisions: out.divisions,
                mutants: out.mutants,
                time: tau,
            });
        }
        out.divisions += 1;
        let first = tau + law.draw(rng);
        push(&mut queue, &mut out, first);
        if model.p > 0.0 && rng.random::<f64>() < model.p {
            out.mutations += 1;
            let v = (-model.mu * (t_end - tau)).exp();
            out.mutants = out.mutants.saturating_add(geometric_from_one(v, rng));
        } else {
            let second = tau + law.draw(rng);
            push(&mut queue, &mut out, second);
        }
    }
    Ok(out)
}

/// Mutation probability giving `p n0 C e^{νt} = α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub p: f64,
    pub nu: f64,
    pub harris: f64,
    pub rho: f64,
    pub clipped: bool,
    pub warnings: Vec<String>,
}

pub fn calibrate_mutation_probability(
    law: &GenerationTimeLaw,
    mu: f64,
    alpha_target: f64,
    t_end: f64,
    n0: u64,
) -> Result<Calibration> {
    if !(alpha_target >= 0.0 && alpha_target.is_finite()) {
        return Err(domain("alpha", alpha_target));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain("mu", mu));
    }
    if n0 < 1 {
        return Err(domain("n0", 0.0));
    }
    let nu = malthusian(law)?;
    let harris = harris_constant(law, nu, HarrisForm::BellmanHarris)?;
    let raw = alpha_target / (n0 as f64 * harris * (nu * t_end).exp());
    let clipped = raw > 1.0;
    let mut warnings = Vec::new();
    if clipped {
        warnings.push(format!("calibrated p = {raw} exceeds 1; clipped to 1"));
    }
    Ok(Calibration {
        p: raw.min(1.0),
        nu,
        harris,
        rho: nu / mu,
        clipped,
        warnings,
    })
}

/// `t + U·span` for a lattice law when `average_phase` is set, `U` uniform on
/// [0, 1); otherwise `t`, without consuming randomness.
pub fn observation_time<R: Rng + ?Sized>(law: &GenerationTimeLaw, t: f64, average_phase: bool, rng: &mut R) -> f64 {
    match law.lattice_span().filter(|_| average_phase) {
        Some(d) => t + d * rng.random::<f64>(),
        None => t,
    }
}

/// Mean of `N(t) e^{-νt} / n0` over replicates, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthRatio {
    pub mean: f64,
    pub std_err: f64,
    pub replicates: usize,
}

/// Estimates `E[N(t)] e^{-νt} / n0` by simulation with `p = 0`.
///
/// For a lattice law `N(t) e^{-νt}` oscillates with period equal to the
/// span and has no limit; with `average_phase` each replicate is observed at
/// `t + U·span`, `U` uniform, so the estimate targets the average over one
/// period. Non-lattice laws ignore the flag.
pub fn growth_ratio(
    law: &GenerationTimeLaw,
    n0: u64,
    t: f64,
    replicates: usize,
    average_phase: bool,
    seed: u64,
) -> Result<GrowthRatio> {
    let nu = malthusian(law)?;
    let runs = replicate(seed, replicates, |_, rng| -> Result<f64> {
        let t_obs = observation_time(law, t, average_phase, rng);
        let model = GenerationModel {
            law: *law,
            mu: 1.0,
            p: 0.0,
            n0,
            t_end: t_obs,
        };
        let o = simulate_gm0(&model, DEFAULT_DIVISION_BUDGET, rng)?;
        Ok(o.normal_cells as f64 * (-nu * t_obs).exp() / n0 as f64)
    });
    let values = runs.into_iter().collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(GrowthRatio {
        mean,
        std_err: (var / n).sqrt(),
        replicates,
    })
}
