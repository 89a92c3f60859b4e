use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use luria::gf::p0_estimate;
use luria::gof::{bin_counts, bin_probabilities, total_variation};
use luria::growth::{calibrate_mutation_probability, harris_constant, observation_time, simulate_gm0, HarrisForm};
use luria::inference::{wald_inference, Hypothesis, Inference};
use luria::montecarlo::{mse_table, replicate, stream_rng, MseConfig};
use luria::{
    gf_fit, ld_pmf_table, ld_sample, ml_fit, ml_fit_winsorized, EstimateResult, Fitness, GenerationModel,
    GenerationTimeLaw, GfControls, LdParams, Method, MlOptions, Sample,
};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::input::read_sample;
use crate::output::{cell, num, quote, write_json};
use crate::{FitArgs, Format, HistArgs, LawArg, MseArgs, SampleArgs, SimulateArgs};

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_level(level: f64) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

fn estimate(method: Method, sample: &Sample, controls: &GfControls, winsor_bound: u64) -> Result<EstimateResult, CliError> {
    let opts = MlOptions::default();
    let result = match method {
        Method::Gf => gf_fit(sample, controls).map(|f| f.estimate),
        Method::Ml => ml_fit(sample, None, &opts),
        Method::MlWinsor => ml_fit_winsorized(sample, winsor_bound, None, &opts),
        Method::P0 => p0_estimate(sample),
    }
    .map_err(CliError::estimation)?;
    if !result.converged {
        let mut msg = format!("{method} estimate did not converge after {} iterations", result.iterations);
        for w in &result.warnings {
            msg.push_str("; ");
            msg.push_str(w);
        }
        return Err(CliError::Estimation(msg));
    }
    Ok(result)
}

fn pair(lo: f64, hi: f64) -> Value {
    json!([num(lo), num(hi)])
}

fn fit_json(est: &EstimateResult, inf: &Inference, total_cells: Option<f64>) -> Value {
    let c = est.cov;
    let mut v = json!({
        "method": est.method.as_str(),
        "n": est.n,
        "alpha_hat": num(est.alpha_hat),
        "rho_hat": est.rho_hat.map(num),
        "cov": [num(c[0][0]), num(c[0][1]), num(c[1][0]), num(c[1][1])],
        "level": inf.level,
        "ci_alpha": pair(inf.ci_alpha.lo, inf.ci_alpha.hi),
        "ci_rho": inf.ci_rho.map(|i| pair(i.lo, i.hi)),
        "iterations": est.iterations,
        "converged": est.converged,
        "warnings": est.warnings,
    });
    if let Some(t) = &inf.test {
        v["test"] = json!({
            "hypothesis": format!("{:?}", t.hypothesis),
            "statistic": num(t.statistic),
            "df": t.df,
            "p_value": num(t.p_value),
        });
    }
    if let Some(cells) = total_cells {
        let ci = inf.ci_alpha.scaled(1.0 / cells);
        v["mutation_rate"] = json!({
            "total_cells": cells,
            "estimate": num(est.alpha_hat / cells),
            "ci": pair(ci.lo, ci.hi),
        });
    }
    v
}

fn fit_csv(out: &mut impl Write, est: &EstimateResult, inf: &Inference, total_cells: Option<f64>) -> io::Result<()> {
    let c = est.cov;
    let rate = total_cells.map(|cells| (est.alpha_hat / cells, inf.ci_alpha.scaled(1.0 / cells)));
    writeln!(
        out,
        "method,n,alpha_hat,rho_hat,cov_aa,cov_ar,cov_ra,cov_rr,level,ci_alpha_lo,ci_alpha_hi,ci_rho_lo,ci_rho_hi,\
         test_statistic,test_p_value,mutation_rate,mutation_rate_lo,mutation_rate_hi,warnings"
    )?;
    let row = [
        est.method.as_str().to_string(),
        est.n.to_string(),
        cell(Some(est.alpha_hat)),
        cell(est.rho_hat),
        cell(Some(c[0][0])),
        cell(Some(c[0][1])),
        cell(Some(c[1][0])),
        cell(Some(c[1][1])),
        cell(Some(inf.level)),
        cell(Some(inf.ci_alpha.lo)),
        cell(Some(inf.ci_alpha.hi)),
        cell(inf.ci_rho.map(|i| i.lo)),
        cell(inf.ci_rho.map(|i| i.hi)),
        cell(inf.test.map(|t| t.statistic)),
        cell(inf.test.map(|t| t.p_value)),
        cell(rate.map(|r| r.0)),
        cell(rate.map(|r| r.1.lo)),
        cell(rate.map(|r| r.1.hi)),
        quote(&est.warnings.join("; ")),
    ];
    writeln!(out, "{}", row.join(","))
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let controls = GfControls::from(&a.gf);
    controls.validate().map_err(CliError::input)?;
    check_level(a.level)?;
    if let Some(cells) = a.total_cells {
        if !(cells > 0.0 && cells.is_finite()) {
            return Err(CliError::Input(format!("--total-cells must be positive, got {cells}")));
        }
    }
    let method = Method::from(a.method);
    if a.test_rho.is_some() && method == Method::P0 {
        return Err(CliError::Input("--test-rho needs a method that estimates rho".into()));
    }
    let sample = read_sample(&a.input)?;
    let est = estimate(method, &sample, &controls, a.winsor_bound)?;
    let inf = wald_inference(&est, a.level, a.test_rho.map(Hypothesis::Rho)).map_err(CliError::estimation)?;
    let mut out = open_output(None)?;
    match a.format {
        Format::Json => write_json(&mut out, &fit_json(&est, &inf, a.total_cells))?,
        Format::Csv => fit_csv(&mut out, &est, &inf, a.total_cells)?,
    }
    out.flush()?;
    Ok(())
}

pub fn sample(a: &SampleArgs) -> Result<(), CliError> {
    let rho = Fitness::new(a.rho).map_err(CliError::input)?;
    let s = ld_sample(a.alpha, rho, a.size, &mut stream_rng(a.seed, 0)).map_err(CliError::input)?;
    let mut out = open_output(a.output.as_deref())?;
    for x in s.counts() {
        writeln!(out, "{x}")?;
    }
    out.flush()?;
    Ok(())
}

/// `(class, count)` rows: `None` is the zero class, `Some(n)` counts values in
/// `[10^n, 10^(n+1))`. Every class up to the largest observed one is present.
pub fn decade_classes(sample: &Sample) -> Vec<(Option<u32>, u64)> {
    let mut rows = vec![(None, sample.zeros())];
    if sample.all_zero() {
        return rows;
    }
    let top = sample.max().ilog10();
    let mut counts = vec![0u64; top as usize + 1];
    for (&value, &c) in sample.frequencies().range(1..) {
        counts[value.ilog10() as usize] += c;
    }
    rows.extend(counts.into_iter().enumerate().map(|(n, c)| (Some(n as u32), c)));
    rows
}

pub fn hist(a: &HistArgs) -> Result<(), CliError> {
    let sample = read_sample(&a.input)?;
    let rows = decade_classes(&sample);
    let bounds = |class: Option<u32>| match class {
        None => (0u128, 0u128),
        Some(n) => (10u128.pow(n), 10u128.pow(n + 1) - 1),
    };
    let mut out = open_output(None)?;
    match a.format {
        Format::Csv => {
            writeln!(out, "class,lower,upper,count")?;
            for &(class, count) in &rows {
                let (lo, hi) = bounds(class);
                let label = class.map_or_else(|| "zero".to_string(), |n| n.to_string());
                writeln!(out, "{label},{lo},{hi},{count}")?;
            }
        }
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|&(class, count)| {
                    let (lo, hi) = bounds(class);
                    json!({
                        "class": class.map_or_else(|| json!("zero"), |n| json!(n)),
                        "lower": lo.to_string(),
                        "upper": hi.to_string(),
                        "count": count,
                    })
                })
                .collect();
            write_json(&mut out, &Value::Array(v))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn mse(a: &MseArgs) -> Result<(), CliError> {
    let controls = GfControls::from(&a.gf);
    controls.validate().map_err(CliError::input)?;
    if a.size == 0 || a.replicates == 0 {
        return Err(CliError::Input("--size and --replicates must be at least 1".into()));
    }
    let grid = a
        .alphas
        .iter()
        .flat_map(|&alpha| a.rhos.iter().map(move |&rho| LdParams::new(alpha, rho)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::input)?;
    let mut methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    methods.dedup();
    let cfg = MseConfig {
        methods,
        controls,
        winsor_bound: a.winsor_bound,
        ..MseConfig::new(grid, a.size, a.replicates, a.seed)
    };
    let cells = mse_table(&cfg).map_err(CliError::estimation)?;
    let mut out = open_output(None)?;
    match a.format {
        Format::Csv => {
            writeln!(
                out,
                "alpha,rho,method,size,replicates,mse_alpha,mse_rho,rmse_alpha,rmse_rho,successes,failures"
            )?;
            for c in &cells {
                let ok = c.successes > 0;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    cell(Some(c.alpha)),
                    cell(Some(c.rho)),
                    c.method,
                    a.size,
                    a.replicates,
                    cell(ok.then_some(c.mse_alpha)),
                    cell(c.mse_rho.filter(|_| ok)),
                    cell(ok.then(|| c.mse_alpha.sqrt())),
                    cell(c.mse_rho.map(f64::sqrt).filter(|_| ok)),
                    c.successes,
                    c.failures
                )?;
            }
        }
        Format::Json => {
            let v: Vec<Value> = cells
                .iter()
                .map(|c| {
                    json!({
                        "alpha": c.alpha,
                        "rho": c.rho,
                        "method": c.method.as_str(),
                        "size": a.size,
                        "replicates": a.replicates,
                        "mse_alpha": num(c.mse_alpha),
                        "mse_rho": c.mse_rho.map(num),
                        "rmse_alpha": num(c.mse_alpha.sqrt()),
                        "rmse_rho": c.mse_rho.map(|m| num(m.sqrt())),
                        "successes": c.successes,
                        "failures": c.failures,
                    })
                })
                .collect();
            write_json(&mut out, &Value::Array(v))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn build_law(a: &SimulateArgs) -> Result<GenerationTimeLaw, CliError> {
    let need = |v: Option<f64>, flag: &str| {
        v.ok_or_else(|| CliError::Input(format!("--law {:?} requires --{flag}", a.law).to_lowercase()))
    };
    let law = match a.law {
        LawArg::Deterministic => GenerationTimeLaw::Deterministic {
            period: need(a.period, "period")?,
        },
        LawArg::Exponential => GenerationTimeLaw::Exponential {
            rate: need(a.rate, "rate")?,
        },
        LawArg::Gamma => GenerationTimeLaw::Gamma {
            shape: need(a.shape, "shape")?,
            rate: need(a.rate, "rate")?,
        },
        LawArg::Lognormal => GenerationTimeLaw::Lognormal {
            mu_log: need(a.mu_log, "mu-log")?,
            sigma_log: need(a.sigma_log, "sigma-log")?,
        },
    };
    law.validate().map_err(CliError::input)?;
    Ok(law)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let law = build_law(a)?;
    let mut warnings = Vec::new();
    let (p, target) = match (a.p, a.alpha) {
        (_, Some(alpha)) => {
            let cal = calibrate_mutation_probability(&law, a.mu, alpha, a.t_end, a.n0).map_err(CliError::input)?;
            warnings.extend(cal.warnings);
            (cal.p, Some(alpha))
        }
        (Some(p), None) => (p, None),
        (None, None) => return Err(CliError::Input("one of --p or --alpha is required".into())),
    };
    let model = GenerationModel {
        law,
        mu: a.mu,
        p,
        n0: a.n0,
        t_end: a.t_end,
    };
    model.validate().map_err(CliError::input)?;
    let alpha = match target {
        Some(alpha) => alpha,
        None => model.implied_alpha().map_err(CliError::input)?,
    };
    let nu = model.nu().map_err(CliError::input)?;
    let harris = harris_constant(&law, nu, HarrisForm::BellmanHarris).map_err(CliError::input)?;
    let rho = nu / a.mu;
    if a.random_phase && law.lattice_span().is_none() {
        warnings.push("generation-time law is not lattice; --random-phase has no effect".into());
    }

    let runs = replicate(a.seed, a.replicates, |_, rng| {
        let t_obs = observation_time(&law, a.t_end, a.random_phase, rng);
        let m = GenerationModel { t_end: t_obs, ..model };
        simulate_gm0(&m, a.budget, rng).map(|o| (o, t_obs))
    });

    let mut out = open_output(None)?;
    let mut mutants = Vec::with_capacity(runs.len());
    let (mut mutations, mut ratios) = (Vec::new(), Vec::new());
    let mut failures = 0usize;
    for (i, run) in runs.iter().enumerate() {
        match run {
            Ok((o, t_obs)) => {
                writeln!(out, "{}", o.mutants)?;
                mutants.push(o.mutants);
                mutations.push(o.mutations as f64);
                let cells = o.normal_cells as f64 + o.mutants as f64;
                ratios.push(cells * (-nu * t_obs).exp() / a.n0 as f64);
            }
            Err(e) => {
                writeln!(out, "# replicate {i}: {e}")?;
                failures += 1;
            }
        }
    }
    out.flush()?;
    if failures > 0 {
        warnings.push(format!("{failures} of {} replicates failed", a.replicates));
    }

    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let ratio_mean = mean(&ratios);
    let ratio_se = ratio_mean.filter(|_| ratios.len() > 1).map(|m| {
        let var = ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (ratios.len() - 1) as f64;
        (var / ratios.len() as f64).sqrt()
    });
    let tv = if a.tv && !mutants.is_empty() {
        match LdParams::new(alpha, rho) {
            Ok(params) => {
                let probs = ld_pmf_table(params, a.kmax)
                    .and_then(|t| bin_probabilities(&t, a.kmax))
                    .map_err(CliError::estimation)?;
                let observed = bin_counts(mutants.iter().copied(), a.kmax);
                Some(total_variation(&observed, &probs).map_err(CliError::estimation)?)
            }
            Err(e) => {
                warnings.push(format!("total variation not computed: {e}"));
                None
            }
        }
    } else {
        None
    };
    let mutants_f: Vec<f64> = mutants.iter().map(|&m| m as f64).collect();
    let summary = json!({
        "law": law,
        "mu": a.mu,
        "p": num(p),
        "n0": a.n0,
        "t_end": a.t_end,
        "random_phase": a.random_phase,
        "nu": num(nu),
        "rho": num(rho),
        "harris": num(harris),
        "alpha": num(alpha),
        "replicates": a.replicates,
        "failures": failures,
        "mean_mutants": mean(&mutants_f).map(num),
        "mean_mutations": mean(&mutations).map(num),
        "population_ratio": ratio_mean.map(num),
        "population_ratio_se": ratio_se.map(num),
        "tv": tv.map(num),
        "kmax": a.kmax,
        "warnings": warnings,
    });
    match &a.summary {
        Some(path) => write_json(&mut open_output(Some(path))?, &summary)?,
        None => write_json(&mut io::stderr().lock(), &summary)?,
    }
    Ok(())
}
