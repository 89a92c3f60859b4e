//! Goodness-of-fit summaries for comparing draws with a pmf table.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::lddist::PmfTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson chi-square over bins; `fitted` parameters reduce the degrees of freedom.
pub fn chi_square(observed: &[f64], expected: &[f64], fitted: usize) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(Error::InvalidSample(format!(
            "{} observed bins but {} expected",
            observed.len(),
            expected.len()
        )));
    }
    if observed.len() < fitted + 2 {
        return Err(Error::InvalidSample("too few bins for a chi-square test".into()));
    }
    if let Some(e) = expected.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::InvalidSample(format!("expected count {e} is not positive")));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let df = observed.len() - 1 - fitted;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        df,
        p_value: dist.sf(statistic),
    })
}

/// Counts of `values` in bins `0, 1, …, kmax` plus a final bin for `> kmax`.
pub fn bin_counts(values: impl IntoIterator<Item = u64>, kmax: u64) -> Vec<f64> {
    let mut bins = vec![0.0; kmax as usize + 2];
    for v in values {
        let i = v.min(kmax + 1) as usize;
        bins[i] += 1.0;
    }
    bins
}

/// Probabilities of the bins of [`bin_counts`]; the tail bin gets `1 - Σ q_k`.
pub fn bin_probabilities(table: &PmfTable, kmax: u64) -> Result<Vec<f64>> {
    if (table.kmax() as u64) < kmax {
        return Err(Error::InvalidSample(format!(
            "table stops at {} but bins reach {kmax}",
            table.kmax()
        )));
    }
    let mut p: Vec<f64> = table.q[..=kmax as usize].to_vec();
    let head: f64 = p.iter().sum();
    p.push((1.0 - head).max(0.0));
    Ok(p)
}

/// Total variation distance `½ Σ |counts_i / n - probs_i|`.
pub fn total_variation(counts: &[f64], probs: &[f64]) -> Result<f64> {
    if counts.len() != probs.len() {
        return Err(Error::InvalidSample("bin count mismatch".into()));
    }
    let n: f64 = counts.iter().sum();
    if !(n > 0.0) {
        return Err(Error::InvalidSample("no observations".into()));
    }
    Ok(0.5 * counts.iter().zip(probs).map(|(c, p)| (c / n - p).abs()).sum::<f64>())
}
