use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// A sample of mutant counts, one per culture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    counts: Vec<u64>,
    #[serde(skip)]
    freq: BTreeMap<u64, u64>,
    max: u64,
}

impl Sample {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidSample("sample must contain at least one count".into()));
        }
        let mut freq = BTreeMap::new();
        for &x in &counts {
            *freq.entry(x).or_insert(0) += 1;
        }
        let max = *freq.keys().next_back().expect("nonempty");
        Ok(Self { counts, freq, max })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sample size n.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Largest count M.
    pub fn max(&self) -> u64 {
        self.max
    }

    /// Frequency table `c_i = #{j : X_j = i}` over the distinct observed values.
    pub fn frequencies(&self) -> &BTreeMap<u64, u64> {
        &self.freq
    }

    /// `c_i` for a single value.
    pub fn frequency(&self, value: u64) -> u64 {
        self.freq.get(&value).copied().unwrap_or(0)
    }

    pub fn zeros(&self) -> u64 {
        self.frequency(0)
    }

    pub fn all_zero(&self) -> bool {
        self.max == 0
    }

    /// Order statistic `X_(⌈q n⌉)` (1-based), with `q ∈ (0, 1)`.
    pub fn quantile(&self, q: f64) -> u64 {
        let n = self.counts.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        let mut seen = 0usize;
        for (&value, &c) in &self.freq {
            seen += c as usize;
            if seen >= rank {
                return value;
            }
        }
        self.max
    }

    /// A copy with every count above `bound` replaced by `bound`.
    /// Returns the clipped sample and the number of values that were changed.
    pub fn clipped(&self, bound: u64) -> (Self, usize) {
        let mut changed = 0;
        let counts = self
            .counts
            .iter()
            .map(|&x| {
                if x > bound {
                    changed += 1;
                    bound
                } else {
                    x
                }
            })
            .collect();
        (Self::new(counts).expect("nonempty"), changed)
    }
}

impl TryFrom<Vec<u64>> for Sample {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        Self::new(v)
    }
}
