//! Special functions, adaptive quadrature and bracketed root finding.
//!
//! Everything here is a pure function of its inputs.

mod quad;
mod root;
pub(crate) mod special;

pub use quad::{integrate, QuadSpec};
pub use root::{find_root, RootSpec};
pub use special::{digamma, ln_beta, log_gamma, trigamma};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

const LANES: usize = 4;

/// Branch-free compensated accumulators (TwoSum) in independent lanes,
/// so that the hot loop vectorizes.
#[derive(Clone, Copy)]
struct Lanes {
    sum: [f64; LANES],
    comp: [f64; LANES],
}

impl Lanes {
    fn new() -> Self {
        Self {
            sum: [0.0; LANES],
            comp: [0.0; LANES],
        }
    }

    #[inline(always)]
    fn add(&mut self, x: [f64; LANES]) {
        for j in 0..LANES {
            let t = self.sum[j] + x[j];
            let bp = t - self.sum[j];
            self.comp[j] += (self.sum[j] - (t - bp)) + (x[j] - bp);
            self.sum[j] = t;
        }
    }

    fn value(&self, tail: &mut CompensatedSum) -> f64 {
        for j in 0..LANES {
            tail.add(self.sum[j]);
            tail.add(self.comp[j]);
        }
        tail.value()
    }
}

/// Compensated convolution terms `Σ_{i=1..k} x_m[i] q[k-i]` for each of
/// the `N` sequences `xs`, sharing one pass over `q`.
///
/// Requires `xs[m].len() > k` and `q.len() >= k`.
pub(crate) fn convolve_at<const N: usize>(xs: [&[f64]; N], q: &[f64], k: usize) -> [f64; N] {
    let heads: [&[f64]; N] = xs.map(|x| &x[1..=k]);
    let q = &q[..k];
    // x[1..] runs forward while q runs backward from q[k-1].
    let lanes = heads.map(|head| {
        let mut acc = Lanes::new();
        for (xc, qc) in head.chunks_exact(LANES).zip(q.rchunks_exact(LANES)) {
            acc.add(std::array::from_fn(|j| xc[j] * qc[LANES - 1 - j]));
        }
        acc
    });
    let full = k / LANES * LANES;
    let mut out = [0.0; N];
    for m in 0..N {
        let mut tail = CompensatedSum::new();
        for j in full..k {
            tail.add(heads[m][j] * q[k - 1 - j]);
        }
        out[m] = lanes[m].value(&mut tail);
    }
    out
}
