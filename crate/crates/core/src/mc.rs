//! Batched Monte Carlo with deterministic merging.

use crate::instance::Instance;
use crate::rng::{Rng, RngStream};
use rayon::prelude::*;

/// Samples per batch. Each batch draws from its own sub-stream.
pub const BATCH: usize = 4096;

/// Largest discrete instance evaluated by exhaustive enumeration.
pub const ENUMERATION_LIMIT: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            stderr: 0.0,
            n: 0,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            mean: self.mean * c,
            stderr: self.stderr * c.abs(),
            n: self.n,
        }
    }
}

/// Standard error of a difference of independent estimates.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// `lhs <= rhs` up to `k` combined standard errors plus `abs_tol`.
pub fn le_within(lhs: Estimate, rhs: Estimate, k: f64, abs_tol: f64) -> bool {
    lhs.mean <= rhs.mean + k * combined_stderr(lhs.stderr, rhs.stderr) + abs_tol
}

/// Running means and centered second moments, merged with the pairwise update
/// so constant outputs report exactly zero variance.
#[derive(Clone)]
struct Moments {
    mean: Vec<f64>,
    m2: Vec<f64>,
    n: u64,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            mean: vec![0.0; k],
            m2: vec![0.0; k],
            n: 0,
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for (c, &v) in x.iter().enumerate() {
            let d = v - self.mean[c];
            self.mean[c] += d / n;
            self.m2[c] += d * (v - self.mean[c]);
        }
    }

    fn merge(mut self, o: &Moments) -> Self {
        if o.n == 0 {
            return self;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        for c in 0..self.mean.len() {
            let d = o.mean[c] - self.mean[c];
            self.mean[c] += d * nb / n;
            self.m2[c] += o.m2[c] + d * d * na * nb / n;
        }
        self.n += o.n;
        self
    }

    fn finish(&self) -> Vec<Estimate> {
        let n = self.n as f64;
        (0..self.mean.len())
            .map(|c| {
                let var = if self.n > 1 {
                    (self.m2[c] / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                Estimate {
                    mean: self.mean[c],
                    stderr: (var / n).sqrt(),
                    n: self.n,
                }
            })
            .collect()
    }
}

/// Runs `n_samples` draws of `f`, each writing `k` outputs, in parallel batches.
/// Batch results are merged in batch order, so output is independent of the
/// thread count.
pub fn estimate<F>(stream: &RngStream, n_samples: usize, k: usize, f: F) -> Vec<Estimate>
where
    F: Fn(&mut Rng, &mut [f64]) + Sync,
{
    assert!(n_samples > 0, "Monte Carlo needs at least one sample");
    let batches = n_samples.div_ceil(BATCH);
    let parts: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.batch(b as u64);
            let len = BATCH.min(n_samples - b * BATCH);
            let mut acc = Moments::new(k);
            let mut out = vec![0.0; k];
            for _ in 0..len {
                out.iter_mut().for_each(|o| *o = 0.0);
                f(&mut rng, &mut out);
                acc.push(&out);
            }
            acc
        })
        .collect();
    parts.iter().fold(Moments::new(k), |a, p| a.merge(p)).finish()
}

/// Expectation over type profiles of `inst`: exhaustive for small discrete
/// instances (zero standard error), Monte Carlo otherwise.
pub fn expect_profiles<F>(inst: &Instance, n_samples: usize, stream: &RngStream, k: usize, f: F) -> Vec<Estimate>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    if let Some(count) = inst.profile_count().filter(|&c| c <= ENUMERATION_LIMIT) {
        let mut acc = vec![0.0; k];
        let mut out = vec![0.0; k];
        inst.for_each_profile(|t, p| {
            out.iter_mut().for_each(|o| *o = 0.0);
            f(t, &mut out);
            for c in 0..k {
                acc[c] += p * out[c];
            }
        })
        .expect("discrete instance");
        return acc
            .into_iter()
            .map(|mean| Estimate {
                mean,
                stderr: 0.0,
                n: count,
            })
            .collect();
    }
    let dim = inst.n * inst.m;
    estimate(stream, n_samples, k, |rng, out| {
        let mut t = vec![0.0; dim];
        inst.sample_profile(rng, &mut t);
        f(&t, out);
    })
}
