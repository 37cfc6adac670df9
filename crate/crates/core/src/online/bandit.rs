use crate::error::{Error, Result};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// Multiples of `step` in `[0, hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmGrid {
    pub step: f64,
    pub hi: f64,
    pub arms: Vec<f64>,
}

impl ArmGrid {
    pub fn new(step: f64, hi: f64) -> Result<Self> {
        if !(step > 0.0 && hi > 0.0 && step.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "arm grid needs step > 0 and hi > 0, got {step}, {hi}"
            )));
        }
        let count = (hi / step - 1e-9).ceil().max(1.0);
        if count > 1e6 {
            return Err(Error::TooLarge(format!("{count} arms")));
        }
        let arms = (0..count as usize).map(|k| k as f64 * step).collect();
        Ok(Self { step, hi, arms })
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn value(&self, k: usize) -> f64 {
        self.arms[k]
    }

    /// Index of the largest arm not above `x`.
    pub fn snap_down(&self, x: f64) -> usize {
        self.arms.partition_point(|&a| a <= x + 1e-12).saturating_sub(1)
    }
}

/// `(H m / T)^{1/3}`.
pub fn auto_eps(h: f64, m: usize, rounds: usize) -> f64 {
    (h * m as f64 / rounds.max(1) as f64).cbrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    /// Upper confidence bounds with an empirical-variance bonus.
    Ucb,
    /// Exponential weights with importance-weighted loss estimates.
    Exp3,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ucb => "ucb",
            Algo::Exp3 => "exp3",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ucb" | "ucb1" => Ok(Algo::Ucb),
            "exp3" => Ok(Algo::Exp3),
            _ => Err(Error::InvalidArgument(format!("unknown bandit algorithm `{s}`"))),
        }
    }
}

/// One learner over a finite arm set; rewards must lie in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Bandit {
    pub algo: Algo,
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
    m2: Vec<f64>,
    log_w: Vec<f64>,
    probs: Vec<f64>,
    eta: f64,
    pub feedback: u64,
}

impl Bandit {
    /// `horizon` is the expected number of feedback events (tunes EXP3).
    pub fn new(algo: Algo, arms: usize, horizon: usize) -> Self {
        let k = arms.max(1);
        let eta = (2.0 * (k as f64).ln().max(1.0) / (k as f64 * horizon.max(1) as f64)).sqrt();
        Self {
            algo,
            counts: vec![0; k],
            means: vec![0.0; k],
            m2: vec![0.0; k],
            log_w: vec![0.0; k],
            probs: vec![1.0 / k as f64; k],
            eta,
            feedback: 0,
        }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        match self.algo {
            Algo::Ucb => {
                if let Some(k) = self.counts.iter().position(|&c| c == 0) {
                    return k;
                }
                let ln_t = (self.feedback as f64).ln();
                let mut best = (0, f64::NEG_INFINITY);
                for k in 0..self.arms() {
                    let n = self.counts[k] as f64;
                    let var = self.m2[k] / n;
                    let idx = self.means[k] + (2.0 * var * ln_t / n).sqrt() + 3.0 * ln_t / n;
                    if idx > best.1 {
                        best = (k, idx);
                    }
                }
                best.0
            }
            Algo::Exp3 => {
                let top = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = self.log_w.iter().map(|w| (w - top).exp()).sum();
                for (p, w) in self.probs.iter_mut().zip(&self.log_w) {
                    *p = (w - top).exp() / total;
                }
                let mut x = rng.random::<f64>();
                for (k, &p) in self.probs.iter().enumerate() {
                    if x < p {
                        return k;
                    }
                    x -= p;
                }
                self.arms() - 1
            }
        }
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        let r = reward.clamp(0.0, 1.0);
        self.feedback += 1;
        self.counts[arm] += 1;
        let n = self.counts[arm] as f64;
        let d = r - self.means[arm];
        self.means[arm] += d / n;
        self.m2[arm] += d * (r - self.means[arm]);
        if self.algo == Algo::Exp3 {
            let p = self.probs[arm].max(1e-12);
            self.log_w[arm] -= self.eta * (1.0 - r) / p;
        }
    }

    /// Arm with the most pulls (lowest index on ties).
    pub fn most_pulled(&self) -> usize {
        let mut best = 0;
        for k in 1..self.arms() {
            if self.counts[k] > self.counts[best] {
                best = k;
            }
        }
        best
    }
}
