//! Online learning of lazy reserves and entry fees with bandit feedback.
//!
//! Each round the auctioneer posts a reserve per (bidder, item) and a fee per
//! bidder, then a fair coin picks simultaneous second-price auctions with the
//! reserves or second-price auctions with the fees. Bidders bid truthfully and
//! enter iff their entrant-adjusted interim utility reaches their fee. Every
//! parameter has its own learner fed with the revenue it is responsible for.

mod bandit;
mod oracle;

pub use bandit::{auto_eps, Algo, ArmGrid, Bandit};
pub use oracle::{EntryOracle, UtilityTable, ORACLE_CELLS};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::mc::{estimate, Estimate};
use crate::rng::{Rng, RngStream};
use rand::Rng as _;
use std::fmt;

/// Learning environment: the prior, both arm grids and the entry oracle.
#[derive(Clone, Debug)]
pub struct OnlineEnv {
    pub inst: Instance,
    pub eps: f64,
    pub reserve_grid: ArmGrid,
    pub fee_grid: ArmGrid,
    pub oracle: EntryOracle,
}

impl OnlineEnv {
    pub fn new(inst: &Instance, eps: f64, oracle_samples: usize, stream: &RngStream) -> Result<Self> {
        let h = inst.cap();
        let reserve_grid = ArmGrid::new(eps, h)?;
        let fee_grid = ArmGrid::new(eps, h * inst.m as f64)?;
        let oracle = EntryOracle::new(inst, &fee_grid, oracle_samples, &stream.child("oracle"))?;
        Ok(Self {
            inst: inst.clone(),
            eps,
            reserve_grid,
            fee_grid,
            oracle,
        })
    }

    pub fn h(&self) -> f64 {
        self.inst.cap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coin {
    Ssp,
    Esp,
}

impl fmt::Display for Coin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coin::Ssp => "SSP",
            Coin::Esp => "ESP",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundLog {
    pub round: u64,
    pub coin: Coin,
    /// Type profile, indexed `i * m + j`.
    pub types: Vec<f64>,
    /// Posted parameters of the chosen mechanism: reserves `i * m + j` or fees `i`.
    pub posted: Vec<f64>,
    /// Entry decisions (ESP rounds only).
    pub entered: Vec<bool>,
    pub revenue: f64,
    /// Revenue per (bidder, item) in SSP rounds, per bidder in ESP rounds.
    pub components: Vec<f64>,
}

/// Per-item payment of bidder `i` in a second-price auction with its lazy
/// reserve `r`, averaging over tie-breaks.
fn sp_payment(bids: &[f64], i: usize, r: f64) -> f64 {
    let t = bids[i];
    if t < r {
        return 0.0;
    }
    let mut top = 0.0f64;
    let mut ties = 0usize;
    for (k, &b) in bids.iter().enumerate() {
        if k == i {
            continue;
        }
        if b > top {
            top = b;
            ties = 1;
        } else if b == top && b > 0.0 {
            ties += 1;
        }
    }
    if t > top || ties == 0 {
        r.max(top)
    } else if t == top {
        r.max(top) / (ties + 1) as f64
    } else {
        0.0
    }
}

/// Highest and second-highest of `values`, floored at 0.
fn top_two(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for v in values {
        if v > a {
            b = a;
            a = v;
        } else if v > b {
            b = v;
        }
    }
    (a, b)
}

/// Entry decisions and ESP revenue for one profile.
fn esp_round(
    inst: &Instance,
    tables: &[UtilityTable],
    fees: &[f64],
    t: &[f64],
    entered: &mut [bool],
    per_bidder: &mut [f64],
    rng: &mut Rng,
) {
    let (n, m) = (inst.n, inst.m);
    for i in 0..n {
        entered[i] = fees[i] <= 0.0 || tables[i].total(&t[i * m..(i + 1) * m]) >= fees[i];
        per_bidder[i] = if entered[i] { fees[i] } else { 0.0 };
    }
    for j in 0..m {
        let (a, b) = top_two((0..n).filter(|&i| entered[i]).map(|i| t[i * m + j]));
        let top: Vec<usize> = (0..n).filter(|&i| entered[i] && t[i * m + j] == a).collect();
        if top.is_empty() {
            continue;
        }
        let w = if top.len() == 1 {
            top[0]
        } else {
            top[rng.random_range(0..top.len())]
        };
        per_bidder[w] += if top.len() > 1 { a } else { b };
    }
}

#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub logs: Vec<RoundLog>,
    pub reserve_learners: Vec<Bandit>,
    pub fee_learners: Vec<Bandit>,
}

/// Runs the learning protocol for `rounds` rounds.
pub fn run_online(env: &OnlineEnv, rounds: usize, algo: Algo, stream: &RngStream) -> Result<OnlineRun> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("need at least one round".into()));
    }
    let inst = &env.inst;
    let (n, m, h) = (inst.n, inst.m, env.h());
    let horizon = rounds.div_ceil(2);
    let mut reserve_learners = vec![Bandit::new(algo, env.reserve_grid.len(), horizon); n * m];
    let mut fee_learners = vec![Bandit::new(algo, env.fee_grid.len(), horizon); n];
    let mut rng = stream.child("rounds").rng();
    let mut t = vec![0.0; n * m];
    let mut r_arm = vec![0usize; n * m];
    let mut e_arm = vec![0usize; n];
    let mut tables: Vec<Option<(Vec<usize>, UtilityTable)>> = vec![None; n];
    let mut logs = Vec::with_capacity(rounds);
    for round in 0..rounds {
        inst.sample_profile(&mut rng, &mut t);
        for (a, l) in r_arm.iter_mut().zip(reserve_learners.iter_mut()) {
            *a = l.select(&mut rng);
        }
        for (a, l) in e_arm.iter_mut().zip(fee_learners.iter_mut()) {
            *a = l.select(&mut rng);
        }
        let coin = if rng.random::<bool>() { Coin::Ssp } else { Coin::Esp };
        let log = match coin {
            Coin::Ssp => {
                let posted: Vec<f64> = r_arm.iter().map(|&a| env.reserve_grid.value(a)).collect();
                let mut comp = vec![0.0; n * m];
                let mut col = vec![0.0; n];
                for j in 0..m {
                    for (i, c) in col.iter_mut().enumerate() {
                        *c = t[i * m + j];
                    }
                    let (a, _) = top_two(col.iter().copied());
                    let top: Vec<usize> = (0..n).filter(|&i| col[i] == a).collect();
                    let w = if top.len() == 1 {
                        top[0]
                    } else {
                        top[rng.random_range(0..top.len())]
                    };
                    let r = posted[w * m + j];
                    if col[w] >= r {
                        let second = (0..n).filter(|&k| k != w).map(|k| col[k]).fold(0.0, f64::max);
                        comp[w * m + j] = r.max(second);
                    }
                }
                for (k, l) in reserve_learners.iter_mut().enumerate() {
                    l.update(r_arm[k], comp[k] / h);
                }
                RoundLog {
                    round: round as u64,
                    coin,
                    types: t.clone(),
                    posted,
                    entered: Vec::new(),
                    revenue: comp.iter().sum(),
                    components: comp,
                }
            }
            Coin::Esp => {
                for i in 0..n {
                    let mut key = e_arm.clone();
                    key[i] = usize::MAX;
                    if tables[i].as_ref().is_none_or(|(k, _)| *k != key) {
                        let tab = env.oracle.utilities(i, &e_arm);
                        tables[i] = Some((key, tab));
                    }
                }
                let tabs: Vec<UtilityTable> = tables.iter().map(|x| x.as_ref().expect("table").1.clone()).collect();
                let fees: Vec<f64> = e_arm.iter().map(|&a| env.fee_grid.value(a)).collect();
                let mut entered = vec![false; n];
                let mut comp = vec![0.0; n];
                esp_round(inst, &tabs, &fees, &t, &mut entered, &mut comp, &mut rng);
                let scale = 2.0 * h * m as f64;
                for (i, l) in fee_learners.iter_mut().enumerate() {
                    l.update(e_arm[i], comp[i] / scale);
                }
                RoundLog {
                    round: round as u64,
                    coin,
                    types: t.clone(),
                    posted: fees,
                    entered,
                    revenue: comp.iter().sum(),
                    components: comp,
                }
            }
        };
        logs.push(log);
    }
    Ok(OnlineRun {
        logs,
        reserve_learners,
        fee_learners,
    })
}

/// Expected revenue of simultaneous second-price auctions with lazy reserves
/// `reserves[i * m + j]`.
pub fn ssp_revenue(inst: &Instance, reserves: &[f64], n_samples: usize, stream: &RngStream) -> Estimate {
    let (n, m) = (inst.n, inst.m);
    estimate(stream, n_samples, 1, |rng, out| {
        let mut t = vec![0.0; n * m];
        inst.sample_profile(rng, &mut t);
        let mut col = vec![0.0; n];
        for j in 0..m {
            for (i, c) in col.iter_mut().enumerate() {
                *c = t[i * m + j];
            }
            for i in 0..n {
                out[0] += sp_payment(&col, i, reserves[i * m + j]);
            }
        }
    })[0]
}

/// Expected ESP revenue at fee arms `arms`.
pub fn esp_revenue(env: &OnlineEnv, arms: &[usize], n_samples: usize, stream: &RngStream) -> Estimate {
    let inst = &env.inst;
    let (n, m) = (inst.n, inst.m);
    let tabs: Vec<UtilityTable> = (0..n).map(|i| env.oracle.utilities(i, arms)).collect();
    let fees: Vec<f64> = arms.iter().map(|&a| env.fee_grid.value(a)).collect();
    estimate(stream, n_samples, 1, |rng, out| {
        let mut t = vec![0.0; n * m];
        inst.sample_profile(rng, &mut t);
        let mut entered = vec![false; n];
        let mut comp = vec![0.0; n];
        esp_round(inst, &tabs, &fees, &t, &mut entered, &mut comp, rng);
        out[0] = comp.iter().sum();
    })[0]
}

#[derive(Clone, Debug)]
pub struct GridOptimum {
    pub reserve_arms: Vec<usize>,
    pub fee_arms: Vec<usize>,
    pub reserves: Vec<f64>,
    pub fees: Vec<f64>,
    pub ssp: Estimate,
    pub esp: Estimate,
    /// `(Rev(SSP(r*)) + Rev(ESP(e*))) / 2`.
    pub f_star: Estimate,
}

const MAX_SWEEPS: usize = 4;

/// Best reserve and fee arms. Reserves are chosen item by item from common
/// random samples; ESP revenue couples the fees through entry, so fees are
/// chosen by coordinate ascent on total ESP revenue. Revenues at the chosen
/// arms are re-estimated on fresh samples.
pub fn best_in_grid_offline(env: &OnlineEnv, n_samples: usize, stream: &RngStream) -> Result<GridOptimum> {
    let inst = &env.inst;
    let (n, m) = (inst.n, inst.m);
    let mut rng = stream.child("select").rng();
    let mut profiles = vec![0.0; n_samples * n * m];
    for s in 0..n_samples {
        inst.sample_profile(&mut rng, &mut profiles[s * n * m..(s + 1) * n * m]);
    }
    let mut reserve_arms = vec![0usize; n * m];
    let mut col = vec![0.0; n];
    for i in 0..n {
        for j in 0..m {
            let mut g = vec![0.0; env.reserve_grid.len()];
            for s in 0..n_samples {
                let t = &profiles[s * n * m..(s + 1) * n * m];
                for (k, c) in col.iter_mut().enumerate() {
                    *c = t[k * m + j];
                }
                for (a, gv) in g.iter_mut().enumerate() {
                    *gv += sp_payment(&col, i, env.reserve_grid.value(a));
                }
            }
            reserve_arms[i * m + j] = argmax(&g);
        }
    }
    let mut fee_arms = vec![0usize; n];
    let mut select_rng = stream.child("select-ties").rng();
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for i in 0..n {
            let mut vals = vec![0.0; env.fee_grid.len()];
            for (a, v) in vals.iter_mut().enumerate() {
                let mut arms = fee_arms.clone();
                arms[i] = a;
                *v = esp_sample_mean(env, &arms, &profiles, &mut select_rng);
            }
            let best = argmax(&vals);
            if best != fee_arms[i] && vals[best] > vals[fee_arms[i]] {
                fee_arms[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let reserves: Vec<f64> = reserve_arms.iter().map(|&a| env.reserve_grid.value(a)).collect();
    let fees: Vec<f64> = fee_arms.iter().map(|&a| env.fee_grid.value(a)).collect();
    let ssp = ssp_revenue(inst, &reserves, n_samples, &stream.child("eval-ssp"));
    let esp = esp_revenue(env, &fee_arms, n_samples, &stream.child("eval-esp"));
    let f_star = Estimate {
        mean: 0.5 * (ssp.mean + esp.mean),
        stderr: 0.5 * ssp.stderr.hypot(esp.stderr),
        n: n_samples as u64,
    };
    Ok(GridOptimum {
        reserve_arms,
        fee_arms,
        reserves,
        fees,
        ssp,
        esp,
        f_star,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..v.len() {
        if v[k] > v[best] {
            best = k;
        }
    }
    best
}

fn esp_sample_mean(env: &OnlineEnv, arms: &[usize], profiles: &[f64], rng: &mut Rng) -> f64 {
    let inst = &env.inst;
    let (n, m) = (inst.n, inst.m);
    let tabs: Vec<UtilityTable> = (0..n).map(|i| env.oracle.utilities(i, arms)).collect();
    let fees: Vec<f64> = arms.iter().map(|&a| env.fee_grid.value(a)).collect();
    let mut entered = vec![false; n];
    let mut comp = vec![0.0; n];
    let count = profiles.len() / (n * m);
    let mut total = 0.0;
    for s in 0..count {
        let t = &profiles[s * n * m..(s + 1) * n * m];
        esp_round(inst, &tabs, &fees, t, &mut entered, &mut comp, rng);
        total += comp.iter().sum::<f64>();
    }
    total / count as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub avg_revenue: f64,
    /// Average revenue over the final tenth of the rounds.
    pub last_decile: Estimate,
    pub final_regret: f64,
    /// `(round, cumulative regret)` at up to 200 evenly spaced rounds.
    pub curve: Vec<(f64, f64)>,
    /// Log-log slope over the second half; `None` when regret stays non-positive.
    pub slope: Option<f64>,
}

/// Cumulative regret `tau f* - sum_{s <= tau} R^s` and its growth rate.
pub fn regret_report(logs: &[RoundLog], f_star: f64) -> RegretReport {
    let total = logs.len();
    let mut cum = 0.0;
    let mut curve = Vec::new();
    let stride = total.div_ceil(200).max(1);
    for (k, l) in logs.iter().enumerate() {
        cum += l.revenue;
        let tau = (k + 1) as f64;
        if (k + 1) % stride == 0 || k + 1 == total {
            curve.push((tau, tau * f_star - cum));
        }
    }
    let tail = &logs[total - total.div_ceil(10)..];
    let vals: Vec<f64> = tail.iter().map(|l| l.revenue).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
    } else {
        0.0
    };
    RegretReport {
        avg_revenue: cum / total as f64,
        last_decile: Estimate {
            mean,
            stderr: (var / vals.len() as f64).sqrt(),
            n: vals.len() as u64,
        },
        final_regret: total as f64 * f_star - cum,
        slope: regret_slope(&curve),
        curve,
    }
}

/// Least-squares slope of `ln C` against `ln tau` over the second half of the
/// curve, using points with positive regret.
pub fn regret_slope(curve: &[(f64, f64)]) -> Option<f64> {
    let last = curve.last()?.0;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(tau, c)| *tau >= last / 2.0 && *c > 0.0)
        .map(|(tau, c)| (tau.ln(), c.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `sqrt(K T ln K)` scaled to the reward range: a ceiling for adversarial
/// learners' regret on one parameter.
pub fn exp3_regret_ceiling(arms: usize, feedback: usize, range: f64) -> f64 {
    let k = arms.max(2) as f64;
    range * (k * feedback as f64 * k.ln()).sqrt()
}
