//! Interim allocation, utility and payment curves, and best-response regret.
//!
//! For each bidder the opponents are summarised by the distribution of the
//! highest opposing bid. That distribution is exact when opponents have
//! continuous values and strictly increasing strategies, enumerated when they
//! are small and discrete, and sampled otherwise.

use super::{AuctionFormat, AuctionRule, BidTable, StrategyProfile};
use crate::dist::ValueDistribution;
use crate::error::{Error, Result};
use crate::mc::ENUMERATION_LIMIT;
use crate::quad::CumulativeIntegral;
use crate::rng::RngStream;

const RESPONSE_CELLS: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterimMethod {
    /// Exact or enumerated where possible, Monte Carlo otherwise.
    Auto,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterimOptions {
    /// Type-grid cells for continuous bidders; discrete bidders use their atoms.
    pub grid_n: usize,
    pub n_samples: usize,
    pub method: InterimMethod,
}

impl Default for InterimOptions {
    fn default() -> Self {
        Self {
            grid_n: 512,
            n_samples: 100_000,
            method: InterimMethod::Auto,
        }
    }
}

/// Interim curves `pi(t)`, `u(t)`, `p(t)` of one bidder on a type grid.
#[derive(Clone, Debug, PartialEq)]
pub struct InterimCurves {
    pub t: Vec<f64>,
    pub pi: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub se_pi: Vec<f64>,
    pub se_u: Vec<f64>,
    pub se_p: Vec<f64>,
    /// Grid holds the atoms of a discrete type distribution.
    pub discrete: bool,
}

impl InterimCurves {
    fn lookup(&self, v: &[f64], t: f64) -> f64 {
        let g = &self.t;
        let n = g.len();
        if self.discrete {
            let k = g.partition_point(|&x| x < t - 1e-12);
            return v[k.min(n - 1)];
        }
        if n == 1 || t <= g[0] {
            return v[0];
        }
        if t >= g[n - 1] {
            return v[n - 1];
        }
        let k = g.partition_point(|&x| x <= t);
        let w = (t - g[k - 1]) / (g[k] - g[k - 1]);
        v[k - 1] + w * (v[k] - v[k - 1])
    }

    pub fn pi_at(&self, t: f64) -> f64 {
        self.lookup(&self.pi, t)
    }

    pub fn u_at(&self, t: f64) -> f64 {
        self.lookup(&self.u, t)
    }

    pub fn p_at(&self, t: f64) -> f64 {
        self.lookup(&self.p, t)
    }

    pub fn se_u_at(&self, t: f64) -> f64 {
        self.lookup(&self.se_u, t)
    }

    /// Largest standard error of `u` over the grid.
    pub fn max_se_u(&self) -> f64 {
        self.se_u.iter().copied().fold(0.0, f64::max)
    }

    /// Curves of a bidder facing no competition and no reserve: `u(t) = t`.
    pub fn uncontested(grid: Vec<f64>, discrete: bool) -> Self {
        let k = grid.len();
        Self {
            pi: vec![1.0; k],
            u: grid.clone(),
            p: vec![0.0; k],
            se_pi: vec![0.0; k],
            se_u: vec![0.0; k],
            se_p: vec![0.0; k],
            t: grid,
            discrete,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Point {
    pi: f64,
    p: f64,
    u: f64,
    se_pi: f64,
    se_p: f64,
    se_u: f64,
}

enum Kind<'a> {
    Exact {
        opp: Vec<(&'a BidTable, &'a ValueDistribution)>,
        integral: CumulativeIntegral,
    },
    Weighted {
        /// Highest opposing bid, ascending.
        y: Vec<f64>,
        /// Number of opponents tied at `y`.
        c: Vec<u32>,
        w: Vec<f64>,
        pw: Vec<f64>,
        pwa: Vec<f64>,
        pwa2: Vec<f64>,
        /// Sample count for Monte Carlo; `None` when enumerated.
        n: Option<f64>,
    },
}

/// Expected allocation and payment of one bidder as a function of its bid.
struct Response<'a> {
    format: AuctionFormat,
    reserve: f64,
    kind: Kind<'a>,
}

fn type_grid(d: &ValueDistribution, cells: usize) -> (Vec<f64>, bool) {
    match d.atoms() {
        Some(a) => (a.iter().map(|x| x.0).collect(), true),
        None => {
            let hi = d.support_hi();
            let cells = cells.max(1);
            ((0..=cells).map(|k| hi * k as f64 / cells as f64).collect(), false)
        }
    }
}

impl<'a> Response<'a> {
    fn build(
        rule: &AuctionRule,
        profile: &'a StrategyProfile,
        ds: &[&'a ValueDistribution],
        i: usize,
        opts: &InterimOptions,
        stream: &RngStream,
    ) -> Result<Self> {
        let n = ds.len();
        if profile.n() != n {
            return Err(Error::InvalidArgument(format!(
                "strategy profile has {} bidders, distributions {n}",
                profile.n()
            )));
        }
        let reserve = rule.reserve(i);
        let others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        let exact_ok = others.iter().all(|&k| {
            !ds[k].is_discrete() && profile.tables[k].strictly_increasing_on(ds[k].support_lo(), ds[k].support_hi())
        });
        let count: Option<u64> = others
            .iter()
            .try_fold(1u64, |acc, &k| acc.checked_mul(ds[k].atoms()?.len() as u64));
        let auto = opts.method == InterimMethod::Auto;
        if auto && exact_ok {
            let xmax = others
                .iter()
                .map(|&k| profile.tables[k].max_bid())
                .chain([ds[i].support_hi(), reserve, profile.tables[i].max_bid()])
                .fold(0.0, f64::max);
            let opp: Vec<_> = others.iter().map(|&k| (&profile.tables[k], ds[k])).collect();
            let g = |x: f64| opp.iter().map(|(tab, d)| d.cdf(tab.type_below(x))).product::<f64>();
            let integral = CumulativeIntegral::new(xmax, RESPONSE_CELLS, g);
            return Ok(Self {
                format: rule.format,
                reserve,
                kind: Kind::Exact { opp, integral },
            });
        }
        let mut pts: Vec<(f64, u32, f64)> = Vec::new();
        let mut n_eff = None;
        let push = |bids: &mut dyn Iterator<Item = f64>, w: f64, pts: &mut Vec<(f64, u32, f64)>| {
            let mut y = f64::NEG_INFINITY;
            let mut c = 0u32;
            for b in bids {
                if b > y {
                    y = b;
                    c = 1;
                } else if b == y {
                    c += 1;
                }
            }
            if c == 0 {
                y = 0.0;
            }
            pts.push((y, c, w));
        };
        match count {
            Some(c) if auto && c <= ENUMERATION_LIMIT => {
                let atoms: Vec<&[(f64, f64)]> = others.iter().map(|&k| ds[k].atoms().unwrap()).collect();
                let mut idx = vec![0usize; atoms.len()];
                loop {
                    let mut w = 1.0;
                    let mut bids = Vec::with_capacity(atoms.len());
                    for (slot, &k) in others.iter().enumerate() {
                        let (v, p) = atoms[slot][idx[slot]];
                        w *= p;
                        bids.push(profile.tables[k].bid_at(v));
                    }
                    push(&mut bids.into_iter(), w, &mut pts);
                    let mut s = atoms.len();
                    let done = loop {
                        if s == 0 {
                            break true;
                        }
                        s -= 1;
                        idx[s] += 1;
                        if idx[s] < atoms[s].len() {
                            break false;
                        }
                        idx[s] = 0;
                    };
                    if done {
                        break;
                    }
                }
            }
            _ => {
                let ns = opts.n_samples.max(2);
                let mut rng = stream.child("opponents").index(i as u64).rng();
                for _ in 0..ns {
                    let mut it = others.iter().map(|&k| profile.tables[k].bid_at(ds[k].sample(&mut rng)));
                    push(&mut it, 1.0 / ns as f64, &mut pts);
                }
                n_eff = Some(ns as f64);
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let len = pts.len();
        let mut pw = vec![0.0; len + 1];
        let mut pwa = vec![0.0; len + 1];
        let mut pwa2 = vec![0.0; len + 1];
        for (s, &(y, _, w)) in pts.iter().enumerate() {
            let a = reserve.max(y);
            pw[s + 1] = pw[s] + w;
            pwa[s + 1] = pwa[s] + w * a;
            pwa2[s + 1] = pwa2[s] + w * a * a;
        }
        let total = pw[len];
        for v in pw.iter_mut().chain(pwa.iter_mut()).chain(pwa2.iter_mut()) {
            *v /= total;
        }
        Ok(Self {
            format: rule.format,
            reserve,
            kind: Kind::Weighted {
                y: pts.iter().map(|p| p.0).collect(),
                c: pts.iter().map(|p| p.1).collect(),
                w: pts.iter().map(|p| p.2 / total).collect(),
                pw,
                pwa,
                pwa2,
                n: n_eff,
            },
        })
    }

    /// Interim quantities for a bidder of type `t` bidding `x`.
    fn at(&self, t: f64, x: f64) -> Point {
        let eligible = x >= self.reserve;
        match &self.kind {
            Kind::Exact { opp, integral } => {
                let g: f64 = opp.iter().map(|(tab, d)| d.cdf(tab.type_below(x))).product();
                let pi = if eligible { g } else { 0.0 };
                let p = match self.format {
                    AuctionFormat::AllPay => x,
                    _ if !eligible => 0.0,
                    AuctionFormat::FirstPrice => x * g,
                    AuctionFormat::SecondPrice => {
                        (x * g - (integral.integral(x) - integral.integral(self.reserve))).max(0.0)
                    }
                };
                Point {
                    pi,
                    p,
                    u: t * pi - p,
                    ..Point::default()
                }
            }
            Kind::Weighted {
                y,
                c,
                w,
                pw,
                pwa,
                pwa2,
                n,
            } => {
                if !eligible {
                    let p = if self.format == AuctionFormat::AllPay { x } else { 0.0 };
                    return Point {
                        p,
                        u: -p,
                        ..Point::default()
                    };
                }
                let lo = y.partition_point(|&v| v < x);
                let hi = y.partition_point(|&v| v <= x);
                let a_tie = self.reserve.max(x);
                let (mut s1, mut s2) = (pw[lo], pw[lo]);
                let (mut tie_a, mut tie_a_sq, mut tie_a2) = (0.0, 0.0, 0.0);
                for s in lo..hi {
                    let share = 1.0 / (c[s] as f64 + 1.0);
                    s1 += w[s] * share;
                    s2 += w[s] * share * share;
                    tie_a += w[s] * share * a_tie;
                    tie_a_sq += w[s] * share * share * a_tie;
                    tie_a2 += w[s] * share * share * a_tie * a_tie;
                }
                let (p, p2, u, u2) = match self.format {
                    AuctionFormat::SecondPrice => {
                        let p = pwa[lo] + tie_a;
                        let p2 = pwa2[lo] + tie_a2;
                        let u2 = t * t * s2 - 2.0 * t * (pwa[lo] + tie_a_sq) + p2;
                        (p, p2, t * s1 - p, u2)
                    }
                    AuctionFormat::FirstPrice => (x * s1, x * x * s2, (t - x) * s1, (t - x) * (t - x) * s2),
                    AuctionFormat::AllPay => (x, x * x, t * s1 - x, t * t * s2 - 2.0 * t * x * s1 + x * x),
                };
                let se = |m1: f64, m2: f64| match n {
                    Some(n) => ((m2 - m1 * m1).max(0.0) / (n - 1.0)).sqrt(),
                    None => 0.0,
                };
                Point {
                    pi: s1,
                    p,
                    u,
                    se_pi: se(s1, s2),
                    se_p: se(p, p2),
                    se_u: se(u, u2),
                }
            }
        }
    }

    /// Candidate deviation bids: a uniform grid plus points just above each
    /// distinct opposing bid level when those are few.
    fn deviations(&self, xmax: f64, grid: usize) -> Vec<f64> {
        let mut out: Vec<f64> = (0..=grid).map(|k| xmax * k as f64 / grid as f64).collect();
        if let Kind::Weighted { y, n: None, .. } = &self.kind {
            let mut levels = y.clone();
            levels.dedup();
            if levels.len() <= 1000 {
                for v in levels {
                    out.push(v);
                    out.push(v + 1e-9 * v.abs().max(1.0));
                }
            }
        }
        out.push(self.reserve);
        out
    }
}

/// Interim curves for every bidder under `rule` and `profile`.
pub fn interim_curves(
    rule: &AuctionRule,
    profile: &StrategyProfile,
    ds: &[&ValueDistribution],
    opts: &InterimOptions,
    stream: &RngStream,
) -> Result<Vec<InterimCurves>> {
    (0..ds.len())
        .map(|i| {
            let resp = Response::build(rule, profile, ds, i, opts, &stream.child("interim"))?;
            let (grid, discrete) = type_grid(ds[i], opts.grid_n);
            let pts: Vec<Point> = grid.iter().map(|&t| resp.at(t, profile.bid(i, t))).collect();
            Ok(InterimCurves {
                pi: pts.iter().map(|p| p.pi).collect(),
                u: pts.iter().map(|p| p.u).collect(),
                p: pts.iter().map(|p| p.p).collect(),
                se_pi: pts.iter().map(|p| p.se_pi).collect(),
                se_u: pts.iter().map(|p| p.se_u).collect(),
                se_p: pts.iter().map(|p| p.se_p).collect(),
                t: grid,
                discrete,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegretOptions {
    /// Types checked for continuous bidders; discrete bidders use their atoms.
    pub type_grid: usize,
    pub deviation_grid: usize,
    pub n_samples: usize,
    pub method: InterimMethod,
}

impl Default for RegretOptions {
    fn default() -> Self {
        Self {
            type_grid: 100,
            deviation_grid: 400,
            n_samples: 100_000,
            method: InterimMethod::Auto,
        }
    }
}

/// Largest interim gain from a unilateral bid deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regret {
    pub value: f64,
    pub stderr: f64,
    pub at_type: f64,
    pub deviation: f64,
}

/// Best-response regret of `bidder` against the rest of `profile`.
pub fn best_response_regret(
    rule: &AuctionRule,
    profile: &StrategyProfile,
    ds: &[&ValueDistribution],
    bidder: usize,
    opts: &RegretOptions,
    stream: &RngStream,
) -> Result<Regret> {
    let iopts = InterimOptions {
        grid_n: opts.type_grid,
        n_samples: opts.n_samples,
        method: opts.method,
    };
    let resp = Response::build(rule, profile, ds, bidder, &iopts, &stream.child("regret"))?;
    let d = ds[bidder];
    let types: Vec<f64> = match d.atoms() {
        Some(a) => a.iter().map(|x| x.0).collect(),
        None => {
            let (lo, hi) = (d.support_lo(), d.support_hi());
            let k = opts.type_grid.max(1);
            (0..=k).map(|s| lo + (hi - lo) * s as f64 / k as f64).collect()
        }
    };
    let xmax = profile
        .tables
        .iter()
        .map(BidTable::max_bid)
        .fold(d.support_hi(), f64::max);
    let devs = resp.deviations(xmax, opts.deviation_grid);
    let mut worst = Regret {
        value: 0.0,
        stderr: 0.0,
        at_type: types[0],
        deviation: profile.bid(bidder, types[0]),
    };
    for &t in &types {
        let b = profile.bid(bidder, t);
        let base = resp.at(t, b);
        for &x in &devs {
            let alt = resp.at(t, x);
            let gain = alt.u - base.u;
            if gain > worst.value {
                worst = Regret {
                    value: gain,
                    stderr: alt.se_u.hypot(base.se_u),
                    at_type: t,
                    deviation: x,
                };
            }
        }
    }
    Ok(worst)
}

/// A strategy profile whose best-response regret has been checked.
#[derive(Clone, Debug)]
pub struct CertifiedProfile {
    rule: AuctionRule,
    profile: StrategyProfile,
    regrets: Vec<Regret>,
}

impl CertifiedProfile {
    pub fn rule(&self) -> &AuctionRule {
        &self.rule
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    pub fn regrets(&self) -> &[Regret] {
        &self.regrets
    }
}

/// Certifies `profile` as an approximate equilibrium: every bidder's regret
/// must be at most `tolerance + 3 * stderr`.
pub fn certify(
    rule: &AuctionRule,
    profile: &StrategyProfile,
    ds: &[&ValueDistribution],
    tolerance: f64,
    opts: &RegretOptions,
    stream: &RngStream,
) -> Result<CertifiedProfile> {
    let mut regrets = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let r = best_response_regret(rule, profile, ds, i, opts, &stream.index(i as u64))?;
        if r.value > tolerance + 3.0 * r.stderr {
            return Err(Error::NotEquilibrium {
                bidder: i,
                regret: r.value,
                tolerance,
            });
        }
        regrets.push(r);
    }
    Ok(CertifiedProfile {
        rule: rule.clone(),
        profile: profile.clone(),
        regrets,
    })
}
