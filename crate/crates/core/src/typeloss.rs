//! Type-loss bounds.
//!
//! A bidder of type `t` facing highest-opposing-bid CDF `F` has
//! `u(t) = max_b (t - b) F(b)` and the auctioneer can post
//! `a(t) = max_{r <= t} r (1 - F(r))`. The box inequality
//! `sqrt(u) + sqrt(a) >= sqrt(t)` bounds type loss by posted-price revenue.

use crate::dist::{iron, posted_price_revenue, ValueDistribution, DEFAULT_IRON_GRID};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::mc::{expect_profiles, Estimate};
use crate::rng::RngStream;
use crate::single_item::{interim_curves, myerson_optimal_revenue, AuctionFormat, CertifiedProfile, InterimOptions};
use rand::Rng;

/// Grid cells scanned in addition to exact per-piece maximization.
pub const BOX_GRID: usize = 4096;

/// Knot of a piecewise-linear function with possible jumps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Knot {
    pub x: f64,
    /// Left limit `F(x-)`.
    pub left: f64,
    /// Value `F(x)`, equal to the right limit.
    pub right: f64,
}

/// Non-decreasing `F: [0, inf) -> [0, 1]`, linear between knots, constant
/// after the last knot and zero before the first.
#[derive(Clone, Debug, PartialEq)]
pub struct CdfTable {
    pub knots: Vec<Knot>,
}

impl CdfTable {
    pub fn new(knots: Vec<Knot>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("CDF table needs a knot".into()));
        }
        let mut prev = 0.0;
        for (k, kn) in knots.iter().enumerate() {
            if k > 0 && kn.x <= knots[k - 1].x {
                return Err(Error::InvalidArgument("CDF knots must increase".into()));
            }
            if !(kn.x >= 0.0 && prev <= kn.left && kn.left <= kn.right && kn.right <= 1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "CDF table not monotone in [0, 1] at x = {}",
                    kn.x
                )));
            }
            prev = kn.right;
        }
        Ok(Self { knots })
    }

    /// Continuous table from `f` sampled at `cells + 1` points on `[0, hi]`.
    pub fn from_fn(hi: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            (0..=cells)
                .map(|k| {
                    let x = hi * k as f64 / cells as f64;
                    let v = f(x);
                    Knot { x, left: v, right: v }
                })
                .collect(),
        )
    }

    /// `F(x) = x` on `[0, 1]`.
    pub fn identity() -> Self {
        Self::from_fn(1.0, 1, |x| x).expect("valid")
    }

    pub fn constant(c: f64) -> Self {
        Self {
            knots: vec![Knot {
                x: 0.0,
                left: c,
                right: c,
            }],
        }
    }

    /// Random mixture of `k <= 5` uniform pieces and up to 2 atoms on `[0, hi]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, hi: f64) -> Self {
        let pieces = rng.random_range(1..=5usize);
        let atoms = rng.random_range(0..=2usize);
        let mut comps: Vec<(f64, f64, f64)> = Vec::new();
        for c in 0..pieces + atoms {
            let w: f64 = rng.random_range(0.05..1.0);
            let a = rng.random_range(0.0..hi);
            if c < pieces {
                let b = rng.random_range(0.0..hi);
                let (lo, up) = if a < b { (a, b) } else { (b, a) };
                comps.push((w, lo, up.max(lo + 1e-6 * hi)));
            } else {
                comps.push((w, a, a));
            }
        }
        let total: f64 = comps.iter().map(|c| c.0).sum();
        let mass = |x: f64, inclusive: bool| -> f64 {
            comps
                .iter()
                .map(|&(w, lo, up)| {
                    let f = if lo == up {
                        if x > lo || (inclusive && x == lo) {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        ((x - lo) / (up - lo)).clamp(0.0, 1.0)
                    };
                    w * f
                })
                .sum::<f64>()
                / total
        };
        let mut xs: Vec<f64> = vec![0.0, hi];
        for &(_, lo, up) in &comps {
            xs.push(lo);
            xs.push(up);
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let knots = xs
            .into_iter()
            .map(|x| Knot {
                x,
                left: mass(x, false).min(1.0),
                right: mass(x, true).min(1.0),
            })
            .collect();
        Self { knots }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ks = &self.knots;
        if x < ks[0].x {
            return 0.0;
        }
        let k = ks.partition_point(|kn| kn.x <= x);
        let a = ks[k - 1];
        if k >= ks.len() || x == a.x {
            return a.right;
        }
        let b = ks[k];
        a.right + (b.left - a.right) * (x - a.x) / (b.x - a.x)
    }

    /// Linear pieces `(x0, x1, F(x0+), F(x1-))` covering `[0, t]`.
    fn pieces(&self, t: f64) -> Vec<(f64, f64, f64, f64)> {
        let ks = &self.knots;
        let mut out = Vec::new();
        if ks[0].x > 0.0 {
            out.push((0.0, ks[0].x.min(t), 0.0, 0.0));
        }
        for w in 0..ks.len() {
            let a = ks[w];
            if a.x > t {
                break;
            }
            let (x1, f1) = if w + 1 < ks.len() {
                (ks[w + 1].x, ks[w + 1].left)
            } else {
                (f64::INFINITY, a.right)
            };
            if x1 <= t {
                out.push((a.x, x1, a.right, f1));
            } else {
                let ft = if x1.is_finite() {
                    a.right + (f1 - a.right) * (t - a.x) / (x1 - a.x)
                } else {
                    a.right
                };
                out.push((a.x, t, a.right, ft));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxQuantities {
    pub t: f64,
    /// `sup_b (t - b) F(b)`.
    pub u: f64,
    /// `sup_{r <= t} r (1 - F(r))`.
    pub a: f64,
    pub b_star: f64,
    pub r_star: f64,
}

impl BoxQuantities {
    /// `sqrt(u) + sqrt(a) - sqrt(t)`; nonnegative when the box inequality holds.
    pub fn slack(&self) -> f64 {
        self.u.sqrt() + self.a.sqrt() - self.t.sqrt()
    }
}

/// Maximizes a quadratic `h` on `[x0, x1]` from its endpoints and optional
/// stationary point; returns `(value, argmax)`.
fn max_quadratic(x0: f64, x1: f64, h: impl Fn(f64) -> f64, stationary: Option<f64>) -> (f64, f64) {
    let mut best = (h(x0), x0);
    for x in [Some(x1), stationary.filter(|s| *s > x0 && *s < x1)]
        .into_iter()
        .flatten()
    {
        let v = h(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

/// Box quantities for `F` at `t`, maximizing exactly on every linear piece and
/// on a `BOX_GRID` scan.
pub fn box_quantities(f: &CdfTable, t: f64) -> BoxQuantities {
    let mut u = (0.0, t);
    let mut a = (0.0, 0.0);
    for (x0, x1, f0, f1) in f.pieces(t) {
        let slope = if x1 > x0 { (f1 - f0) / (x1 - x0) } else { 0.0 };
        let fl = |x: f64| f0 + slope * (x - x0);
        let su = (slope != 0.0).then(|| (slope * t - (f0 - slope * x0)) / (2.0 * slope));
        let cu = max_quadratic(x0, x1, |x| (t - x) * fl(x), su);
        if cu.0 > u.0 {
            u = cu;
        }
        let sa = (slope != 0.0).then(|| (1.0 - (f0 - slope * x0)) / (2.0 * slope));
        let ca = max_quadratic(x0, x1, |x| x * (1.0 - fl(x)), sa);
        if ca.0 > a.0 {
            a = ca;
        }
    }
    for k in 0..=BOX_GRID {
        let x = t * k as f64 / BOX_GRID as f64;
        let fx = f.eval(x);
        let vu = (t - x) * fx;
        if vu > u.0 {
            u = (vu, x);
        }
        let va = x * (1.0 - fx);
        if va > a.0 {
            a = (va, x);
        }
    }
    BoxQuantities {
        t,
        u: u.0,
        a: a.0,
        b_star: u.1,
        r_star: a.1,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootBound {
    /// `E[sqrt(max_i t_i)]`.
    pub lhs: Estimate,
    /// `2 sqrt(PP(D))`.
    pub rhs: f64,
    pub pp: f64,
    pub pass: bool,
}

/// Checks `E[sqrt(max_i t_i)] <= 2 sqrt(PP(D))` for one item.
pub fn root_bound_check(ds: &[&ValueDistribution], n_samples: usize, stream: &RngStream) -> Result<RootBound> {
    let inst = Instance::new(ds.iter().map(|d| vec![(*d).clone()]).collect())?;
    let lhs = expect_profiles(&inst, n_samples, stream, 1, |t, out| {
        out[0] = t.iter().copied().fold(0.0, f64::max).sqrt();
    })[0];
    let pp = posted_price_revenue(ds).1;
    let rhs = 2.0 * pp.sqrt();
    Ok(RootBound {
        lhs,
        rhs,
        pp,
        pass: lhs.mean <= rhs + 3.0 * lhs.stderr,
    })
}

/// Largest `t (1 - pi_i(t)) - PP(D)` over an evenly spaced type grid for
/// truthful second-price bidding with continuous values, where
/// `pi_i(t) = prod_{k != i} F_k(t)`.
pub fn second_price_pointwise_gap(ds: &[&ValueDistribution], grid: usize) -> f64 {
    let pp = posted_price_revenue(ds).1;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..ds.len() {
        let hi = ds[i].support_hi();
        for s in 0..=grid {
            let t = hi * s as f64 / grid as f64;
            let pi: f64 = (0..ds.len()).filter(|&k| k != i).map(|k| ds[k].cdf(t)).product();
            worst = worst.max(t * (1.0 - pi) - pp);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeLossOptions {
    pub n_samples: usize,
    pub interim: InterimOptions,
}

impl Default for TypeLossOptions {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            interim: InterimOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeLossReport {
    pub format: AuctionFormat,
    /// `E[max_i t_i (1 - pi_i(t_i))]`.
    pub estimate: Estimate,
    /// `E[max_i (t_i - u_i(t_i))]`, which dominates the estimate.
    pub bridge: Estimate,
    pub pp: f64,
    pub opt: Estimate,
    pub c: f64,
    pub pass: bool,
}

/// Type loss of a certified equilibrium, checked against `c * PP(D)`.
pub fn typeloss_estimate(
    cert: &CertifiedProfile,
    ds: &[&ValueDistribution],
    opts: &TypeLossOptions,
    stream: &RngStream,
) -> Result<TypeLossReport> {
    let format = cert.rule().format;
    if format != AuctionFormat::SecondPrice {
        cert.profile().check_no_overbidding(1e-9)?;
    }
    let curves = interim_curves(cert.rule(), cert.profile(), ds, &opts.interim, &stream.child("curves"))?;
    let inst = Instance::new(ds.iter().map(|d| vec![(*d).clone()]).collect())?;
    let est = expect_profiles(&inst, opts.n_samples, &stream.child("loss"), 2, |t, out| {
        let mut loss: f64 = 0.0;
        let mut bridge: f64 = 0.0;
        for (i, &v) in t.iter().enumerate() {
            loss = loss.max(v * (1.0 - curves[i].pi_at(v)));
            bridge = bridge.max(v - curves[i].u_at(v));
        }
        out[0] = loss;
        out[1] = bridge;
    });
    let pp = posted_price_revenue(ds).1;
    let tables = ds
        .iter()
        .map(|d| iron(d, DEFAULT_IRON_GRID))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = tables.iter().collect();
    let opt = myerson_optimal_revenue(ds, &refs, opts.n_samples, &stream.child("opt"))?;
    let c = format.type_loss_constant();
    Ok(TypeLossReport {
        format,
        estimate: est[0],
        bridge: est[1],
        pp,
        opt,
        c,
        pass: est[0].mean <= c * pp + 3.0 * est[0].stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single_item::{certify, symmetric_equilibrium, AuctionRule, RegretOptions, StrategyProfile};

    #[test]
    fn identity_is_tight() {
        let q = box_quantities(&CdfTable::identity(), 1.0);
        assert!((q.u - 0.25).abs() < 1e-12 && (q.a - 0.25).abs() < 1e-12);
        assert!(q.slack().abs() < 1e-12);
        assert!((q.b_star - 0.5).abs() < 1e-12 && (q.r_star - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_cdfs() {
        let one = box_quantities(&CdfTable::constant(1.0), 0.7);
        assert_eq!((one.u, one.a), (0.7, 0.0));
        let zero = box_quantities(&CdfTable::constant(0.0), 0.7);
        assert_eq!((zero.u, zero.a), (0.0, 0.7));
    }

    #[test]
    fn jump_uses_limits() {
        // F = 0 on [0, .5), 1 from .5 on: a approaches .5 from the left.
        let f = CdfTable::new(vec![
            Knot {
                x: 0.0,
                left: 0.0,
                right: 0.0,
            },
            Knot {
                x: 0.5,
                left: 0.0,
                right: 1.0,
            },
        ])
        .unwrap();
        let q = box_quantities(&f, 1.0);
        assert!((q.a - 0.5).abs() < 1e-12);
        assert!((q.u - 0.5).abs() < 1e-12);
        assert_eq!(f.eval(0.49), 0.0);
        assert_eq!(f.eval(0.5), 1.0);
    }

    #[test]
    fn random_tables_are_valid_cdfs() {
        let mut rng = RngStream::new(11).rng();
        for _ in 0..200 {
            let f = CdfTable::random(&mut rng, 1.0);
            assert!(CdfTable::new(f.knots.clone()).is_ok());
            assert!((f.eval(1.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn root_bound_examples() {
        let s = RngStream::new(2);
        let p = ValueDistribution::point(0.64).unwrap();
        let r = root_bound_check(&[&p], 10, &s).unwrap();
        assert!((r.lhs.mean - 0.8).abs() < 1e-12 && (r.rhs - 1.6).abs() < 1e-12);
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let r = root_bound_check(&[&u], 100_000, &s).unwrap();
        assert!((r.lhs.mean - 2.0 / 3.0).abs() < 3.0 * r.lhs.stderr + 1e-4);
        assert!((r.rhs - 1.0).abs() < 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn pointwise_gap_nonpositive() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let e = ValueDistribution::texp(3.0, 1.0).unwrap();
        assert!(second_price_pointwise_gap(&[&u, &e, &u], 200) <= 1e-9);
        assert!(second_price_pointwise_gap(&[&u], 200) <= -0.25 + 1e-12);
    }

    #[test]
    fn single_bidder_has_no_type_loss() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let rule = AuctionRule::new(AuctionFormat::SecondPrice);
        let cert = certify(
            &rule,
            &StrategyProfile::truthful(1, 1.0),
            &[&u],
            1e-6,
            &RegretOptions::default(),
            &RngStream::new(1),
        )
        .unwrap();
        let rep = typeloss_estimate(
            &cert,
            &[&u],
            &TypeLossOptions {
                n_samples: 10_000,
                ..Default::default()
            },
            &RngStream::new(1),
        )
        .unwrap();
        assert_eq!(rep.estimate.mean, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn first_price_type_loss_within_four_pp() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let rule = AuctionRule::new(AuctionFormat::FirstPrice);
        let eq = symmetric_equilibrium(AuctionFormat::FirstPrice, &u, 2).unwrap();
        let cert = certify(
            &rule,
            &eq,
            &[&u, &u],
            1e-3,
            &RegretOptions::default(),
            &RngStream::new(1),
        )
        .unwrap();
        let rep = typeloss_estimate(
            &cert,
            &[&u, &u],
            &TypeLossOptions {
                n_samples: 50_000,
                ..Default::default()
            },
            &RngStream::new(3),
        )
        .unwrap();
        assert!(rep.pass);
        assert!(rep.estimate.mean <= rep.bridge.mean + 1e-12);
        assert_eq!(rep.c, 4.0);
    }
}
