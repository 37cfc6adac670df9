use super::AuctionFormat;
use crate::dist::ValueDistribution;
use crate::error::{Error, Result};
use crate::quad::CumulativeIntegral;

/// Cells of the type grid used for equilibrium bid tables.
pub const EQUILIBRIUM_GRID: usize = 2048;
const SUBSTEPS: usize = 16;

/// Monotone bid function tabulated on an ascending type grid; linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct BidTable {
    pub t: Vec<f64>,
    pub bid: Vec<f64>,
}

impl BidTable {
    pub fn new(t: Vec<f64>, bid: Vec<f64>) -> Result<Self> {
        if t.len() != bid.len() || t.is_empty() {
            return Err(Error::InvalidArgument(
                "bid table needs matching, non-empty type and bid columns".into(),
            ));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("bid table types must increase".into()));
        }
        if bid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("bid table must be monotone".into()));
        }
        if bid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidArgument("bids must be finite and >= 0".into()));
        }
        Ok(Self { t, bid })
    }

    /// Tabulates `f` on `cells + 1` evenly spaced types over `[0, hi]`.
    pub fn from_fn(hi: f64, cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let t: Vec<f64> = (0..=cells).map(|k| hi * k as f64 / cells as f64).collect();
        let bid = t.iter().map(|&x| f(x)).collect();
        Self::new(t, bid)
    }

    pub fn truthful(hi: f64) -> Self {
        Self {
            t: vec![0.0, hi],
            bid: vec![0.0, hi],
        }
    }

    pub fn bid_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if n == 1 || t <= self.t[0] {
            return self.bid[0];
        }
        if t >= self.t[n - 1] {
            return self.bid[n - 1];
        }
        let k = self.t.partition_point(|&x| x <= t);
        let w = (t - self.t[k - 1]) / (self.t[k] - self.t[k - 1]);
        self.bid[k - 1] + w * (self.bid[k] - self.bid[k - 1])
    }

    /// `sup { t : b(t) < x }`, with `-inf` for the empty set and `+inf` when
    /// every tabulated type bids below `x`.
    pub fn type_below(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.bid[0] {
            return f64::NEG_INFINITY;
        }
        if x > self.bid[n - 1] {
            return f64::INFINITY;
        }
        let k = self.bid.partition_point(|&b| b < x);
        let (b0, b1) = (self.bid[k - 1], self.bid[k]);
        self.t[k - 1] + (x - b0) / (b1 - b0) * (self.t[k] - self.t[k - 1])
    }

    /// Whether bids strictly increase across every table cell meeting `(lo, hi]`.
    pub fn strictly_increasing_on(&self, lo: f64, hi: f64) -> bool {
        (1..self.t.len())
            .filter(|&k| self.t[k] > lo && self.t[k - 1] < hi)
            .all(|k| self.bid[k] > self.bid[k - 1])
    }

    /// Largest `b(t) - t` over the table nodes.
    pub fn max_overbid(&self) -> (f64, f64) {
        self.t
            .iter()
            .zip(&self.bid)
            .map(|(&t, &b)| (t, b - t))
            .fold((0.0, f64::NEG_INFINITY), |a, x| if x.1 > a.1 { x } else { a })
    }

    pub fn max_bid(&self) -> f64 {
        self.bid[self.bid.len() - 1]
    }
}

/// One bid table per bidder.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    pub tables: Vec<BidTable>,
}

impl StrategyProfile {
    pub fn symmetric(n: usize, table: BidTable) -> Self {
        Self { tables: vec![table; n] }
    }

    pub fn truthful(n: usize, hi: f64) -> Self {
        Self::symmetric(n, BidTable::truthful(hi))
    }

    pub fn n(&self) -> usize {
        self.tables.len()
    }

    pub fn bid(&self, i: usize, t: f64) -> f64 {
        self.tables[i].bid_at(t)
    }

    /// Errors on the first tabulated type with `b(t) > t`.
    pub fn check_no_overbidding(&self, tol: f64) -> Result<()> {
        for tab in &self.tables {
            let (t, over) = tab.max_overbid();
            if over > tol {
                return Err(Error::Overbidding { t, bid: t + over });
            }
        }
        Ok(())
    }
}

/// Symmetric Bayes-Nash equilibrium for `n` i.i.d. bidders with values from `d`.
///
/// With `G = F^{n-1}` and `I(t) = ∫_0^t G`:
/// second-price bids `t`, first-price bids `t - I(t)/G(t)`, all-pay bids
/// `t G(t) - I(t)`.
pub fn symmetric_equilibrium(format: AuctionFormat, d: &ValueDistribution, n: usize) -> Result<StrategyProfile> {
    symmetric_equilibrium_with_reserve(format, d, n, 0.0)
}

/// As [`symmetric_equilibrium`], with a common reserve `r`: types below `r`
/// bid 0 and integrals start at `r`.
pub fn symmetric_equilibrium_with_reserve(
    format: AuctionFormat,
    d: &ValueDistribution,
    n: usize,
    reserve: f64,
) -> Result<StrategyProfile> {
    if d.is_discrete() {
        return Err(Error::NeedsContinuous("symmetric_equilibrium"));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one bidder".into()));
    }
    let hi = d.support_hi();
    if format == AuctionFormat::SecondPrice {
        return Ok(StrategyProfile::truthful(n, hi));
    }
    let pow = (n - 1) as i32;
    let g = |x: f64| d.cdf(x).powi(pow);
    let integral = CumulativeIntegral::new(hi, EQUILIBRIUM_GRID * SUBSTEPS, g);
    let r = reserve.max(0.0);
    let i_r = integral.integral(r);
    let table = BidTable::from_fn(hi, EQUILIBRIUM_GRID, |t| {
        if t < r {
            return 0.0;
        }
        let gt = g(t);
        let above = integral.integral(t) - i_r;
        let b = match format {
            AuctionFormat::FirstPrice if gt > 0.0 => t - above / gt,
            AuctionFormat::FirstPrice => 0.0,
            _ => t * gt - above,
        };
        b.clamp(0.0, t)
    })?;
    Ok(StrategyProfile::symmetric(n, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn first_price_uniform_two_bidders() {
        let s = symmetric_equilibrium(AuctionFormat::FirstPrice, &uniform(), 2).unwrap();
        for &t in &[0.0, 0.1, 0.33, 0.8, 1.0] {
            assert!((s.bid(0, t) - t / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn first_price_uniform_three_bidders() {
        let s = symmetric_equilibrium(AuctionFormat::FirstPrice, &uniform(), 3).unwrap();
        for &t in &[0.05, 0.33, 0.8, 1.0] {
            assert!((s.bid(0, t) - 2.0 * t / 3.0).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn all_pay_uniform_two_bidders() {
        let s = symmetric_equilibrium(AuctionFormat::AllPay, &uniform(), 2).unwrap();
        for &t in &[0.0, 0.1, 0.33, 0.8, 1.0] {
            assert!((s.bid(0, t) - t * t / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn second_price_truthful_and_discrete_rejected() {
        let s = symmetric_equilibrium(AuctionFormat::SecondPrice, &uniform(), 4).unwrap();
        assert_eq!(s.bid(2, 0.37), 0.37);
        let g = ValueDistribution::point(1.0).unwrap();
        assert!(matches!(
            symmetric_equilibrium(AuctionFormat::FirstPrice, &g, 2),
            Err(Error::NeedsContinuous(_))
        ));
    }

    #[test]
    fn first_price_with_reserve() {
        // b(t) = t - (t^2 - r^2) / (2t) = (t^2 + r^2) / (2t) for t >= r.
        let s = symmetric_equilibrium_with_reserve(AuctionFormat::FirstPrice, &uniform(), 2, 0.5).unwrap();
        assert_eq!(s.bid(0, 0.4), 0.0);
        for &t in &[0.5, 0.7, 1.0] {
            assert!((s.bid(0, t) - (t * t + 0.25) / (2.0 * t)).abs() < 1e-6);
        }
    }

    #[test]
    fn single_bidder_bids_reserve() {
        let s = symmetric_equilibrium_with_reserve(AuctionFormat::FirstPrice, &uniform(), 1, 0.3).unwrap();
        assert!((s.bid(0, 0.9) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn type_below_inverts() {
        let tab = BidTable::from_fn(1.0, 100, |t| t / 2.0).unwrap();
        assert!((tab.type_below(0.2) - 0.4).abs() < 1e-12);
        assert_eq!(tab.type_below(0.0), f64::NEG_INFINITY);
        assert_eq!(tab.type_below(0.6), f64::INFINITY);
        let flat = BidTable::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.5]).unwrap();
        assert!((flat.type_below(0.25) - 0.75).abs() < 1e-12);
        assert!(!flat.strictly_increasing_on(0.0, 1.0));
        assert!(flat.strictly_increasing_on(0.5, 1.0));
    }

    #[test]
    fn overbidding_detected() {
        let tab = BidTable::from_fn(1.0, 10, |t| (t + 0.1).min(1.0)).unwrap();
        let s = StrategyProfile::symmetric(2, tab);
        assert!(matches!(s.check_no_overbidding(1e-12), Err(Error::Overbidding { .. })));
        assert!(StrategyProfile::truthful(2, 1.0).check_no_overbidding(0.0).is_ok());
    }
}
