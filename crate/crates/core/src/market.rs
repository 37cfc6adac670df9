use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rng::RngStream;
use crate::single_item::{
    interim_curves, symmetric_equilibrium_with_reserve, AuctionFormat, AuctionRule, BidTable, InterimCurves,
    InterimOptions, StrategyProfile,
};

/// Interim curves for every (bidder, item) pair, indexed `i * m + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityCurves {
    pub n: usize,
    pub m: usize,
    pub curves: Vec<InterimCurves>,
}

impl UtilityCurves {
    pub fn get(&self, i: usize, j: usize) -> &InterimCurves {
        &self.curves[i * self.m + j]
    }

    /// `sum_j u_ij(t_ij)` for bidder `i` with item values `row`.
    pub fn total_utility(&self, i: usize, row: &[f64]) -> f64 {
        row.iter().enumerate().map(|(j, &t)| self.get(i, j).u_at(t)).sum()
    }
}

/// Simultaneous single-item auctions, one per item, with their focal strategies
/// and interim curves.
#[derive(Clone, Debug)]
pub struct Market {
    pub inst: Instance,
    pub format: AuctionFormat,
    pub rules: Vec<AuctionRule>,
    pub profiles: Vec<StrategyProfile>,
    pub curves: UtilityCurves,
}

impl Market {
    /// Builds per-item auctions. `reserves[j]` holds per-bidder reserves for
    /// item `j` (empty for none). Second-price bidders are truthful;
    /// pay-your-bid formats use the symmetric equilibrium and therefore need
    /// i.i.d. continuous bidders and a common reserve per item.
    pub fn build(
        inst: &Instance,
        format: AuctionFormat,
        reserves: &[Vec<f64>],
        opts: &InterimOptions,
        stream: &RngStream,
    ) -> Result<Self> {
        let (n, m) = (inst.n, inst.m);
        let mut rules = Vec::with_capacity(m);
        let mut profiles = Vec::with_capacity(m);
        for j in 0..m {
            let res = reserves.get(j).cloned().unwrap_or_default();
            let rule = AuctionRule::with_reserves(format, res.clone());
            let profile = match format {
                AuctionFormat::SecondPrice => StrategyProfile::truthful(n, inst.cap()),
                _ => {
                    let d = inst.dist(0, j);
                    let common = res.first().copied().unwrap_or(0.0);
                    if res.iter().any(|&r| r != common) {
                        return Err(Error::InvalidArgument(
                            "pay-your-bid equilibria need a common reserve per item".into(),
                        ));
                    }
                    if n == 1 && d.is_discrete() {
                        let hi = d.support_hi().max(1e-12);
                        StrategyProfile::symmetric(1, BidTable::new(vec![0.0, hi], vec![common; 2])?)
                    } else {
                        if (1..n).any(|i| inst.dist(i, j) != d) {
                            return Err(Error::InvalidArgument(format!(
                                "{format} equilibrium needs i.i.d. bidders on item {j}"
                            )));
                        }
                        symmetric_equilibrium_with_reserve(format, d, n, common)?
                    }
                }
            };
            rules.push(rule);
            profiles.push(profile);
        }
        let mut per_item = Vec::with_capacity(m);
        for j in 0..m {
            let ds = inst.item(j);
            per_item.push(interim_curves(
                &rules[j],
                &profiles[j],
                &ds,
                opts,
                &stream.child("market").index(j as u64),
            )?);
        }
        let mut curves = Vec::with_capacity(n * m);
        for i in 0..n {
            for item in per_item.iter() {
                curves.push(item[i].clone());
            }
        }
        Ok(Self {
            inst: inst.clone(),
            format,
            rules,
            profiles,
            curves: UtilityCurves { n, m, curves },
        })
    }

    pub fn bid(&self, i: usize, j: usize, t: f64) -> f64 {
        self.profiles[j].bid(i, t)
    }
}
