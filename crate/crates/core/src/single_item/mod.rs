//! Single-item sealed-bid auctions: second-price, first-price and all-pay,
//! with optional per-bidder reserves.

mod equilibrium;
mod interim;
mod optimal;

pub use equilibrium::{
    symmetric_equilibrium, symmetric_equilibrium_with_reserve, BidTable, StrategyProfile, EQUILIBRIUM_GRID,
};
pub use interim::{
    best_response_regret, certify, interim_curves, CertifiedProfile, InterimCurves, InterimMethod, InterimOptions,
    Regret, RegretOptions,
};
pub use optimal::myerson_optimal_revenue;

use crate::error::{Error, Result};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AuctionFormat {
    SecondPrice,
    FirstPrice,
    AllPay,
}

impl AuctionFormat {
    /// Type-loss constant `c`: 1 for second-price, 4 for pay-your-bid formats.
    pub fn type_loss_constant(self) -> f64 {
        match self {
            AuctionFormat::SecondPrice => 1.0,
            AuctionFormat::FirstPrice | AuctionFormat::AllPay => 4.0,
        }
    }
}

impl fmt::Display for AuctionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuctionFormat::SecondPrice => "second-price",
            AuctionFormat::FirstPrice => "first-price",
            AuctionFormat::AllPay => "all-pay",
        })
    }
}

impl FromStr for AuctionFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "second-price" | "sp" => Ok(AuctionFormat::SecondPrice),
            "first-price" | "fp" => Ok(AuctionFormat::FirstPrice),
            "all-pay" | "ap" => Ok(AuctionFormat::AllPay),
            other => Err(Error::InvalidArgument(format!(
                "unknown auction format `{other}` (expected second-price, first-price or all-pay)"
            ))),
        }
    }
}

/// Auction format plus per-bidder reserves.
///
/// Reserves are lazy: the highest bidder is allocated only if that bid clears
/// the bidder's own reserve. Under first-price the reserve acts as a minimum bid.
#[derive(Clone, Debug, PartialEq)]
pub struct AuctionRule {
    pub format: AuctionFormat,
    /// Empty means no reserves.
    pub reserves: Vec<f64>,
}

impl AuctionRule {
    pub fn new(format: AuctionFormat) -> Self {
        Self {
            format,
            reserves: Vec::new(),
        }
    }

    pub fn with_reserves(format: AuctionFormat, reserves: Vec<f64>) -> Self {
        Self { format, reserves }
    }

    pub fn reserve(&self, i: usize) -> f64 {
        self.reserves.get(i).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuctionOutcome {
    pub winner: Option<usize>,
    pub payments: Vec<f64>,
}

fn top_two(bids: &[f64]) -> (f64, Vec<usize>, f64) {
    let mut best = f64::NEG_INFINITY;
    let mut tied = Vec::new();
    for (i, &b) in bids.iter().enumerate() {
        if b > best {
            best = b;
            tied.clear();
            tied.push(i);
        } else if b == best {
            tied.push(i);
        }
    }
    let second = if tied.len() > 1 {
        best
    } else {
        bids.iter()
            .enumerate()
            .filter(|&(i, _)| i != tied[0])
            .map(|(_, &b)| b)
            .fold(0.0, f64::max)
    };
    (best, tied, second)
}

fn validate_bids(bids: &[f64]) -> Result<()> {
    if bids.is_empty() {
        return Err(Error::InvalidArgument("auction needs at least one bid".into()));
    }
    if let Some(b) = bids.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::InvalidArgument(format!("bids must be finite and >= 0, got {b}")));
    }
    Ok(())
}

/// Runs one auction. Ties among highest bids are broken uniformly at random.
pub fn run_auction<R: Rng + ?Sized>(rule: &AuctionRule, bids: &[f64], rng: &mut R) -> Result<AuctionOutcome> {
    validate_bids(bids)?;
    let (best, tied, second) = top_two(bids);
    let w = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    let r = rule.reserve(w);
    let sold = best >= r;
    let mut payments = vec![0.0; bids.len()];
    match rule.format {
        AuctionFormat::SecondPrice => {
            if sold {
                payments[w] = r.max(second);
            }
        }
        AuctionFormat::FirstPrice => {
            if sold {
                payments[w] = best;
            }
        }
        AuctionFormat::AllPay => payments.copy_from_slice(bids),
    }
    Ok(AuctionOutcome {
        winner: sold.then_some(w),
        payments,
    })
}

/// Allocation probabilities and expected payments, averaging over tie-breaks.
pub fn expected_outcome(rule: &AuctionRule, bids: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    validate_bids(bids)?;
    let (best, tied, second) = top_two(bids);
    let share = 1.0 / tied.len() as f64;
    let mut alloc = vec![0.0; bids.len()];
    let mut pay = vec![0.0; bids.len()];
    if rule.format == AuctionFormat::AllPay {
        pay.copy_from_slice(bids);
    }
    for &w in &tied {
        let r = rule.reserve(w);
        if best < r {
            continue;
        }
        alloc[w] = share;
        match rule.format {
            AuctionFormat::SecondPrice => pay[w] = share * r.max(second),
            AuctionFormat::FirstPrice => pay[w] = share * best,
            AuctionFormat::AllPay => {}
        }
    }
    Ok((alloc, pay))
}
