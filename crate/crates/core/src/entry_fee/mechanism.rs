use super::{enters, entry_probability, sample_ghost_type};
use crate::error::{Error, Result};
use crate::market::{Market, UtilityCurves};
use crate::mc::{estimate, Estimate};
use crate::rng::{Rng, RngStream};
use crate::single_item::{run_auction, AuctionFormat, AuctionRule};
use rand::Rng as _;
use std::fmt;
use std::str::FromStr;

/// Rejection budget for ghost-type sampling.
pub const GHOST_MAX_TRIES: usize = 100_000;

/// Mechanism family. Entry variants run the market's base format; `Simultaneous`
/// charges no fees and relies on the market's reserves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    /// Entrants only compete (ESP with a second-price base).
    Ea,
    /// With probability `delta` all fees are waived; otherwise everyone bids
    /// and items won by non-entrants are discarded.
    RandEa { delta: f64 },
    /// Non-entrants are replaced by ghost types drawn below their fee.
    GhostEa,
    /// Plain simultaneous auctions with (lazy) reserves.
    Simultaneous,
}

impl Variant {
    pub fn label(self, format: AuctionFormat) -> String {
        let base = match format {
            AuctionFormat::SecondPrice => "SP",
            AuctionFormat::FirstPrice => "FP",
            AuctionFormat::AllPay => "AP",
        };
        match self {
            Variant::Ea => format!("E{base}"),
            Variant::RandEa { .. } => format!("rand-E{base}"),
            Variant::GhostEa => format!("ghost-E{base}"),
            Variant::Simultaneous => format!("S{base}"),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Ea => f.write_str("EA"),
            Variant::RandEa { .. } => f.write_str("rand-EA"),
            Variant::GhostEa => f.write_str("ghost-EA"),
            Variant::Simultaneous => f.write_str("simultaneous"),
        }
    }
}

/// Parses a variant name; rand-EA gets `delta = 0.01`, override it with
/// [`MechanismConfig::with_delta`]. Reserve variants accept `SSP`, `SFP`, `SAP`.
impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ea" | "esp" | "efp" | "eap" => Variant::Ea,
            "rand-ea" | "rand-esp" | "rand-efp" | "rand-eap" => Variant::RandEa { delta: 0.01 },
            "ghost-ea" | "ghost-esp" | "ghost-efp" | "ghost-eap" => Variant::GhostEa,
            "simultaneous" | "ssp" | "sfp" | "sap" => Variant::Simultaneous,
            _ => return Err(Error::InvalidArgument(format!("unknown mechanism variant `{s}`"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct MechanismConfig {
    pub variant: Variant,
    pub market: Market,
    pub fees: Vec<f64>,
    /// Curves behind entry decisions; the market's own curves unless replaced.
    pub entry_curves: UtilityCurves,
    pub ghost_max_tries: usize,
}

impl MechanismConfig {
    pub fn new(variant: Variant, market: Market, fees: Vec<f64>) -> Result<Self> {
        if let Variant::RandEa { delta } = variant {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
            }
        }
        let fees = if variant == Variant::Simultaneous {
            vec![0.0; market.inst.n]
        } else {
            fees
        };
        if fees.len() != market.inst.n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entry fees, got {}",
                market.inst.n,
                fees.len()
            )));
        }
        if let Some(e) = fees.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::InvalidArgument(format!("entry fees must be >= 0, got {e}")));
        }
        Ok(Self {
            variant,
            entry_curves: market.curves.clone(),
            market,
            fees,
            ghost_max_tries: GHOST_MAX_TRIES,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
        }
        if let Variant::RandEa { .. } = self.variant {
            self.variant = Variant::RandEa { delta };
        }
        Ok(self)
    }

    pub fn with_entry_curves(mut self, curves: UtilityCurves) -> Self {
        self.entry_curves = curves;
        self
    }

    pub fn label(&self) -> String {
        self.variant.label(self.market.format)
    }

    /// Warns about ghost bidders whose rejection region looks empty.
    pub fn check_ghost_regions(&self, n_samples: usize, stream: &RngStream) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.fees.len());
        for (i, &e) in self.fees.iter().enumerate() {
            let p = entry_probability(
                i,
                e,
                &self.entry_curves,
                &self.market.inst,
                n_samples,
                &stream.index(i as u64),
            )?;
            let reject = 1.0 - p.mean;
            if e > 0.0 && reject <= 0.0 {
                log::warn!("bidder {i}: ghost region has no estimated mass at fee {e}");
            }
            out.push(reject);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    /// Types, indexed `i * m + j`.
    pub types: Vec<f64>,
    pub entered: Vec<bool>,
    /// Whether the rand-EA coin waived every fee this round.
    pub waived: bool,
    pub ghost_types: Vec<Option<Vec<f64>>>,
    /// Real winner per item (`None` when unsold or discarded).
    pub winners: Vec<Option<usize>>,
    pub discarded: Vec<bool>,
    pub fee_paid: Vec<f64>,
    /// Item payments per bidder, summed over items.
    pub item_paid: Vec<f64>,
}

impl RoundOutcome {
    pub fn fee_revenue(&self) -> f64 {
        self.fee_paid.iter().sum()
    }

    pub fn item_revenue(&self) -> f64 {
        self.item_paid.iter().sum()
    }

    pub fn revenue(&self) -> f64 {
        self.fee_revenue() + self.item_revenue()
    }
}

/// Winner and `(bidder, payment)` pairs, in global indices.
type SubsetOutcome = (Option<usize>, Vec<(usize, f64)>);

/// Auction among the bidders in `idx`, reporting the winner and payments in
/// global indices.
fn run_subset(rule: &AuctionRule, idx: &[usize], bids: &[f64], rng: &mut Rng) -> Result<SubsetOutcome> {
    if idx.is_empty() {
        return Ok((None, Vec::new()));
    }
    let sub_rule = AuctionRule::with_reserves(rule.format, idx.iter().map(|&i| rule.reserve(i)).collect());
    let sub_bids: Vec<f64> = idx.iter().map(|&i| bids[i]).collect();
    let out = run_auction(&sub_rule, &sub_bids, rng)?;
    let pays = idx.iter().copied().zip(out.payments).collect();
    Ok((out.winner.map(|w| idx[w]), pays))
}

/// One round under focal behavior: bidders play the per-item strategies and
/// enter iff their total interim utility reaches their fee.
pub fn simulate_round(cfg: &MechanismConfig, rng: &mut Rng) -> Result<RoundOutcome> {
    let mk = &cfg.market;
    let (n, m) = (mk.inst.n, mk.inst.m);
    let mut types = vec![0.0; n * m];
    mk.inst.sample_profile(rng, &mut types);
    let waived = match cfg.variant {
        Variant::RandEa { delta } => rng.random::<f64>() < delta,
        _ => false,
    };
    let fee = |i: usize| if waived { 0.0 } else { cfg.fees[i] };
    let entered: Vec<bool> = (0..n)
        .map(|i| enters(&cfg.entry_curves, i, &types[i * m..(i + 1) * m], fee(i)))
        .collect();
    let mut ghost_types = vec![None; n];
    if cfg.variant == Variant::GhostEa {
        for i in (0..n).filter(|&i| !entered[i]) {
            let t = match sample_ghost_type(i, fee(i), &cfg.entry_curves, &mk.inst, rng, cfg.ghost_max_tries) {
                Ok(t) => t,
                Err(Error::GhostRegionNegligible { .. }) => {
                    log::warn!("bidder {i}: ghost sampling exhausted, using the bidder's own type");
                    types[i * m..(i + 1) * m].to_vec()
                }
                Err(e) => return Err(e),
            };
            ghost_types[i] = Some(t);
        }
    }
    let fee_paid: Vec<f64> = (0..n).map(|i| if entered[i] { fee(i) } else { 0.0 }).collect();
    let mut item_paid = vec![0.0; n];
    let mut winners = vec![None; m];
    let mut discarded = vec![false; m];
    let entrants: Vec<usize> = (0..n).filter(|&i| entered[i]).collect();
    let everyone: Vec<usize> = (0..n).collect();
    let mut bids = vec![0.0; n];
    for j in 0..m {
        for (i, b) in bids.iter_mut().enumerate() {
            let t = match &ghost_types[i] {
                Some(g) => g[j],
                None => types[i * m + j],
            };
            *b = mk.bid(i, j, t);
        }
        let bidders = match cfg.variant {
            Variant::Ea => &entrants,
            _ => &everyone,
        };
        let (w, pays) = run_subset(&mk.rules[j], bidders, &bids, rng)?;
        match w {
            Some(w) if !entered[w] => discarded[j] = true,
            _ => winners[j] = w,
        }
        for (i, p) in pays {
            if !entered[i] {
                continue;
            }
            if mk.format == AuctionFormat::AllPay || winners[j] == Some(i) {
                item_paid[i] += p;
            }
        }
    }
    Ok(RoundOutcome {
        types,
        entered,
        waived,
        ghost_types,
        winners,
        discarded,
        fee_paid,
        item_paid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechanismRevenue {
    pub total: Estimate,
    pub ef: Estimate,
    pub item: Estimate,
}

/// Average revenue over `n_rounds` simulated rounds, split into fee and item
/// revenue.
pub fn mechanism_revenue(cfg: &MechanismConfig, n_rounds: usize, stream: &RngStream) -> Result<MechanismRevenue> {
    let failure = std::sync::Mutex::new(None);
    let est = estimate(stream, n_rounds, 3, |rng, out| match simulate_round(cfg, rng) {
        Ok(r) => {
            out[0] = r.revenue();
            out[1] = r.fee_revenue();
            out[2] = r.item_revenue();
        }
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
        }
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(MechanismRevenue {
        total: est[0],
        ef: est[1],
        item: est[2],
    })
}
