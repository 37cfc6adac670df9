//! Ghost entry-fee auctions as auctioneer-versus-bidders message games on
//! small discrete instances, and an exhaustive search for safe auctioneer
//! deviations.
//!
//! Each bidder announces entry and, on entering, its bids. The auctioneer
//! draws ghost types for non-entrants, runs the per-item auctions and
//! announces an outcome. Bidder `i` sees its own messages plus its own
//! allocation and payment. A deviation replaces the promised outcome on one
//! transcript; it is safe when every bidder's view of it also arises in some
//! honest run that shares its type.
//!
//! Deviations considered: per-item reassignment of the winner among entrants
//! (or withholding the item) with the format's payment rule applied to the new
//! allocation. Rigged ghost draws only change which promised outcome appears,
//! so they are covered by the same space.

use crate::entry_fee::Variant;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::single_item::AuctionFormat;
use rayon::prelude::*;
use std::collections::HashMap;
use std::fmt::Write as _;

pub const MAX_SUPPORT: usize = 4;
pub const MAX_PROFILES: u64 = 4096;
pub const MAX_TRANSCRIPTS: usize = 1 << 20;

/// Deviations must gain more than this to count.
const DELTA_TOL: f64 = 1e-12;

/// Ghost entry-fee auction over a discrete instance with fixed bid tables.
#[derive(Clone, Debug)]
pub struct MessageGameInstance {
    pub inst: Instance,
    pub format: AuctionFormat,
    pub fees: Vec<f64>,
    /// `bids[i][j][a]`: bid of bidder `i` on item `j` at atom `a` of `D_ij`.
    pub bids: Vec<Vec<Vec<f64>>>,
    atoms: Vec<Vec<Vec<(f64, f64)>>>,
    /// Interim utilities `u[i][j][a]` with every bidder (or its ghost) bidding.
    utility: Vec<Vec<Vec<f64>>>,
    /// Conditional ghost distribution per bidder: atom-index rows and weights.
    ghosts: Vec<Vec<(Vec<usize>, f64)>>,
}

/// Randomness resolved in one run: true types, ghost types of non-entrants
/// and the per-item winner among tied top bids (atom indices throughout).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Realization {
    pub types: Vec<Vec<usize>>,
    pub ghosts: Vec<Option<Vec<usize>>>,
    pub winners: Vec<usize>,
}

/// Real allocation and payments announced by the auctioneer.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    /// Receiving bidder per item; `None` when withheld or won by a ghost.
    pub alloc: Vec<Option<usize>>,
    pub payments: Vec<f64>,
}

impl Outcome {
    pub fn revenue(&self) -> f64 {
        self.payments.iter().sum()
    }
}

/// What a bidder sees. Floats are kept as bit patterns so equality is exact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    pub entered: bool,
    pub bids: Vec<u64>,
    pub won: Vec<bool>,
    pub payment: u64,
}

#[derive(Clone, Debug)]
pub struct Transcript {
    pub realization: Realization,
    pub entered: Vec<bool>,
    pub outcome: Outcome,
    pub prob: f64,
}

/// Honest run reproducing bidder `bidder`'s view of a deviation.
#[derive(Clone, Debug)]
pub struct Witness {
    pub bidder: usize,
    pub transcript: usize,
    pub realization: Realization,
    /// Opponent values `t̂_{-i}` (own row included as `t_i`), `[k][j]`.
    pub types: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SafeDeviation {
    pub transcript: usize,
    pub outcome: Outcome,
    pub delta: f64,
    pub description: String,
    pub witnesses: Vec<Witness>,
}

#[derive(Clone, Debug)]
pub struct SafeDeviationReport {
    pub label: String,
    pub transcripts: usize,
    /// Transcripts on which some safe deviation gains revenue.
    pub profitable_transcripts: usize,
    pub max_delta: f64,
    /// Gain of the auctioneer strategy deviating optimally on every transcript.
    pub expected_gain: f64,
    pub ghost_win_probability: f64,
    pub best: Option<SafeDeviation>,
    /// Witnesses replayed across all profitable transcripts.
    pub witnesses_checked: usize,
    pub witnesses_replay: bool,
}

impl SafeDeviationReport {
    pub fn deviation_found(&self) -> bool {
        self.best.is_some()
    }
}

impl MessageGameInstance {
    /// Ghost-EFP or ghost-EAP with the given bid tables, or the default
    /// shading `(n-1)/n * t` (first-price) and `(n-1)/n * t^n / H^(n-1)` (all-pay).
    pub fn new(
        inst: Instance,
        format: AuctionFormat,
        fees: Vec<f64>,
        bids: Option<Vec<Vec<Vec<f64>>>>,
    ) -> Result<Self> {
        if format == AuctionFormat::SecondPrice {
            return Err(Error::InvalidArgument(
                "message games cover first-price and all-pay only".into(),
            ));
        }
        let (n, m) = (inst.n, inst.m);
        if fees.len() != n || fees.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "need {n} finite non-negative fees, got {fees:?}"
            )));
        }
        let count = inst.profile_count().ok_or(Error::InvalidArgument(
            "message games need discrete distributions".into(),
        ))?;
        if count > MAX_PROFILES {
            return Err(Error::TooLarge(format!("{count} type profiles exceed {MAX_PROFILES}")));
        }
        let atoms: Vec<Vec<Vec<(f64, f64)>>> = (0..n)
            .map(|i| {
                (0..m)
                    .map(|j| inst.dist(i, j).atoms().map(<[_]>::to_vec).unwrap_or_default())
                    .collect()
            })
            .collect();
        if let Some((i, j)) = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .find(|&(i, j)| atoms[i][j].len() > MAX_SUPPORT)
        {
            return Err(Error::TooLarge(format!(
                "support of D_{i}{j} exceeds {MAX_SUPPORT} atoms"
            )));
        }
        let bids = match bids {
            Some(b) => {
                let shape_ok = b.len() == n
                    && b.iter()
                        .zip(&atoms)
                        .all(|(bi, ai)| bi.len() == m && bi.iter().zip(ai).all(|(bij, aij)| bij.len() == aij.len()));
                if !shape_ok {
                    return Err(Error::InvalidArgument(
                        "bid tables must give one bid per atom of every D_ij".into(),
                    ));
                }
                if b.iter().flatten().flatten().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::InvalidArgument("bids must be finite and non-negative".into()));
                }
                b
            }
            None => {
                let h = inst.cap();
                let shade = (n as f64 - 1.0) / n as f64;
                atoms
                    .iter()
                    .map(|ai| {
                        ai.iter()
                            .map(|aij| {
                                aij.iter()
                                    .map(|&(t, _)| match format {
                                        AuctionFormat::AllPay => shade * t * (t / h).powi(n as i32 - 1),
                                        _ => shade * t,
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        let mut game = Self {
            inst,
            format,
            fees,
            bids,
            atoms,
            utility: Vec::new(),
            ghosts: Vec::new(),
        };
        game.utility = game.interim_utilities();
        game.ghosts = (0..n).map(|i| game.ghost_distribution(i)).collect();
        Ok(game)
    }

    pub fn n(&self) -> usize {
        self.inst.n
    }

    pub fn m(&self) -> usize {
        self.inst.m
    }

    pub fn label(&self) -> String {
        Variant::GhostEa.label(self.format)
    }

    pub fn value(&self, i: usize, j: usize, a: usize) -> f64 {
        self.atoms[i][j][a].0
    }

    pub fn interim_utility(&self, i: usize, j: usize, a: usize) -> f64 {
        self.utility[i][j][a]
    }

    /// Summed interim utility of an atom-index row, in item order.
    pub fn total_utility(&self, i: usize, row: &[usize]) -> f64 {
        row.iter().enumerate().map(|(j, &a)| self.utility[i][j][a]).sum()
    }

    /// Focal entry: fee zero, or total utility at least the fee.
    pub fn enters(&self, i: usize, row: &[usize]) -> bool {
        self.fees[i] <= 0.0 || self.total_utility(i, row) >= self.fees[i]
    }

    /// Exact interim utilities when all `n` bidders bid, ties split evenly.
    fn interim_utilities(&self) -> Vec<Vec<Vec<f64>>> {
        let (n, m) = (self.n(), self.m());
        (0..n)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let opponents: Vec<usize> = (0..n).filter(|&k| k != i).collect();
                        (0..self.atoms[i][j].len())
                            .map(|a| {
                                let (t, b) = (self.atoms[i][j][a].0, self.bids[i][j][a]);
                                let mut u = 0.0;
                                for_each_index(
                                    &opponents.iter().map(|&k| self.atoms[k][j].len()).collect::<Vec<_>>(),
                                    |idx| {
                                        let mut p = 1.0;
                                        let mut top = f64::NEG_INFINITY;
                                        let mut ties = 0usize;
                                        for (c, &k) in opponents.iter().enumerate() {
                                            p *= self.atoms[k][j][idx[c]].1;
                                            let bk = self.bids[k][j][idx[c]];
                                            if bk > top {
                                                top = bk;
                                                ties = 1;
                                            } else if bk == top {
                                                ties += 1;
                                            }
                                        }
                                        let x = if b > top {
                                            1.0
                                        } else if b == top {
                                            1.0 / (ties + 1) as f64
                                        } else {
                                            0.0
                                        };
                                        u += p * match self.format {
                                            AuctionFormat::AllPay => t * x - b,
                                            _ => (t - b) * x,
                                        };
                                    },
                                );
                                u
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Types of bidder `i` below its fee, weighted by `D_i` given that event.
    fn ghost_distribution(&self, i: usize) -> Vec<(Vec<usize>, f64)> {
        let sizes: Vec<usize> = self.atoms[i].iter().map(Vec::len).collect();
        let mut region = Vec::new();
        let mut mass = 0.0;
        for_each_index(&sizes, |row| {
            if !self.enters(i, row) {
                let p: f64 = row.iter().enumerate().map(|(j, &a)| self.atoms[i][j][a].1).product();
                if p > 0.0 {
                    region.push((row.to_vec(), p));
                    mass += p;
                }
            }
        });
        for (_, p) in &mut region {
            *p /= mass;
        }
        region
    }

    /// Bids entering item `j`: own bids for entrants, ghost bids otherwise.
    fn effective_bids(&self, r: &Realization, entered: &[bool], j: usize) -> Vec<f64> {
        (0..self.n())
            .map(|k| {
                let a = if entered[k] {
                    r.types[k][j]
                } else {
                    r.ghosts[k].as_ref().expect("non-entrant without ghost")[j]
                };
                self.bids[k][j][a]
            })
            .collect()
    }

    /// Payment of bidder `i` under `alloc`: fee, then bids in item order.
    fn payment(&self, i: usize, row: &[usize], entered: bool, alloc: &[Option<usize>]) -> f64 {
        if !entered {
            return 0.0;
        }
        let mut pay = self.fees[i];
        for (j, &a) in row.iter().enumerate() {
            if self.format == AuctionFormat::AllPay || alloc[j] == Some(i) {
                pay += self.bids[i][j][a];
            }
        }
        pay
    }

    fn outcome_for(&self, r: &Realization, entered: &[bool], alloc: Vec<Option<usize>>) -> Outcome {
        let payments = (0..self.n())
            .map(|i| self.payment(i, &r.types[i], entered[i], &alloc))
            .collect();
        Outcome { alloc, payments }
    }

    fn observe(&self, i: usize, row: &[usize], entered: bool, outcome: &Outcome) -> Observation {
        Observation {
            entered,
            bids: if entered {
                row.iter()
                    .enumerate()
                    .map(|(j, &a)| self.bids[i][j][a].to_bits())
                    .collect()
            } else {
                Vec::new()
            },
            won: outcome.alloc.iter().map(|&w| w == Some(i)).collect(),
            payment: outcome.payments[i].to_bits(),
        }
    }

    /// Runs the promised mechanism on a realization and returns every
    /// bidder's observation. Rejects realizations the mechanism cannot
    /// produce (ghost inconsistent with entry, or a non-top winner).
    pub fn replay(&self, r: &Realization) -> Result<Vec<Observation>> {
        let (n, m) = (self.n(), self.m());
        let bad = |msg: String| Err(Error::InvalidArgument(format!("realization rejected: {msg}")));
        if r.types.len() != n || r.ghosts.len() != n || r.winners.len() != m {
            return bad("shape".into());
        }
        let entered: Vec<bool> = (0..n).map(|i| self.enters(i, &r.types[i])).collect();
        for (i, (ghost, &ent)) in r.ghosts.iter().zip(&entered).enumerate() {
            match (ghost, ent) {
                (None, true) => {}
                (Some(g), false) if self.ghosts[i].iter().any(|(row, _)| row == g) => {}
                _ => return bad(format!("ghost of bidder {i}")),
            }
        }
        let mut alloc = Vec::with_capacity(m);
        for j in 0..m {
            let bids = self.effective_bids(r, &entered, j);
            let top = bids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w = r.winners[j];
            if w >= n || bids[w] != top {
                return bad(format!("winner of item {j}"));
            }
            alloc.push(entered[w].then_some(w));
        }
        let outcome = self.outcome_for(r, &entered, alloc);
        Ok((0..n)
            .map(|i| self.observe(i, &r.types[i], entered[i], &outcome))
            .collect())
    }

    /// Every run under focal strategies: type profiles, ghost draws over the
    /// ghost regions and tie-breaks, with their probabilities.
    pub fn enumerate_transcripts(&self) -> Result<Vec<Transcript>> {
        let (n, m) = (self.n(), self.m());
        let sizes: Vec<usize> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| self.atoms[i][j].len())
            .collect();
        let mut out = Vec::new();
        let mut overflow = false;
        for_each_index(&sizes, |flat| {
            if overflow {
                return;
            }
            let types: Vec<Vec<usize>> = flat.chunks(m).map(<[_]>::to_vec).collect();
            let p_types: f64 = (0..n)
                .flat_map(|i| (0..m).map(move |j| (i, j)))
                .map(|(i, j)| self.atoms[i][j][types[i][j]].1)
                .product();
            if p_types <= 0.0 {
                return;
            }
            let entered: Vec<bool> = (0..n).map(|i| self.enters(i, &types[i])).collect();
            let outsiders: Vec<usize> = (0..n).filter(|&i| !entered[i]).collect();
            let ghost_sizes: Vec<usize> = outsiders.iter().map(|&i| self.ghosts[i].len()).collect();
            for_each_index(&ghost_sizes, |gidx| {
                if overflow {
                    return;
                }
                let mut ghosts = vec![None; n];
                let mut p_ghost = 1.0;
                for (c, &i) in outsiders.iter().enumerate() {
                    let (row, w) = &self.ghosts[i][gidx[c]];
                    ghosts[i] = Some(row.clone());
                    p_ghost *= w;
                }
                let mut r = Realization {
                    types: types.clone(),
                    ghosts,
                    winners: vec![0; m],
                };
                let tops: Vec<Vec<usize>> = (0..m)
                    .map(|j| {
                        let bids = self.effective_bids(&r, &entered, j);
                        let top = bids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (0..n).filter(|&k| bids[k] == top).collect()
                    })
                    .collect();
                let tie_sizes: Vec<usize> = tops.iter().map(Vec::len).collect();
                let p_ties: f64 = tie_sizes.iter().map(|&s| 1.0 / s as f64).product();
                for_each_index(&tie_sizes, |tidx| {
                    if out.len() >= MAX_TRANSCRIPTS {
                        overflow = true;
                        return;
                    }
                    for j in 0..m {
                        r.winners[j] = tops[j][tidx[j]];
                    }
                    let alloc = r.winners.iter().map(|&w| entered[w].then_some(w)).collect();
                    let outcome = self.outcome_for(&r, &entered, alloc);
                    out.push(Transcript {
                        realization: r.clone(),
                        entered: entered.clone(),
                        outcome,
                        prob: p_types * p_ghost * p_ties,
                    });
                });
            });
        });
        if overflow {
            return Err(Error::TooLarge(format!("more than {MAX_TRANSCRIPTS} transcripts")));
        }
        Ok(out)
    }

    /// Exhaustive search for safe, revenue-improving outcome substitutions.
    pub fn search_safe_deviations(&self) -> Result<SafeDeviationReport> {
        let (n, m) = (self.n(), self.m());
        let transcripts = self.enumerate_transcripts()?;
        // (bidder, own type row, observation) -> first honest transcript.
        let mut seen: HashMap<(usize, Vec<usize>, Observation), usize> = HashMap::new();
        for (idx, tr) in transcripts.iter().enumerate() {
            for i in 0..n {
                let row = &tr.realization.types[i];
                let obs = self.observe(i, row, tr.entered[i], &tr.outcome);
                seen.entry((i, row.clone(), obs)).or_insert(idx);
            }
        }
        let ghost_win_probability = transcripts
            .iter()
            .filter(|tr| tr.realization.winners.iter().any(|&w| !tr.entered[w]))
            .map(|tr| tr.prob)
            .sum();

        // Best safe substitution per transcript: (delta, outcome, witness transcripts).
        let best: Vec<Option<(f64, Outcome, Vec<usize>)>> = transcripts
            .par_iter()
            .map(|tr| {
                let entrants: Vec<usize> = (0..n).filter(|&i| tr.entered[i]).collect();
                if entrants.is_empty() {
                    return None;
                }
                let base = tr.outcome.revenue();
                let mut best: Option<(f64, Outcome, Vec<usize>)> = None;
                for_each_index(&vec![entrants.len() + 1; m], |choice| {
                    let alloc: Vec<Option<usize>> = choice.iter().map(|&c| entrants.get(c).copied()).collect();
                    if alloc == tr.outcome.alloc {
                        return;
                    }
                    let outcome = self.outcome_for(&tr.realization, &tr.entered, alloc);
                    let delta = outcome.revenue() - base;
                    if delta <= DELTA_TOL || best.as_ref().is_some_and(|b| delta <= b.0) {
                        return;
                    }
                    let mut witnesses = Vec::with_capacity(n);
                    for i in 0..n {
                        let row = &tr.realization.types[i];
                        let obs = self.observe(i, row, tr.entered[i], &outcome);
                        match seen.get(&(i, row.clone(), obs)) {
                            Some(&w) => witnesses.push(w),
                            None => return,
                        }
                    }
                    best = Some((delta, outcome, witnesses));
                });
                best
            })
            .collect();

        let mut report = SafeDeviationReport {
            label: self.label(),
            transcripts: transcripts.len(),
            profitable_transcripts: 0,
            max_delta: 0.0,
            expected_gain: 0.0,
            ghost_win_probability,
            best: None,
            witnesses_checked: 0,
            witnesses_replay: true,
        };
        for (idx, found) in best.into_iter().enumerate() {
            let Some((delta, outcome, wit)) = found else {
                continue;
            };
            let tr = &transcripts[idx];
            report.profitable_transcripts += 1;
            report.expected_gain += tr.prob * delta;
            let witnesses: Vec<Witness> = wit
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    let r = transcripts[w].realization.clone();
                    let types = (0..n)
                        .map(|k| (0..m).map(|j| self.value(k, j, r.types[k][j])).collect())
                        .collect();
                    Witness {
                        bidder: i,
                        transcript: w,
                        realization: r,
                        types,
                    }
                })
                .collect();
            for w in &witnesses {
                let i = w.bidder;
                let claimed = self.observe(i, &tr.realization.types[i], tr.entered[i], &outcome);
                let ok = w.realization.types[i] == tr.realization.types[i]
                    && self.replay(&w.realization).is_ok_and(|obs| obs[i] == claimed);
                report.witnesses_replay &= ok;
                report.witnesses_checked += 1;
            }
            if delta > report.max_delta {
                report.max_delta = delta;
                report.best = Some(SafeDeviation {
                    transcript: idx,
                    description: self.describe(tr, &outcome),
                    outcome,
                    delta,
                    witnesses,
                });
            }
        }
        Ok(report)
    }

    fn describe(&self, tr: &Transcript, outcome: &Outcome) -> String {
        let mut s = String::new();
        let types: Vec<Vec<f64>> = (0..self.n())
            .map(|k| {
                (0..self.m())
                    .map(|j| self.value(k, j, tr.realization.types[k][j]))
                    .collect()
            })
            .collect();
        let _ = write!(s, "types {types:?}:");
        for j in 0..self.m() {
            let from = tr.realization.winners[j];
            let promised = match tr.outcome.alloc[j] {
                Some(w) => format!("bidder {w}"),
                None if !tr.entered[from] => format!("ghost of bidder {from}"),
                None => "nobody".to_string(),
            };
            let now = outcome.alloc[j].map_or("nobody".to_string(), |w| format!("bidder {w}"));
            if tr.outcome.alloc[j] != outcome.alloc[j] {
                let _ = write!(s, " item {j} from {promised} to {now};");
            }
        }
        let _ = write!(s, " revenue {} -> {}", tr.outcome.revenue(), outcome.revenue());
        s
    }
}

/// Calls `f` on every index vector below `sizes` (odometer order, last
/// coordinate fastest). An empty `sizes` yields one empty vector; any zero
/// size yields nothing.
fn for_each_index(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; sizes.len()];
    loop {
        f(&idx);
        let mut c = sizes.len();
        loop {
            if c == 0 {
                return;
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < sizes[c] {
                break;
            }
            idx[c] = 0;
        }
    }
}
