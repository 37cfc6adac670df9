use super::ArmGrid;
use crate::error::Result;
use crate::instance::Instance;
use crate::market::Market;
use crate::rng::RngStream;
use crate::single_item::{AuctionFormat, InterimOptions};
use rayon::prelude::*;

/// Cells of the bid grid behind entrant-adjusted utilities.
pub const ORACLE_CELLS: usize = 512;

/// Entrant-adjusted second-price utilities `u^{D+}`: opponents who decline
/// their fee (judged by the plain second-price interim utilities) bid 0.
///
/// For every opponent `k`, fee arm `a` and item `j` the oracle tabulates
/// `P_kj(y; a) = Pr[k declines, or enters with t_kj < y]` at cell midpoints,
/// so `u^{D+}_ij(t) = ∫_0^t prod_{k != i} P_kj(y; a_k) dy`.
#[derive(Clone, Debug)]
pub struct EntryOracle {
    n: usize,
    m: usize,
    hi: f64,
    /// `p[(k * arms + a) * m + j][c]`.
    p: Vec<Vec<f64>>,
    arms: usize,
}

/// `u^{D+}_ij` tabulated at the cell edges of `[0, H]` for each item.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityTable {
    hi: f64,
    u: Vec<Vec<f64>>,
}

impl UtilityTable {
    pub fn at(&self, j: usize, t: f64) -> f64 {
        let u = &self.u[j];
        let cells = u.len() - 1;
        let x = (t / self.hi * cells as f64).clamp(0.0, cells as f64);
        let k = (x.floor() as usize).min(cells - 1);
        let w = x - k as f64;
        u[k] + w * (u[k + 1] - u[k])
    }

    pub fn total(&self, row: &[f64]) -> f64 {
        row.iter().enumerate().map(|(j, &t)| self.at(j, t)).sum()
    }
}

impl EntryOracle {
    pub fn new(inst: &Instance, fee_grid: &ArmGrid, n_samples: usize, stream: &RngStream) -> Result<Self> {
        let (n, m, hi) = (inst.n, inst.m, inst.cap());
        let base = Market::build(
            inst,
            AuctionFormat::SecondPrice,
            &[],
            &InterimOptions::default(),
            &stream.child("base"),
        )?;
        let arms = fee_grid.len();
        let h = hi / ORACLE_CELLS as f64;
        let mids: Vec<f64> = (0..ORACLE_CELLS).map(|c| (c as f64 + 0.5) * h).collect();
        let mut p = vec![Vec::new(); n * arms * m];
        for k in 0..n {
            let mut rng = stream.child("bidder").index(k as u64).rng();
            let mut row = vec![0.0; m];
            let mut types = Vec::with_capacity(n_samples * m);
            let mut total = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                for (x, d) in row.iter_mut().zip(inst.bidder(k)) {
                    *x = d.sample(&mut rng);
                }
                types.extend_from_slice(&row);
                total.push(base.curves.total_utility(k, &row));
            }
            let order: Vec<Vec<usize>> = (0..m)
                .map(|j| {
                    let mut o: Vec<usize> = (0..n_samples).collect();
                    o.sort_by(|&a, &b| types[a * m + j].total_cmp(&types[b * m + j]));
                    o
                })
                .collect();
            let tables: Vec<Vec<Vec<f64>>> = (0..arms)
                .into_par_iter()
                .map(|a| {
                    let fee = fee_grid.value(a);
                    let enters = |s: usize| fee <= 0.0 || total[s] >= fee;
                    let declined = (0..n_samples).filter(|&s| !enters(s)).count();
                    (0..m)
                        .map(|j| {
                            let mut below = 0usize;
                            let mut ptr = 0usize;
                            mids.iter()
                                .map(|&y| {
                                    while ptr < n_samples && types[order[j][ptr] * m + j] < y {
                                        if enters(order[j][ptr]) {
                                            below += 1;
                                        }
                                        ptr += 1;
                                    }
                                    (declined + below) as f64 / n_samples as f64
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            for (a, per_item) in tables.into_iter().enumerate() {
                for (j, col) in per_item.into_iter().enumerate() {
                    p[(k * arms + a) * m + j] = col;
                }
            }
        }
        Ok(Self { n, m, hi, p, arms })
    }

    /// Bidder `i`'s utilities when every bidder `k` faces fee arm `arms[k]`
    /// (`arms[i]` is ignored).
    pub fn utilities(&self, i: usize, arms: &[usize]) -> UtilityTable {
        let h = self.hi / ORACLE_CELLS as f64;
        let u = (0..self.m)
            .map(|j| {
                let mut out = Vec::with_capacity(ORACLE_CELLS + 1);
                out.push(0.0);
                let mut acc = 0.0;
                for c in 0..ORACLE_CELLS {
                    let mut prod = 1.0;
                    for k in (0..self.n).filter(|&k| k != i) {
                        prod *= self.p[(k * self.arms + arms[k]) * self.m + j][c];
                    }
                    acc += h * prod;
                    out.push(acc);
                }
                out
            })
            .collect();
        UtilityTable { hi: self.hi, u }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ValueDistribution;

    #[test]
    fn zero_fees_reduce_to_plain_second_price() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let inst = Instance::iid(2, 1, &u).unwrap();
        let grid = ArmGrid::new(0.25, 1.0).unwrap();
        let o = EntryOracle::new(&inst, &grid, 50_000, &RngStream::new(1)).unwrap();
        let tab = o.utilities(0, &[0, 0]);
        for &t in &[0.2, 0.5, 1.0] {
            assert!((tab.at(0, t) - t * t / 2.0).abs() < 0.01, "t = {t}");
        }
    }

    #[test]
    fn prohibitive_opponent_fee_leaves_bidder_alone() {
        let u = ValueDistribution::uniform(0.0, 1.0).unwrap();
        let inst = Instance::iid(2, 1, &u).unwrap();
        let grid = ArmGrid::new(0.25, 1.0).unwrap();
        let o = EntryOracle::new(&inst, &grid, 20_000, &RngStream::new(2)).unwrap();
        // Fee 0.75 exceeds the largest plain utility 1/2, so bidder 1 never enters.
        let tab = o.utilities(0, &[0, 3]);
        assert!((tab.at(0, 0.6) - 0.6).abs() < 1e-9);
        let plain = o.utilities(0, &[0, 0]);
        assert!(tab.at(0, 0.6) >= plain.at(0, 0.6));
    }
}
