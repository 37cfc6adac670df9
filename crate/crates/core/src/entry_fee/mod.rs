//! Entry fees computed from interim utilities.
//!
//! With `r_ij = max_x x Pr[u_ij(t_ij) >= x]`, `r_i = sum_j r_ij` and the core
//! `c_ij = u_ij 1[u_ij < r_i]`, bidder `i` is charged
//! `e_i = [sum_j E[c_ij] - 2 r_i]_+`. A bidder enters iff its total interim
//! utility is at least its fee.

mod mechanism;

pub use mechanism::{
    mechanism_revenue, simulate_round, MechanismConfig, MechanismRevenue, RoundOutcome, Variant, GHOST_MAX_TRIES,
};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::market::{Market, UtilityCurves};
use crate::mc::{expect_profiles, Estimate, BATCH};
use crate::rng::RngStream;
use crate::single_item::{AuctionFormat, InterimCurves};
use rand::Rng;
use rayon::prelude::*;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct SurplusThresholds {
    /// `r_ij`, indexed `[i][j]`.
    pub r: Vec<Vec<f64>>,
    pub r_i: Vec<f64>,
    /// `E[c_ij]`.
    pub core_mean: Vec<Vec<f64>>,
    pub r_stderr: Vec<Vec<f64>>,
    pub core_stderr: Vec<Vec<f64>>,
}

impl SurplusThresholds {
    pub fn r_total(&self) -> f64 {
        self.r_i.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeeProvenance {
    Formula,
    Manual,
    Learned,
}

impl fmt::Display for FeeProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeeProvenance::Formula => "formula",
            FeeProvenance::Manual => "manual",
            FeeProvenance::Learned => "learned",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntryFeeSchedule {
    pub fees: Vec<f64>,
    pub provenance: FeeProvenance,
}

impl EntryFeeSchedule {
    pub fn manual(fees: Vec<f64>) -> Result<Self> {
        if let Some(e) = fees.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::InvalidArgument(format!("entry fees must be >= 0, got {e}")));
        }
        Ok(Self {
            fees,
            provenance: FeeProvenance::Manual,
        })
    }
}

/// Running maximum, so thresholds see a non-decreasing utility curve.
fn monotone(u: &[f64]) -> Vec<f64> {
    let mut best = 0.0f64;
    u.iter()
        .map(|&v| {
            best = best.max(v);
            best
        })
        .collect()
}

/// Per-item thresholds `r_ij`, bidder totals `r_i` and core means `E[c_ij]`.
pub fn compute_r_thresholds(curves: &UtilityCurves, inst: &Instance) -> SurplusThresholds {
    let (n, m) = (inst.n, inst.m);
    let mut r = vec![vec![0.0; m]; n];
    let mut r_se = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let c = curves.get(i, j);
            let d = inst.dist(i, j);
            let u = monotone(&c.u);
            let mut best = (0.0, 0.0);
            for (k, &s) in c.t.iter().enumerate() {
                let v = u[k] * d.survival_ge(s);
                if v > best.0 {
                    best = (v, d.survival_ge(s) * c.se_u[k]);
                }
            }
            r[i][j] = best.0;
            r_se[i][j] = best.1;
        }
    }
    let r_i: Vec<f64> = r.iter().map(|row| row.iter().sum()).collect();
    let mut core = vec![vec![0.0; m]; n];
    let mut core_se = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let c = curves.get(i, j);
            let d = inst.dist(i, j);
            core[i][j] = d.expect(|t| {
                let v = c.u_at(t);
                if v < r_i[i] {
                    v
                } else {
                    0.0
                }
            });
            core_se[i][j] = d.expect(|t| c.se_u_at(t));
        }
    }
    SurplusThresholds {
        r,
        r_i,
        core_mean: core,
        r_stderr: r_se,
        core_stderr: core_se,
    }
}

/// `e_i = [sum_j E[c_ij] - 2 r_i]_+`.
pub fn compute_entry_fees(th: &SurplusThresholds) -> EntryFeeSchedule {
    let fees = th
        .core_mean
        .iter()
        .zip(&th.r_i)
        .map(|(row, &ri)| (row.iter().sum::<f64>() - 2.0 * ri).max(0.0))
        .collect();
    EntryFeeSchedule {
        fees,
        provenance: FeeProvenance::Formula,
    }
}

/// Entry decision: a zero fee always admits; otherwise enter iff
/// `sum_j u_ij(t_ij) >= e_i`.
pub fn enters(curves: &UtilityCurves, i: usize, row: &[f64], fee: f64) -> bool {
    fee <= 0.0 || curves.total_utility(i, row) >= fee
}

fn bidder_instance(inst: &Instance, i: usize) -> Result<Instance> {
    Instance::with_cap(vec![inst.bidder(i).to_vec()], inst.cap())
}

/// `Pr[sum_j u_ij(t_ij) >= e_i]`.
pub fn entry_probability(
    i: usize,
    fee: f64,
    curves: &UtilityCurves,
    inst: &Instance,
    n_samples: usize,
    stream: &RngStream,
) -> Result<Estimate> {
    if fee <= 0.0 {
        return Ok(Estimate::exact(1.0));
    }
    let row = bidder_instance(inst, i)?;
    Ok(expect_profiles(&row, n_samples, stream, 1, |t, out| {
        out[0] = if enters(curves, i, t, fee) { 1.0 } else { 0.0 };
    })[0])
}

/// `EF-Rev = sum_i e_i Pr[sum_j u_ij(t_ij) >= e_i]`.
pub fn ef_rev(
    fees: &[f64],
    curves: &UtilityCurves,
    inst: &Instance,
    n_samples: usize,
    stream: &RngStream,
) -> Result<Estimate> {
    let mut mean = 0.0;
    let mut var = 0.0;
    for (i, &e) in fees.iter().enumerate() {
        let p = entry_probability(i, e, curves, inst, n_samples, &stream.index(i as u64))?;
        mean += e * p.mean;
        var += (e * p.stderr).powi(2);
    }
    Ok(Estimate {
        mean,
        stderr: var.sqrt(),
        n: n_samples as u64,
    })
}

/// Draws `t_i ~ D_i` conditioned on `sum_j u_ij(t_ij) < e_i` by rejection.
pub fn sample_ghost_type<R: Rng + ?Sized>(
    i: usize,
    fee: f64,
    curves: &UtilityCurves,
    inst: &Instance,
    rng: &mut R,
    max_tries: usize,
) -> Result<Vec<f64>> {
    if fee <= 0.0 {
        return Err(Error::GhostRegionNegligible { bidder: i });
    }
    let ds = inst.bidder(i);
    let mut t = vec![0.0; ds.len()];
    for _ in 0..max_tries {
        for (x, d) in t.iter_mut().zip(ds) {
            *x = d.sample(rng);
        }
        if curves.total_utility(i, &t) < fee {
            return Ok(t);
        }
    }
    Err(Error::GhostRegionNegligible { bidder: i })
}

/// Second-price interim utilities against opponents whose bids are zeroed
/// when they decline their fee, entry being judged by the market's own curves.
/// Each opponent's item value is replaced by 0 on non-entry, so the result
/// dominates the market's curves pointwise.
pub fn entrant_curves(
    market: &Market,
    fees: &[f64],
    grid_n: usize,
    n_samples: usize,
    stream: &RngStream,
) -> Result<UtilityCurves> {
    if market.format != AuctionFormat::SecondPrice {
        return Err(Error::InvalidArgument(
            "entrant curves are defined for second-price markets".into(),
        ));
    }
    let inst = &market.inst;
    let (n, m) = (inst.n, inst.m);
    if fees.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} entry fees")));
    }
    // Per sample and (i, j): the price a = max(r_ij, max_{k != i} effective t_kj).
    let batches = n_samples.div_ceil(BATCH).max(1);
    let parts: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.batch(b as u64);
            let len = BATCH.min(n_samples.saturating_sub(b * BATCH));
            let mut t = vec![0.0; n * m];
            let mut out = Vec::with_capacity(len * n * m);
            for _ in 0..len {
                inst.sample_profile(&mut rng, &mut t);
                for k in 0..n {
                    if !enters(&market.curves, k, &t[k * m..(k + 1) * m], fees[k]) {
                        t[k * m..(k + 1) * m].iter_mut().for_each(|x| *x = 0.0);
                    }
                }
                for i in 0..n {
                    for j in 0..m {
                        let y = (0..n).filter(|&k| k != i).map(|k| t[k * m + j]).fold(0.0, f64::max);
                        out.push(market.rules[j].reserve(i).max(y));
                    }
                }
            }
            out
        })
        .collect();
    let total = n_samples as f64;
    let mut curves = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            let mut a: Vec<f64> = parts
                .iter()
                .flat_map(|p| p.iter().skip(i * m + j).step_by(n * m).copied())
                .collect();
            a.sort_by(f64::total_cmp);
            let mut s1 = Vec::with_capacity(a.len() + 1);
            let mut s2 = Vec::with_capacity(a.len() + 1);
            s1.push(0.0);
            s2.push(0.0);
            for &x in &a {
                s1.push(s1.last().unwrap() + x);
                s2.push(s2.last().unwrap() + x * x);
            }
            let d = inst.dist(i, j);
            let grid: Vec<f64> = match d.atoms() {
                Some(atoms) => atoms.iter().map(|&(v, _)| v).collect(),
                None => {
                    let hi = d.support_hi();
                    (0..=grid_n).map(|k| hi * k as f64 / grid_n as f64).collect()
                }
            };
            let mut c = InterimCurves::uncontested(grid.clone(), d.is_discrete());
            for (k, &x) in grid.iter().enumerate() {
                let cnt = a.partition_point(|&v| v < x);
                let (m1, m2) = (s1[cnt], s2[cnt]);
                let u = (x * cnt as f64 - m1) / total;
                let u2 = (x * x * cnt as f64 - 2.0 * x * m1 + m2) / total;
                let pi = cnt as f64 / total;
                c.pi[k] = pi;
                c.u[k] = u.max(0.0);
                c.p[k] = m1 / total;
                c.se_u[k] = ((u2 - u * u).max(0.0) / total).sqrt();
                c.se_pi[k] = (pi * (1.0 - pi) / total).sqrt();
            }
            curves.push(c);
        }
    }
    Ok(UtilityCurves { n, m, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ValueDistribution;
    use crate::market::Market;
    use crate::single_item::{AuctionFormat, InterimCurves, InterimOptions};

    fn uniform() -> ValueDistribution {
        ValueDistribution::uniform(0.0, 1.0).unwrap()
    }

    fn sp_market(n: usize, m: usize) -> Market {
        let inst = Instance::iid(n, m, &uniform()).unwrap();
        Market::build(
            &inst,
            AuctionFormat::SecondPrice,
            &[],
            &InterimOptions::default(),
            &RngStream::new(0),
        )
        .unwrap()
    }

    #[test]
    fn thresholds_examples() {
        let one = sp_market(1, 1);
        let th = compute_r_thresholds(&one.curves, &one.inst);
        assert!((th.r[0][0] - 0.25).abs() < 1e-9);
        let two = sp_market(2, 1);
        let th = compute_r_thresholds(&two.curves, &two.inst);
        assert!((th.r[0][0] - 2.0 / 27.0).abs() < 1e-4);
        let flat = UtilityCurves {
            n: 1,
            m: 1,
            curves: vec![InterimCurves {
                u: vec![0.0; 3],
                ..InterimCurves::uncontested(vec![0.0, 0.5, 1.0], false)
            }],
        };
        let th = compute_r_thresholds(&flat, &one.inst);
        assert_eq!(th.r[0][0], 0.0);
        assert_eq!(th.core_mean[0][0], 0.0);
    }

    #[test]
    fn fee_formula_examples() {
        let mk = |m: usize, mean: f64, ri: f64| SurplusThresholds {
            r: vec![vec![ri / m as f64; m]],
            r_i: vec![ri],
            core_mean: vec![vec![mean; m]],
            r_stderr: vec![vec![0.0; m]],
            core_stderr: vec![vec![0.0; m]],
        };
        assert_eq!(compute_entry_fees(&mk(2, 0.1, 0.15)).fees, vec![0.0]);
        let e = compute_entry_fees(&mk(8, 0.2, 0.5)).fees[0];
        assert!((e - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ef_rev_single_uncontested_bidder() {
        let one = sp_market(1, 1);
        let ef = ef_rev(&[0.5], &one.curves, &one.inst, 200_000, &RngStream::new(3)).unwrap();
        assert!((ef.mean - 0.25).abs() < 3.0 * ef.stderr + 1e-9);
        let p = entry_probability(0, 0.0, &one.curves, &one.inst, 10, &RngStream::new(3)).unwrap();
        assert_eq!(p, Estimate::exact(1.0));
    }

    #[test]
    fn ghost_types_stay_in_region() {
        let mk = sp_market(2, 2);
        let mut rng = RngStream::new(5).rng();
        for _ in 0..500 {
            let t = sample_ghost_type(0, 0.25, &mk.curves, &mk.inst, &mut rng, GHOST_MAX_TRIES).unwrap();
            assert!((t[0] * t[0] + t[1] * t[1]) / 2.0 < 0.25 + 1e-6);
        }
        assert!(matches!(
            sample_ghost_type(0, 0.0, &mk.curves, &mk.inst, &mut rng, 10),
            Err(Error::GhostRegionNegligible { bidder: 0 })
        ));
        assert!(sample_ghost_type(0, 0.001, &mk.curves, &mk.inst, &mut rng, 3).is_err());
    }

    #[test]
    fn entrant_curves_dominate_base_curves() {
        let mk = sp_market(3, 2);
        let plus = entrant_curves(&mk, &[0.2, 0.3, 0.0], 64, 50_000, &RngStream::new(9)).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let (b, p) = (mk.curves.get(i, j), plus.get(i, j));
                for &t in &p.t {
                    let se = p.se_u_at(t).hypot(b.se_u_at(t));
                    assert!(p.u_at(t) >= b.u_at(t) - 3.0 * se - 1e-9, "t = {t}");
                }
            }
        }
        let none = entrant_curves(&mk, &[0.0; 3], 64, 50_000, &RngStream::new(9)).unwrap();
        // u(t) = t^3 / 3 for two uniform opponents.
        assert!((none.get(0, 0).u_at(1.0) - 1.0 / 3.0).abs() < 0.01);
    }
}
