//! Virtual-welfare upper bound on optimal revenue and its decomposition.
//!
//! Each bidder's type space is split into regions by interim utilities: type
//! `t_i` sits in region `j` when `u_ij(t_ij)` is the largest (and positive)
//! of its interim utilities, ties going to the lowest item index. The bound
//! weighs item `j` by the ironed virtual value inside region `j` and by the
//! value itself outside it.

mod lp;

pub use lp::{brute_force_opt_small, MAX_LP_TYPES};

use crate::dist::{iron, VirtualValueTable, DEFAULT_IRON_GRID};
use crate::entry_fee::{compute_entry_fees, compute_r_thresholds, ef_rev, entry_probability};
use crate::error::Result;
use crate::instance::Instance;
use crate::market::{Market, UtilityCurves};
use crate::mc::{combined_stderr, expect_profiles, Estimate};
use crate::rng::RngStream;
use crate::single_item::{myerson_optimal_revenue, InterimCurves};

/// Region of a bidder with per-item utilities `u`: the first index of the
/// largest positive entry, or `None` when every entry is zero.
pub fn region_of(u: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in u.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v > u[b]) {
            best = Some(j);
        }
    }
    best
}

/// Complement of "item `j` is a strict favorite": some other item has
/// utility at least `u[j]`.
pub fn not_strict_favorite(u: &[f64], j: usize) -> bool {
    u.iter().enumerate().any(|(k, &v)| k != j && v >= u[j])
}

/// Preference functions `U_ij = u_ij`, made non-decreasing by a running
/// maximum so that sampling noise cannot break upward closure.
#[derive(Clone, Debug)]
pub struct PreferencePartition {
    curves: UtilityCurves,
}

impl PreferencePartition {
    pub fn new(curves: &UtilityCurves) -> Self {
        let mut curves = curves.clone();
        for c in curves.curves.iter_mut() {
            let mut best = 0.0f64;
            for v in c.u.iter_mut() {
                best = best.max(*v);
                *v = best;
            }
        }
        Self { curves }
    }

    pub fn curves(&self) -> &UtilityCurves {
        &self.curves
    }

    pub fn utilities(&self, i: usize, row: &[f64], out: &mut [f64]) {
        for (j, (o, &t)) in out.iter_mut().zip(row).enumerate() {
            *o = self.curves.get(i, j).u_at(t);
        }
    }

    pub fn region(&self, i: usize, row: &[f64]) -> Option<usize> {
        let mut u = vec![0.0; row.len()];
        self.utilities(i, row, &mut u);
        region_of(&u)
    }
}

/// Ironed virtual-value tables for every (bidder, item), indexed `i * m + j`.
pub fn virtual_tables(inst: &Instance, grid_n: usize) -> Result<Vec<VirtualValueTable>> {
    let mut out = Vec::with_capacity(inst.n * inst.m);
    for i in 0..inst.n {
        for j in 0..inst.m {
            out.push(iron(inst.dist(i, j), grid_n)?);
        }
    }
    Ok(out)
}

const VW: usize = 0;
const SINGLE: usize = 1;
const UNDER: usize = 2;
const OVER: usize = 3;
const SURPLUS: usize = 4;
const TAIL: usize = 5;
const CORE: usize = 6;
const GAP_FOUR: usize = 7;
const GAP_SURPLUS: usize = 8;
const GAP_FIVE: usize = 9;
const OUTPUTS: usize = 10;

struct Kernel<'a> {
    inst: &'a Instance,
    partition: &'a PreferencePartition,
    curves: &'a UtilityCurves,
    tables: &'a [VirtualValueTable],
    r_i: &'a [f64],
}

impl Kernel<'_> {
    /// All terms at one type profile, allocating each item to the largest
    /// positive weight (lowest index on ties).
    fn eval(&self, t: &[f64], out: &mut [f64]) {
        let (n, m) = (self.inst.n, self.inst.m);
        let mut u = vec![0.0; n * m];
        let mut region = vec![None; n];
        for i in 0..n {
            let row = &t[i * m..(i + 1) * m];
            self.partition.utilities(i, row, &mut u[i * m..(i + 1) * m]);
            region[i] = region_of(&u[i * m..(i + 1) * m]);
        }
        for j in 0..m {
            let mut win: Option<(usize, f64)> = None;
            for i in 0..n {
                let x = t[i * m + j];
                let w = if region[i] == Some(j) {
                    self.tables[i * m + j].ironed_plus(x)
                } else {
                    x
                };
                if w > 0.0 && win.is_none_or(|(_, b)| w > b) {
                    win = Some((i, w));
                }
            }
            let Some((i, w)) = win else { continue };
            let x = t[i * m + j];
            let c: &InterimCurves = self.curves.get(i, j);
            out[VW] += w;
            if region[i] == Some(j) {
                out[SINGLE] += w;
            }
            out[UNDER] += x * (1.0 - c.pi_at(x));
            out[OVER] += c.p_at(x);
            let ui = &u[i * m..(i + 1) * m];
            if not_strict_favorite(ui, j) {
                out[SURPLUS] += ui[j];
            }
        }
        for i in 0..n {
            let ui = &u[i * m..(i + 1) * m];
            for j in 0..m {
                if ui[j] < self.r_i[i] {
                    out[CORE] += ui[j];
                } else if not_strict_favorite(ui, j) {
                    out[TAIL] += ui[j];
                }
            }
        }
        let four = out[SINGLE] + out[UNDER] + out[OVER];
        out[GAP_FOUR] = out[VW] - four - out[SURPLUS];
        out[GAP_SURPLUS] = out[SURPLUS] - out[TAIL] - out[CORE];
        out[GAP_FIVE] = out[VW] - four - out[TAIL] - out[CORE];
    }
}

/// `E[sum_j max_i w_ij(t_i)]`, the virtual-welfare bound at its pointwise
/// maximizing allocation.
pub fn vw_upper_bound(
    partition: &PreferencePartition,
    inst: &Instance,
    tables: &[VirtualValueTable],
    n_samples: usize,
    stream: &RngStream,
) -> Estimate {
    let r_i = vec![0.0; inst.n];
    let k = Kernel {
        inst,
        partition,
        curves: partition.curves(),
        tables,
        r_i: &r_i,
    };
    expect_profiles(inst, n_samples, stream, OUTPUTS, |t, out| k.eval(t, out))[VW]
}

#[derive(Clone, Copy, Debug)]
pub struct BoundsOptions {
    pub n_samples: usize,
    pub entry_samples: usize,
    pub opt_samples: usize,
    pub iron_grid: usize,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            entry_samples: 100_000,
            opt_samples: 100_000,
            iron_grid: DEFAULT_IRON_GRID,
        }
    }
}

/// One inequality `lhs <= rhs`, accepted within `tol` (three standard errors).
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &'static str, lhs: f64, rhs: f64, se: f64) -> Self {
        let tol = 3.0 * se + 1e-9;
        Self {
            name,
            lhs,
            rhs,
            tol,
            pass: lhs <= rhs + tol,
        }
    }

    /// `gap <= 0` for a per-sample difference estimate.
    fn gap(name: &'static str, lhs: f64, rhs: f64, gap: Estimate) -> Self {
        let tol = 3.0 * gap.stderr + 1e-9;
        Self {
            name,
            lhs,
            rhs,
            tol,
            pass: gap.mean <= tol,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub vw: Estimate,
    pub single: Estimate,
    pub under: Estimate,
    pub over: Estimate,
    pub surplus: Estimate,
    pub tail: Estimate,
    pub core: Estimate,
    pub r_total: Estimate,
    pub fees: Vec<f64>,
    pub entry_probability: Vec<Estimate>,
    pub ef_rev: Estimate,
    /// `sum_j OPT(D_j)`.
    pub sum_opt: Estimate,
    pub c: f64,
    pub checks: Vec<Check>,
    /// Some value distribution is discrete, so the continuous-type bound is
    /// applied outside its hypotheses.
    pub outside_hypotheses: bool,
}

impl DecompositionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn sum_estimates(xs: &[Estimate]) -> Estimate {
    Estimate {
        mean: xs.iter().map(|e| e.mean).sum(),
        stderr: xs.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt(),
        n: xs.iter().map(|e| e.n).min().unwrap_or(0),
    }
}

/// Every decomposition term at the common pointwise-max allocation, with the
/// formula entry fees, `sum_j OPT(D_j)` and the term-wise inequalities.
pub fn decomposition_terms(market: &Market, opts: &BoundsOptions, stream: &RngStream) -> Result<DecompositionReport> {
    let inst = &market.inst;
    let (n, m) = (inst.n, inst.m);
    let partition = PreferencePartition::new(&market.curves);
    let tables = virtual_tables(inst, opts.iron_grid)?;
    let th = compute_r_thresholds(partition.curves(), inst);
    let fees = compute_entry_fees(&th).fees;
    let kernel = Kernel {
        inst,
        partition: &partition,
        curves: &market.curves,
        tables: &tables,
        r_i: &th.r_i,
    };
    let est = expect_profiles(inst, opts.n_samples, &stream.child("terms"), OUTPUTS, |t, out| {
        kernel.eval(t, out)
    });
    let entry_stream = stream.child("entry");
    let probs = (0..n)
        .map(|i| {
            entry_probability(
                i,
                fees[i],
                partition.curves(),
                inst,
                opts.entry_samples,
                &entry_stream.index(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let ef = ef_rev(&fees, partition.curves(), inst, opts.entry_samples, &entry_stream)?;
    let opt_stream = stream.child("opt");
    let mut per_item = Vec::with_capacity(m);
    for j in 0..m {
        let ds = inst.item(j);
        let tabs: Vec<&VirtualValueTable> = (0..n).map(|i| &tables[i * m + j]).collect();
        per_item.push(myerson_optimal_revenue(
            &ds,
            &tabs,
            opts.opt_samples,
            &opt_stream.index(j as u64),
        )?);
    }
    let sum_opt = sum_estimates(&per_item);
    let r_total = Estimate {
        mean: th.r_total(),
        stderr: th.r_stderr.iter().flatten().map(|s| s * s).sum::<f64>().sqrt(),
        n: 0,
    };
    let c = market.format.type_loss_constant();
    let (vw, single, under, over) = (est[VW], est[SINGLE], est[UNDER], est[OVER]);
    let (surplus, tail, core) = (est[SURPLUS], est[TAIL], est[CORE]);
    let se = combined_stderr;
    let four = single.mean + under.mean + over.mean;
    let mut checks = vec![
        Check::gap(
            "vw<=single+under+over+surplus",
            vw.mean,
            four + surplus.mean,
            est[GAP_FOUR],
        ),
        Check::gap(
            "surplus<=tail+core",
            surplus.mean,
            tail.mean + core.mean,
            est[GAP_SURPLUS],
        ),
        Check::gap(
            "vw<=single+under+over+tail+core",
            vw.mean,
            four + tail.mean + core.mean,
            est[GAP_FIVE],
        ),
        Check::new(
            "single<=sum_opt",
            single.mean,
            sum_opt.mean,
            se(single.stderr, sum_opt.stderr),
        ),
        Check::new(
            "over<=sum_opt",
            over.mean,
            sum_opt.mean,
            se(over.stderr, sum_opt.stderr),
        ),
        Check::new(
            "under<=c*sum_opt",
            under.mean,
            c * sum_opt.mean,
            se(under.stderr, c * sum_opt.stderr),
        ),
        Check::new(
            "tail<=r_total",
            tail.mean,
            r_total.mean,
            se(tail.stderr, r_total.stderr),
        ),
        Check::new(
            "core<=2r_total+2ef_rev",
            core.mean,
            2.0 * (r_total.mean + ef.mean),
            se(core.stderr, 2.0 * se(r_total.stderr, ef.stderr)),
        ),
        Check::new(
            "r_total<=sum_opt",
            r_total.mean,
            sum_opt.mean,
            se(r_total.stderr, sum_opt.stderr),
        ),
    ];
    if let Some(p) = probs
        .iter()
        .zip(&fees)
        .filter(|(_, &e)| e > 0.0)
        .map(|(p, _)| *p)
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
    {
        checks.push(Check::new("entry_probability>=1/2", 0.5, p.mean, p.stderr));
    }
    let outside_hypotheses = (0..n).any(|i| inst.bidder(i).iter().any(|d| d.is_discrete()));
    Ok(DecompositionReport {
        vw,
        single,
        under,
        over,
        surplus,
        tail,
        core,
        r_total,
        fees,
        entry_probability: probs,
        ef_rev: ef,
        sum_opt,
        c,
        checks,
        outside_hypotheses,
    })
}

#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub decomposition: DecompositionReport,
    /// Exact one-bidder optimum, when the instance is small enough.
    pub opt_exact: Option<f64>,
    pub checks: Vec<Check>,
}

impl TheoremReport {
    pub fn pass(&self) -> bool {
        self.decomposition.pass() && self.checks.iter().all(|c| c.pass)
    }
}

/// Verifies `VW <= (c + 5) sum_j OPT(D_j) + 2 EF-Rev` on top of the term-wise
/// inequalities, and `OPT(D) <= VW` when the one-bidder optimum is computable.
pub fn theorem_check(market: &Market, opts: &BoundsOptions, stream: &RngStream) -> Result<TheoremReport> {
    let d = decomposition_terms(market, opts, stream)?;
    let factor = d.c + 5.0;
    let mut checks = vec![Check::new(
        "vw<=(c+5)sum_opt+2ef_rev",
        d.vw.mean,
        factor * d.sum_opt.mean + 2.0 * d.ef_rev.mean,
        combined_stderr(
            d.vw.stderr,
            combined_stderr(factor * d.sum_opt.stderr, 2.0 * d.ef_rev.stderr),
        ),
    )];
    let inst = &market.inst;
    let small = inst.n == 1 && inst.profile_count().is_some_and(|c| c <= MAX_LP_TYPES);
    let opt_exact = if small {
        Some(brute_force_opt_small(inst.bidder(0))?)
    } else {
        None
    };
    if let Some(opt) = opt_exact {
        checks.push(Check::new("opt<=vw", opt, d.vw.mean, d.vw.stderr));
    }
    Ok(TheoremReport {
        decomposition: d,
        opt_exact,
        checks,
    })
}
