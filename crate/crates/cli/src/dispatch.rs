//! Subcommand pipelines: each turns a config into CSV tables, a text report
//! and an overall pass flag.

use crate::config::{EquilibriumSpec, Expectation, ExperimentConfig, FeeSource};
use crate::csv::{format_float, Cell, CsvTable};
use anyhow::{bail, Context, Result};
use auctionlab_core::credibility::MessageGameInstance;
use auctionlab_core::dist::DistKind;
use auctionlab_core::entry_fee::{
    compute_entry_fees, compute_r_thresholds, ef_rev, entry_probability, mechanism_revenue, FeeProvenance,
    MechanismConfig, Variant,
};
use auctionlab_core::mc::{combined_stderr, le_within, Estimate};
use auctionlab_core::online::{auto_eps, best_in_grid_offline, regret_report, run_online, OnlineEnv};
use auctionlab_core::revenue_bounds::{
    theorem_check, virtual_tables, vw_upper_bound, BoundsOptions, PreferencePartition,
};
use auctionlab_core::single_item::{
    best_response_regret, certify, symmetric_equilibrium_with_reserve, AuctionFormat, AuctionRule, InterimMethod,
    InterimOptions, RegretOptions, StrategyProfile,
};
use auctionlab_core::typeloss::{root_bound_check, second_price_pointwise_gap, typeloss_estimate, TypeLossOptions};
use auctionlab_core::{Market, RngStream, ValueDistribution};
use rayon::prelude::*;
use std::fmt::{self, Write as _};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Fees,
    Revenue,
    Bounds,
    Typeloss,
    Learn,
    Credibility,
    Equilibrium,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fees => "fees",
            Command::Revenue => "revenue",
            Command::Bounds => "bounds",
            Command::Typeloss => "typeloss",
            Command::Learn => "learn",
            Command::Credibility => "credibility",
            Command::Equilibrium => "equilibrium",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// `(table name, table)`, written as `<config name>_<table name>.csv`.
    pub tables: Vec<(String, CsvTable)>,
    pub report: String,
    pub pass: bool,
}

pub fn dispatch(cmd: Command, cfg: &ExperimentConfig) -> Result<RunOutput> {
    let stream = RngStream::new(cfg.seed).child(cmd.name());
    let out = match cmd {
        Command::Fees => fees(cfg, &stream),
        Command::Revenue => revenue(cfg, &stream),
        Command::Bounds => bounds(cfg, &stream),
        Command::Typeloss => typeloss(cfg, &stream),
        Command::Learn => learn(cfg, &stream),
        Command::Credibility => credibility(cfg),
        Command::Equilibrium => equilibrium(cfg, &stream),
    };
    out.with_context(|| format!("`{cmd}` on `{}`", cfg.name))
}

fn interim_options(cfg: &ExperimentConfig) -> InterimOptions {
    InterimOptions {
        grid_n: cfg.sampling.grid_n,
        n_samples: cfg.sampling.n_samples,
        method: InterimMethod::Auto,
    }
}

fn build_market(cfg: &ExperimentConfig, format: AuctionFormat, stream: &RngStream) -> Result<Market> {
    let n = cfg.instance.n;
    let reserves: Vec<Vec<f64>> = cfg.mechanism.reserves.iter().map(|&r| vec![r; n]).collect();
    Ok(Market::build(
        &cfg.instance,
        format,
        &reserves,
        &interim_options(cfg),
        &stream.child("market"),
    )?)
}

fn resolve_fees(cfg: &ExperimentConfig, market: &Market) -> (Vec<f64>, FeeProvenance) {
    match &cfg.mechanism.fees {
        FeeSource::Formula => {
            let th = compute_r_thresholds(&market.curves, &market.inst);
            let s = compute_entry_fees(&th);
            (s.fees, s.provenance)
        }
        FeeSource::Zero => (vec![0.0; cfg.instance.n], FeeProvenance::Manual),
        FeeSource::Manual(v) => (v.clone(), FeeProvenance::Manual),
    }
}

fn fees(cfg: &ExperimentConfig, stream: &RngStream) -> Result<RunOutput> {
    let market = build_market(cfg, cfg.mechanism.format, stream)?;
    let inst = &market.inst;
    let th = compute_r_thresholds(&market.curves, inst);
    let (fees, provenance) = resolve_fees(cfg, &market);
    let samples = cfg.sampling.entry_samples;
    let ef = ef_rev(&fees, &market.curves, inst, samples, &stream.child("ef"))?;
    let mut table = CsvTable::new(&[
        "seed",
        "instance",
        "format",
        "bidder",
        "fee",
        "provenance",
        "r_i",
        "core_sum",
        "entry_probability",
        "entry_stderr",
        "ef_rev",
        "ef_rev_stderr",
        "n_samples",
        "pass",
    ]);
    let mut report = String::new();
    let mut all = true;
    for (i, &e) in fees.iter().enumerate() {
        let p = entry_probability(
            i,
            e,
            &market.curves,
            inst,
            samples,
            &stream.child("entry").index(i as u64),
        )?;
        let pass = provenance != FeeProvenance::Formula || p.mean >= 0.5 - 3.0 * p.stderr;
        all &= pass;
        let core: f64 = th.core_mean[i].iter().sum();
        writeln!(
            report,
            "bidder {i}: fee {e:.6} ({provenance}), r_i {:.6}, core {core:.6}, Pr[enter] {:.4} +- {:.4}{}",
            th.r_i[i],
            p.mean,
            p.stderr,
            if pass { "" } else { "  FAIL" }
        )?;
        table.push(vec![
            cfg.seed.into(),
            cfg.name.as_str().into(),
            cfg.mechanism.format.to_string().into(),
            i.into(),
            e.into(),
            provenance.to_string().into(),
            th.r_i[i].into(),
            core.into(),
            p.mean.into(),
            p.stderr.into(),
            ef.mean.into(),
            ef.stderr.into(),
            samples.into(),
            pass.into(),
        ]);
    }
    writeln!(report, "EF-Rev {:.6} +- {:.6}", ef.mean, ef.stderr)?;
    Ok(RunOutput {
        tables: vec![("fees".into(), table)],
        report,
        pass: all,
    })
}

fn revenue(cfg: &ExperimentConfig, stream: &RngStream) -> Result<RunOutput> {
    let market = build_market(cfg, cfg.mechanism.format, stream)?;
    let (fees, _) = resolve_fees(cfg, &market);
    let variant = cfg.mechanism.variant;
    let rounds = cfg.sampling.n_rounds;
    let mech = MechanismConfig::new(variant, market.clone(), fees.clone())?;
    let label = mech.label();
    let rev = mechanism_revenue(&mech, rounds, &stream.child("rounds"))?;
    let base = MechanismConfig::new(Variant::Simultaneous, market.clone(), Vec::new())?;
    let baseline = mechanism_revenue(&base, rounds, &stream.child("baseline"))?.total;
    let target = ef_rev(
        &fees,
        &market.curves,
        &market.inst,
        cfg.sampling.entry_samples,
        &stream.child("ef"),
    )?;
    let (check, pass) = match variant {
        Variant::RandEa { delta } => (
            "ef>=(1-delta)ef_rev",
            le_within(target.scale(1.0 - delta), rev.ef, 3.0, 1e-9),
        ),
        Variant::GhostEa => ("ef>=ef_rev", le_within(target, rev.ef, 3.0, 1e-9)),
        Variant::Ea if fees.iter().all(|&e| e == 0.0) => (
            "total==simultaneous",
            (rev.total.mean - baseline.mean).abs() <= 3.0 * combined_stderr(rev.total.stderr, baseline.stderr) + 1e-9,
        ),
        _ => ("none", true),
    };
    let mut table = CsvTable::new(&[
        "seed",
        "instance",
        "mechanism",
        "n_rounds",
        "total",
        "total_stderr",
        "ef",
        "ef_stderr",
        "item",
        "item_stderr",
        "ef_rev",
        "ef_rev_stderr",
        "simultaneous",
        "simultaneous_stderr",
        "check",
        "pass",
    ]);
    table.push(vec![
        cfg.seed.into(),
        cfg.name.as_str().into(),
        label.as_str().into(),
        rounds.into(),
        rev.total.mean.into(),
        rev.total.stderr.into(),
        rev.ef.mean.into(),
        rev.ef.stderr.into(),
        rev.item.mean.into(),
        rev.item.stderr.into(),
        target.mean.into(),
        target.stderr.into(),
        baseline.mean.into(),
        baseline.stderr.into(),
        check.into(),
        pass.into(),
    ]);
    let report = format!(
        "{label}: revenue {:.6} +- {:.6} (fees {:.6}, items {:.6}); EF-Rev {:.6}; simultaneous {:.6}; check {check}: {}\n",
        rev.total.mean,
        rev.total.stderr,
        rev.ef.mean,
        rev.item.mean,
        target.mean,
        baseline.mean,
        if pass { "pass" } else { "FAIL" }
    );
    Ok(RunOutput {
        tables: vec![("revenue".into(), table)],
        report,
        pass,
    })
}

fn bounds(cfg: &ExperimentConfig, stream: &RngStream) -> Result<RunOutput> {
    let market = build_market(cfg, cfg.mechanism.format, stream)?;
    let opts = BoundsOptions {
        n_samples: cfg.sampling.n_samples,
        entry_samples: cfg.sampling.entry_samples,
        opt_samples: cfg.sampling.opt_samples,
        iron_grid: cfg.sampling.iron_grid,
    };
    let rep = theorem_check(&market, &opts, &stream.child("theorem"))?;
    let d = &rep.decomposition;
    let terms: [(&str, Estimate); 10] = [
        ("vw", d.vw),
        ("single", d.single),
        ("under", d.under),
        ("over", d.over),
        ("surplus", d.surplus),
        ("tail", d.tail),
        ("core", d.core),
        ("r_total", d.r_total),
        ("ef_rev", d.ef_rev),
        ("sum_opt", d.sum_opt),
    ];
    let mut header: Vec<String> = ["seed", "instance", "format", "n_samples", "c"]
        .map(String::from)
        .to_vec();
    for (name, _) in &terms {
        header.push(name.to_string());
        header.push(format!("{name}_stderr"));
    }
    header.extend(["opt_exact", "outside_hypotheses", "pass"].map(String::from));
    let mut summary = CsvTable {
        header,
        rows: Vec::new(),
    };
    let mut row: Vec<Cell> = vec![
        cfg.seed.into(),
        cfg.name.as_str().into(),
        market.format.to_string().into(),
        cfg.sampling.n_samples.into(),
        d.c.into(),
    ];
    for (_, e) in &terms {
        row.push(e.mean.into());
        row.push(e.stderr.into());
    }
    row.extend([rep.opt_exact.into(), d.outside_hypotheses.into(), rep.pass().into()]);
    summary.push(row);

    let mut checks = CsvTable::new(&["seed", "instance", "check", "lhs", "rhs", "tol", "pass"]);
    let mut report = String::new();
    for (name, e) in &terms {
        writeln!(report, "{name:>8} = {:.6} +- {:.6}", e.mean, e.stderr)?;
    }
    if let Some(opt) = rep.opt_exact {
        writeln!(report, "     opt = {opt:.6} (exact)")?;
    }
    if d.outside_hypotheses {
        writeln!(
            report,
            "note: discrete values, continuous-type bound applied outside its hypotheses"
        )?;
    }
    for c in d.checks.iter().chain(&rep.checks) {
        writeln!(
            report,
            "{:<34} {:.6} <= {:.6} (+{:.2e}) {}",
            c.name,
            c.lhs,
            c.rhs,
            c.tol,
            if c.pass { "pass" } else { "FAIL" }
        )?;
        checks.push(vec![
            cfg.seed.into(),
            cfg.name.as_str().into(),
            c.name.into(),
            c.lhs.into(),
            c.rhs.into(),
            c.tol.into(),
            c.pass.into(),
        ]);
    }
    Ok(RunOutput {
        tables: vec![("bounds".into(), summary), ("bounds_checks".into(), checks)],
        report,
        pass: rep.pass(),
    })
}

fn regret_options(cfg: &ExperimentConfig, eq: &EquilibriumSpec) -> RegretOptions {
    RegretOptions {
        type_grid: eq.type_grid,
        deviation_grid: eq.deviation_grid,
        n_samples: cfg.sampling.n_samples,
        method: InterimMethod::Auto,
    }
}

/// Focal per-item strategies: truthful for second-price, the symmetric
/// equilibrium (with the item's common reserve) otherwise.
fn item_profile(cfg: &ExperimentConfig, j: usize) -> Result<(AuctionRule, StrategyProfile)> {
    let format = cfg.mechanism.format;
    let n = cfg.instance.n;
    let reserve = cfg.mechanism.reserves.get(j).copied().unwrap_or(0.0);
    let rule = AuctionRule::with_reserves(format, vec![reserve; n]);
    let profile = match format {
        AuctionFormat::SecondPrice => StrategyProfile::truthful(n, cfg.instance.cap()),
        _ => {
            let d = cfg.instance.dist(0, j);
            if (1..n).any(|i| cfg.instance.dist(i, j) != d) {
                bail!("{format} equilibrium needs i.i.d. bidders on item {j}");
            }
            symmetric_equilibrium_with_reserve(format, d, n, reserve)?
        }
    };
    Ok((rule, profile))
}

fn typeloss(cfg: &ExperimentConfig, stream: &RngStream) -> Result<RunOutput> {
    let inst = &cfg.instance;
    let format = cfg.mechanism.format;
    let samples = cfg.sampling.n_samples;
    let mut table = CsvTable::new(&[
        "seed",
        "instance",
        "item",
        "format",
        "n_samples",
        "estimate",
        "estimate_stderr",
        "bridge",
        "bridge_stderr",
        "pp",
        "opt",
        "opt_stderr",
        "c",
        "typeloss_pass",
        "root_lhs",
        "root_lhs_stderr",
        "root_rhs",
        "root_pass",
        "sp_gap",
        "sp_gap_pass",
        "pass",
    ]);
    let mut report = String::new();
    let mut all = true;
    for j in 0..inst.m {
        let ds: Vec<&ValueDistribution> = inst.item(j);
        let (rule, profile) = item_profile(cfg, j)?;
        let cert = certify(
            &rule,
            &profile,
            &ds,
            cfg.equilibrium.tolerance,
            &regret_options(cfg, &cfg.equilibrium),
            &stream.child("certify").index(j as u64),
        )?;
        let opts = TypeLossOptions {
            n_samples: samples,
            interim: interim_options(cfg),
        };
        let tl = typeloss_estimate(&cert, &ds, &opts, &stream.child("loss").index(j as u64))?;
        let root = root_bound_check(&ds, samples, &stream.child("root").index(j as u64))?;
        let sp_gap = (format == AuctionFormat::SecondPrice && ds.iter().all(|d| !d.is_discrete()))
            .then(|| second_price_pointwise_gap(&ds, 200));
        let sp_pass = sp_gap.is_none_or(|g| g <= 1e-6);
        let pass = tl.pass && root.pass && sp_pass;
        all &= pass;
        writeln!(
            report,
            "item {j}: type loss {:.6} +- {:.6} vs {} x PP {:.6}; root {:.6} <= {:.6}{}{}",
            tl.estimate.mean,
            tl.estimate.stderr,
            tl.c,
            tl.pp,
            root.lhs.mean,
            root.rhs,
            sp_gap.map_or(String::new(), |g| format!("; pointwise gap {g:.2e}")),
            if pass { "" } else { "  FAIL" }
        )?;
        table.push(vec![
            cfg.seed.into(),
            cfg.name.as_str().into(),
            j.into(),
            format.to_string().into(),
            samples.into(),
            tl.estimate.mean.into(),
            tl.estimate.stderr.into(),
            tl.bridge.mean.into(),
            tl.bridge.stderr.into(),
            tl.pp.into(),
            tl.opt.mean.into(),
            tl.opt.stderr.into(),
            tl.c.into(),
            tl.pass.into(),
            root.lhs.mean.into(),
            root.lhs.stderr.into(),
            root.rhs.into(),
            root.pass.into(),
            sp_gap.into(),
            sp_pass.into(),
            pass.into(),
        ]);
    }
    Ok(RunOutput {
        tables: vec![("typeloss".into(), table)],
        report,
        pass: all,
    })
}

/// Largest allowed sup-norm gap between a shipped bid table and its closed form.
const CLOSED_FORM_TOL: f64 = 1e-4;

/// Closed-form symmetric equilibrium bid for uniform `[0, h]` values without a
/// reserve.
fn uniform_closed_form(
    format: AuctionFormat,
    n: usize,
    d: &ValueDistribution,
    reserve: f64,
) -> Option<impl Fn(f64) -> f64> {
    let &DistKind::Uniform { lo, hi } = d.kind() else {
        return None;
    };
    if lo != 0.0 || reserve != 0.0 {
        return None;
    }
    let k = (n as f64 - 1.0) / n as f64;
    Some(move |t: f64| match format {
        AuctionFormat::SecondPrice => t,
        AuctionFormat::FirstPrice => k * t,
        AuctionFormat::AllPay => k * t * (t / hi).powi(n as i32 - 1),
    })
}

fn equilibrium(cfg: &ExperimentConfig, stream: &RngStream) -> Result<RunOutput> {
    let inst = &cfg.instance;
    let format = cfg.mechanism.format;
    let eq = &cfg.equilibrium;
    let mut bids = CsvTable::new(&["seed", "instance", "item", "t", "bid", "closed_form"]);
    let mut regrets = CsvTable::new(&[
        "seed",
        "instance",
        "item",
        "format",
        "bidder",
        "regret",
        "regret_stderr",
        "at_type",
        "deviation",
        "tolerance",
        "closed_form_gap",
        "pass",
    ]);
    let mut report = String::new();
    let mut all = true;
    for j in 0..inst.m {
        let ds = inst.item(j);
        let (rule, profile) = item_profile(cfg, j)?;
        let reserve = rule.reserve(0);
        let closed = uniform_closed_form(format, inst.n, ds[0], reserve);
        let (lo, hi) = (ds[0].support_lo(), ds[0].support_hi());
        let mut gap: Option<f64> = closed.as_ref().map(|_| 0.0);
        for k in 0..eq.output_points {
            let t = lo + (hi - lo) * k as f64 / (eq.output_points - 1) as f64;
            let b = profile.bid(0, t);
            let c = closed.as_ref().map(|f| f(t));
            if let (Some(g), Some(c)) = (gap.as_mut(), c) {
                *g = g.max((b - c).abs());
            }
            bids.push(vec![
                cfg.seed.into(),
                cfg.name.as_str().into(),
                j.into(),
                t.into(),
                b.into(),
                c.into(),
            ]);
        }
        let ropts = regret_options(cfg, eq);
        for i in 0..inst.n {
            let r = best_response_regret(
                &rule,
                &profile,
                &ds,
                i,
                &ropts,
                &stream.child("regret").index((j * inst.n + i) as u64),
            )?;
            let pass = r.value <= eq.tolerance + 3.0 * r.stderr && gap.is_none_or(|g| g <= CLOSED_FORM_TOL);
            all &= pass;
            writeln!(
                report,
                "item {j} bidder {i}: regret {:.2e} +- {:.2e} (type {:.4}, deviation {:.4}){}{}",
                r.value,
                r.stderr,
                r.at_type,
                r.deviation,
                gap.map_or(String::new(), |g| format!("; closed-form gap {g:.2e}")),
                if pass { "" } else { "  FAIL" }
            )?;
            regrets.push(vec![
                cfg.seed.into(),
                cfg.name.as_str().into(),
                j.into(),
                format.to_string().into(),
                i.into(),
                r.value.into(),
                r.stderr.into(),
                r.at_type.into(),
                r.deviation.into(),
                eq.tolerance.into(),
                gap.into(),
                pass.into(),
            ]);
        }
    }
    Ok(RunOutput {
        tables: vec![("equilibrium".into(), bids), ("equilibrium_regret".into(), regrets)],
        report,
        pass: all,
    })
}

fn learn(cfg: &ExperimentConfig, stream: &RngStream) -> Result<RunOutput> {
    let inst = &cfg.instance;
    let spec = &cfg.learn;
    let eps = spec.eps.unwrap_or_else(|| auto_eps(inst.cap(), inst.m, spec.rounds));
    let env = OnlineEnv::new(inst, eps, spec.oracle_samples, &stream.child("env"))?;
    let opt = best_in_grid_offline(&env, spec.offline_samples, &stream.child("offline"))?;
    let f_star = opt.f_star;

    let sp = Market::build(
        inst,
        AuctionFormat::SecondPrice,
        &[],
        &interim_options(cfg),
        &stream.child("market"),
    )?;
    let partition = PreferencePartition::new(&sp.curves);
    let tables = virtual_tables(inst, cfg.sampling.iron_grid)?;
    let vw = vw_upper_bound(&partition, inst, &tables, cfg.sampling.n_samples, &stream.child("vw"));
    let best = if opt.ssp.mean >= opt.esp.mean { opt.ssp } else { opt.esp };
    let half = best.scale(0.5);
    let floor = vw.scale(1.0 / 28.0);
    let floor_pass = le_within(floor, half, 3.0, 1e-9);

    let seeds = spec.seeds.clone().unwrap_or_else(|| vec![cfg.seed]);
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&s| run_online(&env, spec.rounds, spec.algo, &RngStream::new(s).child("learn")))
        .collect::<std::result::Result<_, _>>()?;

    let mut table = CsvTable::new(&[
        "seed",
        "run_seed",
        "instance",
        "algo",
        "rounds",
        "eps",
        "reserve_arms",
        "fee_arms",
        "f_star",
        "f_star_stderr",
        "ssp_star",
        "ssp_star_stderr",
        "esp_star",
        "esp_star_stderr",
        "avg_revenue",
        "last_decile",
        "last_decile_stderr",
        "ratio",
        "slope",
        "final_regret",
        "vw",
        "vw_stderr",
        "ratio_pass",
        "slope_pass",
        "floor_pass",
        "pass",
    ]);
    let mut curve = CsvTable::new(&["seed", "run_seed", "round", "cumulative_regret"]);
    let mut rounds = CsvTable::new(&[
        "seed", "run_seed", "round", "coin", "types", "posted", "entered", "revenue", "components",
    ]);
    let mut report = format!(
        "eps {eps:.5}: {} reserve arms, {} fee arms; best in grid: reserves {:?}, fees {:?}\n\
         SSP* {:.6}, ESP* {:.6}, f* {:.6}; VW {:.6}; 1/2 max(SSP*, ESP*) >= VW/28: {}\n",
        env.reserve_grid.len(),
        env.fee_grid.len(),
        opt.reserves,
        opt.fees,
        opt.ssp.mean,
        opt.esp.mean,
        f_star.mean,
        vw.mean,
        if floor_pass { "pass" } else { "FAIL" }
    );
    let mut all = floor_pass;
    for (&s, run) in seeds.iter().zip(&runs) {
        let rep = regret_report(&run.logs, f_star.mean);
        let ratio = rep.last_decile.mean / f_star.mean;
        let ratio_pass = ratio >= spec.min_ratio;
        let slope_pass = rep.slope.is_none_or(|x| x <= spec.max_slope);
        let pass = ratio_pass && slope_pass && floor_pass;
        all &= pass;
        writeln!(
            report,
            "run seed {s}: last-decile {:.6} ({:.3} f*), slope {}, final regret {:.2}{}",
            rep.last_decile.mean,
            ratio,
            rep.slope.map_or("none".into(), |x| format!("{x:.3}")),
            rep.final_regret,
            if pass { "" } else { "  FAIL" }
        )?;
        table.push(vec![
            cfg.seed.into(),
            s.into(),
            cfg.name.as_str().into(),
            spec.algo.to_string().into(),
            spec.rounds.into(),
            eps.into(),
            env.reserve_grid.len().into(),
            env.fee_grid.len().into(),
            f_star.mean.into(),
            f_star.stderr.into(),
            opt.ssp.mean.into(),
            opt.ssp.stderr.into(),
            opt.esp.mean.into(),
            opt.esp.stderr.into(),
            rep.avg_revenue.into(),
            rep.last_decile.mean.into(),
            rep.last_decile.stderr.into(),
            ratio.into(),
            rep.slope.into(),
            rep.final_regret.into(),
            vw.mean.into(),
            vw.stderr.into(),
            ratio_pass.into(),
            slope_pass.into(),
            floor_pass.into(),
            pass.into(),
        ]);
        for &(tau, c) in &rep.curve {
            curve.push(vec![cfg.seed.into(), s.into(), tau.into(), c.into()]);
        }
        if spec.round_log {
            for l in &run.logs {
                rounds.push(vec![
                    cfg.seed.into(),
                    s.into(),
                    l.round.into(),
                    l.coin.to_string().into(),
                    joined(l.types.iter().map(|&x| format_float(x))).into(),
                    joined(l.posted.iter().map(|&x| format_float(x))).into(),
                    joined(l.entered.iter().map(|b| if *b { "1" } else { "0" }.to_string())).into(),
                    l.revenue.into(),
                    joined(l.components.iter().map(|&x| format_float(x))).into(),
                ]);
            }
        }
    }
    let mut tables = vec![("learn".into(), table), ("learn_curve".into(), curve)];
    if spec.round_log {
        tables.push(("learn_rounds".into(), rounds));
    }
    Ok(RunOutput {
        tables,
        report,
        pass: all,
    })
}

fn credibility(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let fees = match &cfg.mechanism.fees {
        FeeSource::Zero => vec![0.0; cfg.instance.n],
        FeeSource::Manual(v) => v.clone(),
        FeeSource::Formula => bail!("credibility needs explicit fees (a list or \"zero\")"),
    };
    let game = MessageGameInstance::new(
        cfg.instance.clone(),
        cfg.mechanism.format,
        fees,
        cfg.credibility.bids.clone(),
    )?;
    let rep = game.search_safe_deviations()?;
    let expect_ok = match cfg.credibility.expect {
        None => true,
        Some(Expectation::Credible) => rep.max_delta == 0.0,
        Some(Expectation::Exploitable) => rep.max_delta > 0.0,
    };
    let pass = rep.witnesses_replay && expect_ok;
    let mut report = format!(
        "{}: {} transcripts, ghost-win probability {:.6}\n",
        rep.label, rep.transcripts, rep.ghost_win_probability
    );
    match &rep.best {
        None => writeln!(report, "no safe deviation gains revenue (delta 0)")?,
        Some(best) => {
            writeln!(
                report,
                "safe deviation on transcript {}: delta {:.6}, expected gain {:.6} over {} transcripts\n  {}",
                best.transcript, best.delta, rep.expected_gain, rep.profitable_transcripts, best.description
            )?;
            for w in &best.witnesses {
                writeln!(
                    report,
                    "  bidder {}: innocent explanation from transcript {} with types {:?}",
                    w.bidder, w.transcript, w.types
                )?;
            }
        }
    }
    writeln!(
        report,
        "witnesses replayed: {} ({}){}",
        rep.witnesses_checked,
        if rep.witnesses_replay { "exact" } else { "MISMATCH" },
        if expect_ok { "" } else { "; result contradicts `expect`" }
    )?;
    let expect = match cfg.credibility.expect {
        None => "",
        Some(Expectation::Credible) => "credible",
        Some(Expectation::Exploitable) => "exploitable",
    };
    let mut table = CsvTable::new(&[
        "seed",
        "instance",
        "variant",
        "delta",
        "expected_gain",
        "witness_count",
        "transcripts",
        "profitable_transcripts",
        "ghost_win_probability",
        "replay_pass",
        "expect",
        "pass",
    ]);
    table.push(vec![
        cfg.seed.into(),
        cfg.name.as_str().into(),
        rep.label.as_str().into(),
        rep.max_delta.into(),
        rep.expected_gain.into(),
        rep.witnesses_checked.into(),
        rep.transcripts.into(),
        rep.profitable_transcripts.into(),
        rep.ghost_win_probability.into(),
        rep.witnesses_replay.into(),
        expect.into(),
        pass.into(),
    ]);
    Ok(RunOutput {
        tables: vec![("credibility".into(), table)],
        report,
        pass,
    })
}

/// Vector-valued CSV field: entries separated by `;`.
fn joined(xs: impl Iterator<Item = String>) -> String {
    xs.collect::<Vec<_>>().join(";")
}
