use auctionlab_bench::{message_game, uniform, uniform_market};
use auctionlab_core::dist::{iron, DEFAULT_IRON_GRID};
use auctionlab_core::entry_fee::{compute_entry_fees, compute_r_thresholds, simulate_round, MechanismConfig, Variant};
use auctionlab_core::online::{Algo, Bandit};
use auctionlab_core::single_item::{symmetric_equilibrium, AuctionFormat, InterimOptions};
use auctionlab_core::{Instance, Market, RngStream, ValueDistribution};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn ironing(c: &mut Criterion) {
    let mut g = c.benchmark_group("iron");
    let texp = ValueDistribution::texp(2.0, 1.0).unwrap();
    for cells in [512, 2048, 8192] {
        g.bench_with_input(BenchmarkId::new("texp", cells), &cells, |b, &cells| {
            b.iter(|| iron(black_box(&texp), cells).unwrap())
        });
    }
    let fine = uniform().discretize_step(1.0 / 1024.0).unwrap();
    g.bench_function("grid-1024", |b| {
        b.iter(|| iron(black_box(&fine), DEFAULT_IRON_GRID).unwrap())
    });
    g.finish();
}

fn equilibrium(c: &mut Criterion) {
    let mut g = c.benchmark_group("equilibrium");
    let d = uniform();
    for format in [AuctionFormat::FirstPrice, AuctionFormat::AllPay] {
        g.bench_function(format.to_string(), |b| {
            b.iter(|| symmetric_equilibrium(format, black_box(&d), 3).unwrap())
        });
    }
    g.finish();
}

fn market(c: &mut Criterion) {
    let inst = Instance::iid(3, 2, &uniform()).unwrap();
    let opts = InterimOptions {
        n_samples: 20_000,
        ..InterimOptions::default()
    };
    c.bench_function("market/fp-3x2", |b| {
        b.iter(|| {
            Market::build(
                black_box(&inst),
                AuctionFormat::FirstPrice,
                &[],
                &opts,
                &RngStream::new(1),
            )
            .unwrap()
        })
    });
}

fn rounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("round");
    let mk = uniform_market(3, 4, AuctionFormat::SecondPrice);
    let fees = compute_entry_fees(&compute_r_thresholds(&mk.curves, &mk.inst)).fees;
    for variant in [
        Variant::Ea,
        Variant::RandEa { delta: 0.1 },
        Variant::GhostEa,
        Variant::Simultaneous,
    ] {
        let cfg = MechanismConfig::new(variant, mk.clone(), fees.clone()).unwrap();
        let mut rng = RngStream::new(2).rng();
        g.bench_function(cfg.label(), |b| {
            b.iter(|| simulate_round(black_box(&cfg), &mut rng).unwrap())
        });
    }
    g.finish();
}

fn bandit(c: &mut Criterion) {
    let mut g = c.benchmark_group("bandit");
    for algo in [Algo::Ucb, Algo::Exp3] {
        let mut bandit = Bandit::new(algo, 256, 1_000_000);
        let mut rng = RngStream::new(3).rng();
        let mut k = 0u32;
        g.bench_function(format!("{algo:?}-256"), |b| {
            b.iter(|| {
                let arm = bandit.select(&mut rng);
                k = k.wrapping_add(1);
                bandit.update(arm, (k % 7) as f64 / 7.0);
            })
        });
    }
    g.finish();
}

fn credibility(c: &mut Criterion) {
    let mut g = c.benchmark_group("credibility");
    g.sample_size(10);
    for format in [AuctionFormat::FirstPrice, AuctionFormat::AllPay] {
        let game = message_game(format);
        g.bench_function(game.label(), |b| b.iter(|| game.search_safe_deviations().unwrap()));
    }
    g.finish();
}

criterion_group!(benches, ironing, equilibrium, market, rounds, bandit, credibility);
criterion_main!(benches);
