//! Fixtures shared by the kernel benchmarks.

use auctionlab_core::credibility::MessageGameInstance;
use auctionlab_core::single_item::{AuctionFormat, InterimOptions};
use auctionlab_core::{Instance, Market, RngStream, ValueDistribution};

pub fn uniform() -> ValueDistribution {
    ValueDistribution::uniform(0.0, 1.0).unwrap()
}

pub fn uniform_market(n: usize, m: usize, format: AuctionFormat) -> Market {
    let inst = Instance::iid(n, m, &uniform()).unwrap();
    let opts = InterimOptions {
        n_samples: 20_000,
        ..InterimOptions::default()
    };
    Market::build(&inst, format, &[], &opts, &RngStream::new(1)).unwrap()
}

/// Three bidders, two items, two or three atoms each.
pub fn message_game(format: AuctionFormat) -> MessageGameInstance {
    let two = ValueDistribution::grid(vec![(0.2, 0.5), (1.0, 0.5)]).unwrap();
    let skew = ValueDistribution::grid(vec![(0.3, 0.7), (0.8, 0.3)]).unwrap();
    let rows = vec![
        vec![two.clone(), two.clone()],
        vec![skew.clone(), two.clone()],
        vec![two, skew],
    ];
    MessageGameInstance::new(Instance::new(rows).unwrap(), format, vec![0.05, 0.2, 0.4], None).unwrap()
}
