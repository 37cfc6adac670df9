//! Entry-fee simultaneous auctions for independent additive bidders.
//!
//! The crate covers value distributions and ironing, single-item auction
//! equilibria and interim curves, type-loss bounds, entry-fee mechanisms, the
//! virtual-welfare revenue decomposition, online learning of reserves and fees,
//! and credibility checks in the message game.

pub mod credibility;
pub mod dist;
pub mod entry_fee;
pub mod error;
pub mod instance;
pub mod market;
pub mod mc;
pub mod online;
pub mod quad;
pub mod revenue_bounds;
pub mod rng;
pub mod single_item;
pub mod typeloss;

pub use dist::{ValueDistribution, VirtualValueTable};
pub use error::{Error, Result};
pub use instance::Instance;
pub use market::{Market, UtilityCurves};
pub use mc::Estimate;
pub use rng::RngStream;
