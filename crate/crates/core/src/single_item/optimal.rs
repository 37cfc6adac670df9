use crate::dist::{ValueDistribution, VirtualValueTable};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::mc::{expect_profiles, Estimate};
use crate::rng::RngStream;

/// Optimal single-item revenue `E[max(0, max_i phi~_i(t_i))]`.
pub fn myerson_optimal_revenue(
    ds: &[&ValueDistribution],
    tables: &[&VirtualValueTable],
    n_samples: usize,
    stream: &RngStream,
) -> Result<Estimate> {
    if ds.len() != tables.len() || ds.is_empty() {
        return Err(Error::InvalidArgument("need one virtual-value table per bidder".into()));
    }
    let inst = Instance::new(ds.iter().map(|d| vec![(*d).clone()]).collect())?;
    let est = expect_profiles(&inst, n_samples, stream, 1, |t, out| {
        out[0] = t
            .iter()
            .zip(tables)
            .map(|(&v, tab)| tab.ironed_plus(v))
            .fold(0.0, f64::max);
    });
    Ok(est[0])
}
