use crate::dist::ValueDistribution;
use crate::error::{Error, Result};
use rand::Rng;

/// `n` bidders, `m` items, independent values `t_ij ~ D_ij` capped at `H`.
///
/// Type profiles are flat slices indexed `i * m + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    cap: f64,
    dists: Vec<ValueDistribution>,
}

impl Instance {
    /// `rows[i][j]` is `D_ij`. Every distribution is re-capped at the common `H`.
    pub fn new(rows: Vec<Vec<ValueDistribution>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument(
                "instance needs a non-empty rectangular n x m table of distributions".into(),
            ));
        }
        let cap = rows.iter().flatten().map(|d| d.cap()).fold(0.0, f64::max);
        Self::with_cap(rows, cap)
    }

    pub fn with_cap(rows: Vec<Vec<ValueDistribution>>, cap: f64) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument(
                "instance needs a non-empty rectangular n x m table of distributions".into(),
            ));
        }
        let dists = rows
            .into_iter()
            .flatten()
            .map(|d| d.with_cap(cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, m, cap, dists })
    }

    pub fn iid(n: usize, m: usize, d: &ValueDistribution) -> Result<Self> {
        Self::new(vec![vec![d.clone(); m]; n])
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn dist(&self, i: usize, j: usize) -> &ValueDistribution {
        &self.dists[i * self.m + j]
    }

    pub fn bidder(&self, i: usize) -> &[ValueDistribution] {
        &self.dists[i * self.m..(i + 1) * self.m]
    }

    /// Distributions of all bidders for item `j`.
    pub fn item(&self, j: usize) -> Vec<&ValueDistribution> {
        (0..self.n).map(|i| self.dist(i, j)).collect()
    }

    /// Single-item instance for item `j`.
    pub fn item_instance(&self, j: usize) -> Instance {
        Instance {
            n: self.n,
            m: 1,
            cap: self.cap,
            dists: self.item(j).into_iter().cloned().collect(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.dists.iter().all(ValueDistribution::is_discrete)
    }

    /// Whether bidders are i.i.d. on each item (distributions may differ across items).
    pub fn symmetric_per_item(&self) -> bool {
        (0..self.m).all(|j| (1..self.n).all(|i| self.dist(i, j) == self.dist(0, j)))
    }

    /// Number of type profiles when all distributions are discrete.
    pub fn profile_count(&self) -> Option<u64> {
        let mut c: u64 = 1;
        for d in &self.dists {
            c = c.checked_mul(d.atoms()?.len() as u64)?;
        }
        Some(c)
    }

    pub fn sample_profile<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(&self.dists) {
            *o = d.sample(rng);
        }
    }

    /// Calls `f(profile, probability)` for every profile of a discrete instance.
    pub fn for_each_profile(&self, mut f: impl FnMut(&[f64], f64)) -> Result<()> {
        let atoms: Vec<&[(f64, f64)]> = self
            .dists
            .iter()
            .map(ValueDistribution::atoms)
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidArgument("profile enumeration needs discrete distributions".into()))?;
        let k = atoms.len();
        let mut idx = vec![0usize; k];
        let mut t = vec![0.0; k];
        loop {
            let mut p = 1.0;
            for c in 0..k {
                let (v, w) = atoms[c][idx[c]];
                t[c] = v;
                p *= w;
            }
            f(&t, p);
            let mut c = k;
            loop {
                if c == 0 {
                    return Ok(());
                }
                c -= 1;
                idx[c] += 1;
                if idx[c] < atoms[c].len() {
                    break;
                }
                idx[c] = 0;
            }
        }
    }
}
