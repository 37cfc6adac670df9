//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! name = "sp-uniform-2x2"
//!
//! [instance]
//! n = 2
//! m = 2
//! dist = "uniform(0,1)"
//!
//! [mechanism]
//! format = "sp"
//! variant = "esp"
//! fees = "formula"
//! ```

use auctionlab_core::entry_fee::Variant;
use auctionlab_core::online::Algo;
use auctionlab_core::single_item::AuctionFormat;
use auctionlab_core::{Instance, ValueDistribution};
use serde::Deserialize;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let pos = pos.min(text.len());
    let before = &text[..pos];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(pos, |nl| pos - nl - 1) + 1;
    (line, col)
}

fn at(text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
    let (line, col) = span.map_or((1, 1), |s| line_col(text, s.start));
    ConfigError {
        line,
        col,
        message: message.into(),
    }
}

/// Bare or quoted key starting at byte `pos`.
fn key_at(text: &str, pos: usize) -> Option<String> {
    let rest = text.get(pos..)?;
    let key = match rest.strip_prefix('"') {
        Some(q) => &q[..q.find('"')?],
        None => {
            let end = rest
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
                .unwrap_or(rest.len());
            &rest[..end]
        }
    };
    (!key.is_empty()).then(|| key.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Spanned<i64>,
    name: Option<String>,
    instance: Spanned<RawInstance>,
    #[serde(default)]
    mechanism: RawMechanism,
    #[serde(default)]
    sampling: RawSampling,
    #[serde(default)]
    learn: RawLearn,
    #[serde(default)]
    equilibrium: RawEquilibrium,
    #[serde(default)]
    credibility: RawCredibility,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    n: Spanned<i64>,
    m: Spanned<i64>,
    #[serde(rename = "H")]
    cap: Option<Spanned<f64>>,
    dist: Option<Spanned<String>>,
    dists: Option<Vec<Vec<Spanned<String>>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawFees {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    format: Option<Spanned<String>>,
    variant: Option<Spanned<String>>,
    delta: Option<Spanned<f64>>,
    fees: Option<Spanned<RawFees>>,
    reserves: Option<Spanned<Vec<f64>>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    n_samples: Option<usize>,
    n_rounds: Option<usize>,
    grid_n: Option<usize>,
    entry_samples: Option<usize>,
    opt_samples: Option<usize>,
    iron_grid: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLearn {
    rounds: Option<usize>,
    algo: Option<Spanned<String>>,
    eps: Option<Spanned<f64>>,
    oracle_samples: Option<usize>,
    offline_samples: Option<usize>,
    seeds: Option<Vec<i64>>,
    min_ratio: Option<f64>,
    max_slope: Option<f64>,
    round_log: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEquilibrium {
    tolerance: Option<f64>,
    type_grid: Option<usize>,
    deviation_grid: Option<usize>,
    output_points: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCredibility {
    bids: Option<Vec<Vec<Vec<f64>>>>,
    expect: Option<Spanned<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeeSource {
    Formula,
    Zero,
    Manual(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct MechanismSpec {
    pub format: AuctionFormat,
    pub variant: Variant,
    pub fees: FeeSource,
    /// Common reserve per item.
    pub reserves: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    pub n_samples: usize,
    pub n_rounds: usize,
    pub grid_n: usize,
    pub entry_samples: usize,
    pub opt_samples: usize,
    pub iron_grid: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnSpec {
    pub rounds: usize,
    pub algo: Algo,
    /// `None` picks `(H m / T)^{1/3}`.
    pub eps: Option<f64>,
    pub oracle_samples: usize,
    pub offline_samples: usize,
    /// Seeds of the learning runs; the master seed when absent.
    pub seeds: Option<Vec<u64>>,
    pub min_ratio: f64,
    pub max_slope: f64,
    /// Also emit every round's log (large: one row per round per seed).
    pub round_log: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumSpec {
    pub tolerance: f64,
    pub type_grid: usize,
    pub deviation_grid: usize,
    pub output_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expectation {
    Credible,
    Exploitable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CredibilitySpec {
    pub bids: Option<Vec<Vec<Vec<f64>>>>,
    pub expect: Option<Expectation>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub instance: Instance,
    /// Distribution specs as written, `[i][j]`.
    pub dist_specs: Vec<Vec<String>>,
    pub mechanism: MechanismSpec,
    pub sampling: Sampling,
    pub learn: LearnSpec,
    pub equilibrium: EquilibriumSpec,
    pub credibility: CredibilitySpec,
}

pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    parse_config(&text, stem).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Parses and validates a config; `default_name` labels it when `name` is absent.
pub fn parse_config(text: &str, default_name: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let mut msg = e.message().trim_end().to_string();
        if msg.starts_with("duplicate key") {
            if let Some(key) = e.span().and_then(|s| key_at(text, s.start)) {
                msg = format!("duplicate key `{key}`");
            }
        }
        at(text, e.span(), msg)
    })?;

    let seed = *raw.seed.get_ref();
    if seed < 0 {
        return Err(at(text, Some(raw.seed.span()), "seed must be non-negative"));
    }

    let inst_span = raw.instance.span();
    let ri = raw.instance.into_inner();
    let count = |v: &Spanned<i64>, what: &str| -> Result<usize, ConfigError> {
        match usize::try_from(*v.get_ref()) {
            Ok(x) if x >= 1 => Ok(x),
            _ => Err(at(text, Some(v.span()), format!("{what} must be at least 1"))),
        }
    };
    let n = count(&ri.n, "n")?;
    let m = count(&ri.m, "m")?;
    let specs: Vec<Vec<Spanned<String>>> = match (ri.dist, ri.dists) {
        (Some(d), None) => vec![vec![d; m]; n],
        (None, Some(rows)) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != m) {
                return Err(at(text, Some(inst_span), format!("`dists` must be an {n} x {m} table")));
            }
            rows
        }
        (Some(d), Some(_)) => return Err(at(text, Some(d.span()), "give either `dist` or `dists`, not both")),
        (None, None) => return Err(at(text, Some(inst_span), "instance needs `dist` or `dists`")),
    };
    let mut rows = Vec::with_capacity(n);
    for row in &specs {
        let mut out = Vec::with_capacity(m);
        for s in row {
            let d: ValueDistribution = s
                .get_ref()
                .parse()
                .map_err(|e| at(text, Some(s.span()), format!("{e}")))?;
            out.push((d, s.span()));
        }
        rows.push(out);
    }
    let cap = match &ri.cap {
        Some(h) => {
            let v = *h.get_ref();
            if !(v.is_finite() && v > 0.0) {
                return Err(at(text, Some(h.span()), "H must be positive and finite"));
            }
            v
        }
        None => rows.iter().flatten().map(|(d, _)| d.support_hi()).fold(0.0, f64::max),
    };
    for (d, span) in rows.iter().flatten() {
        if d.support_hi() > cap + 1e-12 {
            return Err(at(
                text,
                Some(span.clone()),
                format!("distribution `{d}` is not supported within [0, H] with H = {cap}"),
            ));
        }
    }
    let instance = Instance::with_cap(
        rows.into_iter()
            .map(|r| r.into_iter().map(|(d, _)| d).collect())
            .collect(),
        cap,
    )
    .map_err(|e| at(text, Some(inst_span), e.to_string()))?;
    let dist_specs = specs
        .iter()
        .map(|r| r.iter().map(|s| s.get_ref().clone()).collect())
        .collect();

    let rm = raw.mechanism;
    let format = match &rm.format {
        Some(f) => f
            .get_ref()
            .parse()
            .map_err(|e| at(text, Some(f.span()), format!("{e}")))?,
        None => AuctionFormat::SecondPrice,
    };
    let mut variant: Variant = match &rm.variant {
        Some(v) => v
            .get_ref()
            .parse()
            .map_err(|e| at(text, Some(v.span()), format!("{e}")))?,
        None => Variant::Ea,
    };
    if let Some(d) = &rm.delta {
        let x = *d.get_ref();
        match variant {
            Variant::RandEa { .. } if x > 0.0 && x < 1.0 => variant = Variant::RandEa { delta: x },
            Variant::RandEa { .. } => return Err(at(text, Some(d.span()), "delta must lie in (0, 1)")),
            _ => return Err(at(text, Some(d.span()), "delta applies only to rand-EA variants")),
        }
    }
    let fees = match &rm.fees {
        None => FeeSource::Formula,
        Some(f) => match f.get_ref() {
            RawFees::Named(s) if s == "formula" => FeeSource::Formula,
            RawFees::Named(s) if s == "zero" => FeeSource::Zero,
            RawFees::Named(s) => {
                return Err(at(
                    text,
                    Some(f.span()),
                    format!("fees must be \"formula\", \"zero\" or a list, got `{s}`"),
                ))
            }
            RawFees::Values(v) => {
                if v.len() != n || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(at(
                        text,
                        Some(f.span()),
                        format!("fees need {n} finite non-negative values"),
                    ));
                }
                FeeSource::Manual(v.clone())
            }
        },
    };
    let reserves = match &rm.reserves {
        None => Vec::new(),
        Some(r) => {
            let v = r.get_ref();
            if v.len() != m || v.iter().any(|x| !(x.is_finite() && *x >= 0.0 && *x <= cap)) {
                return Err(at(text, Some(r.span()), format!("reserves need {m} values in [0, H]")));
            }
            v.clone()
        }
    };

    let rs = raw.sampling;
    let n_samples = rs.n_samples.unwrap_or(100_000);
    let sampling = Sampling {
        n_samples,
        n_rounds: rs.n_rounds.unwrap_or(100_000),
        grid_n: rs.grid_n.unwrap_or(512),
        entry_samples: rs.entry_samples.unwrap_or(n_samples),
        opt_samples: rs.opt_samples.unwrap_or(n_samples),
        iron_grid: rs.iron_grid.unwrap_or(2048),
    };
    if [
        sampling.n_samples,
        sampling.n_rounds,
        sampling.grid_n,
        sampling.entry_samples,
        sampling.opt_samples,
        sampling.iron_grid,
    ]
    .contains(&0)
    {
        return Err(at(text, None, "sampling sizes must be positive"));
    }

    let rl = raw.learn;
    let algo = match &rl.algo {
        Some(a) => a
            .get_ref()
            .parse()
            .map_err(|e| at(text, Some(a.span()), format!("{e}")))?,
        None => Algo::Ucb,
    };
    if let Some(e) = &rl.eps {
        if !(e.get_ref().is_finite() && *e.get_ref() > 0.0) {
            return Err(at(text, Some(e.span()), "eps must be positive"));
        }
    }
    let seeds = match rl.seeds {
        Some(s) if s.iter().any(|&x| x < 0) => return Err(at(text, None, "learn seeds must be non-negative")),
        Some(s) if !s.is_empty() => Some(s.into_iter().map(|x| x as u64).collect()),
        _ => None,
    };
    let learn = LearnSpec {
        rounds: rl.rounds.unwrap_or(200_000).max(1),
        algo,
        eps: rl.eps.map(Spanned::into_inner),
        oracle_samples: rl.oracle_samples.unwrap_or(50_000).max(1),
        offline_samples: rl.offline_samples.unwrap_or(100_000).max(1),
        seeds,
        min_ratio: rl.min_ratio.unwrap_or(0.9),
        max_slope: rl.max_slope.unwrap_or(0.9),
        round_log: rl.round_log.unwrap_or(false),
    };

    let re = raw.equilibrium;
    let equilibrium = EquilibriumSpec {
        tolerance: re.tolerance.unwrap_or(1e-3),
        type_grid: re.type_grid.unwrap_or(100).max(1),
        deviation_grid: re.deviation_grid.unwrap_or(400).max(1),
        output_points: re.output_points.unwrap_or(101).max(2),
    };

    let rc = raw.credibility;
    let expect = match &rc.expect {
        None => None,
        Some(s) => Some(match s.get_ref().as_str() {
            "credible" => Expectation::Credible,
            "exploitable" => Expectation::Exploitable,
            other => {
                return Err(at(
                    text,
                    Some(s.span()),
                    format!("expect must be \"credible\" or \"exploitable\", got `{other}`"),
                ))
            }
        }),
    };

    Ok(ExperimentConfig {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        seed: seed as u64,
        instance,
        dist_specs,
        mechanism: MechanismSpec {
            format,
            variant,
            fees,
            reserves,
        },
        sampling,
        learn,
        equilibrium,
        credibility: CredibilitySpec { bids: rc.bids, expect },
    })
}
