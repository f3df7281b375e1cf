//! Experiment descriptions: the JSON schema, validation, and resolution.
//!
//! Parsing is permissive (every field optional) so that [`validate`] can
//! report *every* problem in a document at once instead of stopping at the
//! first; a spec only reaches the runner once the violation list is empty.
//!
//! All physical quantities carry their unit in the field name
//! (`bandwidth_hz`, `snr_db`, `window_side_m`); densities are per square
//! meter. SNR is given in dB and converted to a linear ratio internally; an
//! absent or `null` `snr_db` selects the noiseless (interference-limited)
//! regime.

use std::fs;
use std::path::PathBuf;

use cachecast::content::{CachingDistribution, Combination, Popularity};
use cachecast::sim::SimConfig;
use cachecast::{NetworkConfig, Snr};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Desk-scale Monte-Carlo defaults: fast enough for a workstation.
pub const DESK_REALIZATIONS: usize = 100_000;
pub const DESK_WINDOW_SIDE: f64 = 100.0;
/// Full-fidelity Monte-Carlo scale selected by `--paper-fidelity`.
pub const PAPER_REALIZATIONS: usize = 4_000_000;
pub const PAPER_WINDOW_SIDE: f64 = 260.0;
/// Seed recorded in outputs when neither the document nor `--seed` gives one.
pub const DEFAULT_SEED: u64 = 42;

// ===========================================================================
// Raw (permissive) schema
// ===========================================================================

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<RawNetwork>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub popularity: Option<RawPopularity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<RawPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<RawSim>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs_density_per_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_density_per_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_loss_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_size: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPopularity {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zipf_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPolicy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Inline alternative to `path` for the explicit kind: the distribution
    /// as a list of combinations (1-based file indices) with probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<RawEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEntry {
    pub files: Vec<u64>,
    pub probability: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_baselines: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSim {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_side_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toroidal: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_unicast: Option<bool>,
    /// Fix the requested file (1-based) instead of sampling it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_request: Option<u64>,
}

/// Parses a JSON document into the permissive schema. Unknown fields and
/// type mismatches are reported with serde's line/column context.
pub fn parse(text: &str) -> Result<RawSpec, String> {
    serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))
}

/// Recursively merges `patch` onto `base`: objects merge key by key, every
/// other value (including arrays) replaces the base value outright.
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

// ===========================================================================
// Resolved spec
// ===========================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    Optimize,
    Simulate,
    Sweep,
    Reproduce,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Analyze => "analyze",
            Mode::Optimize => "optimize",
            Mode::Simulate => "simulate",
            Mode::Sweep => "sweep",
            Mode::Reproduce => "reproduce",
        }
    }
}

/// Popularity law, kept symbolic so sweeps over the catalog or the Zipf
/// exponent can rebuild it per grid point.
#[derive(Debug, Clone)]
pub enum PopularitySpec {
    Zipf(f64),
    Explicit(Vec<f64>),
}

impl PopularitySpec {
    /// Materializes the law for a catalog of `n` files.
    pub fn build(&self, n: usize) -> cachecast::Result<Popularity> {
        match self {
            PopularitySpec::Zipf(g) => Popularity::zipf(n, *g),
            PopularitySpec::Explicit(v) => Popularity::arbitrary_order(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Two-step design: water-filled marginals, then combination refinement.
    Designed,
    /// Water-filled marginals realized by their staircase decomposition.
    Waterfill,
    /// Projected gradient ascent over all cache combinations.
    Gradient,
    /// Distribution loaded from a file in the interchange text format.
    Explicit,
    MostPopular,
    PopularitySampled,
    UniformRandom,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Designed => "designed",
            PolicyKind::Waterfill => "waterfill",
            PolicyKind::Gradient => "gradient",
            PolicyKind::Explicit => "explicit",
            PolicyKind::MostPopular => "most_popular",
            PolicyKind::PopularitySampled => "popularity_sampled",
            PolicyKind::UniformRandom => "uniform_random",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "designed" => PolicyKind::Designed,
            "waterfill" => PolicyKind::Waterfill,
            "gradient" => PolicyKind::Gradient,
            "explicit" => PolicyKind::Explicit,
            "most_popular" => PolicyKind::MostPopular,
            "popularity_sampled" => PolicyKind::PopularitySampled,
            "uniform_random" => PolicyKind::UniformRandom,
            _ => return None,
        })
    }

    /// Whether the kind produces a distribution by optimization.
    pub fn is_designable(self) -> bool {
        matches!(
            self,
            PolicyKind::Designed | PolicyKind::Waterfill | PolicyKind::Gradient
        )
    }
}

const POLICY_KINDS: &str =
    "designed, waterfill, gradient, explicit, most_popular, popularity_sampled, uniform_random";

#[derive(Debug, Clone)]
pub struct PolicyChoice {
    pub kind: PolicyKind,
    /// Distribution loaded for the `explicit` kind.
    pub explicit: Option<CachingDistribution>,
    pub path: Option<PathBuf>,
    pub candidate_budget: usize,
    pub max_iters: usize,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    SnrDb,
    BsDensity,
    UserDensity,
    CacheSize,
    CatalogSize,
    ZipfGamma,
    TargetRate,
    Bandwidth,
    PathLossExponent,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::SnrDb => "snr_db",
            SweepParam::BsDensity => "bs_density_per_m2",
            SweepParam::UserDensity => "user_density_per_m2",
            SweepParam::CacheSize => "cache_size",
            SweepParam::CatalogSize => "catalog_size",
            SweepParam::ZipfGamma => "zipf_gamma",
            SweepParam::TargetRate => "target_rate_bps",
            SweepParam::Bandwidth => "bandwidth_hz",
            SweepParam::PathLossExponent => "path_loss_exponent",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "snr_db" => SweepParam::SnrDb,
            "bs_density_per_m2" => SweepParam::BsDensity,
            "user_density_per_m2" => SweepParam::UserDensity,
            "cache_size" => SweepParam::CacheSize,
            "catalog_size" => SweepParam::CatalogSize,
            "zipf_gamma" => SweepParam::ZipfGamma,
            "target_rate_bps" => SweepParam::TargetRate,
            "bandwidth_hz" => SweepParam::Bandwidth,
            "path_loss_exponent" => SweepParam::PathLossExponent,
        _ => return None,
        })
    }

    fn integer_valued(self) -> bool {
        matches!(self, SweepParam::CacheSize | SweepParam::CatalogSize)
    }
}

const SWEEP_PARAMS: &str = "snr_db, bs_density_per_m2, user_density_per_m2, cache_size, \
     catalog_size, zipf_gamma, target_rate_bps, bandwidth_hz, path_loss_exponent";

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub include_baselines: bool,
}

/// A fully validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: Mode,
    pub network: NetworkConfig,
    pub snr_db: Option<f64>,
    pub popularity: PopularitySpec,
    pub policy: PolicyChoice,
    pub sweep: Option<SweepSpec>,
    pub sim: SimConfig,
    pub output: Option<String>,
}

impl Resolved {
    /// The popularity law of the base configuration.
    pub fn base_popularity(&self) -> cachecast::Result<Popularity> {
        self.popularity.build(self.network.catalog_size)
    }

    /// Normalized spec with every default materialized, for output headers.
    pub fn normalized_json(&self) -> Value {
        let popularity = match &self.popularity {
            PopularitySpec::Zipf(g) => json!({ "zipf_gamma": g }),
            PopularitySpec::Explicit(v) => json!({ "explicit": v }),
        };
        let mut policy = json!({ "kind": self.policy.kind.name() });
        match self.policy.kind {
            PolicyKind::Explicit => {
                if let Some(p) = &self.policy.path {
                    policy["path"] = json!(p.display().to_string());
                } else if let Some(d) = &self.policy.explicit {
                    let entries: Vec<Value> = d
                        .entries()
                        .iter()
                        .map(|(c, &p)| {
                            json!({
                                "files": c.files().iter().map(|f| f + 1).collect::<Vec<u32>>(),
                                "probability": p,
                            })
                        })
                        .collect();
                    policy["entries"] = json!(entries);
                }
            }
            PolicyKind::Designed => {
                policy["candidate_budget"] = json!(self.policy.candidate_budget);
            }
            PolicyKind::Gradient => {
                policy["candidate_budget"] = json!(self.policy.candidate_budget);
                policy["max_iters"] = json!(self.policy.max_iters);
                policy["step"] = json!(self.policy.step);
            }
            _ => {}
        }
        let mut doc = json!({
            "mode": self.mode.name(),
            "network": {
                "bs_density_per_m2": self.network.bs_density,
                "user_density_per_m2": self.network.user_density,
                "path_loss_exponent": self.network.path_loss_exp,
                "snr_db": self.snr_db,
                "bandwidth_hz": self.network.bandwidth_hz,
                "target_rate_bps": self.network.target_rate_bps,
                "catalog_size": self.network.catalog_size,
                "cache_size": self.network.cache_size,
            },
            "popularity": popularity,
            "policy": policy,
            "sim": {
                "window_side_m": self.sim.window_side,
                "realizations": self.sim.realizations,
                "seed": self.sim.seed,
                "toroidal": self.sim.toroidal,
                "measure_unicast": self.sim.measure_unicast,
                "pinned_request": self.sim.pinned_request.map(|f| f + 1),
            },
        });
        if let Some(sw) = &self.sweep {
            doc["sweep"] = json!({
                "parameter": sw.parameter.name(),
                "values": sw.values,
                "include_baselines": sw.include_baselines,
            });
        }
        if let Some(out) = &self.output {
            doc["output"] = json!(out);
        }
        doc
    }
}

// ===========================================================================
// Validation
// ===========================================================================

/// Validates `raw` for use in mode `mode`, collecting every violation.
///
/// Returns the resolved experiment only when the document is fully usable;
/// otherwise the complete list of problems, one message per violation.
pub fn validate(raw: &RawSpec, mode: Mode) -> Result<Resolved, Vec<String>> {
    let mut errs: Vec<String> = Vec::new();

    if let Some(m) = &raw.mode {
        let known = matches!(
            m.as_str(),
            "analyze" | "optimize" | "simulate" | "sweep" | "reproduce"
        );
        if !known {
            errs.push(format!(
                "mode: unknown mode '{m}' (expected analyze, optimize, simulate, sweep, or reproduce)"
            ));
        } else if m != mode.name() {
            errs.push(format!(
                "mode: config says '{m}' but the command line asks for '{}'",
                mode.name()
            ));
        }
    }

    let network = validate_network(raw.network.as_ref(), &mut errs);
    let popularity = validate_popularity(raw.popularity.as_ref(), network.as_ref(), &mut errs);
    let policy = validate_policy(raw.policy.as_ref(), mode, network.as_ref(), &mut errs);
    let sweep = validate_sweep(
        raw.sweep.as_ref(),
        mode,
        network.as_ref(),
        popularity.as_ref(),
        policy.as_ref(),
        &mut errs,
    );
    let sim = validate_sim(raw.sim.as_ref(), network.as_ref(), &mut errs);

    if !errs.is_empty() {
        return Err(errs);
    }
    let (network, snr_db) = network.expect("validated");
    Ok(Resolved {
        mode,
        network,
        snr_db,
        popularity: popularity.expect("validated"),
        policy: policy.expect("validated"),
        sweep,
        sim: sim.expect("validated"),
        output: raw.output.clone(),
    })
}

fn require<T: Copy>(
    value: Option<T>,
    field: &str,
    errs: &mut Vec<String>,
) -> Option<T> {
    if value.is_none() {
        errs.push(format!("{field} is required"));
    }
    value
}

fn validate_network(
    raw: Option<&RawNetwork>,
    errs: &mut Vec<String>,
) -> Option<(NetworkConfig, Option<f64>)> {
    let Some(net) = raw else {
        errs.push("network section is required".to_string());
        return None;
    };
    let before = errs.len();
    let bs = require(net.bs_density_per_m2, "network.bs_density_per_m2", errs);
    let users = require(net.user_density_per_m2, "network.user_density_per_m2", errs);
    let alpha = require(net.path_loss_exponent, "network.path_loss_exponent", errs);
    let bw = require(net.bandwidth_hz, "network.bandwidth_hz", errs);
    let rate = require(net.target_rate_bps, "network.target_rate_bps", errs);
    let n = require(net.catalog_size, "network.catalog_size", errs);
    let k = require(net.cache_size, "network.cache_size", errs);

    if let Some(a) = alpha {
        if !(a > 2.0) || !a.is_finite() {
            errs.push(format!(
                "network.path_loss_exponent: path loss exponent must exceed 2 (got {a})"
            ));
        }
    }
    if let Some(b) = bs {
        if !(b > 0.0) || !b.is_finite() {
            errs.push(format!(
                "network.bs_density_per_m2 must be finite and positive (got {b})"
            ));
        }
    }
    if let Some(u) = users {
        if !(u >= 0.0) || !u.is_finite() {
            errs.push(format!(
                "network.user_density_per_m2 must be finite and non-negative (got {u})"
            ));
        }
    }
    if let Some(w) = bw {
        if !(w > 0.0) || !w.is_finite() {
            errs.push(format!(
                "network.bandwidth_hz must be finite and positive (got {w})"
            ));
        }
    }
    if let Some(r) = rate {
        if !(r > 0.0) || !r.is_finite() {
            errs.push(format!(
                "network.target_rate_bps must be finite and positive (got {r})"
            ));
        }
    }
    if let Some(s) = net.snr_db {
        if !s.is_finite() {
            errs.push(format!("network.snr_db must be finite (got {s})"));
        }
    }
    if let Some(n) = n {
        if n == 0 {
            errs.push("network.catalog_size must be at least 1".to_string());
        }
    }
    match (n, k) {
        (_, Some(0)) => errs.push("network.cache_size must be at least 1".to_string()),
        (Some(n), Some(k)) if k > n => errs.push(format!(
            "network.cache_size ({k}) must not exceed catalog_size ({n})"
        )),
        _ => {}
    }
    if errs.len() > before {
        return None;
    }
    let snr_db = net.snr_db;
    let cfg = NetworkConfig {
        bs_density: bs.unwrap(),
        user_density: users.unwrap(),
        path_loss_exp: alpha.unwrap(),
        bandwidth_hz: bw.unwrap(),
        target_rate_bps: rate.unwrap(),
        snr: snr_db.map_or(Snr::Infinite, Snr::from_db),
        catalog_size: n.unwrap() as usize,
        cache_size: k.unwrap() as usize,
    };
    Some((cfg, snr_db))
}

fn validate_popularity(
    raw: Option<&RawPopularity>,
    network: Option<&(NetworkConfig, Option<f64>)>,
    errs: &mut Vec<String>,
) -> Option<PopularitySpec> {
    let Some(pop) = raw else {
        errs.push("popularity section is required".to_string());
        return None;
    };
    match (&pop.zipf_gamma, &pop.explicit) {
        (Some(_), Some(_)) => {
            errs.push(
                "popularity: give either zipf_gamma or explicit, not both".to_string(),
            );
            None
        }
        (None, None) => {
            errs.push("popularity: one of zipf_gamma or explicit is required".to_string());
            None
        }
        (Some(g), None) => {
            if !(g.is_finite() && *g >= 0.0) {
                errs.push(format!(
                    "popularity.zipf_gamma must be finite and non-negative (got {g})"
                ));
                return None;
            }
            Some(PopularitySpec::Zipf(*g))
        }
        (None, Some(v)) => {
            if let Some((cfg, _)) = network {
                if v.len() != cfg.catalog_size {
                    errs.push(format!(
                        "popularity.explicit has {} entries but network.catalog_size is {}",
                        v.len(),
                        cfg.catalog_size
                    ));
                    return None;
                }
            }
            match Popularity::arbitrary_order(v.clone()) {
                Ok(_) => Some(PopularitySpec::Explicit(v.clone())),
                Err(e) => {
                    errs.push(format!("popularity.explicit: {e}"));
                    None
                }
            }
        }
    }
}

fn validate_policy(
    raw: Option<&RawPolicy>,
    mode: Mode,
    network: Option<&(NetworkConfig, Option<f64>)>,
    errs: &mut Vec<String>,
) -> Option<PolicyChoice> {
    let Some(pol) = raw else {
        errs.push("policy section is required".to_string());
        return None;
    };
    let kind = match &pol.kind {
        None => {
            errs.push(format!("policy.kind is required (one of: {POLICY_KINDS})"));
            return None;
        }
        Some(k) => match PolicyKind::from_name(k) {
            Some(k) => k,
            None => {
                errs.push(format!(
                    "policy.kind: unknown kind '{k}' (one of: {POLICY_KINDS})"
                ));
                return None;
            }
        },
    };
    if mode == Mode::Optimize && !kind.is_designable() {
        errs.push(format!(
            "policy.kind: optimize requires a designable kind (designed, waterfill, or gradient), got '{}'",
            kind.name()
        ));
    }
    for (name, v) in [("candidate_budget", pol.candidate_budget), ("max_iters", pol.max_iters)] {
        if v == Some(0) {
            errs.push(format!("policy.{name} must be at least 1"));
        }
    }
    if let Some(s) = pol.step {
        if !(s > 0.0) || !s.is_finite() {
            errs.push(format!("policy.step must be finite and positive (got {s})"));
        }
    }

    let mut explicit = None;
    if kind == PolicyKind::Explicit {
        match (&pol.path, &pol.entries) {
            (None, None) => errs.push(
                "policy: the explicit kind needs either path or entries".to_string(),
            ),
            (Some(_), Some(_)) => errs.push(
                "policy: give either path or entries, not both".to_string(),
            ),
            (Some(p), None) => match load_distribution(p) {
                Err(e) => errs.push(format!("policy.path ({p}): {e}")),
                Ok(d) => {
                    if let Some((cfg, _)) = network {
                        if d.catalog_size() != cfg.catalog_size || d.cache_size() != cfg.cache_size
                        {
                            errs.push(format!(
                                "policy.path ({p}): distribution is over N={}, K={} but the network has N={}, K={}",
                                d.catalog_size(),
                                d.cache_size(),
                                cfg.catalog_size,
                                cfg.cache_size
                            ));
                        } else {
                            explicit = Some(d);
                        }
                    } else {
                        explicit = Some(d);
                    }
                }
            },
            (None, Some(es)) => match build_inline(es, network) {
                Ok(d) => explicit = Some(d),
                Err(e) => errs.push(format!("policy.entries: {e}")),
            },
        }
    } else if pol.path.is_some() || pol.entries.is_some() {
        errs.push(format!(
            "policy.path and policy.entries only apply to the explicit kind, not '{}'",
            kind.name()
        ));
    }

    Some(PolicyChoice {
        kind,
        explicit,
        path: pol.path.as_ref().map(PathBuf::from),
        candidate_budget: pol
            .candidate_budget
            .map(|b| b as usize)
            .unwrap_or(cachecast::optimize::DEFAULT_CANDIDATE_BUDGET),
        max_iters: pol
            .max_iters
            .map(|m| m as usize)
            .unwrap_or_else(|| cachecast::optimize::GradientOptions::default().max_iters),
        step: pol
            .step
            .unwrap_or_else(|| cachecast::optimize::GradientOptions::default().step),
    })
}

fn load_distribution(path: &str) -> Result<CachingDistribution, String> {
    let file = fs::File::open(path).map_err(|e| e.to_string())?;
    CachingDistribution::from_text(std::io::BufReader::new(file)).map_err(|e| e.to_string())
}

fn build_inline(
    entries: &[RawEntry],
    network: Option<&(NetworkConfig, Option<f64>)>,
) -> Result<CachingDistribution, String> {
    let Some((cfg, _)) = network else {
        return Err("cannot be checked without a valid network section".to_string());
    };
    let mut built = Vec::with_capacity(entries.len());
    for e in entries {
        let mut files = Vec::with_capacity(e.files.len());
        for &f in &e.files {
            if f == 0 {
                return Err("file indices are 1-based; 0 is not a file".to_string());
            }
            files.push((f - 1) as u32);
        }
        let combo = Combination::new(files).map_err(|er| er.to_string())?;
        built.push((combo, e.probability));
    }
    CachingDistribution::new(cfg.catalog_size, cfg.cache_size, built).map_err(|e| e.to_string())
}

fn validate_sweep(
    raw: Option<&RawSweep>,
    mode: Mode,
    network: Option<&(NetworkConfig, Option<f64>)>,
    popularity: Option<&PopularitySpec>,
    policy: Option<&PolicyChoice>,
    errs: &mut Vec<String>,
) -> Option<SweepSpec> {
    let Some(sw) = raw else {
        if mode == Mode::Sweep {
            errs.push("sweep section is required in sweep mode".to_string());
        }
        return None;
    };
    let parameter = match &sw.parameter {
        None => {
            errs.push(format!("sweep.parameter is required (one of: {SWEEP_PARAMS})"));
            None
        }
        Some(p) => match SweepParam::from_name(p) {
            Some(p) => Some(p),
            None => {
                errs.push(format!(
                    "sweep.parameter: '{p}' does not name a network parameter (one of: {SWEEP_PARAMS})"
                ));
                None
            }
        },
    };
    let values = match &sw.values {
        None => {
            errs.push("sweep.values is required".to_string());
            None
        }
        Some(v) if v.is_empty() => {
            errs.push("sweep.values must not be empty".to_string());
            None
        }
        Some(v) => {
            if v.iter().any(|x| !x.is_finite()) {
                errs.push("sweep.values must all be finite".to_string());
                None
            } else {
                Some(v.clone())
            }
        }
    };

    let (Some(parameter), Some(values)) = (parameter, values) else {
        return None;
    };
    if parameter.integer_valued() {
        for &v in &values {
            if v.fract() != 0.0 || v < 1.0 {
                errs.push(format!(
                    "sweep.values: {} takes positive integers, got {v}",
                    parameter.name()
                ));
            }
        }
    }
    if parameter == SweepParam::CacheSize {
        if let Some((cfg, _)) = network {
            for &v in &values {
                if v > cfg.catalog_size as f64 {
                    errs.push(format!(
                        "sweep.values: cache_size {v} exceeds catalog_size {}",
                        cfg.catalog_size
                    ));
                }
            }
        }
    }
    if parameter == SweepParam::ZipfGamma {
        if let Some(PopularitySpec::Explicit(_)) = popularity {
            errs.push(
                "sweep.parameter: cannot sweep zipf_gamma with an explicit popularity vector"
                    .to_string(),
            );
        }
        for &v in &values {
            if v < 0.0 {
                errs.push(format!("sweep.values: zipf_gamma must be non-negative, got {v}"));
            }
        }
    }
    if parameter == SweepParam::CatalogSize {
        if let Some(PopularitySpec::Explicit(_)) = popularity {
            errs.push(
                "sweep.parameter: cannot sweep catalog_size with an explicit popularity vector"
                    .to_string(),
            );
        }
    }
    if matches!(parameter, SweepParam::CacheSize | SweepParam::CatalogSize) {
        if let Some(pol) = policy {
            if pol.kind == PolicyKind::Explicit {
                errs.push(format!(
                    "sweep.parameter: cannot sweep {} with a fixed explicit distribution",
                    parameter.name()
                ));
            }
        }
    }
    if matches!(
        parameter,
        SweepParam::BsDensity | SweepParam::UserDensity | SweepParam::TargetRate | SweepParam::Bandwidth
    ) {
        let lower = if parameter == SweepParam::UserDensity { 0.0 } else { f64::MIN_POSITIVE };
        for &v in &values {
            if v < lower {
                errs.push(format!(
                    "sweep.values: {} must be positive, got {v}",
                    parameter.name()
                ));
            }
        }
    }
    if parameter == SweepParam::PathLossExponent {
        for &v in &values {
            if v <= 2.0 {
                errs.push(format!(
                    "sweep.values: path loss exponent must exceed 2, got {v}"
                ));
            }
        }
    }

    Some(SweepSpec {
        parameter,
        values,
        include_baselines: sw.include_baselines.unwrap_or(false),
    })
}

fn validate_sim(
    raw: Option<&RawSim>,
    network: Option<&(NetworkConfig, Option<f64>)>,
    errs: &mut Vec<String>,
) -> Option<SimConfig> {
    let mut sim = SimConfig::new(DESK_WINDOW_SIDE, DESK_REALIZATIONS, DEFAULT_SEED);
    let Some(raw) = raw else {
        return Some(sim);
    };
    if let Some(side) = raw.window_side_m {
        if !(side > 0.0) || !side.is_finite() {
            errs.push(format!(
                "sim.window_side_m must be finite and positive (got {side})"
            ));
        } else {
            sim.window_side = side;
        }
    }
    if let Some(r) = raw.realizations {
        if r == 0 {
            errs.push("sim.realizations must be at least 1".to_string());
        } else {
            sim.realizations = r as usize;
        }
    }
    if let Some(seed) = raw.seed {
        sim.seed = seed;
    }
    if let Some(t) = raw.toroidal {
        sim.toroidal = t;
    }
    if let Some(u) = raw.measure_unicast {
        sim.measure_unicast = u;
    }
    if let Some(f) = raw.pinned_request {
        if f == 0 {
            errs.push("sim.pinned_request is 1-based; 0 is not a file".to_string());
        } else {
            if let Some((cfg, _)) = network {
                if f as usize > cfg.catalog_size {
                    errs.push(format!(
                        "sim.pinned_request ({f}) is outside the catalog of {}",
                        cfg.catalog_size
                    ));
                }
            }
            sim.pinned_request = Some((f - 1) as u32);
        }
    }
    Some(sim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_doc() -> Value {
        json!({
            "mode": "analyze",
            "network": {
                "bs_density_per_m2": 0.01,
                "user_density_per_m2": 0.1,
                "path_loss_exponent": 4.0,
                "snr_db": 30.0,
                "bandwidth_hz": 1.0e7,
                "target_rate_bps": 5.0e5,
                "catalog_size": 5,
                "cache_size": 2
            },
            "popularity": { "zipf_gamma": 1.2 },
            "policy": { "kind": "designed" }
        })
    }

    fn parse_value(v: &Value) -> RawSpec {
        parse(&v.to_string()).expect("parseable")
    }

    #[test]
    fn valid_document_resolves() {
        let r = validate(&parse_value(&full_doc()), Mode::Analyze).expect("valid");
        assert_eq!(r.network.catalog_size, 5);
        assert_eq!(r.policy.kind, PolicyKind::Designed);
        assert_eq!(r.sim.realizations, DESK_REALIZATIONS);
        assert_eq!(r.sim.seed, DEFAULT_SEED);
        assert!(r.network.snr.linear().is_some());
    }

    #[test]
    fn all_violations_are_reported_together() {
        let mut doc = full_doc();
        doc["network"]["path_loss_exponent"] = json!(1.5);
        doc["network"]["cache_size"] = json!(9);
        doc["popularity"] = json!({});
        let errs = validate(&parse_value(&doc), Mode::Analyze).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("must exceed 2")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("cache_size (9)")), "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("popularity")), "{errs:?}");
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn missing_fields_are_named() {
        let mut doc = full_doc();
        doc["network"]
            .as_object_mut()
            .unwrap()
            .remove("target_rate_bps");
        let errs = validate(&parse_value(&doc), Mode::Analyze).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("target_rate_bps")),
            "{errs:?}"
        );
    }

    #[test]
    fn absent_snr_means_noiseless() {
        let mut doc = full_doc();
        doc["network"].as_object_mut().unwrap().remove("snr_db");
        let r = validate(&parse_value(&doc), Mode::Analyze).expect("valid");
        assert!(r.network.snr.is_infinite());
        assert!(r.snr_db.is_none());
    }

    #[test]
    fn mode_mismatch_is_rejected() {
        let doc = full_doc();
        let errs = validate(&parse_value(&doc), Mode::Simulate).unwrap_err();
        assert!(errs[0].contains("'analyze'"), "{errs:?}");
    }

    #[test]
    fn unknown_fields_fail_at_parse() {
        let mut doc = full_doc();
        doc["network"]["snr"] = json!(30.0);
        assert!(parse(&doc.to_string()).is_err());
    }

    #[test]
    fn sweep_requires_a_real_parameter() {
        let mut doc = full_doc();
        doc["mode"] = json!("sweep");
        doc["sweep"] = json!({ "parameter": "frequency", "values": [1.0] });
        let errs = validate(&parse_value(&doc), Mode::Sweep).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("does not name a network parameter")),
            "{errs:?}"
        );
    }

    #[test]
    fn sweep_cross_constraints() {
        let mut doc = full_doc();
        doc["mode"] = json!("sweep");
        doc["popularity"] = json!({ "explicit": [0.5, 0.2, 0.15, 0.1, 0.05] });
        doc["sweep"] = json!({ "parameter": "zipf_gamma", "values": [0.4, 0.8] });
        let errs = validate(&parse_value(&doc), Mode::Sweep).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("explicit popularity")), "{errs:?}");

        let mut doc = full_doc();
        doc["mode"] = json!("sweep");
        doc["sweep"] = json!({ "parameter": "cache_size", "values": [2.5] });
        let errs = validate(&parse_value(&doc), Mode::Sweep).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("positive integers")), "{errs:?}");
    }

    #[test]
    fn optimize_rejects_reference_policies() {
        let mut doc = full_doc();
        doc["mode"] = json!("optimize");
        doc["policy"] = json!({ "kind": "most_popular" });
        let errs = validate(&parse_value(&doc), Mode::Optimize).unwrap_err();
        assert!(errs[0].contains("designable"), "{errs:?}");
    }

    #[test]
    fn explicit_policy_accepts_inline_entries() {
        let mut doc = full_doc();
        doc["policy"] = json!({
            "kind": "explicit",
            "entries": [
                { "files": [1, 2], "probability": 0.6811 },
                { "files": [1, 3], "probability": 0.3189 }
            ]
        });
        let r = validate(&parse_value(&doc), Mode::Analyze).expect("valid");
        let dist = r.policy.explicit.as_ref().expect("inline distribution");
        assert_eq!(dist.entries().len(), 2);
        let m = dist.marginals();
        assert!((m.values()[0] - 1.0).abs() < 1e-12);
        assert!((m.values()[1] - 0.6811).abs() < 1e-12);

        // Exactly one source must be given, and entries are validated deeply.
        let mut doc = full_doc();
        doc["policy"] = json!({ "kind": "explicit" });
        let errs = validate(&parse_value(&doc), Mode::Analyze).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("path") && e.contains("entries")), "{errs:?}");

        let mut doc = full_doc();
        doc["policy"] = json!({
            "kind": "explicit",
            "entries": [{ "files": [1, 2, 3], "probability": 1.0 }]
        });
        let errs = validate(&parse_value(&doc), Mode::Analyze).unwrap_err();
        assert!(!errs.is_empty(), "oversized combination must be rejected");
    }

    #[test]
    fn pinned_request_is_one_based() {
        let mut doc = full_doc();
        doc["sim"] = json!({ "pinned_request": 5 });
        let r = validate(&parse_value(&doc), Mode::Analyze).expect("valid");
        assert_eq!(r.sim.pinned_request, Some(4));

        let mut doc = full_doc();
        doc["sim"] = json!({ "pinned_request": 6 });
        let errs = validate(&parse_value(&doc), Mode::Analyze).unwrap_err();
        assert!(errs[0].contains("outside the catalog"), "{errs:?}");
    }

    #[test]
    fn merge_is_deep_for_objects_and_replacing_for_leaves() {
        let mut base = full_doc();
        merge(
            &mut base,
            &json!({ "network": { "snr_db": 20.0 }, "sim": { "realizations": 500 } }),
        );
        assert_eq!(base["network"]["snr_db"], json!(20.0));
        assert_eq!(base["network"]["catalog_size"], json!(5));
        assert_eq!(base["sim"]["realizations"], json!(500));
    }

    #[test]
    fn normalized_json_round_trips_through_validation() {
        let r = validate(&parse_value(&full_doc()), Mode::Analyze).expect("valid");
        let doc = r.normalized_json();
        let raw = parse(&doc.to_string()).expect("normalized form parses");
        let r2 = validate(&raw, Mode::Analyze).expect("normalized form validates");
        assert_eq!(r2.network, r.network);
        assert_eq!(r2.normalized_json(), doc);
    }
}
