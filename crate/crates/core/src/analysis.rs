//! Success probability of the typical request, exactly as the caching
//! distribution shapes it.
//!
//! Conditioned on the typical user requesting file `n`, the serving station
//! is the nearest one caching `n`, and the transmission succeeds when the
//! per-file multicast rate beats the target. Two quantities couple here:
//!
//! * the *serving geometry*, governed solely by the marginal `T_n` (stations
//!   caching `n` form a Poisson process of density `T_n * bs_density`), and
//! * the *multicast load* `k` of the serving station — how many distinct
//!   cached files its users request — which divides the bandwidth.
//!
//! The load distribution follows from a station-level census: a station
//! caching file `m` sees no request for `m` with probability
//! `(1 + a_m * lambda_u / (3.5 * T_m * lambda_b))^-4.5`, obtained by mixing
//! the Poisson user count over the station's service area (the area law is
//! the standard gamma fit with shape 3.5). Given the cache combination, the
//! load minus one is a sum of independent Bernoulli indicators — a
//! Poisson-binomial variable — and the overall success probability mixes
//! these over the caching distribution.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::config::NetworkConfig;
use crate::content::{binomial, CachingDistribution, Combination, Marginals, Popularity};
use crate::coverage::CoverageKernel;
use crate::error::{Error, Result};
use crate::policy::CachePolicy;

// ===========================================================================
// Load distribution
// ===========================================================================

/// Distribution of the number of distinct files a serving station multicasts.
///
/// `probs()[j]` is the probability of load `j + 1`; the request that defines
/// the serving station always contributes, so the load ranges over `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPmf {
    probs: Vec<f64>,
}

impl LoadPmf {
    fn new(probs: Vec<f64>) -> Self {
        debug_assert!(probs.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        LoadPmf { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Expected number of multicast streams.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| (j + 1) as f64 * p)
            .sum()
    }
}

/// Probability that a station caching file `m` (marginal `t_m`) receives no
/// request for it from its own users. Continuously extended to `t_m = 0`,
/// where vanishing cache density means unbounded service areas and a request
/// arrives almost surely.
pub(crate) fn prob_no_request(a_m: f64, t_m: f64, cfg: &NetworkConfig) -> f64 {
    if t_m <= 0.0 {
        return 0.0;
    }
    if cfg.user_density == 0.0 {
        return 1.0;
    }
    let w = 1.0 + a_m * cfg.user_density / (3.5 * t_m * cfg.bs_density);
    w.powf(-4.5)
}

/// Derivative of [`prob_no_request`] in the marginal, likewise extended by
/// its (zero) limit at `t_m = 0`.
pub(crate) fn prob_no_request_dt(a_m: f64, t_m: f64, cfg: &NetworkConfig) -> f64 {
    if t_m <= 0.0 || cfg.user_density == 0.0 {
        return 0.0;
    }
    let beta = a_m * cfg.user_density / (3.5 * cfg.bs_density);
    let w = 1.0 + beta / t_m;
    4.5 * beta / (t_m * t_m) * w.powf(-5.5)
}

/// Probability mass function of a sum of independent Bernoulli variables
/// with the given success probabilities; index = number of successes.
pub(crate) fn poisson_binomial(success: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; success.len() + 1];
    pmf[0] = 1.0;
    for (j, &s) in success.iter().enumerate() {
        for c in (0..=j).rev() {
            pmf[c + 1] += pmf[c] * s;
            pmf[c] *= 1.0 - s;
        }
    }
    pmf
}

/// Load distribution at a station with cache `combo` serving a request for
/// `file`, under per-file marginals `marginals`.
///
/// Every file in the combination must have a strictly positive marginal
/// (a cached file with marginal zero is a contradiction).
pub fn load_pmf_for_combo(
    file: u32,
    combo: &Combination,
    marginals: &Marginals,
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<LoadPmf> {
    cfg.validate()?;
    check_catalog(pop, cfg)?;
    if marginals.len() != pop.len() {
        return Err(Error::InvalidConfig(format!(
            "marginals cover {} files, catalog has {}",
            marginals.len(),
            pop.len()
        )));
    }
    if combo.len() != cfg.cache_size {
        return Err(Error::Domain(format!(
            "combination holds {} files, caches hold {}",
            combo.len(),
            cfg.cache_size
        )));
    }
    if !combo.contains(file) {
        return Err(Error::Domain(format!(
            "file {} is not in the combination {:?}",
            file + 1,
            combo.files()
        )));
    }
    for &m in combo.files() {
        if marginals.get(m as usize) <= 0.0 {
            return Err(Error::SingularMarginal(format!(
                "file {} is in the cache but has marginal zero",
                m + 1
            )));
        }
    }
    let success: Vec<f64> = combo
        .files()
        .iter()
        .filter(|&&m| m != file)
        .map(|&m| 1.0 - prob_no_request(pop.get(m as usize), marginals.get(m as usize), cfg))
        .collect();
    Ok(LoadPmf::new(poisson_binomial(&success)))
}

/// Marginal load distribution for a request for `file`: the mixture of
/// [`load_pmf_for_combo`] over the combinations containing the file, weighted
/// by `p_i / T_file`.
pub fn load_pmf(
    file: u32,
    dist: &CachingDistribution,
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<LoadPmf> {
    cfg.validate()?;
    check_catalog(pop, cfg)?;
    check_distribution(dist, cfg)?;
    let marginals = dist.marginals();
    let t_file = marginals.get(file as usize);
    if t_file <= 0.0 {
        return Err(Error::SingularMarginal(format!(
            "file {} is never cached under this distribution",
            file + 1
        )));
    }
    let mut mix = vec![0.0; cfg.cache_size];
    for (combo, p) in dist.support() {
        if !combo.contains(file) {
            continue;
        }
        let pmf = load_pmf_for_combo(file, combo, &marginals, pop, cfg)?;
        for (acc, v) in mix.iter_mut().zip(pmf.probs()) {
            *acc += p / t_file * v;
        }
    }
    Ok(LoadPmf::new(mix))
}

// ===========================================================================
// Success probability
// ===========================================================================

/// Evaluation of a caching distribution: the success probability of the
/// typical request and its per-file decomposition.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Success probability of the typical request.
    pub q: f64,
    /// Success probability conditioned on each file being requested;
    /// `q` equals the popularity-weighted sum of these.
    pub per_file: Vec<f64>,
    /// Load distribution seen by a request for each file; `None` for files
    /// the distribution never caches.
    pub per_load: Option<Vec<Option<LoadPmf>>>,
    /// Popularity used in the evaluation (copied for reporting).
    pub popularity: Vec<f64>,
    /// Marginals of the evaluated distribution.
    pub marginals: Vec<f64>,
}

impl EvalReport {
    /// CSV rendering: one row per file (`file,a_n,T_n,q_n`, 1-based file
    /// labels) followed by a summary row aggregating each column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("file,a_n,T_n,q_n\n");
        let k: f64 = self.marginals.iter().sum();
        for (i, ((a, t), qn)) in self
            .popularity
            .iter()
            .zip(&self.marginals)
            .zip(&self.per_file)
            .enumerate()
        {
            let _ = writeln!(out, "{},{a},{t},{qn}", i + 1);
        }
        let _ = writeln!(out, "all,1,{k},{}", self.q);
        out
    }
}

/// Shared evaluation state for one (marginals, popularity, config) triple.
///
/// Everything is expressed through the ratio forms `R0_k = f_k(x)/x` and
/// `R1_k = (f_k'(x) x - f_k(x))/x^2`, which stay finite as a marginal
/// approaches zero; this keeps gradients well defined on the boundary of the
/// feasible set, where projected-gradient iterates routinely live.
pub(crate) struct Engine<'a> {
    cfg: &'a NetworkConfig,
    pop: &'a [f64],
    pub(crate) t: Vec<f64>,
    kernels: Vec<CoverageKernel>,
    w_zero: Vec<f64>,
    r0: Vec<OnceCell<Box<[f64]>>>,
    r1: Vec<OnceCell<Box<[f64]>>>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(cfg: &'a NetworkConfig, pop: &'a [f64], t: Vec<f64>) -> Result<Self> {
        debug_assert_eq!(pop.len(), t.len());
        let kernels = (1..=cfg.cache_size)
            .map(|k| CoverageKernel::new(k, cfg))
            .collect::<Result<Vec<_>>>()?;
        let w_zero = pop
            .iter()
            .zip(&t)
            .map(|(&a, &tm)| prob_no_request(a, tm, cfg))
            .collect();
        let n = t.len();
        Ok(Engine {
            cfg,
            pop,
            t,
            kernels,
            w_zero,
            r0: (0..n).map(|_| OnceCell::new()).collect(),
            r1: (0..n).map(|_| OnceCell::new()).collect(),
        })
    }

    fn r0(&self, file: usize) -> &[f64] {
        self.r0[file].get_or_init(|| {
            self.kernels
                .iter()
                .map(|k| k.prob_ratio(self.t[file]))
                .collect()
        })
    }

    fn r1(&self, file: usize) -> &[f64] {
        self.r1[file].get_or_init(|| {
            self.kernels
                .iter()
                .map(|k| k.deriv_ratio(self.t[file]))
                .collect()
        })
    }

    /// Load pmf (index = load - 1) at a station with cache `files` serving
    /// `target`.
    fn load_counts(&self, target: usize, files: &[u32]) -> Vec<f64> {
        let success: Vec<f64> = files
            .iter()
            .filter(|&&m| m as usize != target)
            .map(|&m| 1.0 - self.w_zero[m as usize])
            .collect();
        poisson_binomial(&success)
    }

    /// Like [`load_counts`] but with one more file left out, for the
    /// chain-rule terms.
    ///
    /// [`load_counts`]: Engine::load_counts
    fn load_counts_excluding(&self, target: usize, excluded: usize, files: &[u32]) -> Vec<f64> {
        let success: Vec<f64> = files
            .iter()
            .filter(|&&m| m as usize != target && m as usize != excluded)
            .map(|&m| 1.0 - self.w_zero[m as usize])
            .collect();
        poisson_binomial(&success)
    }

    /// Success probability of arbitrary non-negative combination weights.
    ///
    /// With weights summing to one this is the success probability of the
    /// distribution; the unconstrained extension exists so finite-difference
    /// tests can probe the gradient coordinate-wise.
    #[cfg(test)]
    pub(crate) fn eval_weights(cfg: &NetworkConfig, pop: &[f64], entries: &[(Combination, f64)]) -> f64 {
        let mut t = vec![0.0; pop.len()];
        for (combo, w) in entries {
            for &f in combo.files() {
                t[f as usize] += w;
            }
        }
        let engine = Engine::new(cfg, pop, t).expect("valid engine");
        let mut q = 0.0;
        for (combo, w) in entries {
            for &f in combo.files() {
                let n = f as usize;
                let counts = engine.load_counts(n, combo.files());
                let r0 = engine.r0(n);
                let phi: f64 = counts.iter().zip(r0).map(|(g, r)| g * r).sum();
                q += pop[n] * w * phi;
            }
        }
        q
    }

    /// Partial derivatives of the success probability with respect to the
    /// weight of each candidate combination, at the distribution given by
    /// `support`. Marginals of zero are handled by their continuous limits,
    /// yielding the one-sided derivative on the simplex boundary.
    pub(crate) fn gradient(
        &self,
        support: &[(&Combination, f64)],
        candidates: &[Combination],
    ) -> Vec<f64> {
        let kk = self.cfg.cache_size;
        // d[m] = derivative of the objective through the marginal T_m.
        let mut d = vec![0.0; self.t.len()];
        for &(combo, p) in support {
            if p == 0.0 {
                continue;
            }
            let files = combo.files();
            for &fnn in files {
                let n = fnn as usize;
                let counts = self.load_counts(n, files);
                // Through the serving geometry of file n itself.
                let own: f64 = counts.iter().zip(self.r1(n)).map(|(g, r)| g * r).sum();
                d[n] += self.pop[n] * p * own;
                // Through the request-census probabilities of the other
                // cached files, which shift the load of file n's server.
                let r0 = self.r0(n);
                for &fm in files {
                    if fm == fnn {
                        continue;
                    }
                    let m = fm as usize;
                    let dw = prob_no_request_dt(self.pop[m], self.t[m], self.cfg);
                    if dw == 0.0 {
                        continue;
                    }
                    let h = self.load_counts_excluding(n, m, files);
                    let mut cross = 0.0;
                    for k in 1..=kk {
                        let hk1 = if k - 1 < h.len() { h[k - 1] } else { 0.0 };
                        let hk2 = if k >= 2 { h[k - 2] } else { 0.0 };
                        cross += r0[k - 1] * (hk1 - hk2);
                    }
                    d[m] += self.pop[n] * p * dw * cross;
                }
            }
        }

        candidates
            .iter()
            .map(|combo| {
                let mut g = self.direct_weight(combo);
                for &f in combo.files() {
                    g += d[f as usize];
                }
                g
            })
            .collect()
    }

    /// Derivative of the objective in a combination's weight with the
    /// marginals held fixed. On a fixed-marginal polyhedron the objective is
    /// linear with exactly these coefficients.
    pub(crate) fn direct_weight(&self, combo: &Combination) -> f64 {
        let files = combo.files();
        let mut g = 0.0;
        for &fnn in files {
            let n = fnn as usize;
            let counts = self.load_counts(n, files);
            let phi: f64 = counts.iter().zip(self.r0(n)).map(|(c, r)| c * r).sum();
            g += self.pop[n] * phi;
        }
        g
    }
}

/// Success probability of the typical request under a caching distribution.
///
/// Works for any cache size, including the unit-cache case where the load is
/// identically one.
pub fn success_prob(
    dist: &CachingDistribution,
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    check_catalog(pop, cfg)?;
    check_distribution(dist, cfg)?;
    let marginals = dist.marginals();
    let engine = Engine::new(cfg, pop.probs(), marginals.values().to_vec())?;
    let nfiles = pop.len();
    let kk = cfg.cache_size;

    // mix[n][k-1] = sum over combos containing n of p_i * Pr[load = k | i].
    let mut mix = vec![vec![0.0; kk]; nfiles];
    for (combo, p) in dist.support() {
        for &f in combo.files() {
            let counts = engine.load_counts(f as usize, combo.files());
            for (acc, v) in mix[f as usize].iter_mut().zip(&counts) {
                *acc += p * v;
            }
        }
    }

    let mut per_file = vec![0.0; nfiles];
    let mut per_load = Vec::with_capacity(nfiles);
    let mut q = 0.0;
    for n in 0..nfiles {
        let tn = engine.t[n];
        if tn <= 0.0 {
            per_load.push(None);
            continue;
        }
        // sum_k (mix/T) f_k(T) written as sum_k mix * R0_k(T).
        let val: f64 = mix[n].iter().zip(engine.r0(n)).map(|(m, r)| m * r).sum();
        per_file[n] = val;
        q += pop.get(n) * val;
        per_load.push(Some(LoadPmf::new(mix[n].iter().map(|m| m / tn).collect())));
    }

    Ok(EvalReport {
        q,
        per_file,
        per_load: Some(per_load),
        popularity: pop.probs().to_vec(),
        marginals: marginals.values().to_vec(),
    })
}

/// Unit-cache convenience: evaluates per-file caching probabilities directly.
pub fn success_prob_unit(
    file_probs: &[f64],
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<EvalReport> {
    if cfg.cache_size != 1 {
        return Err(Error::InvalidConfig(format!(
            "unit-cache evaluation requires cache_size = 1 (got {})",
            cfg.cache_size
        )));
    }
    success_prob(&CachingDistribution::from_file_probs(file_probs)?, pop, cfg)
}

/// Success probability in the dense-user, noiseless limit, where every
/// station is fully loaded and only the marginals matter:
/// `sum_n a_n T_n / (c2 + c1 T_n)` with the constants of load `K`.
pub fn success_prob_asymptotic(
    marginals: &Marginals,
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_catalog(pop, cfg)?;
    if marginals.len() != pop.len() || marginals.cache_size() != cfg.cache_size {
        return Err(Error::InvalidConfig(
            "marginals do not match the catalog/cache geometry".to_string(),
        ));
    }
    let c = crate::coverage::constants(cfg.cache_size, cfg)?;
    Ok(marginals
        .values()
        .iter()
        .zip(pop.probs())
        .map(|(&t, &a)| if t > 0.0 { a * t / (c.c2 + c.c1 * t) } else { 0.0 })
        .sum())
}

/// Gradient of the success probability in the combination weights, evaluated
/// at `dist` for each candidate combination (which need not be in the
/// support).
///
/// Every file referenced by a candidate must have a strictly positive
/// marginal under `dist`.
pub fn success_prob_gradient(
    dist: &CachingDistribution,
    candidates: &[Combination],
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<BTreeMap<Combination, f64>> {
    cfg.validate()?;
    check_catalog(pop, cfg)?;
    check_distribution(dist, cfg)?;
    let marginals = dist.marginals();
    for combo in candidates {
        if combo.len() != cfg.cache_size {
            return Err(Error::Domain(format!(
                "candidate {:?} has {} files, caches hold {}",
                combo.files(),
                combo.len(),
                cfg.cache_size
            )));
        }
        for &f in combo.files() {
            if f as usize >= pop.len() {
                return Err(Error::Domain(format!(
                    "candidate references file {} outside the catalog",
                    f + 1
                )));
            }
            if marginals.get(f as usize) <= 0.0 {
                return Err(Error::SingularMarginal(format!(
                    "candidate {:?} references file {} whose marginal is zero",
                    combo.files(),
                    f + 1
                )));
            }
        }
    }
    let engine = Engine::new(cfg, pop.probs(), marginals.values().to_vec())?;
    let support: Vec<(&Combination, f64)> = dist.support().collect();
    let grads = engine.gradient(&support, candidates);
    Ok(candidates.iter().cloned().zip(grads).collect())
}

// ===========================================================================
// Policy evaluation
// ===========================================================================

/// Analytical success probability of a caching policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEval {
    pub q: f64,
    /// Whether the value is exact under the model. Popularity-weighted
    /// sampling with replacement is evaluated under an independence
    /// approximation (per-file cache presence treated as independent), so it
    /// carries `exact: false`; Monte Carlo is authoritative for it.
    pub exact: bool,
}

/// Evaluates a caching policy analytically.
pub fn policy_success_prob(
    policy: &CachePolicy,
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<PolicyEval> {
    cfg.validate()?;
    check_catalog(pop, cfg)?;
    match policy {
        CachePolicy::Distribution(d) => Ok(PolicyEval {
            q: success_prob(d, pop, cfg)?.q,
            exact: true,
        }),
        CachePolicy::MostPopular => {
            let top = crate::policy::top_files(pop, cfg.cache_size);
            let d = CachingDistribution::new(
                pop.len(),
                cfg.cache_size,
                [(Combination::new(top)?, 1.0)],
            )?;
            Ok(PolicyEval {
                q: success_prob(&d, pop, cfg)?.q,
                exact: true,
            })
        }
        CachePolicy::UniformRandom => Ok(PolicyEval {
            q: uniform_random_success_prob(pop, cfg)?,
            exact: true,
        }),
        CachePolicy::PopularitySampled => Ok(PolicyEval {
            q: popularity_sampled_success_prob(pop, cfg)?,
            exact: false,
        }),
    }
}

/// Exact evaluation of the uniformly-random-combination policy.
///
/// Conditioned on the cache containing the requested file, the remaining
/// `K - 1` slots are a uniform subset of the other files, so the expected
/// load pmf is an average of Poisson-binomial laws over all such subsets.
/// The average is computed in one pass with an elementary-symmetric dynamic
/// program over the per-file census polynomials, O(N K^2) per target file,
/// instead of enumerating the (combinatorially many) subsets.
fn uniform_random_success_prob(pop: &Popularity, cfg: &NetworkConfig) -> Result<f64> {
    let n = pop.len();
    let kk = cfg.cache_size;
    let t = kk as f64 / n as f64;
    let fk: Vec<f64> = (1..=kk)
        .map(|k| CoverageKernel::new(k, cfg)?.success_prob(t))
        .collect::<Result<Vec<_>>>()?;
    let denom = binomial(n - 1, kk - 1);
    let w: Vec<f64> = pop
        .probs()
        .iter()
        .map(|&a| prob_no_request(a, t, cfg))
        .collect();

    let mut q = 0.0;
    for target in 0..n {
        // dp[j][c]: over processed files, total weight of j-subsets whose
        // census polynomial has coefficient c at z^c.
        let mut dp: Vec<Vec<f64>> = (0..kk).map(|j| vec![0.0; j + 1]).collect();
        dp[0][0] = 1.0;
        for (m, &wm) in w.iter().enumerate() {
            if m == target {
                continue;
            }
            let sm = 1.0 - wm;
            for j in (1..kk).rev() {
                // dp[j] += dp[j-1] * (wm + sm * z), done in place: the source
                // row is a different j, so order does not matter.
                let (lo, hi) = dp.split_at_mut(j);
                let src = &lo[j - 1];
                let dst = &mut hi[0];
                for c in 0..j {
                    dst[c] += src[c] * wm;
                    dst[c + 1] += src[c] * sm;
                }
            }
        }
        let per: f64 = dp[kk - 1]
            .iter()
            .zip(&fk)
            .map(|(coef, f)| coef / denom * f)
            .sum();
        q += pop.get(target) * per;
    }
    Ok(q)
}

/// Approximate evaluation of popularity-weighted sampling with replacement.
///
/// The chance that file `m` lands in a cache is exactly
/// `u_m = 1 - (1 - a_m)^K`; the approximation treats presence as independent
/// across files when building the load distribution, and lumps loads beyond
/// `K` (impossible in reality, where a cache holds at most `K` distinct
/// files) into `K`.
fn popularity_sampled_success_prob(pop: &Popularity, cfg: &NetworkConfig) -> Result<f64> {
    let n = pop.len();
    let kk = cfg.cache_size;
    let u: Vec<f64> = pop
        .probs()
        .iter()
        .map(|&a| 1.0 - (1.0 - a).powi(kk as i32))
        .collect();
    let kernels: Vec<CoverageKernel> = (1..=kk)
        .map(|k| CoverageKernel::new(k, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut q = 0.0;
    for target in 0..n {
        let success: Vec<f64> = (0..n)
            .filter(|&m| m != target)
            .map(|m| u[m] * (1.0 - prob_no_request(pop.get(m), u[m], cfg)))
            .collect();
        let counts = poisson_binomial(&success);
        let mut load = vec![0.0; kk];
        for (c, &p) in counts.iter().enumerate() {
            load[(c + 1).min(kk) - 1] += p;
        }
        let per: f64 = load
            .iter()
            .zip(&kernels)
            .map(|(p, kern)| {
                p * kern
                    .success_prob(u[target])
                    .expect("presence probability is a valid marginal")
            })
            .sum();
        q += pop.get(target) * per;
    }
    Ok(q)
}

fn check_catalog(pop: &Popularity, cfg: &NetworkConfig) -> Result<()> {
    if pop.len() != cfg.catalog_size {
        return Err(Error::InvalidConfig(format!(
            "popularity covers {} files but the catalog has {}",
            pop.len(),
            cfg.catalog_size
        )));
    }
    Ok(())
}

fn check_distribution(dist: &CachingDistribution, cfg: &NetworkConfig) -> Result<()> {
    if dist.catalog_size() != cfg.catalog_size || dist.cache_size() != cfg.cache_size {
        return Err(Error::InvalidConfig(format!(
            "distribution is over N={}, K={} but the network uses N={}, K={}",
            dist.catalog_size(),
            dist.cache_size(),
            cfg.catalog_size,
            cfg.cache_size
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Snr;

    fn cfg(n: usize, k: usize) -> NetworkConfig {
        NetworkConfig {
            bs_density: 0.01,
            user_density: 0.1,
            path_loss_exp: 4.0,
            bandwidth_hz: 1e7,
            target_rate_bps: 5e5,
            snr: Snr::from_db(30.0),
            catalog_size: n,
            cache_size: k,
        }
    }

    fn dist(n: usize, k: usize, entries: &[(&[u32], f64)]) -> CachingDistribution {
        CachingDistribution::new(
            n,
            k,
            entries
                .iter()
                .map(|(files, p)| (Combination::new(files.to_vec()).unwrap(), *p)),
        )
        .unwrap()
    }

    #[test]
    fn poisson_binomial_matches_exhaustive_enumeration() {
        let ps = [0.3, 0.85, 0.02, 0.5, 0.999, 0.1, 0.44];
        let got = poisson_binomial(&ps);
        let mut want = vec![0.0; ps.len() + 1];
        for mask in 0u32..(1 << ps.len()) {
            let mut prob = 1.0;
            for (j, &s) in ps.iter().enumerate() {
                prob *= if mask >> j & 1 == 1 { s } else { 1.0 - s };
            }
            want[mask.count_ones() as usize] += prob;
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-14, "{got:?} vs {want:?}");
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn load_pmf_small_catalog_hand_computed() {
        // Two combinations over three files; a request for file 1 mixes the
        // census of file 2 (via {1,2}) and file 3 (via {1,3}) equally.
        let cfg = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 0.5), (&[0, 2], 0.5)]);
        let got = load_pmf(0, &d, &pop, &cfg).unwrap();

        let ratio = cfg.user_density / cfg.bs_density; // 10 users per station
        let w2 = (1.0 + 0.3 * ratio / (3.5 * 0.5)).powf(-4.5);
        let w3 = (1.0 + 0.2 * ratio / (3.5 * 0.5)).powf(-4.5);
        let want1 = 0.5 * w2 + 0.5 * w3;
        assert!((got.probs()[0] - want1).abs() < 1e-14);
        assert!((got.probs()[1] - (1.0 - want1)).abs() < 1e-12);
        assert!((got.mean() - (2.0 - want1)).abs() < 1e-12);
    }

    #[test]
    fn load_concentrates_at_full_multicast_under_dense_users() {
        let mut c = cfg(3, 2);
        c.user_density = 1e9;
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 0.5), (&[0, 2], 0.5)]);
        let pmf = load_pmf(0, &d, &pop, &c).unwrap();
        assert!(pmf.probs()[1] > 1.0 - 1e-9, "{:?}", pmf.probs());
    }

    #[test]
    fn load_pmf_error_taxonomy() {
        let cfg = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 1.0)]);
        // File 3 is never cached.
        assert!(matches!(
            load_pmf(2, &d, &pop, &cfg),
            Err(Error::SingularMarginal(_))
        ));
        // Combination must contain the file.
        let t = d.marginals();
        let other = Combination::new(vec![0, 1]).unwrap();
        assert!(load_pmf_for_combo(2, &other, &t, &pop, &cfg).is_err());
        // Zero marginal inside the combination.
        let t_bad = Marginals::new(vec![1.0, 0.0, 1.0], 2).unwrap();
        assert!(matches!(
            load_pmf_for_combo(0, &other, &t_bad, &pop, &cfg),
            Err(Error::SingularMarginal(_))
        ));
    }

    #[test]
    fn unit_cache_reduces_to_weighted_coverage() {
        let c = cfg(3, 1);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let probs = [0.6, 0.4, 0.0];
        let report = success_prob_unit(&probs, &pop, &c).unwrap();
        let mut want = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            want += pop.get(i) * crate::coverage::success_prob(p, 1, &c).unwrap();
        }
        assert!((report.q - want).abs() < 1e-14, "{} vs {want}", report.q);
        assert_eq!(report.per_file[2], 0.0);
        // q must equal the popularity-weighted per-file values.
        let recombined: f64 = report
            .per_file
            .iter()
            .zip(&report.popularity)
            .map(|(qn, a)| qn * a)
            .sum();
        assert!((report.q - recombined).abs() < 1e-12);
    }

    #[test]
    fn success_prob_is_permutation_equivariant() {
        let c = cfg(4, 2);
        let pop = Popularity::arbitrary_order(vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        let d = dist(4, 2, &[(&[0, 1], 0.3), (&[1, 2], 0.45), (&[2, 3], 0.25)]);
        let base = success_prob(&d, &pop, &c).unwrap();

        // Relabel files by the permutation sigma = (2, 0, 3, 1).
        let sigma = [2u32, 0, 3, 1];
        let pop_p = Popularity::arbitrary_order(vec![0.4, 0.3, 0.1, 0.2]).unwrap();
        for (orig, &to) in sigma.iter().enumerate() {
            assert_eq!(pop.get(orig), pop_p.get(to as usize), "permutation bookkeeping");
        }
        let d_p = CachingDistribution::new(
            4,
            2,
            d.entries().iter().map(|(combo, &p)| {
                let files = combo.files().iter().map(|&f| sigma[f as usize]).collect();
                (Combination::new(files).unwrap(), p)
            }),
        )
        .unwrap();
        let permuted = success_prob(&d_p, &pop_p, &c).unwrap();
        assert!(
            (base.q - permuted.q).abs() < 1e-12,
            "{} vs {}",
            base.q,
            permuted.q
        );
    }

    #[test]
    fn success_prob_decreases_with_user_density() {
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 0.6), (&[0, 2], 0.4)]);
        let mut prev = f64::INFINITY;
        for lu in [0.01, 0.1, 1.0] {
            let mut c = cfg(3, 2);
            c.user_density = lu;
            let q = success_prob(&d, &pop, &c).unwrap().q;
            assert!(q < prev, "q should fall as multicast splitting intensifies");
            prev = q;
        }
    }

    #[test]
    fn asymptotic_limit_is_reached_by_exact_evaluation() {
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 0.6), (&[0, 2], 0.4)]);
        let mut c = cfg(3, 2);
        c.snr = Snr::Infinite;
        c.user_density = 1e12;
        let exact = success_prob(&d, &pop, &c).unwrap().q;
        let asym = success_prob_asymptotic(&d.marginals(), &pop, &c).unwrap();
        assert!((exact - asym).abs() < 1e-9, "{exact} vs {asym}");
    }

    #[test]
    fn gradient_matches_finite_differences_of_raw_weights() {
        let c = cfg(5, 3);
        let pop = Popularity::new(vec![0.4, 0.25, 0.15, 0.12, 0.08]).unwrap();
        let entries = [
            (Combination::new(vec![0, 1, 2]).unwrap(), 0.4),
            (Combination::new(vec![0, 1, 3]).unwrap(), 0.3),
            (Combination::new(vec![0, 2, 4]).unwrap(), 0.2),
            (Combination::new(vec![1, 3, 4]).unwrap(), 0.1),
        ];
        let d = CachingDistribution::new(5, 3, entries.clone()).unwrap();
        let candidates: Vec<Combination> = entries.iter().map(|(c, _)| c.clone()).collect();
        let grad = success_prob_gradient(&d, &candidates, &pop, &c).unwrap();

        let h = 1e-6;
        for j in 0..entries.len() {
            let mut up = entries.to_vec();
            up[j].1 += h;
            let mut dn = entries.to_vec();
            dn[j].1 -= h;
            let fd = (Engine::eval_weights(&c, pop.probs(), &up)
                - Engine::eval_weights(&c, pop.probs(), &dn))
                / (2.0 * h);
            let g = grad[&candidates[j]];
            assert!(
                (fd - g).abs() < 1e-5 * g.abs().max(1.0),
                "combo {j}: fd={fd}, grad={g}"
            );
        }
    }

    #[test]
    fn unit_cache_gradient_is_weighted_coverage_derivative() {
        let c = cfg(3, 1);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = CachingDistribution::from_file_probs(&[0.5, 0.3, 0.2]).unwrap();
        let candidates: Vec<Combination> =
            (0..3).map(|f| Combination::new(vec![f]).unwrap()).collect();
        let grad = success_prob_gradient(&d, &candidates, &pop, &c).unwrap();
        for (f, combo) in candidates.iter().enumerate() {
            let want = pop.get(f)
                * crate::coverage::success_prob_deriv(d.marginals().get(f), 1, &c).unwrap();
            let got = grad[combo];
            assert!((got - want).abs() < 1e-12, "file {f}: {got} vs {want}");
        }
    }

    #[test]
    fn gradient_rejects_zero_marginal_candidates() {
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 1.0)]);
        let candidate = vec![Combination::new(vec![0, 2]).unwrap()];
        assert!(matches!(
            success_prob_gradient(&d, &candidate, &pop, &c),
            Err(Error::SingularMarginal(_))
        ));
    }

    #[test]
    fn uniform_policy_matches_explicit_uniform_distribution() {
        // N = 6, K = 3: enumerate all 20 combinations explicitly and compare
        // against the symmetric dynamic program.
        let c = cfg(6, 3);
        let pop = Popularity::zipf(6, 0.9).unwrap();
        let combos: Vec<Combination> = crate::content::KSubsets::new((0..6).collect(), 3)
            .map(|files| Combination::new(files).unwrap())
            .collect();
        assert_eq!(combos.len(), 20);
        let d = CachingDistribution::new(
            6,
            3,
            combos.iter().map(|c| (c.clone(), 1.0 / 20.0)),
        )
        .unwrap();
        let explicit = success_prob(&d, &pop, &c).unwrap().q;
        let via_dp = policy_success_prob(&CachePolicy::UniformRandom, &pop, &c).unwrap();
        assert!(via_dp.exact);
        assert!(
            (explicit - via_dp.q).abs() < 1e-12,
            "{explicit} vs {}",
            via_dp.q
        );
    }

    #[test]
    fn most_popular_policy_equals_point_mass() {
        let c = cfg(5, 2);
        let pop = Popularity::zipf(5, 1.2).unwrap();
        let point = dist(5, 2, &[(&[0, 1], 1.0)]);
        let want = success_prob(&point, &pop, &c).unwrap().q;
        let got = policy_success_prob(&CachePolicy::MostPopular, &pop, &c).unwrap();
        assert!(got.exact);
        assert!((got.q - want).abs() < 1e-15);
    }

    #[test]
    fn popularity_sampled_approximation_is_flagged_and_sane() {
        let c = cfg(5, 2);
        let pop = Popularity::zipf(5, 1.2).unwrap();
        let got = policy_success_prob(&CachePolicy::PopularitySampled, &pop, &c).unwrap();
        assert!(!got.exact);
        assert!(got.q > 0.0 && got.q < 1.0);
    }

    #[test]
    fn report_csv_has_per_file_rows_and_summary() {
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = dist(3, 2, &[(&[0, 1], 0.5), (&[0, 2], 0.5)]);
        let report = success_prob(&d, &pop, &c).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5, "header + 3 files + summary: {csv}");
        assert_eq!(lines[0], "file,a_n,T_n,q_n");
        assert!(lines[1].starts_with("1,0.5,1,"));
        assert!(lines[4].starts_with("all,1,2,"));
    }
}
