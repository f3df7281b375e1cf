//! Monte-Carlo validation of the analytical model.
//!
//! Each realization draws base stations and users as independent Poisson
//! point processes in a square window with the measured user at its center,
//! fills every cache according to the policy under test, and replays one
//! transmission: the user requests a file, associates with the nearest
//! station caching it, and succeeds when the per-file multicast rate clears
//! the target. Rayleigh fading is drawn independently per station; every
//! other station interferes.
//!
//! Realizations are seeded individually (a fixed mixing function of the
//! global seed and the realization index), so results are bit-identical for
//! a given seed regardless of how many worker threads run them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp1, Poisson};
use rayon::prelude::*;

use crate::config::NetworkConfig;
use crate::content::Popularity;
use crate::error::{Error, Result};
use crate::policy::CachePolicy;

// ===========================================================================
// Configuration and report
// ===========================================================================

/// Parameters of a Monte-Carlo run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Side length of the square observation window; the measured user sits
    /// at its center.
    pub window_side: f64,
    /// Number of independent realizations.
    pub realizations: usize,
    /// Global seed; every realization derives its own stream from it.
    pub seed: u64,
    /// Wrap distances around the window edges. Removes the boundary bias a
    /// finite window introduces (stations near the edge see a truncated
    /// interference field), at the cost of a slightly different geometry.
    pub toroidal: bool,
    /// Also score the transmission under per-user bandwidth sharing, where
    /// the serving station splits bandwidth among its associated users
    /// instead of its distinct files.
    pub measure_unicast: bool,
    /// Fix the requested file (0-based) instead of sampling it from the
    /// popularity law; useful for per-file validation.
    pub pinned_request: Option<u32>,
    /// Record the serving distance of each covered realization.
    pub collect_distances: bool,
}

impl SimConfig {
    pub fn new(window_side: f64, realizations: usize, seed: u64) -> Self {
        SimConfig {
            window_side,
            realizations,
            seed,
            toroidal: false,
            measure_unicast: false,
            pinned_request: None,
            collect_distances: false,
        }
    }

    fn validate(&self, cfg: &NetworkConfig) -> Result<()> {
        if !(self.window_side > 0.0 && self.window_side.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "window side must be positive and finite (got {})",
                self.window_side
            )));
        }
        if self.realizations == 0 {
            return Err(Error::InvalidConfig(
                "at least one realization is required".to_string(),
            ));
        }
        if let Some(f) = self.pinned_request {
            if f as usize >= cfg.catalog_size {
                return Err(Error::InvalidConfig(format!(
                    "pinned file {} outside catalog of {}",
                    f + 1,
                    cfg.catalog_size
                )));
            }
        }
        Ok(())
    }
}

/// Aggregated Monte-Carlo estimates.
#[derive(Debug, Clone)]
pub struct SimReport {
    /// Estimated success probability (multicast bandwidth sharing).
    pub q: f64,
    /// Half-width of the 95% normal-approximation confidence interval.
    pub ci_halfwidth: f64,
    /// Total realizations run.
    pub realizations: usize,
    /// Realizations in which some station in the window cached the
    /// requested file (the rest count as failures).
    pub effective: usize,
    /// Estimated success probability under per-user sharing, when measured.
    pub q_unicast: Option<f64>,
    pub ci_unicast_halfwidth: Option<f64>,
    /// Serving-station load tallies over covered realizations
    /// (index = load - 1).
    pub load_histogram: Vec<u64>,
    /// Serving distances of covered realizations, in realization order,
    /// when collected.
    pub serving_distances: Option<Vec<f64>>,
}

// ===========================================================================
// Cache samplers
// ===========================================================================

type Bits = Box<[u64]>;

fn bit_set(blocks: &mut [u64], f: u32) {
    blocks[(f / 64) as usize] |= 1u64 << (f % 64);
}

fn bit_test(blocks: &[u64], f: u32) -> bool {
    blocks[(f / 64) as usize] >> (f % 64) & 1 == 1
}

enum PreparedPolicy {
    /// Every station caches the same combination.
    Fixed(Bits),
    /// Independent draws from an explicit distribution over combinations.
    Mixture { combos: Vec<Bits>, cum: Vec<f64> },
    /// K popularity-weighted draws with replacement per station.
    Sampled { cum: Vec<f64>, k: usize },
    /// A uniformly random K-subset per station.
    Uniform { n: u32, k: u32 },
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

fn sample_cum(cum: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

impl PreparedPolicy {
    fn build(policy: &CachePolicy, pop: &Popularity, cfg: &NetworkConfig) -> Result<Self> {
        let blocks = cfg.catalog_size.div_ceil(64);
        match policy {
            CachePolicy::Distribution(d) => {
                if d.catalog_size() != cfg.catalog_size || d.cache_size() != cfg.cache_size {
                    return Err(Error::InvalidConfig(format!(
                        "distribution is over N={}, K={} but the network uses N={}, K={}",
                        d.catalog_size(),
                        d.cache_size(),
                        cfg.catalog_size,
                        cfg.cache_size
                    )));
                }
                let mut combos = Vec::new();
                let mut probs = Vec::new();
                for (combo, p) in d.support() {
                    let mut bits = vec![0u64; blocks].into_boxed_slice();
                    for &f in combo.files() {
                        bit_set(&mut bits, f);
                    }
                    combos.push(bits);
                    probs.push(p);
                }
                Ok(PreparedPolicy::Mixture {
                    combos,
                    cum: cumulative(&probs),
                })
            }
            CachePolicy::MostPopular => {
                let mut bits = vec![0u64; blocks].into_boxed_slice();
                for f in crate::policy::top_files(pop, cfg.cache_size) {
                    bit_set(&mut bits, f);
                }
                Ok(PreparedPolicy::Fixed(bits))
            }
            CachePolicy::PopularitySampled => Ok(PreparedPolicy::Sampled {
                cum: cumulative(pop.probs()),
                k: cfg.cache_size,
            }),
            CachePolicy::UniformRandom => Ok(PreparedPolicy::Uniform {
                n: cfg.catalog_size as u32,
                k: cfg.cache_size as u32,
            }),
        }
    }

    fn sample_into(&self, bits: &mut [u64], rng: &mut ChaCha8Rng) {
        bits.fill(0);
        match self {
            PreparedPolicy::Fixed(fixed) => bits.copy_from_slice(fixed),
            PreparedPolicy::Mixture { combos, cum } => {
                bits.copy_from_slice(&combos[sample_cum(cum, rng)]);
            }
            PreparedPolicy::Sampled { cum, k } => {
                for _ in 0..*k {
                    bit_set(bits, sample_cum(cum, rng) as u32);
                }
            }
            PreparedPolicy::Uniform { n, k } => {
                // Floyd's subset sampling: uniform over K-subsets in K draws.
                for j in (n - k)..*n {
                    let t = rng.random_range(0..=j);
                    if bit_test(bits, t) {
                        bit_set(bits, j);
                    } else {
                        bit_set(bits, t);
                    }
                }
            }
        }
    }
}

// ===========================================================================
// One realization
// ===========================================================================

#[derive(Debug, Clone, Copy, Default)]
struct Outcome {
    effective: bool,
    success: bool,
    success_unicast: bool,
    load: u8,
    distance: f64,
}

fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn poisson_count(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let sampler = Poisson::new(mean).expect("positive finite mean");
    sampler.sample(rng) as usize
}

struct Scene<'a> {
    cfg: &'a NetworkConfig,
    sim: &'a SimConfig,
    prepared: &'a PreparedPolicy,
    pop_cum: &'a [f64],
    /// SINR thresholds for loads 1..=K.
    thresholds: &'a [f64],
    blocks: usize,
}

impl Scene<'_> {
    fn dist2(&self, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
        let mut dx = (ax - bx).abs();
        let mut dy = (ay - by).abs();
        if self.sim.toroidal {
            let side = self.sim.window_side;
            dx = dx.min(side - dx);
            dy = dy.min(side - dy);
        }
        dx * dx + dy * dy
    }

    fn run_one(&self, index: u64) -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.sim.seed, index));
        let side = self.sim.window_side;
        let half = side / 2.0;
        let area = side * side;
        let alpha_half = self.cfg.path_loss_exp / 2.0;

        let nb = poisson_count(self.cfg.bs_density * area, &mut rng);
        if nb == 0 {
            return Outcome::default();
        }
        let mut bx = vec![0.0f64; nb];
        let mut by = vec![0.0f64; nb];
        for i in 0..nb {
            bx[i] = rng.random::<f64>() * side - half;
            by[i] = rng.random::<f64>() * side - half;
        }
        let mut caches = vec![0u64; nb * self.blocks];
        for i in 0..nb {
            self.prepared
                .sample_into(&mut caches[i * self.blocks..(i + 1) * self.blocks], &mut rng);
        }
        let cache = |i: usize| &caches[i * self.blocks..(i + 1) * self.blocks];

        // The measured request and its serving station: the nearest one
        // caching the requested file.
        let request = match self.sim.pinned_request {
            Some(f) => f,
            None => sample_cum(self.pop_cum, &mut rng) as u32,
        };
        let mut serving = usize::MAX;
        let mut serving_d2 = f64::INFINITY;
        for i in 0..nb {
            if bit_test(cache(i), request) {
                let d2 = self.dist2(bx[i], by[i], 0.0, 0.0);
                if d2 < serving_d2 {
                    serving_d2 = d2;
                    serving = i;
                }
            }
        }
        if serving == usize::MAX {
            return Outcome::default();
        }

        // Census of the serving station: which distinct cached files its
        // associated users request, and how many users it serves. A user
        // belongs to the serving station exactly when that station is the
        // nearest one caching the user's file, so users whose file it does
        // not cache are dismissed immediately and the scan over other
        // stations stops at the first closer alternative.
        let mut served = vec![0u64; self.blocks];
        bit_set(&mut served, request);
        let mut load = 1usize;
        let mut users_here = 0usize;
        // With unit caches the load is identically one, so the user census
        // only matters when per-user sharing is being measured.
        let skip_census = self.cfg.cache_size == 1 && !self.sim.measure_unicast;
        if !skip_census {
            let nu = poisson_count(self.cfg.user_density * area, &mut rng);
            let serving_cache = cache(serving);
            for _ in 0..nu {
                let ux = rng.random::<f64>() * side - half;
                let uy = rng.random::<f64>() * side - half;
                let f = sample_cum(self.pop_cum, &mut rng) as u32;
                if !bit_test(serving_cache, f) {
                    continue;
                }
                let d2_here = self.dist2(ux, uy, bx[serving], by[serving]);
                let mut mine = true;
                for i in 0..nb {
                    if i != serving
                        && bit_test(cache(i), f)
                        && self.dist2(ux, uy, bx[i], by[i]) < d2_here
                    {
                        mine = false;
                        break;
                    }
                }
                if mine {
                    users_here += 1;
                    if !bit_test(&served, f) {
                        bit_set(&mut served, f);
                        load += 1;
                    }
                }
            }
        }

        // Fading, interference from every other station, and the rate test.
        let h0: f64 = Exp1.sample(&mut rng);
        let signal = h0 * serving_d2.powf(-alpha_half);
        let mut interference = 0.0;
        for i in 0..nb {
            if i == serving {
                continue;
            }
            let h: f64 = Exp1.sample(&mut rng);
            interference += h * self.dist2(bx[i], by[i], 0.0, 0.0).powf(-alpha_half);
        }
        let noise = match self.cfg.snr.linear() {
            Some(snr) => 1.0 / snr,
            None => 0.0,
        };
        let sinr = signal / (noise + interference);

        let success = sinr >= self.thresholds[load - 1];
        let success_unicast = if self.sim.measure_unicast {
            sinr >= self.cfg.sinr_threshold(users_here + 1)
        } else {
            false
        };
        Outcome {
            effective: true,
            success,
            success_unicast,
            load: load as u8,
            distance: serving_d2.sqrt(),
        }
    }
}

// ===========================================================================
// Driver
// ===========================================================================

/// Runs the Monte-Carlo experiment for a policy.
pub fn monte_carlo(
    policy: &CachePolicy,
    pop: &Popularity,
    cfg: &NetworkConfig,
    sim: &SimConfig,
) -> Result<SimReport> {
    cfg.validate()?;
    sim.validate(cfg)?;
    if pop.len() != cfg.catalog_size {
        return Err(Error::InvalidConfig(format!(
            "popularity covers {} files but the catalog has {}",
            pop.len(),
            cfg.catalog_size
        )));
    }
    let prepared = PreparedPolicy::build(policy, pop, cfg)?;
    let pop_cum = cumulative(pop.probs());
    let thresholds: Vec<f64> = (1..=cfg.cache_size)
        .map(|k| cfg.sinr_threshold(k))
        .collect();
    let scene = Scene {
        cfg,
        sim,
        prepared: &prepared,
        pop_cum: &pop_cum,
        thresholds: &thresholds,
        blocks: cfg.catalog_size.div_ceil(64),
    };

    let outcomes: Vec<Outcome> = (0..sim.realizations)
        .into_par_iter()
        .with_min_len(32)
        .map(|i| scene.run_one(i as u64))
        .collect();

    let mut successes = 0u64;
    let mut unicast_successes = 0u64;
    let mut effective = 0usize;
    let mut load_histogram = vec![0u64; cfg.cache_size];
    let mut distances = sim.collect_distances.then(Vec::new);
    for o in &outcomes {
        if !o.effective {
            continue;
        }
        effective += 1;
        successes += o.success as u64;
        unicast_successes += o.success_unicast as u64;
        load_histogram[o.load as usize - 1] += 1;
        if let Some(d) = distances.as_mut() {
            d.push(o.distance);
        }
    }

    let r = sim.realizations as f64;
    let q = successes as f64 / r;
    let ci = |p: f64| 1.96 * (p * (1.0 - p) / r).sqrt();
    let (q_unicast, ci_unicast_halfwidth) = if sim.measure_unicast {
        let qu = unicast_successes as f64 / r;
        (Some(qu), Some(ci(qu)))
    } else {
        (None, None)
    };
    Ok(SimReport {
        q,
        ci_halfwidth: ci(q),
        realizations: sim.realizations,
        effective,
        q_unicast,
        ci_unicast_halfwidth,
        load_histogram,
        serving_distances: distances,
    })
}

/// Kolmogorov-Smirnov statistic of a sample against a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        worst = worst.max((f - lo).abs()).max((hi - f).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::config::Snr;
    use crate::content::{CachingDistribution, Combination};

    fn cfg(n: usize, k: usize) -> NetworkConfig {
        NetworkConfig {
            bs_density: 1.0,
            user_density: 10.0,
            path_loss_exp: 4.0,
            bandwidth_hz: 1e7,
            target_rate_bps: 5e5,
            snr: Snr::from_db(30.0),
            catalog_size: n,
            cache_size: k,
        }
    }

    fn small_dist() -> CachingDistribution {
        CachingDistribution::new(
            3,
            2,
            [
                (Combination::new(vec![0, 1]).unwrap(), 0.6),
                (Combination::new(vec![0, 2]).unwrap(), 0.4),
            ],
        )
        .unwrap()
    }

    #[test]
    fn same_seed_reproduces_bit_identical_results() {
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let policy = CachePolicy::Distribution(small_dist());
        let mut sim = SimConfig::new(10.0, 400, 42);
        sim.measure_unicast = true;
        sim.collect_distances = true;
        let a = monte_carlo(&policy, &pop, &c, &sim).unwrap();
        let b = monte_carlo(&policy, &pop, &c, &sim).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.q_unicast, b.q_unicast);
        assert_eq!(a.effective, b.effective);
        assert_eq!(a.load_histogram, b.load_histogram);
        assert_eq!(a.serving_distances, b.serving_distances);

        let mut other = sim.clone();
        other.seed = 43;
        let d = monte_carlo(&policy, &pop, &c, &other).unwrap();
        assert_ne!(a.q, d.q, "different seeds should not collide exactly");
    }

    #[test]
    fn multicast_scores_at_least_as_well_as_unicast() {
        // The load (distinct files) never exceeds the user count, so the
        // multicast rate threshold is never stricter, realization by
        // realization.
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let policy = CachePolicy::Distribution(small_dist());
        let mut sim = SimConfig::new(10.0, 1500, 7);
        sim.measure_unicast = true;
        let rep = monte_carlo(&policy, &pop, &c, &sim).unwrap();
        assert!(rep.q >= rep.q_unicast.unwrap());
    }

    #[test]
    fn load_histogram_covers_effective_realizations() {
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let policy = CachePolicy::Distribution(small_dist());
        let sim = SimConfig::new(10.0, 800, 3);
        let rep = monte_carlo(&policy, &pop, &c, &sim).unwrap();
        assert_eq!(
            rep.load_histogram.iter().sum::<u64>(),
            rep.effective as u64
        );
        assert!(rep.effective > 0);
        assert!(rep.q <= rep.effective as f64 / rep.realizations as f64);
    }

    #[test]
    fn estimate_tracks_analytical_value_on_a_small_case() {
        // Toroidal window to suppress boundary effects; tolerance is a few
        // standard errors wide so the test is robust to the seed.
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = small_dist();
        let want = analysis::success_prob(&d, &pop, &c).unwrap().q;
        let mut sim = SimConfig::new(16.0, 6000, 11);
        sim.toroidal = true;
        let rep = monte_carlo(&CachePolicy::Distribution(d), &pop, &c, &sim).unwrap();
        assert!(
            (rep.q - want).abs() < 3.0 * rep.ci_halfwidth.max(1e-3),
            "simulated {} vs analytical {want} (ci {})",
            rep.q,
            rep.ci_halfwidth
        );
    }

    #[test]
    fn pinned_request_isolates_one_file() {
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let d = small_dist();
        let per_file = analysis::success_prob(&d, &pop, &c).unwrap().per_file;
        let mut sim = SimConfig::new(16.0, 6000, 23);
        sim.toroidal = true;
        sim.pinned_request = Some(1);
        let rep = monte_carlo(&CachePolicy::Distribution(d), &pop, &c, &sim).unwrap();
        assert!(
            (rep.q - per_file[1]).abs() < 3.0 * rep.ci_halfwidth.max(1e-3),
            "simulated {} vs analytical {}",
            rep.q,
            per_file[1]
        );
    }

    #[test]
    fn serving_distances_follow_the_thinned_nearest_point_law() {
        // Under a fixed cache the serving station is the nearest point of a
        // thinned process of density T * bs_density, whose nearest-distance
        // CDF is 1 - exp(-pi lambda T d^2).
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let mut sim = SimConfig::new(16.0, 4000, 99);
        sim.toroidal = true;
        sim.collect_distances = true;
        sim.pinned_request = Some(0);
        let rep = monte_carlo(&CachePolicy::MostPopular, &pop, &c, &sim).unwrap();
        let d = rep.serving_distances.unwrap();
        let lambda = c.bs_density; // file 0 is in every cache: T = 1
        let stat = ks_statistic(&d, |x| 1.0 - (-std::f64::consts::PI * lambda * x * x).exp());
        let critical = 1.6277 / (d.len() as f64).sqrt(); // 1% level
        assert!(stat < critical, "KS statistic {stat} over {critical}");
    }

    #[test]
    fn sparse_network_mostly_fails_without_crashing() {
        let mut c = cfg(3, 2);
        c.bs_density = 1e-6;
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let sim = SimConfig::new(4.0, 200, 5);
        let rep = monte_carlo(&CachePolicy::MostPopular, &pop, &c, &sim).unwrap();
        assert!(rep.effective <= 2);
        assert!(rep.q <= 0.01);
    }

    #[test]
    fn config_validation_rejects_bad_runs() {
        let c = cfg(3, 2);
        let pop = Popularity::new(vec![0.5, 0.3, 0.2]).unwrap();
        let policy = CachePolicy::MostPopular;
        assert!(monte_carlo(&policy, &pop, &c, &SimConfig::new(0.0, 10, 1)).is_err());
        assert!(monte_carlo(&policy, &pop, &c, &SimConfig::new(4.0, 0, 1)).is_err());
        let mut sim = SimConfig::new(4.0, 10, 1);
        sim.pinned_request = Some(3);
        assert!(monte_carlo(&policy, &pop, &c, &sim).is_err());
        // Mismatched distribution geometry.
        let wrong = CachingDistribution::new(
            4,
            2,
            [(Combination::new(vec![0, 1]).unwrap(), 1.0)],
        )
        .unwrap();
        assert!(monte_carlo(
            &CachePolicy::Distribution(wrong),
            &pop,
            &c,
            &SimConfig::new(4.0, 10, 1)
        )
        .is_err());
    }

    #[test]
    fn ks_statistic_detects_misfit() {
        let good: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let id = |x: f64| x;
        assert!(ks_statistic(&good, id) < 0.01);
        let shifted = |x: f64| (x - 0.2).clamp(0.0, 1.0);
        assert!(ks_statistic(&good, shifted) > 0.15);
    }
}
