//! Cache-placement design: choosing the caching distribution that maximizes
//! the success probability of the typical request.
//!
//! The designer works in two steps. First, per-file marginals are optimized
//! under the dense-user, noiseless objective `sum_n a_n T_n / (c2 + c1 T_n)`,
//! which a reverse water-filling argument solves exactly (including the
//! box constraints `0 <= T_n <= 1`). Second, a distribution over cache
//! combinations realizing those marginals is refined by linear programming:
//! on the fixed-marginal polyhedron the exact finite-density objective is
//! linear in the combination weights, so the refinement is itself exact over
//! the candidate set it is given.
//!
//! A projected-gradient ascender over combination weights is also provided;
//! it optimizes the exact objective directly (marginals move with the
//! weights) and is the method of choice for unit caches, where the weight
//! space is just the file simplex.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{success_prob, Engine};
use crate::config::NetworkConfig;
use crate::content::{
    binomial, decompose_marginals, CachingDistribution, Combination, KSubsets, Marginals,
    Popularity,
};
use crate::coverage;
use crate::error::{Error, Result};
use crate::lp;

/// Marginals at or above this value are treated as pinned to one.
const FULL_TOL: f64 = 1e-9;
/// Marginals at or below this value are treated as zero.
const DROP_TOL: f64 = 1e-12;

// ===========================================================================
// Projection
// ===========================================================================

/// Euclidean projection of `v` onto `{x : sum x = total, 0 <= x_i <= cap}`.
///
/// The projection is `x_i = clamp(v_i - nu, 0, cap)` for the unique shift
/// `nu` meeting the sum constraint, found by bisection (the sum is
/// continuous and non-increasing in the shift).
pub fn project_capped_simplex(v: &[f64], total: f64, cap: f64) -> Result<Vec<f64>> {
    if !(cap > 0.0) || !(total >= 0.0) || total > cap * v.len() as f64 + 1e-9 {
        return Err(Error::Domain(format!(
            "no point with sum {total} exists in the box [0, {cap}]^{}",
            v.len()
        )));
    }
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let eval = |nu: f64| -> f64 { v.iter().map(|&vi| (vi - nu).clamp(0.0, cap)).sum() };
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - cap - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if eval(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let mut x: Vec<f64> = v.iter().map(|&vi| (vi - nu).clamp(0.0, cap)).collect();
    // Spread the (machine-precision) residual over coordinates that are
    // strictly inside the box so the sum constraint holds exactly.
    let err = total - x.iter().sum::<f64>();
    if err != 0.0 {
        let free: Vec<usize> = (0..x.len())
            .filter(|&i| x[i] > 0.0 && x[i] < cap)
            .collect();
        if !free.is_empty() {
            let share = err / free.len() as f64;
            for i in free {
                x[i] = (x[i] + share).clamp(0.0, cap);
            }
        } else if let Some(i) = (0..x.len()).find(|&i| {
            if err > 0.0 {
                x[i] < cap
            } else {
                x[i] > 0.0
            }
        }) {
            x[i] = (x[i] + err).clamp(0.0, cap);
        }
    }
    Ok(x)
}

// ===========================================================================
// Marginal design (water-filling)
// ===========================================================================

/// Optimal per-file marginals under the dense-user, noiseless objective.
#[derive(Debug, Clone)]
pub struct MarginalDesign {
    /// The optimizing marginals.
    pub marginals: Marginals,
    /// Lagrange multiplier of the sum constraint (the water level).
    pub multiplier: f64,
    /// Whether the interior closed form applied (no marginal clamped).
    pub closed_form: bool,
    /// Files whose marginal is pinned at one.
    pub full: Vec<u32>,
    /// Files whose marginal is zero.
    pub dropped: Vec<u32>,
}

/// Maximizes `sum_n a_n T_n / (c2 + c1 T_n)` over `sum T = K`,
/// `0 <= T_n <= 1`, with the interference constants of full load `K`.
///
/// Stationarity gives `T_n = (mu sqrt(a_n) - c2) / c1` clamped to `[0, 1]`,
/// a reverse water-filling in the water level `mu`; when no marginal clamps,
/// `mu = (c1 K + N c2) / sum_m sqrt(a_m)` in closed form.
pub fn waterfill_marginals(pop: &Popularity, cfg: &NetworkConfig) -> Result<MarginalDesign> {
    cfg.validate()?;
    if pop.len() != cfg.catalog_size {
        return Err(Error::InvalidConfig(format!(
            "popularity covers {} files but the catalog has {}",
            pop.len(),
            cfg.catalog_size
        )));
    }
    let consts = coverage::constants(cfg.cache_size, cfg)?;
    let (c1, c2) = (consts.c1, consts.c2);
    let n = pop.len();
    let k = cfg.cache_size as f64;
    let roots: Vec<f64> = pop.probs().iter().map(|&a| a.sqrt()).collect();
    let fill = |mu: f64| -> f64 {
        roots
            .iter()
            .map(|&r| ((mu * r - c2) / c1).clamp(0.0, 1.0))
            .sum()
    };

    // Interior closed form if no coordinate needs clamping at its level.
    let root_sum: f64 = roots.iter().sum();
    let mu_interior = (c1 * k + n as f64 * c2) / root_sum;
    let root_min = roots.iter().cloned().fold(f64::INFINITY, f64::min);
    let root_max = roots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let closed_form =
        root_min * mu_interior >= c2 - 1e-12 && root_max * mu_interior <= c1 + c2 + 1e-12;

    let mu = if closed_form {
        mu_interior
    } else {
        // fill is non-decreasing in mu, 0 at 0, and N at mu_hi.
        let mut lo = 0.0;
        let mut hi = (c1 + c2) / root_min;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fill(mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let t: Vec<f64> = roots
        .iter()
        .map(|&r| ((mu * r - c2) / c1).clamp(0.0, 1.0))
        .collect();
    let full = (0..n)
        .filter(|&i| t[i] >= 1.0 - FULL_TOL)
        .map(|i| i as u32)
        .collect();
    let dropped = (0..n)
        .filter(|&i| t[i] <= DROP_TOL)
        .map(|i| i as u32)
        .collect();
    Ok(MarginalDesign {
        marginals: Marginals::new(t, cfg.cache_size)?,
        multiplier: c2 / (mu * mu),
        closed_form,
        full,
        dropped,
    })
}

// ===========================================================================
// Support pruning
// ===========================================================================

/// Classification of the catalog by the water-filled marginals.
#[derive(Debug, Clone)]
pub struct PrunedSupport {
    /// Files every cache must hold (marginal one).
    pub full: Vec<u32>,
    /// Files with a strictly interior marginal.
    pub free: Vec<u32>,
    /// Files no cache should hold (marginal zero).
    pub dropped: Vec<u32>,
}

impl PrunedSupport {
    /// Number of combinations consistent with the classification: all ways
    /// to fill the non-pinned slots from the free files.
    pub fn admissible_count(&self, cache_size: usize) -> f64 {
        binomial(self.free.len(), cache_size - self.full.len())
    }
}

/// Splits the catalog into pinned, free, and excluded files.
pub fn prune(marginals: &Marginals) -> PrunedSupport {
    let mut full = Vec::new();
    let mut free = Vec::new();
    let mut dropped = Vec::new();
    for (i, &t) in marginals.values().iter().enumerate() {
        if t >= 1.0 - FULL_TOL {
            full.push(i as u32);
        } else if t <= DROP_TOL {
            dropped.push(i as u32);
        } else {
            free.push(i as u32);
        }
    }
    PrunedSupport {
        full,
        free,
        dropped,
    }
}

// ===========================================================================
// LP refinement
// ===========================================================================

/// A distribution over candidate combinations realizing given marginals,
/// chosen to maximize the exact success probability.
#[derive(Debug, Clone)]
pub struct RefinedDesign {
    pub distribution: CachingDistribution,
    /// Exact success probability of the refined distribution (the linear
    /// objective value — exact because the objective is linear once the
    /// marginals are fixed).
    pub q: f64,
}

/// Maximizes the exact success probability over distributions supported on
/// `candidates` with the given marginals.
///
/// Candidates that contradict the marginals (missing a pinned file or
/// containing an excluded one) are discarded; the rest form the columns of
/// an equality-form linear program with one row per interior-marginal file.
pub fn lp_refine(
    marginals: &Marginals,
    candidates: &[Combination],
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<RefinedDesign> {
    cfg.validate()?;
    if pop.len() != cfg.catalog_size || marginals.len() != pop.len() {
        return Err(Error::InvalidConfig(
            "marginals, popularity, and catalog sizes disagree".to_string(),
        ));
    }
    if marginals.cache_size() != cfg.cache_size {
        return Err(Error::InvalidConfig(
            "marginals were built for a different cache size".to_string(),
        ));
    }
    let support = prune(marginals);
    let admissible: Vec<Combination> = {
        let mut seen = BTreeSet::new();
        candidates
            .iter()
            .filter(|combo| {
                combo.len() == cfg.cache_size
                    && support.full.iter().all(|&f| combo.contains(f))
                    && !support.dropped.iter().any(|&f| combo.contains(f))
                    && combo.files().iter().all(|&f| (f as usize) < pop.len())
                    && seen.insert((*combo).clone())
            })
            .cloned()
            .collect()
    };
    if admissible.is_empty() {
        return Err(Error::InfeasibleLp(
            "no candidate combination is consistent with the marginals".to_string(),
        ));
    }

    // All slots pinned: the only admissible combination carries everything.
    if support.free.is_empty() {
        let combo = admissible[0].clone();
        let dist = CachingDistribution::new(pop.len(), cfg.cache_size, [(combo, 1.0)])?;
        let q = success_prob(&dist, pop, cfg)?.q;
        return Ok(RefinedDesign {
            distribution: dist,
            q,
        });
    }

    let engine = Engine::new(cfg, pop.probs(), marginals.values().to_vec())?;
    let weights: Vec<f64> = admissible
        .iter()
        .map(|combo| engine.direct_weight(combo))
        .collect();

    // One row per free file; pinned files are in every admissible column and
    // the unit total follows from the rows (each column covers exactly
    // `K - |full|` free files).
    let rows: Vec<Vec<f64>> = support
        .free
        .iter()
        .map(|&f| {
            admissible
                .iter()
                .map(|combo| if combo.contains(f) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let b: Vec<f64> = support
        .free
        .iter()
        .map(|&f| marginals.get(f as usize))
        .collect();
    let sol = lp::maximize(&rows, &b, &weights)?;

    let mut entries: Vec<(Combination, f64)> = admissible
        .into_iter()
        .zip(sol.x)
        .filter(|(_, p)| *p > 1e-12)
        .collect();
    let mass: f64 = entries.iter().map(|(_, p)| p).sum();
    for (_, p) in entries.iter_mut() {
        *p /= mass;
    }
    let dist = CachingDistribution::new(pop.len(), cfg.cache_size, entries)?;
    Ok(RefinedDesign {
        distribution: dist,
        q: sol.objective,
    })
}

// ===========================================================================
// Full design pipeline
// ===========================================================================

/// Default cap on the number of candidate combinations fed to the LP.
pub const DEFAULT_CANDIDATE_BUDGET: usize = 5000;

/// Result of the two-step designer.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub distribution: CachingDistribution,
    /// Water-filled marginals the distribution realizes.
    pub marginals: Marginals,
    /// Exact success probability of the distribution.
    pub q: f64,
    /// Number of candidate combinations offered to the refinement program.
    pub candidates: usize,
    /// Whether every admissible combination was enumerated (otherwise a
    /// sampled pool was used).
    pub exhaustive: bool,
    /// Whether the marginal step used the interior closed form.
    pub closed_form_marginals: bool,
}

/// Two-step cache design: water-fill the marginals, then pick the best
/// distribution realizing them over a candidate set of combinations.
///
/// When the admissible combinations number at most `budget` they are all
/// enumerated and the refinement is exact over the marginal polyhedron.
/// Otherwise a deterministic candidate pool is assembled from the staircase
/// decomposition of the marginals, single-swap neighbours of its support,
/// and weighted random draws; the decomposition guarantees feasibility.
pub fn design(pop: &Popularity, cfg: &NetworkConfig, budget: usize) -> Result<DesignOutcome> {
    let wf = waterfill_marginals(pop, cfg)?;
    let support = prune(&wf.marginals);
    let slots = cfg.cache_size - support.full.len();

    if slots == 0 {
        let combo = Combination::new(support.full.clone())?;
        let dist = CachingDistribution::new(pop.len(), cfg.cache_size, [(combo, 1.0)])?;
        let q = success_prob(&dist, pop, cfg)?.q;
        return Ok(DesignOutcome {
            distribution: dist,
            marginals: wf.marginals,
            q,
            candidates: 1,
            exhaustive: true,
            closed_form_marginals: wf.closed_form,
        });
    }

    let exhaustive = support.admissible_count(cfg.cache_size) <= budget.max(1) as f64;
    let pool: Vec<Combination> = if exhaustive {
        KSubsets::new(support.free.clone(), slots)
            .map(|mut files| {
                files.extend_from_slice(&support.full);
                Combination::new(files)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        candidate_pool(&wf.marginals, &support, slots, budget)?
    };

    let refined = lp_refine(&wf.marginals, &pool, pop, cfg)?;
    let q = success_prob(&refined.distribution, pop, cfg)?.q;
    Ok(DesignOutcome {
        distribution: refined.distribution,
        marginals: wf.marginals,
        q,
        candidates: pool.len(),
        exhaustive,
        closed_form_marginals: wf.closed_form,
    })
}

/// Deterministic candidate pool for instances too large to enumerate:
/// the staircase decomposition support (always feasible), its single-swap
/// neighbourhood, and weighted random subsets drawn proportionally to the
/// marginals (fixed seed, so the design is reproducible).
fn candidate_pool(
    marginals: &Marginals,
    support: &PrunedSupport,
    slots: usize,
    budget: usize,
) -> Result<Vec<Combination>> {
    let mut pool: BTreeSet<Combination> = BTreeSet::new();
    let base = decompose_marginals(marginals)?;
    for (combo, _) in base.support() {
        pool.insert(combo.clone());
    }
    let budget = budget.max(pool.len());

    // Free files ranked by marginal, for swap targets.
    let mut ranked: Vec<u32> = support.free.clone();
    ranked.sort_by(|&x, &y| {
        marginals
            .get(y as usize)
            .partial_cmp(&marginals.get(x as usize))
            .unwrap()
            .then(x.cmp(&y))
    });
    let swap_targets: Vec<u32> = ranked.iter().take(16).copied().collect();

    let seeds: Vec<Combination> = pool.iter().cloned().collect();
    'swaps: for combo in &seeds {
        for &out in combo.files() {
            if support.full.contains(&out) {
                continue;
            }
            for &into in &swap_targets {
                if combo.contains(into) {
                    continue;
                }
                if pool.len() >= budget {
                    break 'swaps;
                }
                let files: Vec<u32> = combo
                    .files()
                    .iter()
                    .map(|&f| if f == out { into } else { f })
                    .collect();
                pool.insert(Combination::new(files)?);
            }
        }
    }

    // Weighted draws without replacement, keyed so that higher-marginal
    // files are picked more often.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0fca_c4e5);
    let mut attempts = 0usize;
    let max_attempts = 4 * budget;
    while pool.len() < budget && attempts < max_attempts {
        attempts += 1;
        let mut keyed: Vec<(f64, u32)> = support
            .free
            .iter()
            .map(|&f| {
                let u: f64 = rng.random::<f64>().max(1e-300);
                (u.powf(1.0 / marginals.get(f as usize)), f)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut files: Vec<u32> = keyed.iter().take(slots).map(|&(_, f)| f).collect();
        files.extend_from_slice(&support.full);
        pool.insert(Combination::new(files)?);
    }

    Ok(pool.into_iter().collect())
}

// ===========================================================================
// Projected gradient ascent
// ===========================================================================

/// Options for the projected-gradient ascender.
#[derive(Debug, Clone, Copy)]
pub struct GradientOptions {
    /// Number of gradient steps.
    pub max_iters: usize,
    /// Step-size scale; the step at iteration `t` is `step / t`.
    pub step: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        GradientOptions {
            max_iters: 600,
            step: 1.0,
        }
    }
}

/// Outcome of projected-gradient ascent over combination weights.
#[derive(Debug, Clone)]
pub struct GradientOutcome {
    pub distribution: CachingDistribution,
    /// Exact success probability of the returned distribution.
    pub q: f64,
    /// Objective value after each iteration.
    pub trace: Vec<f64>,
}

/// Maximizes the exact success probability over the simplex of weights on
/// `candidates` by projected gradient ascent with diminishing steps,
/// starting from `init` (which is normalized if needed). The best iterate
/// seen is returned — with a diminishing step the final iterate need not be
/// the best one.
pub fn gradient_projection(
    candidates: &[Combination],
    init: &[f64],
    pop: &Popularity,
    cfg: &NetworkConfig,
    opts: &GradientOptions,
) -> Result<GradientOutcome> {
    cfg.validate()?;
    if pop.len() != cfg.catalog_size {
        return Err(Error::InvalidConfig(format!(
            "popularity covers {} files but the catalog has {}",
            pop.len(),
            cfg.catalog_size
        )));
    }
    if candidates.is_empty() || candidates.len() != init.len() {
        return Err(Error::InvalidConfig(
            "need one initial weight per candidate combination".to_string(),
        ));
    }
    for combo in candidates {
        if combo.len() != cfg.cache_size {
            return Err(Error::Domain(format!(
                "candidate {:?} has {} files, caches hold {}",
                combo.files(),
                combo.len(),
                cfg.cache_size
            )));
        }
        if let Some(&f) = combo.files().last() {
            if f as usize >= pop.len() {
                return Err(Error::Domain(format!(
                    "candidate references file {} outside the catalog",
                    f + 1
                )));
            }
        }
    }
    if init.iter().any(|&w| w < 0.0) {
        return Err(Error::Domain(
            "initial weights must be non-negative".to_string(),
        ));
    }
    let mass: f64 = init.iter().sum();
    if mass <= 0.0 {
        return Err(Error::Domain(
            "initial weights must have positive mass".to_string(),
        ));
    }
    let mut w: Vec<f64> = init.iter().map(|&x| x / mass).collect();

    let nfiles = pop.len();
    let marginals_of = |w: &[f64]| -> Vec<f64> {
        let mut t = vec![0.0; nfiles];
        for (combo, &wi) in candidates.iter().zip(w) {
            for &f in combo.files() {
                t[f as usize] += wi;
            }
        }
        t
    };

    let mut trace = Vec::with_capacity(opts.max_iters + 1);
    let mut best_w = w.clone();
    let mut best_q = f64::NEG_INFINITY;
    for iter in 0..=opts.max_iters {
        let engine = Engine::new(cfg, pop.probs(), marginals_of(&w))?;
        // The objective is the weight-weighted sum of the fixed-marginal
        // linear coefficients, so one engine serves both value and gradient.
        let q: f64 = candidates
            .iter()
            .zip(&w)
            .map(|(combo, &wi)| wi * engine.direct_weight(combo))
            .sum();
        trace.push(q);
        if q > best_q {
            best_q = q;
            best_w.copy_from_slice(&w);
        }
        if iter == opts.max_iters {
            break;
        }
        let support: Vec<(&Combination, f64)> =
            candidates.iter().zip(w.iter().copied()).collect();
        let grad = engine.gradient(&support, candidates);
        let step = opts.step / (iter + 1) as f64;
        let moved: Vec<f64> = w.iter().zip(&grad).map(|(wi, g)| wi + step * g).collect();
        w = project_capped_simplex(&moved, 1.0, 1.0)?;
    }

    let entries: Vec<(Combination, f64)> = candidates
        .iter()
        .cloned()
        .zip(best_w)
        .filter(|(_, p)| *p > 1e-12)
        .collect();
    let mass: f64 = entries.iter().map(|(_, p)| p).sum();
    let dist = CachingDistribution::new(
        pop.len(),
        cfg.cache_size,
        entries.into_iter().map(|(c, p)| (c, p / mass)),
    )?;
    let q = success_prob(&dist, pop, cfg)?.q;
    Ok(GradientOutcome {
        distribution: dist,
        q,
        trace,
    })
}

/// Unit-cache design by projected gradient over per-file probabilities,
/// started from the water-filled marginals.
pub fn unit_cache_design(
    pop: &Popularity,
    cfg: &NetworkConfig,
    opts: &GradientOptions,
) -> Result<GradientOutcome> {
    if cfg.cache_size != 1 {
        return Err(Error::InvalidConfig(format!(
            "unit-cache design requires cache_size = 1 (got {})",
            cfg.cache_size
        )));
    }
    let candidates: Vec<Combination> = (0..pop.len() as u32)
        .map(|f| Combination::new(vec![f]))
        .collect::<Result<Vec<_>>>()?;
    let init = waterfill_marginals(pop, cfg)?.marginals.values().to_vec();
    gradient_projection(&candidates, &init, pop, cfg, opts)
}
