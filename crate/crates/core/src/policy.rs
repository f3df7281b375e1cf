//! Caching policies: rules by which each base station fills its cache.
//!
//! Every policy draws caches independently across stations. The reference
//! policies double as baselines for judging optimized caching distributions:
//! deterministically caching the most popular files, popularity-weighted
//! sampling with replacement, and uniformly random combinations.

use crate::content::{CachingDistribution, Popularity};
use crate::error::{Error, Result};

/// How a base station selects the files it caches.
#[derive(Debug, Clone, PartialEq)]
pub enum CachePolicy {
    /// Cache drawn from an explicit distribution over size-K combinations.
    Distribution(CachingDistribution),
    /// Every station caches the K most popular files (ties broken by index).
    MostPopular,
    /// K popularity-weighted draws *with replacement*; duplicate draws
    /// collapse, so a cache may hold fewer than K distinct files.
    PopularitySampled,
    /// A uniformly random K-subset of the catalog.
    UniformRandom,
}

/// Identifiers for the reference policies, in their conventional order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineId {
    MostPopular,
    PopularitySampled,
    UniformRandom,
}

/// The reference policy for a baseline identifier.
pub fn baseline(which: BaselineId) -> CachePolicy {
    match which {
        BaselineId::MostPopular => CachePolicy::MostPopular,
        BaselineId::PopularitySampled => CachePolicy::PopularitySampled,
        BaselineId::UniformRandom => CachePolicy::UniformRandom,
    }
}

impl CachePolicy {
    /// Short identifier used in CSV column names and log lines.
    pub fn label(&self) -> &'static str {
        match self {
            CachePolicy::Distribution(_) => "designed",
            CachePolicy::MostPopular => "most_popular",
            CachePolicy::PopularitySampled => "popularity_sampled",
            CachePolicy::UniformRandom => "uniform_random",
        }
    }

    /// Exact per-file presence probability `Pr[file n is in a cache]`.
    ///
    /// Presence marginals are exact for every policy (only the joint law of
    /// the cache differs), and they fully determine the serving-distance
    /// distribution: stations holding file `n` form a thinned Poisson process
    /// of density `marginal * bs_density`.
    pub fn presence_marginals(&self, pop: &Popularity, cache_size: usize) -> Result<Vec<f64>> {
        let n = pop.len();
        if cache_size == 0 || cache_size > n {
            return Err(Error::InvalidConfig(format!(
                "cache size {cache_size} invalid for catalog of {n}"
            )));
        }
        match self {
            CachePolicy::Distribution(d) => {
                if d.catalog_size() != n || d.cache_size() != cache_size {
                    return Err(Error::InvalidConfig(format!(
                        "distribution is over N={}, K={} but the experiment uses N={n}, K={cache_size}",
                        d.catalog_size(),
                        d.cache_size()
                    )));
                }
                Ok(d.marginals().values().to_vec())
            }
            CachePolicy::MostPopular => {
                let top = top_files(pop, cache_size);
                let mut t = vec![0.0; n];
                for f in top {
                    t[f as usize] = 1.0;
                }
                Ok(t)
            }
            CachePolicy::PopularitySampled => Ok(pop
                .probs()
                .iter()
                .map(|&a| 1.0 - (1.0 - a).powi(cache_size as i32))
                .collect()),
            CachePolicy::UniformRandom => {
                Ok(vec![cache_size as f64 / n as f64; n])
            }
        }
    }
}

/// Indices of the `k` most popular files, ties broken toward lower indices.
pub(crate) fn top_files(pop: &Popularity, k: usize) -> Vec<u32> {
    let mut order: Vec<u32> = (0..pop.len() as u32).collect();
    order.sort_by(|&i, &j| {
        pop.get(j as usize)
            .partial_cmp(&pop.get(i as usize))
            .expect("popularities are finite")
            .then(i.cmp(&j))
    });
    let mut top: Vec<u32> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content::Combination;

    #[test]
    fn presence_marginals_per_policy() {
        let pop = Popularity::zipf(4, 1.0).unwrap();
        let t = CachePolicy::MostPopular.presence_marginals(&pop, 2).unwrap();
        assert_eq!(t, vec![1.0, 1.0, 0.0, 0.0]);

        let t = CachePolicy::UniformRandom.presence_marginals(&pop, 2).unwrap();
        assert!(t.iter().all(|&v| (v - 0.5).abs() < 1e-15));

        let t = CachePolicy::PopularitySampled
            .presence_marginals(&pop, 2)
            .unwrap();
        for (got, &a) in t.iter().zip(pop.probs()) {
            assert!((got - (1.0 - (1.0 - a) * (1.0 - a))).abs() < 1e-15);
        }

        let d = CachingDistribution::new(
            4,
            2,
            [
                (Combination::new(vec![0, 1]).unwrap(), 0.75),
                (Combination::new(vec![0, 2]).unwrap(), 0.25),
            ],
        )
        .unwrap();
        let t = CachePolicy::Distribution(d).presence_marginals(&pop, 2).unwrap();
        assert_eq!(t, vec![1.0, 0.75, 0.25, 0.0]);
    }

    #[test]
    fn top_files_break_ties_by_index() {
        let pop = Popularity::new(vec![0.25; 4]).unwrap();
        assert_eq!(top_files(&pop, 2), vec![0, 1]);
    }

    #[test]
    fn mismatched_distribution_is_rejected() {
        let pop = Popularity::zipf(4, 1.0).unwrap();
        let d = CachingDistribution::new(
            3,
            2,
            [
                (Combination::new(vec![0, 1]).unwrap(), 0.5),
                (Combination::new(vec![0, 2]).unwrap(), 0.5),
            ],
        )
        .unwrap();
        assert!(CachePolicy::Distribution(d)
            .presence_marginals(&pop, 2)
            .is_err());
    }
}
