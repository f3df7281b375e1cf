//! Catalog-side vocabulary: file popularity, cache combinations, caching
//! distributions, and their per-file marginals.
//!
//! A *combination* is a set of exactly `K` distinct files — one possible
//! cache content. A *caching distribution* assigns probabilities to
//! combinations; every base station draws its cache i.i.d. from it. The
//! *marginals* `T_n` (probability that file `n` is cached) always sum to `K`
//! and determine the serving-distance statistics, while the joint
//! distribution additionally shapes the multicast load.
//!
//! File indices are 0-based throughout the API; the text format uses 1-based
//! indices, matching the usual catalog numbering in experiment write-ups.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

// ===========================================================================
// Popularity
// ===========================================================================

/// A probability vector over the file catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Popularity {
    probs: Vec<f64>,
}

impl Popularity {
    /// Validates a popularity vector in canonical (non-increasing) order.
    ///
    /// Every entry must lie in (0, 1] and the entries must sum to 1 within
    /// 1e-12.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let p = Self::check_values(probs)?;
        if p.probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidDistribution(
                "popularity must be non-increasing; use arbitrary_order for unsorted catalogs"
                    .to_string(),
            ));
        }
        Ok(p)
    }

    /// Like [`new`] but without the ordering requirement, for catalogs whose
    /// file labels are fixed externally (e.g. permutation tests).
    ///
    /// [`new`]: Popularity::new
    pub fn arbitrary_order(probs: Vec<f64>) -> Result<Self> {
        Self::check_values(probs)
    }

    fn check_values(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "popularity vector is empty".to_string(),
            ));
        }
        for (i, &a) in probs.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) || !a.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "popularity of file {} must lie in (0, 1] (got {a})",
                    i + 1
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "popularity must sum to 1 within 1e-12 (got {sum})"
            )));
        }
        Ok(Popularity { probs })
    }

    /// Zipf popularity over `n` files with skew `gamma >= 0`:
    /// `a_j` proportional to `j^-gamma`.
    pub fn zipf(n: usize, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution(
                "catalog must contain at least one file".to_string(),
            ));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "zipf skew must be finite and >= 0 (got {gamma})"
            )));
        }
        let mut probs: Vec<f64> = (1..=n).map(|j| (j as f64).powf(-gamma)).collect();
        let norm: f64 = probs.iter().sum();
        for a in &mut probs {
            *a /= norm;
        }
        Ok(Popularity { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, file: usize) -> f64 {
        self.probs[file]
    }
}

// ===========================================================================
// Combination
// ===========================================================================

/// A set of distinct files that fits one cache, stored sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combination {
    files: Box<[u32]>,
}

impl Combination {
    /// Builds a combination from file indices in any order; duplicates are an
    /// error.
    pub fn new(mut files: Vec<u32>) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::InvalidDistribution(
                "a cache combination must contain at least one file".to_string(),
            ));
        }
        files.sort_unstable();
        if files.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution(format!(
                "combination {files:?} repeats a file"
            )));
        }
        Ok(Combination {
            files: files.into_boxed_slice(),
        })
    }

    pub fn files(&self) -> &[u32] {
        &self.files
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn contains(&self, file: u32) -> bool {
        self.files.binary_search(&file).is_ok()
    }
}

// ===========================================================================
// Caching distribution
// ===========================================================================

/// A probability distribution over cache combinations of a fixed size.
///
/// Entries with probability exactly zero are legal (optimizers keep inactive
/// combinations in their working set); [`support`] skips them.
///
/// [`support`]: CachingDistribution::support
#[derive(Debug, Clone, PartialEq)]
pub struct CachingDistribution {
    catalog_size: usize,
    cache_size: usize,
    entries: BTreeMap<Combination, f64>,
}

impl CachingDistribution {
    pub fn new(
        catalog_size: usize,
        cache_size: usize,
        entries: impl IntoIterator<Item = (Combination, f64)>,
    ) -> Result<Self> {
        if cache_size == 0 || cache_size > catalog_size {
            return Err(Error::InvalidDistribution(format!(
                "cache size {cache_size} invalid for catalog of {catalog_size}"
            )));
        }
        let mut map = BTreeMap::new();
        let mut sum = 0.0;
        for (combo, prob) in entries {
            if combo.len() != cache_size {
                return Err(Error::InvalidDistribution(format!(
                    "combination {:?} has {} files, expected {cache_size}",
                    combo.files(),
                    combo.len()
                )));
            }
            if let Some(&f) = combo.files().last() {
                if f as usize >= catalog_size {
                    return Err(Error::InvalidDistribution(format!(
                        "combination references file {} outside catalog of {catalog_size}",
                        f + 1
                    )));
                }
            }
            if !(0.0..=1.0).contains(&prob) || !prob.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "probability {prob} of combination {:?} outside [0, 1]",
                    combo.files()
                )));
            }
            sum += prob;
            if map.insert(combo.clone(), prob).is_some() {
                return Err(Error::InvalidDistribution(format!(
                    "combination {:?} listed twice",
                    combo.files()
                )));
            }
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "combination probabilities must sum to 1 within 1e-9 (got {sum})"
            )));
        }
        Ok(CachingDistribution {
            catalog_size,
            cache_size,
            entries: map,
        })
    }

    /// Unit-cache (K = 1) distribution from per-file probabilities.
    ///
    /// Files with probability zero are omitted from the support.
    pub fn from_file_probs(probs: &[f64]) -> Result<Self> {
        let entries = probs
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p != 0.0)
            .map(|(n, &p)| Combination::new(vec![n as u32]).map(|c| (c, p)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(probs.len(), 1, entries)
    }

    pub fn catalog_size(&self) -> usize {
        self.catalog_size
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    /// All stored combinations, including ones with probability zero.
    pub fn entries(&self) -> &BTreeMap<Combination, f64> {
        &self.entries
    }

    /// Combinations with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = (&Combination, f64)> {
        self.entries.iter().filter(|(_, &p)| p > 0.0).map(|(c, &p)| (c, p))
    }

    /// Per-file caching probabilities `T_n = sum of p_i over combinations
    /// containing n`. The result sums to the cache size exactly (up to
    /// rounding) because every combination contributes its probability K
    /// times.
    pub fn marginals(&self) -> Marginals {
        let mut t = vec![0.0; self.catalog_size];
        for (combo, &p) in &self.entries {
            for &f in combo.files() {
                t[f as usize] += p;
            }
        }
        // Guard against rounding pushing a marginal just past 1.
        for v in &mut t {
            if *v > 1.0 && *v < 1.0 + 1e-9 {
                *v = 1.0;
            }
        }
        Marginals {
            t,
            cache_size: self.cache_size,
        }
    }

    // -- text format --------------------------------------------------------

    /// Writes the distribution in the interchange text format:
    /// a `#N=<N> K=<K>` header, then one line per combination with
    /// comma-separated 1-based file indices, a tab, and the probability.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#N={} K={}", self.catalog_size, self.cache_size);
        for (combo, p) in &self.entries {
            let ids: Vec<String> = combo.files().iter().map(|f| (f + 1).to_string()).collect();
            let _ = writeln!(out, "{}\t{}", ids.join(","), p);
        }
        out
    }

    /// Parses the text format produced by [`to_text`]. Lines beginning with
    /// `#` after the header are ignored as comments.
    ///
    /// [`to_text`]: CachingDistribution::to_text
    pub fn from_text(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, Ok(l))) if l.trim().is_empty() => continue,
                Some((i, Ok(l))) => break (i, l),
                Some((i, Err(e))) => {
                    return Err(Error::Parse(format!("line {}: {e}", i + 1)));
                }
                None => {
                    return Err(Error::Parse("empty distribution file".to_string()));
                }
            }
        };
        let (n, k) = parse_header(&header.1)
            .ok_or_else(|| Error::Parse(format!(
                "line {}: expected header '#N=<N> K=<K>', got '{}'",
                header.0 + 1,
                header.1
            )))?;
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (ids, prob) = trimmed.split_once('\t').ok_or_else(|| {
                Error::Parse(format!("line {}: missing tab separator", i + 1))
            })?;
            let files = ids
                .split(',')
                .map(|s| {
                    let v: u64 = s.trim().parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad file index '{s}'", i + 1))
                    })?;
                    if v == 0 {
                        return Err(Error::Parse(format!(
                            "line {}: file indices are 1-based, got 0",
                            i + 1
                        )));
                    }
                    Ok((v - 1) as u32)
                })
                .collect::<Result<Vec<u32>>>()?;
            let prob: f64 = prob.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: bad probability '{prob}'", i + 1))
            })?;
            entries.push((Combination::new(files)?, prob));
        }
        Self::new(n, k, entries)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.trim().strip_prefix("#N=")?;
    let (n, k) = rest.split_once(" K=")?;
    Some((n.trim().parse().ok()?, k.trim().parse().ok()?))
}

// ===========================================================================
// Marginals
// ===========================================================================

/// Per-file caching probabilities induced by a caching distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    t: Vec<f64>,
    cache_size: usize,
}

impl Marginals {
    /// Validates a marginal vector: entries in [0, 1], sum equal to the cache
    /// size within 1e-9.
    pub fn new(t: Vec<f64>, cache_size: usize) -> Result<Self> {
        if cache_size == 0 || cache_size > t.len() {
            return Err(Error::InfeasibleMarginals(format!(
                "cache size {cache_size} invalid for catalog of {}",
                t.len()
            )));
        }
        for (i, &v) in t.iter().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(&v) || !v.is_finite() {
                return Err(Error::InfeasibleMarginals(format!(
                    "marginal of file {} must lie in [0, 1] (got {v})",
                    i + 1
                )));
            }
        }
        let sum: f64 = t.iter().sum();
        if (sum - cache_size as f64).abs() > 1e-9 {
            return Err(Error::InfeasibleMarginals(format!(
                "marginals must sum to the cache size {cache_size} within 1e-9 (got {sum})"
            )));
        }
        let t = t
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        Ok(Marginals { t, cache_size })
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }

    pub fn get(&self, file: usize) -> f64 {
        self.t[file]
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }
}

/// Reconstructs a caching distribution with the given marginals using the
/// systematic-sampling staircase.
///
/// Lay the intervals `[C_(n-1), C_n)` with `C_n = T_1 + ... + T_n` end to end
/// on `[0, K)`; for an offset `u` in `[0, 1)` the points `u, u+1, ..., u+K-1`
/// land in `K` distinct intervals (no interval is longer than 1), selecting a
/// combination. Sweeping `u` uniformly reproduces every marginal exactly, and
/// the combination only changes when `u` crosses the fractional part of some
/// `C_n`, so at most `N` distinct combinations appear.
pub fn decompose_marginals(marginals: &Marginals) -> Result<CachingDistribution> {
    let t = marginals.values();
    let k = marginals.cache_size();
    let n = t.len();

    // Cumulative interval ends; force the final value to exactly K so the
    // last unit window is complete, and keep the sequence monotone despite
    // rounding (trailing zero marginals can otherwise overshoot K by an ulp).
    let mut ends = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &v in t {
        acc += v;
        ends.push(acc.min(k as f64));
    }
    ends[n - 1] = k as f64;
    for j in (0..n - 1).rev() {
        if ends[j] > ends[j + 1] {
            ends[j] = ends[j + 1];
        }
    }

    // Slab boundaries: fractional parts of the interval ends.
    let mut cuts: Vec<f64> = Vec::with_capacity(n + 2);
    cuts.push(0.0);
    cuts.push(1.0);
    for &e in &ends {
        let f = e.fract();
        if f > 0.0 && f < 1.0 {
            cuts.push(f);
        }
    }
    cuts.sort_unstable_by(|a, b| a.partial_cmp(b).expect("cuts are finite"));
    cuts.dedup();

    let mut weights: BTreeMap<Combination, f64> = BTreeMap::new();
    for w in cuts.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        // The combination is constant on the half-open slab [w[0], w[1]), so
        // probe at the left endpoint (the midpoint can round onto w[1]).
        let u = w[0];
        let mut files = Vec::with_capacity(k);
        let mut lo = 0usize;
        for m in 0..k {
            let point = u + m as f64;
            // First interval whose end lies strictly beyond the point. In
            // exact arithmetic the selected intervals are strictly
            // increasing with room for the files still to come; the clamp
            // only acts on ulp-level ties near unit-length intervals.
            let idx = ends.partition_point(|&e| e <= point).clamp(lo, n - (k - m));
            files.push(idx as u32);
            lo = idx + 1;
        }
        *weights.entry(Combination::new(files)?).or_insert(0.0) += width;
    }

    CachingDistribution::new(n, k, weights)
}

/// Iterates, in lexicographic order, over every size-`k` combination drawn
/// from `support` that contains `file`.
///
/// `support` must be sorted, duplicate-free, and contain `file`; there are
/// `C(|support| - 1, k - 1)` results.
pub fn combos_containing(
    file: u32,
    support: &[u32],
    k: usize,
) -> Result<impl Iterator<Item = Combination> + '_> {
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidDistribution(
            "support must be sorted and duplicate-free".to_string(),
        ));
    }
    if !support.contains(&file) {
        return Err(Error::InvalidDistribution(format!(
            "file {} is not in the support",
            file + 1
        )));
    }
    if k == 0 || k > support.len() {
        return Err(Error::InvalidDistribution(format!(
            "cannot choose {k} files from a support of {}",
            support.len()
        )));
    }
    let others: Vec<u32> = support.iter().copied().filter(|&f| f != file).collect();
    Ok(KSubsets::new(others, k - 1).map(move |mut rest| {
        rest.push(file);
        Combination::new(rest).expect("subsets of a valid support are valid")
    }))
}

/// Lexicographic iterator over `k`-element subsets of a fixed item list.
pub struct KSubsets {
    items: Vec<u32>,
    idx: Vec<usize>,
    done: bool,
}

impl KSubsets {
    pub fn new(items: Vec<u32>, k: usize) -> Self {
        let done = k > items.len();
        KSubsets {
            idx: (0..k).collect(),
            items,
            done,
        }
    }
}

impl Iterator for KSubsets {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let out: Vec<u32> = self.idx.iter().map(|&i| self.items[i]).collect();
        // Advance to the next lexicographic index tuple.
        let k = self.idx.len();
        let n = self.items.len();
        let mut j = k;
        loop {
            if j == 0 {
                self.done = true;
                break;
            }
            j -= 1;
            if self.idx[j] != j + n - k {
                self.idx[j] += 1;
                for l in j + 1..k {
                    self.idx[l] = self.idx[l - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Binomial coefficient as f64, saturating instead of overflowing.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc *= (n - j) as f64 / (j + 1) as f64;
        if !acc.is_finite() {
            return f64::INFINITY;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn zipf_matches_reference_values() {
        let p = Popularity::zipf(5, 2.0).unwrap();
        let want = [0.6832, 0.1708, 0.0759, 0.0427, 0.0273];
        for (got, want) in p.probs().iter().zip(want) {
            assert!((got - want).abs() < 5e-5, "got {got}, want {want}");
        }
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let flat = Popularity::zipf(4, 0.0).unwrap();
        assert!(flat.probs().iter().all(|&a| (a - 0.25).abs() < 1e-15));
    }

    #[test]
    fn popularity_validation() {
        assert!(Popularity::new(vec![0.5, 0.5]).is_ok());
        assert!(Popularity::new(vec![0.4, 0.6]).is_err(), "unsorted");
        assert!(Popularity::arbitrary_order(vec![0.4, 0.6]).is_ok());
        assert!(Popularity::new(vec![0.5, 0.4]).is_err(), "bad sum");
        assert!(Popularity::new(vec![1.5, -0.5]).is_err());
        assert!(Popularity::zipf(0, 1.0).is_err());
        assert!(Popularity::zipf(3, -1.0).is_err());
    }

    #[test]
    fn combination_is_canonical() {
        let c = Combination::new(vec![4, 1, 2]).unwrap();
        assert_eq!(c.files(), &[1, 2, 4]);
        assert!(c.contains(2) && !c.contains(3));
        assert!(Combination::new(vec![1, 1, 2]).is_err());
        assert!(Combination::new(vec![]).is_err());
    }

    #[test]
    fn marginals_of_small_distribution() {
        // Files {1,2} w.p. 1/2 and {1,3} w.p. 1/2 (1-based labels).
        let d = dist(3, 2, &[(&[0, 1], 0.5), (&[0, 2], 0.5)]);
        let t = d.marginals();
        assert_eq!(t.values(), &[1.0, 0.5, 0.5]);
        assert_eq!(t.cache_size(), 2);
    }

    #[test]
    fn distribution_validation_catches_each_defect() {
        let c12 = Combination::new(vec![0, 1]).unwrap();
        let c13 = Combination::new(vec![0, 2]).unwrap();
        // wrong combination size
        assert!(CachingDistribution::new(3, 2, [(Combination::new(vec![0]).unwrap(), 1.0)]).is_err());
        // out-of-catalog file
        assert!(CachingDistribution::new(2, 2, [(c13.clone(), 1.0)]).is_err());
        // bad sum
        assert!(CachingDistribution::new(3, 2, [(c12.clone(), 0.4), (c13.clone(), 0.4)]).is_err());
        // duplicate key
        assert!(
            CachingDistribution::new(3, 2, [(c12.clone(), 0.5), (c12.clone(), 0.5)]).is_err()
        );
        // probability outside [0, 1]
        assert!(CachingDistribution::new(3, 2, [(c12, 1.2), (c13, -0.2)]).is_err());
    }

    #[test]
    fn decompose_reproduces_documented_example() {
        let t = Marginals::new(vec![1.0, 0.5, 0.5], 2).unwrap();
        let d = decompose_marginals(&t).unwrap();
        let entries: Vec<_> = d
            .support()
            .map(|(c, p)| (c.files().to_vec(), p))
            .collect();
        assert_eq!(
            entries,
            vec![(vec![0, 1], 0.5), (vec![0, 2], 0.5)],
            "staircase should split file 1 across both half-slabs"
        );
    }

    #[test]
    fn decompose_round_trips_random_marginals() {
        // Build feasible marginals as the marginals of random distributions,
        // then check the staircase reproduces them exactly.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..50 {
            let n = 3 + (next() * 8.0) as usize;
            let k = 1 + (next() * (n as f64 - 1.0)) as usize;
            let mut weights = Vec::new();
            let mut seen = std::collections::BTreeSet::new();
            for _ in 0..6 {
                let mut files: Vec<u32> = (0..n as u32).collect();
                // Fisher-Yates prefix shuffle.
                for i in 0..k {
                    let j = i + (next() * (n - i) as f64) as usize;
                    files.swap(i, j.min(n - 1));
                }
                files.truncate(k);
                files.sort_unstable();
                if seen.insert(files.clone()) {
                    weights.push((Combination::new(files).unwrap(), next() + 0.05));
                }
            }
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            for (_, w) in &mut weights {
                *w /= total;
            }
            let d = CachingDistribution::new(n, k, weights).unwrap();
            let t = d.marginals();
            let rebuilt = decompose_marginals(&t).unwrap();
            let t2 = rebuilt.marginals();
            assert!(rebuilt.entries().len() <= n, "support exceeds catalog size");
            for (a, b) in t.values().iter().zip(t2.values()) {
                assert!((a - b).abs() < 1e-9, "trial {trial}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn combos_containing_enumerates_lexicographically() {
        let support = [1u32, 3, 5, 7];
        let combos: Vec<_> = combos_containing(3, &support, 2)
            .unwrap()
            .map(|c| c.files().to_vec())
            .collect();
        assert_eq!(combos, vec![vec![1, 3], vec![3, 5], vec![3, 7]]);
        assert!(combos_containing(2, &support, 2).is_err(), "file not in support");
        assert!(combos_containing(3, &support, 5).is_err(), "k too large");
        assert!(combos_containing(3, &[3, 1], 1).is_err(), "unsorted support");
        // Count matches C(|support|-1, k-1).
        let count = combos_containing(1, &support, 3).unwrap().count();
        assert_eq!(count, 3); // C(3, 2)
    }

    #[test]
    fn text_round_trip() {
        let d = dist(5, 2, &[(&[0, 1], 0.25), (&[0, 4], 0.75)]);
        let text = d.to_text();
        assert!(text.starts_with("#N=5 K=2\n"));
        assert!(text.contains("1,2\t0.25"));
        assert!(text.contains("1,5\t0.75"));
        let back = CachingDistribution::from_text(text.as_bytes()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn text_parse_errors_carry_line_context() {
        let no_header = "1,2\t1.0\n";
        let err = CachingDistribution::from_text(no_header.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");

        let bad_index = "#N=3 K=2\n0,2\t1.0\n";
        let err = CachingDistribution::from_text(bad_index.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let bad_prob = "#N=3 K=2\n1,2\tabc\n";
        let err = CachingDistribution::from_text(bad_prob.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("probability"), "{err}");

        let missing_tab = "#N=3 K=2\n1,2 1.0\n";
        let err = CachingDistribution::from_text(missing_tab.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("tab"), "{err}");
    }

    #[test]
    fn marginal_vector_validation() {
        assert!(Marginals::new(vec![0.5, 0.5, 1.0], 2).is_ok());
        assert!(Marginals::new(vec![0.5, 0.6], 2).is_err(), "sum != K");
        assert!(Marginals::new(vec![1.5, 0.5], 2).is_err(), "entry > 1");
        assert!(Marginals::new(vec![0.5, 0.5], 3).is_err(), "K > N");
    }

    #[test]
    fn binomial_basics() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(10, 0), 1.0);
        assert_eq!(binomial(4, 5), 0.0);
        assert!((binomial(200, 20) - 1.6135877880e27).abs() / 1.6135877880e27 < 1e-9);
    }
}
