//! Network-level parameters shared by the analytical and simulation layers.
//!
//! All densities are per unit area and all distances are in the same
//! (arbitrary) length unit; only the products `density * area` and
//! `density * distance^2` matter, so the unit can be chosen freely as long
//! as it is used consistently.

use crate::error::{Error, Result};

/// Transmit signal-to-noise ratio at unit distance.
///
/// `Infinite` selects the interference-limited regime (zero noise), for which
/// the success-probability integrals collapse to closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    /// No receiver noise; interference is the only impairment.
    Infinite,
    /// Linear (not dB) power ratio, strictly positive.
    Linear(f64),
}

impl Snr {
    /// Converts a value in dB to a linear ratio.
    pub fn from_db(db: f64) -> Self {
        Snr::Linear(10f64.powf(db / 10.0))
    }

    /// Linear ratio, or `None` in the noiseless regime.
    pub fn linear(self) -> Option<f64> {
        match self {
            Snr::Infinite => None,
            Snr::Linear(v) => Some(v),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Snr::Infinite)
    }
}

/// Static description of the cellular network and content catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Base-station density (points per unit area), > 0.
    pub bs_density: f64,
    /// User density (points per unit area), >= 0.
    pub user_density: f64,
    /// Path-loss exponent, must exceed 2 for the interference integrals to
    /// converge.
    pub path_loss_exp: f64,
    /// Total downlink bandwidth in Hz, > 0. Multicast splits it evenly over
    /// the distinct files served by a base station.
    pub bandwidth_hz: f64,
    /// Target delivery rate in bit/s that defines a successful transmission.
    pub target_rate_bps: f64,
    /// Transmit SNR at unit distance.
    pub snr: Snr,
    /// Number of files in the catalog (N), >= 1.
    pub catalog_size: usize,
    /// Number of files each base station caches (K), 1 <= K <= N.
    pub cache_size: usize,
}

impl NetworkConfig {
    /// Collects every invariant violation in this configuration.
    ///
    /// An empty vector means the configuration is usable everywhere in the
    /// crate; callers that need a hard failure should use [`validate`].
    ///
    /// [`validate`]: NetworkConfig::validate
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.bs_density > 0.0) || !self.bs_density.is_finite() {
            v.push(format!(
                "bs_density must be finite and > 0 (got {})",
                self.bs_density
            ));
        }
        if !(self.user_density >= 0.0) || !self.user_density.is_finite() {
            v.push(format!(
                "user_density must be finite and >= 0 (got {})",
                self.user_density
            ));
        }
        if !(self.path_loss_exp > 2.0) || !self.path_loss_exp.is_finite() {
            v.push(format!(
                "path_loss_exp must be finite and > 2 (got {})",
                self.path_loss_exp
            ));
        }
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            v.push(format!(
                "bandwidth_hz must be finite and > 0 (got {})",
                self.bandwidth_hz
            ));
        }
        if !(self.target_rate_bps > 0.0) || !self.target_rate_bps.is_finite() {
            v.push(format!(
                "target_rate_bps must be finite and > 0 (got {})",
                self.target_rate_bps
            ));
        }
        if let Snr::Linear(s) = self.snr {
            if !(s > 0.0) || !s.is_finite() {
                v.push(format!("snr must be finite and > 0 (got {s})"));
            }
        }
        if self.catalog_size == 0 {
            v.push("catalog_size must be >= 1".to_string());
        }
        if self.cache_size == 0 {
            v.push("cache_size must be >= 1".to_string());
        }
        if self.cache_size > self.catalog_size {
            v.push(format!(
                "cache_size ({}) must not exceed catalog_size ({})",
                self.cache_size, self.catalog_size
            ));
        }
        v
    }

    /// Fails with a message listing every violation if the configuration is
    /// not usable.
    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    /// Spectral-efficiency threshold `2^(k tau / W) - 1` for a station that
    /// splits its bandwidth over `k` multicast streams: the SINR a receiver
    /// must beat for the per-file rate to reach the target.
    pub(crate) fn sinr_threshold(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let ratio = k as f64 * self.target_rate_bps / self.bandwidth_hz;
        (2f64).powf(ratio) - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> NetworkConfig {
        NetworkConfig {
            bs_density: 0.01,
            user_density: 0.1,
            path_loss_exp: 4.0,
            bandwidth_hz: 1e7,
            target_rate_bps: 5e5,
            snr: Snr::from_db(30.0),
            catalog_size: 5,
            cache_size: 1,
        }
    }

    #[test]
    fn valid_config_passes() {
        assert!(base().validate().is_ok());
    }

    #[test]
    fn violations_are_collected_not_truncated() {
        let mut cfg = base();
        cfg.path_loss_exp = 2.0; // boundary is excluded
        cfg.bandwidth_hz = 0.0;
        cfg.cache_size = 9; // exceeds catalog
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "expected all three violations: {v:?}");
    }

    #[test]
    fn snr_db_conversion() {
        let s = Snr::from_db(30.0);
        assert!((s.linear().unwrap() - 1000.0).abs() < 1e-9);
        assert!(Snr::Infinite.linear().is_none());
    }

    #[test]
    fn sinr_threshold_matches_shannon_inverse() {
        let cfg = base();
        // k * tau / W = 1 * 5e5 / 1e7 = 0.05
        let got = cfg.sinr_threshold(1);
        assert!((got - ((2f64).powf(0.05) - 1.0)).abs() < 1e-15);
        // Twenty streams of the Table-style workload hit ratio 1.0.
        let got20 = cfg.sinr_threshold(20);
        assert!((got20 - 1.0).abs() < 1e-12);
    }
}
