//! Conditional success probability of a multicast transmission.
//!
//! A user requesting a file with caching marginal `x` is served by the
//! nearest base station that stores the file, at SINR determined by Rayleigh
//! fading, power-law path loss, and interference from every other station.
//! When the serving station multicasts `k` distinct files it divides its
//! bandwidth `k` ways, so the success event is
//! `(W / k) * log2(1 + SINR) >= tau`.
//!
//! Averaging over fading, the point process, and the serving distance leaves
//! a one-dimensional integral
//!
//! ```text
//! prob(x) = x * I0(x),   I0(x) = integral over t >= 0 of
//!           exp(-(c1 x + c2) t - b t^(alpha/2)) dt
//! ```
//!
//! where `c1`, `c2` capture the interference geometry (they depend on the
//! SINR threshold and the path-loss exponent through beta functions) and
//! `b` carries the thermal-noise term, vanishing as SNR grows. With `b = 0`
//! the integral collapses to the closed form `x / (c1 x + c2)`.

use crate::config::{NetworkConfig, Snr};
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::special::{beta, beta_comp_inc};

/// Interference-geometry constants for a station multicasting `load` files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageConstants {
    /// Coefficient of the caching marginal in the exponential decay rate.
    pub c1: f64,
    /// Constant part of the exponential decay rate; always positive.
    pub c2: f64,
    /// Number of files multicast simultaneously (the bandwidth divisor).
    pub load: usize,
}

/// Computes the interference constants for a given multicast load.
///
/// Requires `1 <= load <= cfg.cache_size` and a valid configuration.
pub fn constants(load: usize, cfg: &NetworkConfig) -> Result<CoverageConstants> {
    cfg.validate()?;
    if load < 1 || load > cfg.cache_size {
        return Err(Error::Domain(format!(
            "multicast load must be in 1..={} (got {load})",
            cfg.cache_size
        )));
    }
    let s = cfg.sinr_threshold(load);
    let e = 2.0 / cfg.path_loss_exp;
    let scale = e * s.powf(e);
    let c2 = scale * beta(e, 1.0 - e)?;
    let c1 = 1.0 + scale * beta_comp_inc(e, 1.0 - e, 1.0 / (1.0 + s))? - c2;
    if !c2.is_finite() || !c1.is_finite() || c2 <= 0.0 || c1 + c2 <= 0.0 {
        return Err(Error::Domain(format!(
            "interference constants degenerate (c1={c1}, c2={c2})"
        )));
    }
    Ok(CoverageConstants { c1, c2, load })
}

/// Prepared evaluator for one `(load, config)` pair.
///
/// Constructing the kernel performs the beta-function quadrature once;
/// evaluating it costs only the decay integral (or nothing in the noiseless
/// regime). Build one per load level when sweeping over marginals.
#[derive(Debug, Clone)]
pub struct CoverageKernel {
    consts: CoverageConstants,
    /// Noise coefficient of the `t^(alpha/2)` term; zero when SNR is infinite.
    noise_coeff: f64,
    alpha_half: f64,
}

impl CoverageKernel {
    pub fn new(load: usize, cfg: &NetworkConfig) -> Result<Self> {
        let consts = constants(load, cfg)?;
        let noise_coeff = match cfg.snr {
            Snr::Infinite => 0.0,
            Snr::Linear(snr) => {
                let pl = std::f64::consts::PI * cfg.bs_density;
                cfg.sinr_threshold(load) / (snr * pl.powf(cfg.path_loss_exp / 2.0))
            }
        };
        Ok(CoverageKernel {
            consts,
            noise_coeff,
            alpha_half: cfg.path_loss_exp / 2.0,
        })
    }

    pub fn constants(&self) -> CoverageConstants {
        self.consts
    }

    /// Success probability for a request whose file has caching marginal `x`.
    pub fn success_prob(&self, x: f64) -> Result<f64> {
        check_marginal(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(x * self.moment0(x))
    }

    /// Derivative of [`success_prob`] with respect to the marginal.
    ///
    /// The marginal must be strictly positive here; at `x = 0` use
    /// [`prob_ratio`], which carries the one-sided limit.
    ///
    /// [`success_prob`]: CoverageKernel::success_prob
    /// [`prob_ratio`]: CoverageKernel::prob_ratio
    pub fn success_prob_deriv(&self, x: f64) -> Result<f64> {
        check_marginal(x)?;
        if x == 0.0 {
            return Err(Error::Domain(
                "success_prob_deriv is defined for marginals x > 0".to_string(),
            ));
        }
        let (i0, i1) = (self.moment0(x), self.moment1(x));
        Ok(i0 - self.consts.c1 * x * i1)
    }

    /// `success_prob(x) / x`, extended continuously to `x = 0`.
    ///
    /// This form (and [`deriv_ratio`]) keeps the gradient expressions finite
    /// on the boundary of the feasible set, where raw division by the
    /// marginal would blow up.
    ///
    /// [`deriv_ratio`]: CoverageKernel::deriv_ratio
    pub(crate) fn prob_ratio(&self, x: f64) -> f64 {
        self.moment0(x)
    }

    /// `(success_prob'(x) * x - success_prob(x)) / x^2`, extended
    /// continuously to `x = 0`; equals `-c1 * I1(x)`.
    pub(crate) fn deriv_ratio(&self, x: f64) -> f64 {
        -self.consts.c1 * self.moment1(x)
    }

    /// `I0(x)`: zeroth moment of the decay kernel.
    fn moment0(&self, x: f64) -> f64 {
        let c = self.consts.c1 * x + self.consts.c2;
        if self.noise_coeff == 0.0 {
            return 1.0 / c;
        }
        self.decay_moment(c, 0)
    }

    /// `I1(x)`: first moment of the decay kernel.
    fn moment1(&self, x: f64) -> f64 {
        let c = self.consts.c1 * x + self.consts.c2;
        if self.noise_coeff == 0.0 {
            return 1.0 / (c * c);
        }
        self.decay_moment(c, 1)
    }

    /// Integrates `t^moment * exp(-c t - b t^(alpha/2))` over `t >= 0` by
    /// doubling segments until the analytic exponential tail bound is
    /// negligible. Deterministic; absolute accuracy ~1e-12 relative to the
    /// noiseless majorant.
    fn decay_moment(&self, c: f64, moment: u32) -> f64 {
        let b = self.noise_coeff;
        let ah = self.alpha_half;
        let quartic = (ah - 2.0).abs() < 1e-12;
        let g = |t: f64| {
            let pl = if quartic { t * t } else { t.powf(ah) };
            let e = (-c * t - b * pl).exp();
            if moment == 0 {
                e
            } else {
                t * e
            }
        };
        // Majorant of the full integral ignoring the noise term.
        let total_bound = if moment == 0 { 1.0 / c } else { 1.0 / (c * c) };
        let eps = 1e-12 * total_bound;

        let mut sum = 0.0;
        let mut lo = 0.0;
        let mut hi = 2.0 / c;
        // The cutoff below is reached once c * hi = 2^(seg+1) is a few tens,
        // so the loop runs ~6 iterations regardless of the decay rate.
        for seg in 0..64u32 {
            sum += integrate(&g, lo, hi, eps * 0.5f64.powi(seg as i32 + 2));
            // Remaining mass if the noise term were absent.
            let tail = if moment == 0 {
                (-c * hi).exp() / c
            } else {
                (-c * hi).exp() * (hi / c + 1.0 / (c * c))
            };
            if tail < eps * 0.25 {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        sum
    }
}

/// Success probability for marginal `x` under multicast load `load`.
///
/// One-shot convenience over [`CoverageKernel`]; prefer building the kernel
/// once when evaluating many marginals.
pub fn success_prob(x: f64, load: usize, cfg: &NetworkConfig) -> Result<f64> {
    CoverageKernel::new(load, cfg)?.success_prob(x)
}

/// Derivative of [`success_prob`] in the marginal, for `x > 0`.
pub fn success_prob_deriv(x: f64, load: usize, cfg: &NetworkConfig) -> Result<f64> {
    CoverageKernel::new(load, cfg)?.success_prob_deriv(x)
}

fn check_marginal(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "caching marginal must lie in [0, 1] (got {x})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verification_cfg(snr: Snr) -> NetworkConfig {
        NetworkConfig {
            bs_density: 0.01,
            user_density: 0.1,
            path_loss_exp: 4.0,
            bandwidth_hz: 1e7,
            target_rate_bps: 5e5,
            snr,
            catalog_size: 5,
            cache_size: 1,
        }
    }

    #[test]
    fn constants_unit_threshold_closed_form() {
        // alpha = 4 with k * tau / W = 1 gives threshold s = 1, so
        // c2 = (1/2) B(1/2, 1/2) = pi/2 and c1 = 1 - pi/4 because the upper
        // half of the symmetric beta integral is exactly half the total.
        let mut cfg = verification_cfg(Snr::Infinite);
        cfg.target_rate_bps = 1e7; // tau / W = 1
        let c = constants(1, &cfg).unwrap();
        assert!((c.c2 - std::f64::consts::FRAC_PI_2).abs() < 1e-12, "c2={}", c.c2);
        assert!(
            (c.c1 - (1.0 - std::f64::consts::FRAC_PI_4)).abs() < 1e-12,
            "c1={}",
            c.c1
        );
    }

    #[test]
    fn constants_small_threshold_value() {
        // tau / W = 0.05, alpha = 4: c2 = (pi/2) sqrt(2^0.05 - 1).
        let cfg = verification_cfg(Snr::Infinite);
        let c = constants(1, &cfg).unwrap();
        let want = 0.5 * std::f64::consts::PI * ((2f64).powf(0.05) - 1.0).sqrt();
        assert!((c.c2 - want).abs() < 1e-12, "c2={}, want {want}", c.c2);
        assert!((c.c2 - 0.29499).abs() < 2e-5);
        assert!(c.c2 > 0.0 && c.c1 + c.c2 > 0.0);
    }

    #[test]
    fn noiseless_closed_form() {
        let cfg = verification_cfg(Snr::Infinite);
        let k = CoverageKernel::new(1, &cfg).unwrap();
        let c = k.constants();
        let x = 0.6811;
        let want = x / (c.c2 + c.c1 * x);
        assert!((k.success_prob(x).unwrap() - want).abs() < 1e-15);
        let want_d = c.c2 / (c.c2 + c.c1 * x).powi(2);
        assert!((k.success_prob_deriv(x).unwrap() - want_d).abs() < 1e-15);
    }

    #[test]
    fn high_snr_approaches_noiseless_limit() {
        let noiseless = success_prob(0.6811, 1, &verification_cfg(Snr::Infinite)).unwrap();
        let nearly = success_prob(0.6811, 1, &verification_cfg(Snr::Linear(1e8))).unwrap();
        assert!((nearly - noiseless).abs() < 1e-3, "gap {}", (nearly - noiseless).abs());
        // At moderate SNR the noise term must actually bite.
        let moderate = success_prob(0.6811, 1, &verification_cfg(Snr::from_db(10.0))).unwrap();
        assert!(noiseless - moderate > 1e-3);
    }

    #[test]
    fn zero_marginal_and_domain_errors() {
        let cfg = verification_cfg(Snr::from_db(30.0));
        assert_eq!(success_prob(0.0, 1, &cfg).unwrap(), 0.0);
        assert!(success_prob(1.2, 1, &cfg).is_err());
        assert!(success_prob(-0.1, 1, &cfg).is_err());
        assert!(success_prob_deriv(0.0, 1, &cfg).is_err());
        assert!(constants(0, &cfg).is_err());
        assert!(constants(2, &cfg).is_err(), "load above cache size");
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let configs = [
            verification_cfg(Snr::from_db(30.0)),
            verification_cfg(Snr::from_db(10.0)),
            {
                let mut c = verification_cfg(Snr::Linear(50.0));
                c.path_loss_exp = 3.1;
                c
            },
            {
                let mut c = verification_cfg(Snr::Infinite);
                c.path_loss_exp = 2.4;
                c
            },
        ];
        let h = 1e-6;
        for cfg in &configs {
            let k = CoverageKernel::new(1, cfg).unwrap();
            for &x in &[0.05, 0.3, 0.6811, 0.95] {
                let fd =
                    (k.success_prob(x + h).unwrap() - k.success_prob(x - h).unwrap()) / (2.0 * h);
                let d = k.success_prob_deriv(x).unwrap();
                assert!(
                    (fd - d).abs() < 1e-5 * d.abs().max(1.0),
                    "alpha={}, x={x}: fd={fd}, analytic={d}",
                    cfg.path_loss_exp
                );
            }
        }
    }

    #[test]
    fn monotone_in_marginal_and_load() {
        let mut cfg = verification_cfg(Snr::from_db(20.0));
        cfg.cache_size = 4;
        cfg.catalog_size = 8;
        let kernels: Vec<_> = (1..=4)
            .map(|k| CoverageKernel::new(k, &cfg).unwrap())
            .collect();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for k in &kernels {
            let mut prev = -1.0;
            for &x in &grid {
                let p = k.success_prob(x).unwrap();
                assert!(p >= prev - 1e-12, "not monotone at x={x}");
                assert!((0.0..=1.0 + 1e-9).contains(&p));
                prev = p;
            }
        }
        // More simultaneous streams -> less bandwidth each -> lower success.
        for w in kernels.windows(2) {
            let hi = w[0].success_prob(0.7).unwrap();
            let lo = w[1].success_prob(0.7).unwrap();
            assert!(hi > lo, "load ordering violated: {hi} vs {lo}");
        }
    }

    #[test]
    fn evaluation_is_bit_deterministic() {
        let cfg = verification_cfg(Snr::from_db(30.0));
        let k = CoverageKernel::new(1, &cfg).unwrap();
        let a = k.success_prob(0.37).unwrap();
        let b = k.success_prob(0.37).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
