//! Rayleigh fading with a Clarke (J₀) autocorrelation.
//!
//! Each path is a sum of `num_oscillators` unit-amplitude complex sinusoids. Arrival angles
//! are uniform on the circle but stratified (one per `2π/N` sector, common random offset),
//! which makes the time-averaged autocorrelation of a single realization a midpoint
//! quadrature of the Clarke integral and hence very close to `J₀(2π f_d T_s m)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::special::bessel_j0;

pub const DEFAULT_OSCILLATORS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingConfig {
    /// Doppler frequency times symbol period.
    pub normalized_doppler: f64,
    pub num_paths: usize,
    /// Mean-square gain per path, sums to one.
    pub power_profile: Vec<f64>,
    pub num_oscillators: usize,
    pub seed: u64,
}

impl FadingConfig {
    /// Uniform power-delay profile with the default oscillator count.
    pub fn uniform(normalized_doppler: f64, num_paths: usize, seed: u64) -> Self {
        let p = if num_paths == 0 { 0.0 } else { 1.0 / num_paths as f64 };
        Self {
            normalized_doppler,
            num_paths,
            power_profile: vec![p; num_paths],
            num_oscillators: DEFAULT_OSCILLATORS,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_profile.is_empty() || self.num_paths == 0 {
            return Err(Error::EmptyPowerProfile);
        }
        if self.power_profile.len() != self.num_paths {
            return Err(Error::InvalidConfig(format!(
                "power profile has {} entries for {} paths",
                self.power_profile.len(),
                self.num_paths
            )));
        }
        if self.power_profile.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidConfig("path powers must be non-negative".into()));
        }
        let total: f64 = self.power_profile.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("power profile sums to {total}, not 1")));
        }
        if !(self.normalized_doppler >= 0.0) || !self.normalized_doppler.is_finite() {
            return Err(Error::InvalidConfig("normalized Doppler must be >= 0".into()));
        }
        if self.num_oscillators < 8 {
            return Err(Error::InvalidConfig("at least 8 oscillators are required".into()));
        }
        Ok(())
    }
}

/// Per-path complex gains `h_l[i]`, stored path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSequence {
    gains: Vec<Vec<Complex64>>,
    config: FadingConfig,
}

impl FadingSequence {
    /// A deterministic channel, constant over `length` symbols.
    pub fn constant(taps: &[Complex64], length: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyPowerProfile);
        }
        if length == 0 {
            return Err(Error::ZeroLength);
        }
        let total: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        let profile = taps
            .iter()
            .map(|t| if total > 0.0 { t.norm_sqr() / total } else { 0.0 })
            .collect();
        Ok(Self {
            gains: taps.iter().map(|&t| vec![t; length]).collect(),
            config: FadingConfig {
                normalized_doppler: 0.0,
                num_paths: taps.len(),
                power_profile: profile,
                num_oscillators: DEFAULT_OSCILLATORS,
                seed: 0,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.gains[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_paths(&self) -> usize {
        self.gains.len()
    }

    pub fn path(&self, l: usize) -> &[Complex64] {
        &self.gains[l]
    }

    pub fn gain(&self, l: usize, i: usize) -> Complex64 {
        self.gains[l][i]
    }

    /// Channel taps at symbol `i`.
    pub fn taps(&self, i: usize) -> Vec<Complex64> {
        self.gains.iter().map(|p| p[i]).collect()
    }

    /// Realized channel power `Σ_l |h_l[i]|²`.
    pub fn power_at(&self, i: usize) -> f64 {
        self.gains.iter().map(|p| p[i].norm_sqr()).sum()
    }

    pub fn config(&self) -> &FadingConfig {
        &self.config
    }
}

pub fn generate_fading(config: &FadingConfig, length: usize) -> Result<FadingSequence> {
    config.validate()?;
    if length == 0 {
        return Err(Error::ZeroLength);
    }
    let n_osc = config.num_oscillators;
    let mut rng = rng::stream(config.seed, 0);
    let mut gains = Vec::with_capacity(config.num_paths);
    for &power in &config.power_profile {
        let offset: f64 = rng.random::<f64>() * TAU;
        let oscillators: Vec<(f64, f64)> = (0..n_osc)
            .map(|n| {
                let angle = (TAU * n as f64 + offset) / n_osc as f64;
                let phase: f64 = rng.random::<f64>() * TAU;
                (TAU * config.normalized_doppler * angle.cos(), phase)
            })
            .collect();
        let amp = (power / n_osc as f64).sqrt();
        let path = (0..length)
            .map(|i| {
                let t = i as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for &(omega, phase) in &oscillators {
                    acc += Complex64::from_polar(1.0, omega * t + phase);
                }
                acc * amp
            })
            .collect();
        gains.push(path);
    }
    Ok(FadingSequence { gains, config: config.clone() })
}

/// `J₀(2π f_d T_s m)`, the normalized Clarke autocorrelation at lag `m`.
pub fn clarke_autocorrelation(normalized_doppler: f64, lag: usize) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    bessel_j0(TAU * normalized_doppler * lag as f64)
}

/// Channel correlation factors of the desired user's first path at symbol `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationFactors {
    /// Pairs `(i, i-1)`.
    pub f1: f64,
    /// Pairs `(i, i-2)`.
    pub f2: f64,
    /// Pairs `(i-1, i-2)`.
    pub f3: f64,
}

pub fn correlation_factors(seq: &FadingSequence, index: usize) -> Result<CorrelationFactors> {
    if index < 2 || index >= seq.len() {
        return Err(Error::IndexOutOfRange {
            index,
            valid: format!("2..{}", seq.len()),
        });
    }
    let cfg = seq.config();
    let p0 = cfg.power_profile[0];
    let lag1 = p0 * clarke_autocorrelation(cfg.normalized_doppler, 1);
    let lag2 = p0 * clarke_autocorrelation(cfg.normalized_doppler, 2);
    Ok(CorrelationFactors { f1: lag1, f2: lag2, f3: lag1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_doppler_freezes_channel() {
        let cfg = FadingConfig::uniform(0.0, 1, 7);
        let seq = generate_fading(&cfg, 100).unwrap();
        let first = seq.gain(0, 0);
        assert!(seq.path(0).iter().all(|&g| g == first));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = FadingConfig::uniform(0.01, 2, 7);
        let a = generate_fading(&cfg, 500).unwrap();
        let b = generate_fading(&cfg, 500).unwrap();
        assert_eq!(a, b);
        let other = generate_fading(&FadingConfig { seed: 8, ..cfg }, 500).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rejects_bad_requests() {
        let cfg = FadingConfig::uniform(0.01, 1, 7);
        assert!(matches!(generate_fading(&cfg, 0), Err(Error::ZeroLength)));
        let empty = FadingConfig { num_paths: 0, power_profile: vec![], ..cfg.clone() };
        assert!(matches!(generate_fading(&empty, 10), Err(Error::EmptyPowerProfile)));
        let unnormalized = FadingConfig { power_profile: vec![0.9], ..cfg.clone() };
        assert!(generate_fading(&unnormalized, 10).is_err());
        let negative = FadingConfig { normalized_doppler: -0.1, ..cfg };
        assert!(generate_fading(&negative, 10).is_err());
    }

    #[test]
    fn clarke_values() {
        assert_eq!(clarke_autocorrelation(0.37, 0), 1.0);
        assert!((clarke_autocorrelation(0.01, 1) - 0.99901).abs() < 1e-5);
        // J₀(0.8π)
        assert!((clarke_autocorrelation(0.1, 4) - -0.054_960_360_243_452_26).abs() < 1e-4);
    }

    #[test]
    fn correlation_factor_examples() {
        let fixed = generate_fading(&FadingConfig::uniform(0.0, 2, 1), 10).unwrap();
        let f = correlation_factors(&fixed, 2).unwrap();
        assert_eq!((f.f1, f.f2, f.f3), (0.5, 0.5, 0.5));

        let seq = generate_fading(&FadingConfig::uniform(0.01, 1, 1), 10).unwrap();
        let f = correlation_factors(&seq, 5).unwrap();
        assert!((f.f1 - 0.99901).abs() < 1e-4);
        assert!((f.f2 - 0.99606).abs() < 1e-4);
        assert!((f.f3 - 0.99901).abs() < 1e-4);
        assert!((f.f1 - f.f2).abs() < 0.005 && (f.f2 - f.f3).abs() < 0.005);
        assert_eq!(correlation_factors(&seq, 9).unwrap(), f);

        assert!(correlation_factors(&seq, 1).is_err());
        assert!(correlation_factors(&seq, 10).is_err());
    }

    #[test]
    fn constant_channel_reports_tap_profile() {
        let seq = FadingSequence::constant(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)], 4)
            .unwrap();
        assert_eq!(seq.config().power_profile, vec![0.5, 0.5]);
        assert_eq!(seq.power_at(3), 2.0);
    }
}
