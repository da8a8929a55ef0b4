//! Random packet scenarios for the uplink model.
//!
//! A packet fixes codes, fading, data and noise for every user. The desired user's data can
//! be transmitted coherently or differentially over the *same* channel and noise, so receivers
//! with different modulation are compared on identical realizations.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdma::{
    instant_statistics, modulate_coherent, modulate_differential, noiseless_received, InstantStatistics,
    Modulation, ReceivedVector, SpreadingCode, SymbolStream, UserParams,
};
use crate::error::{Error, Result};
use crate::fading::{generate_fading, FadingConfig, FadingSequence, DEFAULT_OSCILLATORS};
use crate::rng::{self, complex_normal, random_sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Independent Clarke fading per path with a uniform power profile.
    Rayleigh,
    /// Unit gain on the first path, nothing on the others.
    Awgn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub users: usize,
    /// Processing gain `N`.
    pub gain: usize,
    pub paths: usize,
    /// `A₁²/σ²` in dB with unit amplitudes and unit total channel power.
    pub snr_db: f64,
    pub normalized_doppler: f64,
    pub isi: bool,
    pub channel: ChannelKind,
}

impl ScenarioConfig {
    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn observation_len(&self) -> usize {
        self.gain + self.paths - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if self.gain < 2 {
            return Err(Error::InvalidConfig("processing gain must be at least 2".into()));
        }
        if self.paths == 0 {
            return Err(Error::EmptyPowerProfile);
        }
        if self.snr_db.is_nan() {
            return Err(Error::InvalidConfig("SNR is NaN".into()));
        }
        if !(self.normalized_doppler >= 0.0) {
            return Err(Error::InvalidConfig("normalized Doppler must be >= 0".into()));
        }
        Ok(())
    }
}

/// One packet of `len` symbols; symbol `len` exists only to supply ISI precursors.
#[derive(Debug, Clone)]
pub struct Packet {
    pub users: Vec<UserParams>,
    /// Desired user's data bits, `len` of them.
    pub data: Vec<f64>,
    interferers: Vec<SymbolStream>,
    noise_seed: u64,
    noise_var: f64,
    isi: bool,
    len: usize,
}

impl Packet {
    pub fn generate(cfg: &ScenarioConfig, seed: u64, index: u64, len: usize) -> Result<Self> {
        Self::generate_with_codes(cfg, None, seed, index, len)
    }

    /// As [`Packet::generate`], but reusing a fixed code set instead of drawing fresh codes.
    pub fn generate_with_codes(
        cfg: &ScenarioConfig,
        codes: Option<&[SpreadingCode]>,
        seed: u64,
        index: u64,
        len: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(codes) = codes {
            if codes.len() != cfg.users {
                return Err(Error::DimensionMismatch { expected: cfg.users, found: codes.len() });
            }
            if let Some(bad) = codes.iter().find(|c| c.len() != cfg.gain) {
                return Err(Error::DimensionMismatch { expected: cfg.gain, found: bad.len() });
            }
        }
        if len == 0 {
            return Err(Error::ZeroLength);
        }
        let mut rg = rng::stream(seed, index);
        let span = len + 1;
        let mut users = Vec::with_capacity(cfg.users);
        for k in 0..cfg.users {
            let code = match codes {
                Some(codes) => codes[k].clone(),
                None => SpreadingCode::random(cfg.gain, &mut rg)?,
            };
            let fading = match cfg.channel {
                ChannelKind::Rayleigh => {
                    let fc = FadingConfig {
                        num_oscillators: DEFAULT_OSCILLATORS,
                        ..FadingConfig::uniform(cfg.normalized_doppler, cfg.paths, rg.random())
                    };
                    generate_fading(&fc, span)?
                }
                ChannelKind::Awgn => {
                    let mut taps = vec![Complex64::new(0.0, 0.0); cfg.paths];
                    taps[0] = Complex64::new(1.0, 0.0);
                    FadingSequence::constant(&taps, span)?
                }
            };
            users.push(UserParams::new(1.0, code, fading)?);
        }
        let data: Vec<f64> = (0..len).map(|_| random_sign(&mut rg)).collect();
        let interferers = (1..cfg.users)
            .map(|_| {
                let bits: Vec<f64> = (0..span).map(|_| random_sign(&mut rg)).collect();
                modulate_coherent(&bits)
            })
            .collect();
        Ok(Self {
            users,
            data,
            interferers,
            noise_seed: rg.random(),
            noise_var: cfg.noise_var(),
            isi: cfg.isi,
            len,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn codes(&self) -> Vec<SpreadingCode> {
        self.users.iter().map(|u| u.code.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Desired user's transmitted stream under `mode`.
    ///
    /// Coherent: `b[i] = a[i]`. Differential: `b[0] = +1`, `b[i] = a[i]·b[i−1]` with `a[0]`
    /// unused, so bit `a[i]` is carried by the transition into symbol `i`.
    pub fn desired_stream(&self, mode: Modulation) -> SymbolStream {
        match mode {
            Modulation::Coherent => {
                let mut bits = self.data.clone();
                bits.push(1.0);
                modulate_coherent(&bits)
            }
            Modulation::Differential => {
                let mut s = modulate_differential(&self.data[1..], 1.0);
                s.transmitted.push(1.0);
                s.data = self.data.clone();
                s
            }
        }
    }

    /// Received vectors `r[0..len]` for the desired stream under `mode`.
    pub fn received(&self, mode: Modulation) -> Result<(SymbolStream, Vec<ReceivedVector>)> {
        let desired = self.desired_stream(mode);
        let mut streams = Vec::with_capacity(self.users.len());
        streams.push(desired.clone());
        streams.extend(self.interferers.iter().cloned());
        let mut noise = rng::stream(self.noise_seed, 0);
        let mut out = Vec::with_capacity(self.len);
        for i in 0..self.len {
            let mut samples = noiseless_received(&self.users, &streams, i, self.isi)?;
            if self.noise_var > 0.0 {
                for s in samples.iter_mut() {
                    *s += complex_normal(&mut noise, self.noise_var);
                }
            }
            out.push(ReceivedVector { samples, symbol_index: i });
        }
        Ok((desired, out))
    }

    pub fn statistics(&self, i: usize) -> InstantStatistics {
        instant_statistics(&self.users, i, self.noise_var, self.isi)
    }

    /// `A₁² Σ_l |h_l[i]|² / σ²`.
    pub fn instant_snr(&self, i: usize) -> f64 {
        let u = &self.users[0];
        u.amplitude * u.amplitude * u.fading.power_at(i) / self.noise_var
    }
}

/// A code set for all users drawn from its own stream of `seed`.
pub fn draw_codes(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<SpreadingCode>> {
    let mut rg = rng::stream(seed, u64::MAX);
    (0..cfg.users).map(|_| SpreadingCode::random(cfg.gain, &mut rg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdma::detect_differential;
    use crate::linalg::inner;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            users: 3,
            gain: 8,
            paths: 2,
            snr_db: 10.0,
            normalized_doppler: 0.01,
            isi: true,
            channel: ChannelKind::Rayleigh,
        }
    }

    #[test]
    fn packets_are_reproducible() {
        let a = Packet::generate(&cfg(), 3, 7, 20).unwrap();
        let b = Packet::generate(&cfg(), 3, 7, 20).unwrap();
        assert_eq!(a.received(Modulation::Coherent).unwrap().1, b.received(Modulation::Coherent).unwrap().1);
        let c = Packet::generate(&cfg(), 3, 8, 20).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn modes_share_noise_and_interference() {
        let p = Packet::generate(&ScenarioConfig { users: 1, isi: false, ..cfg() }, 1, 0, 30).unwrap();
        let (sc, rc) = p.received(Modulation::Coherent).unwrap();
        let (sd, rd) = p.received(Modulation::Differential).unwrap();
        for i in 0..30 {
            let sig = p.users[0].signature(i);
            let nc = &rc[i].samples - &sig * Complex64::new(sc.transmitted[i], 0.0);
            let nd = &rd[i].samples - &sig * Complex64::new(sd.transmitted[i], 0.0);
            assert!((nc - nd).norm() < 1e-12);
        }
    }

    #[test]
    fn differential_stream_carries_data_from_symbol_one() {
        let p = Packet::generate(&cfg(), 5, 0, 40).unwrap();
        let s = p.desired_stream(Modulation::Differential);
        assert_eq!(s.transmitted.len(), 41);
        for i in 1..40 {
            assert_eq!(s.transmitted[i] * s.transmitted[i - 1], p.data[i]);
        }
        // noiseless, single user, static AWGN: differential detection recovers the data
        let quiet = ScenarioConfig { users: 1, snr_db: f64::INFINITY, channel: ChannelKind::Awgn, ..cfg() };
        let p = Packet::generate(&quiet, 5, 0, 40).unwrap();
        let (_, r) = p.received(Modulation::Differential).unwrap();
        let w = p.users[0].code.padded(quiet.observation_len());
        for i in 1..40 {
            let z = inner(&w, &r[i].samples);
            let zp = inner(&w, &r[i - 1].samples);
            assert_eq!(detect_differential(z, zp), p.data[i]);
        }
    }
}
