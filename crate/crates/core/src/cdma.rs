//! Chip-rate DS-CDMA uplink model: spreading, multipath convolution, modulation, and the
//! linear receiver front end. User 0 is the desired user throughout.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fading::FadingSequence;
use crate::linalg::{inner, rank1_update, real, CMatrix, CVector, ZERO};
use crate::rng::{complex_normal, random_sign};

/// Spreading sequence with chips `±1/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCode {
    chips: Vec<f64>,
}

impl SpreadingCode {
    pub fn new(chips: Vec<f64>) -> Result<Self> {
        if chips.len() < 2 {
            return Err(Error::InvalidConfig("spreading code needs at least 2 chips".into()));
        }
        let norm: f64 = chips.iter().map(|c| c * c).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("spreading code norm² is {norm}, not 1")));
        }
        Ok(Self { chips })
    }

    /// Scales a ±1 pattern to unit norm.
    pub fn from_signs(signs: &[f64]) -> Result<Self> {
        let scale = 1.0 / (signs.len() as f64).sqrt();
        Self::new(signs.iter().map(|s| s.signum() * scale).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let signs: Vec<f64> = (0..n).map(|_| random_sign(rng)).collect();
        Self::from_signs(&signs)
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn chips(&self) -> &[f64] {
        &self.chips
    }

    /// The code zero-padded to length `m` (the matched-filter initialization).
    pub fn padded(&self, m: usize) -> CVector {
        CVector::from_fn(m, |i, _| self.chips.get(i).map_or(ZERO, |&c| real(c)))
    }
}

/// Banded `M × N` convolution matrix of an `L`-tap channel, `M = N + L − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
}

impl ChannelMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn apply(&self, code: &SpreadingCode) -> CVector {
        let c = CVector::from_iterator(code.len(), code.chips().iter().map(|&x| real(x)));
        &self.entries * c
    }
}

pub fn build_channel_matrix(taps: &[Complex64], code_length: usize) -> Result<ChannelMatrix> {
    if taps.is_empty() {
        return Err(Error::EmptyPowerProfile);
    }
    if code_length < 2 {
        return Err(Error::InvalidConfig("code length must be at least 2".into()));
    }
    let m = code_length + taps.len() - 1;
    let entries = CMatrix::from_fn(m, code_length, |row, col| {
        row.checked_sub(col).and_then(|d| taps.get(d).copied()).unwrap_or(ZERO)
    });
    Ok(ChannelMatrix { entries })
}

/// Convolution of a code with channel taps, i.e. `H c` without building `H`.
pub fn convolve(code: &SpreadingCode, taps: &[Complex64]) -> CVector {
    let n = code.len();
    let mut out = CVector::zeros(n + taps.len() - 1);
    for (j, &chip) in code.chips().iter().enumerate() {
        for (l, &h) in taps.iter().enumerate() {
            out[j + l] += h * chip;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct UserParams {
    pub amplitude: f64,
    pub code: SpreadingCode,
    pub fading: FadingSequence,
}

impl UserParams {
    pub fn new(amplitude: f64, code: SpreadingCode, fading: FadingSequence) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(Error::InvalidConfig("amplitude must be positive".into()));
        }
        Ok(Self { amplitude, code, fading })
    }

    pub fn observation_len(&self) -> usize {
        self.code.len() + self.fading.num_paths() - 1
    }

    /// Effective signature `H_k[i] c_k`.
    pub fn signature(&self, i: usize) -> CVector {
        convolve(&self.code, &self.fading.taps(i))
    }

    /// Portions of symbols `i − 1` and `i + 1` that spill into the window of symbol `i`,
    /// placed at their positions in the length-M window.
    pub fn isi_vectors(&self, i: usize) -> (Option<CVector>, Option<CVector>) {
        let n = self.code.len();
        let m = self.observation_len();
        if m == n {
            return (None, None);
        }
        let prev = (i >= 1).then(|| {
            let full = self.signature(i - 1);
            CVector::from_fn(m, |row, _| if row + n < m { full[row + n] } else { ZERO })
        });
        let next = (i + 1 < self.fading.len()).then(|| {
            let full = self.signature(i + 1);
            CVector::from_fn(m, |row, _| if row >= n { full[row - n] } else { ZERO })
        });
        (prev, next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Modulation {
    Coherent,
    Differential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub data: Vec<f64>,
    pub transmitted: Vec<f64>,
    pub mode: Modulation,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.transmitted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmitted.is_empty()
    }
}

pub fn modulate_coherent(data: &[f64]) -> SymbolStream {
    SymbolStream { data: data.to_vec(), transmitted: data.to_vec(), mode: Modulation::Coherent }
}

/// `b[0] = reference`, `b[i] = a[i−1]·b[i−1]`; the output is one symbol longer than `data`.
pub fn modulate_differential(data: &[f64], reference: f64) -> SymbolStream {
    let mut transmitted = Vec::with_capacity(data.len() + 1);
    transmitted.push(reference);
    for &a in data {
        let prev = *transmitted.last().unwrap();
        transmitted.push(a * prev);
    }
    SymbolStream { data: data.to_vec(), transmitted, mode: Modulation::Differential }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedVector {
    pub samples: CVector,
    pub symbol_index: usize,
}

fn check_users(users: &[UserParams], streams: &[SymbolStream], i: usize) -> Result<usize> {
    let first = users.first().ok_or(Error::InvalidConfig("no users".into()))?;
    if streams.len() != users.len() {
        return Err(Error::DimensionMismatch { expected: users.len(), found: streams.len() });
    }
    let n = first.code.len();
    let paths = first.fading.num_paths();
    for (u, s) in users.iter().zip(streams) {
        if u.code.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: u.code.len() });
        }
        if u.fading.num_paths() != paths {
            return Err(Error::DimensionMismatch { expected: paths, found: u.fading.num_paths() });
        }
        if i >= s.len() || i >= u.fading.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                valid: format!("0..{}", s.len().min(u.fading.len())),
            });
        }
    }
    Ok(n + paths - 1)
}

/// Noiseless part of `r[i]`: desired signal, MUI and (optionally) ISI.
pub fn noiseless_received(
    users: &[UserParams],
    streams: &[SymbolStream],
    i: usize,
    isi: bool,
) -> Result<CVector> {
    let m = check_users(users, streams, i)?;
    let mut r = CVector::zeros(m);
    for (u, s) in users.iter().zip(streams) {
        r += u.signature(i) * real(u.amplitude * s.transmitted[i]);
        if isi {
            let (prev, next) = u.isi_vectors(i);
            if let Some(v) = prev {
                r += v * real(u.amplitude * s.transmitted[i - 1]);
            }
            if let (Some(v), Some(&b)) = (next, s.transmitted.get(i + 1)) {
                r += v * real(u.amplitude * b);
            }
        }
    }
    Ok(r)
}

/// `r[i] = Σ_k A_k b_k[i] H_k[i] c_k + η[i] + n[i]`.
pub fn synthesize_received<R: Rng + ?Sized>(
    users: &[UserParams],
    streams: &[SymbolStream],
    i: usize,
    noise_var: f64,
    isi: bool,
    rng: &mut R,
) -> Result<ReceivedVector> {
    if !(noise_var >= 0.0) {
        return Err(Error::NegativeNoiseVariance(noise_var));
    }
    let mut samples = noiseless_received(users, streams, i, isi)?;
    if noise_var > 0.0 {
        for s in samples.iter_mut() {
            *s += complex_normal(rng, noise_var);
        }
    }
    Ok(ReceivedVector { samples, symbol_index: i })
}

/// Conditional second-order statistics of `r[i]` given the channels at symbols `i−1..=i+1`.
#[derive(Debug, Clone)]
pub struct InstantStatistics {
    /// `A₁ H₁[i] c₁`.
    pub desired: CVector,
    /// Covariance of MUI + ISI + noise.
    pub interference: CMatrix,
}

impl InstantStatistics {
    pub fn signal_covariance(&self) -> CMatrix {
        &self.desired * self.desired.adjoint()
    }

    pub fn total_covariance(&self) -> CMatrix {
        self.signal_covariance() + &self.interference
    }
}

pub fn instant_statistics(users: &[UserParams], i: usize, noise_var: f64, isi: bool) -> InstantStatistics {
    let first = &users[0];
    let m = first.observation_len();
    let desired = first.signature(i) * real(first.amplitude);
    let mut interference = CMatrix::identity(m, m) * real(noise_var);
    for (k, u) in users.iter().enumerate() {
        let a2 = u.amplitude * u.amplitude;
        if k > 0 {
            let g = u.signature(i);
            rank1_update(&mut interference, 1.0, a2, &g, &g);
        }
        if isi {
            let (prev, next) = u.isi_vectors(i);
            for v in prev.iter().chain(next.iter()) {
                rank1_update(&mut interference, 1.0, a2, v, v);
            }
        }
    }
    InstantStatistics { desired, interference }
}

/// `z = wᴴ r`.
pub fn filter_output(w: &CVector, r: &ReceivedVector) -> Result<Complex64> {
    if w.len() != r.samples.len() {
        return Err(Error::DimensionMismatch { expected: r.samples.len(), found: w.len() });
    }
    Ok(inner(w, &r.samples))
}

/// BPSK slicer on the real part; ties map to +1.
pub fn detect_coherent(z: Complex64) -> f64 {
    if z.re < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `sign(Re(z_now · z_prev*))`; ties map to +1.
pub fn detect_differential(z_now: Complex64, z_prev: Complex64) -> f64 {
    detect_coherent(z_now * z_prev.conj())
}
