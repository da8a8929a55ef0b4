//! Normalized LMS updates: bidirectional (D = 3), differential (D = 2) and conventional.

use num_complex::Complex64;

use super::{compute_pair_errors, History, MixingState};
use crate::cdma::ReceivedVector;
use crate::error::{Error, Result};
use crate::linalg::CVector;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub weights: CVector,
    /// Running input power `M[i]`.
    pub power_norm: f64,
    pub step_size: f64,
    /// `λ_M`.
    pub norm_forget: f64,
}

impl FilterState {
    pub fn new(weights: CVector, power_norm: f64, step_size: f64, norm_forget: f64) -> Result<Self> {
        if !(power_norm > 0.0) {
            return Err(Error::InvalidConfig("power normalization must start positive".into()));
        }
        Ok(Self { weights, power_norm, step_size, norm_forget })
    }
}

/// Multiply-accumulate counter threaded through the vector kernels.
#[derive(Debug, Default, Clone, Copy)]
pub struct MacCount(pub usize);

fn dot_counted(a: &CVector, b: &CVector, macs: &mut MacCount) -> Complex64 {
    macs.0 += a.len();
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn axpy_counted(y: &mut CVector, alpha: Complex64, x: &CVector, macs: &mut MacCount) {
    macs.0 += x.len();
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

fn next_power(fs: &FilterState, r: &CVector, macs: &mut MacCount) -> Result<f64> {
    let energy = dot_counted(r, r, macs).re;
    let m = fs.norm_forget * fs.power_norm + (1.0 - fs.norm_forget) * energy;
    if !(m > f64::MIN_POSITIVE) {
        return Err(Error::DegenerateInput("input power normalization underflow"));
    }
    Ok(m)
}

/// One pair-error gradient step over the window implied by `mix`.
///
/// Pair `(d, l)` contributes `ρ_n b[i−l] r[i−d] e_n*`, the descent direction of
/// `|e_n|²` through its more recent sample.
pub fn pair_nlms_step_counted(
    fs: &FilterState,
    mix: &MixingState,
    hist: &History,
    macs: &mut MacCount,
) -> Result<FilterState> {
    let d = mix.window();
    hist.require(d, fs.weights.len())?;
    let errs = compute_pair_errors(&fs.weights, hist, d)?;
    macs.0 += d * fs.weights.len();
    let power_norm = next_power(fs, hist.vector(0), macs)?;
    let gain = fs.step_size / power_norm;
    let mut weights = fs.weights.clone();
    for ((&(a, b), e), &rho) in errs.pairs.iter().zip(&errs.errors).zip(&mix.weights) {
        let coeff = e.conj() * (gain * rho * hist.symbol(b));
        axpy_counted(&mut weights, coeff, hist.vector(a), macs);
    }
    Ok(FilterState { weights, power_norm, ..fs.clone() })
}

/// Bidirectional NLMS over three instants with mixing weights `ρ₁..ρ₃`.
pub fn bidir_nlms_step(fs: &FilterState, mix: &MixingState, hist: &History) -> Result<FilterState> {
    if mix.weights.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: mix.weights.len() });
    }
    pair_nlms_step_counted(fs, mix, hist, &mut MacCount::default())
}

/// Differential NLMS: only the `(i, i−1)` pair with unit weight.
pub fn differential_nlms_step(fs: &FilterState, hist: &History) -> Result<FilterState> {
    pair_nlms_step_counted(fs, &MixingState::fixed(vec![1.0]), hist, &mut MacCount::default())
}

/// Trained/decision-directed NLMS on `e = b − wᴴr`.
pub fn conventional_nlms_step(fs: &FilterState, r: &ReceivedVector, b_ref: f64) -> Result<FilterState> {
    let x = &r.samples;
    if x.len() != fs.weights.len() {
        return Err(Error::DimensionMismatch { expected: fs.weights.len(), found: x.len() });
    }
    let mut macs = MacCount::default();
    let z = dot_counted(&fs.weights, x, &mut macs);
    let err = Complex64::new(b_ref, 0.0) - z;
    let power_norm = next_power(fs, x, &mut macs)?;
    let mut weights = fs.weights.clone();
    axpy_counted(&mut weights, err.conj() * (fs.step_size / power_norm), x, &mut macs);
    Ok(FilterState { weights, power_norm, ..fs.clone() })
}
