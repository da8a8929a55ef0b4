//! Exponentially weighted RLS on the training/decision error `b − wᴴr`.

use num_complex::Complex64;

use crate::cdma::ReceivedVector;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, hermitian_part, inner, norm_sqr, real, CMatrix, CVector};

const SYMMETRY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub weights: CVector,
    /// Inverse correlation estimate `P`.
    pub inverse_corr: CMatrix,
    /// `λ_RLS`.
    pub forget: f64,
    pub time: usize,
}

impl RlsState {
    /// `P[0] = δ⁻¹ I`.
    pub fn new(weights: CVector, delta: f64, forget: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidConfig("RLS regularization must be positive".into()));
        }
        if !(forget > 0.0 && forget <= 1.0) {
            return Err(Error::InvalidConfig(format!("RLS forgetting factor {forget} outside (0, 1]")));
        }
        let m = weights.len();
        Ok(Self { weights, inverse_corr: CMatrix::identity(m, m) * real(1.0 / delta), forget, time: 0 })
    }
}

pub fn conventional_rls_step(state: &RlsState, r: &ReceivedVector, b_ref: f64) -> Result<RlsState> {
    let x = &r.samples;
    if x.len() != state.weights.len() {
        return Err(Error::DimensionMismatch { expected: state.weights.len(), found: x.len() });
    }
    let mut next = state.clone();
    next.time += 1;
    if norm_sqr(x) == 0.0 {
        return Ok(next);
    }
    let px = &state.inverse_corr * x;
    let denom = state.forget + inner(x, &px).re;
    let gain = &px * real(1.0 / denom);
    let err = Complex64::new(b_ref, 0.0) - inner(&state.weights, x);
    next.weights = &state.weights + &gain * err.conj();
    next.inverse_corr = (&state.inverse_corr - &gain * px.adjoint()) * real(1.0 / state.forget);
    if hermitian_defect(&next.inverse_corr) > SYMMETRY_TOLERANCE {
        next.inverse_corr = hermitian_part(&next.inverse_corr);
    }
    Ok(next)
}
