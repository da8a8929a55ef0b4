//! Bidirectional MMSE receivers and the conventional baselines they are compared against.
//!
//! The bidirectional cost sums, over every pair `d < l` of the last `D` time instants,
//! the squared mismatch `e_n = b[i−d]·wᴴr[i−l] − b[i−l]·wᴴr[i−d]`. Both adaptive variants
//! ([`nlms`] and [`cg`]) weight the pairs with convex mixing factors adapted from the
//! instantaneous pair errors.

pub mod cg;
pub mod mmse;
pub mod nlms;
pub mod rls;

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{inner, CVector};

pub use cg::{bidir_cg_step, cg_solve, update_cg_correlations, CgState};
pub use mmse::{mmse_oracle, mmse_oracle_loaded};
pub use nlms::{bidir_nlms_step, conventional_nlms_step, differential_nlms_step, FilterState};
pub use rls::{conventional_rls_step, RlsState};

/// Number of sample pairs for a window of `d` instants.
pub const fn num_pairs(d: usize) -> usize {
    d * (d - 1) / 2
}

/// Pairs `(d, l)`, `d < l < D`, in lexicographic order.
pub fn pair_index(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(num_pairs(d));
    for a in 0..d.saturating_sub(1) {
        for b in a + 1..d {
            out.push((a, b));
        }
    }
    out
}

/// Sliding window of received vectors and their reference symbols, newest first.
#[derive(Debug, Clone)]
pub struct History {
    vectors: VecDeque<CVector>,
    symbols: VecDeque<f64>,
    capacity: usize,
}

impl History {
    pub fn new(capacity: usize) -> Self {
        Self {
            vectors: VecDeque::with_capacity(capacity),
            symbols: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Builds a window from `[r[i], r[i−1], …]` and matching symbols.
    pub fn from_samples(vectors: Vec<CVector>, symbols: Vec<f64>) -> Result<Self> {
        if vectors.len() != symbols.len() {
            return Err(Error::DimensionMismatch { expected: vectors.len(), found: symbols.len() });
        }
        if let Some(first) = vectors.first() {
            for v in &vectors {
                if v.len() != first.len() {
                    return Err(Error::DimensionMismatch { expected: first.len(), found: v.len() });
                }
            }
        }
        Ok(Self {
            capacity: vectors.len(),
            vectors: vectors.into(),
            symbols: symbols.into(),
        })
    }

    pub fn push(&mut self, r: CVector, b: f64) {
        if self.vectors.len() == self.capacity {
            self.vectors.pop_back();
            self.symbols.pop_back();
        }
        self.vectors.push_front(r);
        self.symbols.push_front(b);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.vectors.len() == self.capacity
    }

    /// `r[i − lag]`.
    pub fn vector(&self, lag: usize) -> &CVector {
        &self.vectors[lag]
    }

    /// `b[i − lag]`.
    pub fn symbol(&self, lag: usize) -> f64 {
        self.symbols[lag]
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.front().map(|v| v.len())
    }

    pub(crate) fn require(&self, depth: usize, dim: usize) -> Result<()> {
        if self.len() < depth {
            return Err(Error::IndexOutOfRange {
                index: depth,
                valid: format!("history holds {} samples", self.len()),
            });
        }
        if let Some(m) = self.dim() {
            if m != dim {
                return Err(Error::DimensionMismatch { expected: m, found: dim });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairErrors {
    pub errors: Vec<Complex64>,
    /// `Σ |e_n|`.
    pub total: f64,
    pub pairs: Vec<(usize, usize)>,
}

pub fn compute_pair_errors(w: &CVector, hist: &History, d: usize) -> Result<PairErrors> {
    if d < 2 {
        return Err(Error::InvalidConfig("pair errors need D >= 2".into()));
    }
    hist.require(d, w.len())?;
    let outputs: Vec<Complex64> = (0..d).map(|lag| inner(w, hist.vector(lag))).collect();
    let pairs = pair_index(d);
    let errors: Vec<Complex64> = pairs
        .iter()
        .map(|&(a, b)| outputs[b] * hist.symbol(a) - outputs[a] * hist.symbol(b))
        .collect();
    let total = errors.iter().map(|e| e.norm()).sum();
    Ok(PairErrors { errors, total, pairs })
}

/// Convex mixing weights over the pair errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingState {
    pub weights: Vec<f64>,
    /// `λ_e`; 1 freezes the weights.
    pub forget: f64,
}

impl MixingState {
    /// Equal weights `1/P` over the pairs of a `d`-instant window.
    pub fn uniform(d: usize, forget: f64) -> Self {
        let p = num_pairs(d);
        Self { weights: vec![1.0 / p as f64; p], forget }
    }

    pub fn fixed(weights: Vec<f64>) -> Self {
        Self { weights, forget: 1.0 }
    }

    /// Window length `D` implied by the number of pairs.
    pub fn window(&self) -> usize {
        let p = self.weights.len();
        (2..).find(|&d| num_pairs(d) >= p).unwrap()
    }
}

/// `ρ_n ← λ_e ρ_n + (1 − λ_e)(e_T − |e_n|) / ((P − 1) e_T)`.
///
/// The `(P − 1)` divisor keeps the weights on the simplex; with `e_T = 0` the weights are
/// left as they are.
pub fn update_mixing(state: &MixingState, errs: &PairErrors) -> MixingState {
    let p = state.weights.len();
    if p < 2 || errs.errors.len() != p || errs.total <= 0.0 || !errs.total.is_finite() {
        return state.clone();
    }
    let lam = state.forget.clamp(0.0, 1.0);
    let denom = (p - 1) as f64 * errs.total;
    let weights = state
        .weights
        .iter()
        .zip(&errs.errors)
        .map(|(&rho, e)| {
            let innovation = ((errs.total - e.norm()) / denom).max(0.0);
            (lam * rho + (1.0 - lam) * innovation).clamp(0.0, 1.0)
        })
        .collect();
    MixingState { weights, forget: state.forget }
}
