//! Bidirectional conjugate-gradient receiver.
//!
//! Exponentially weighted per-pair correlations `R̄_n`, `t̄_n` are mixed with the current
//! `ρ_n` and the system `R̄ w = t̄` is solved by a few CG iterations warm-started at the
//! previous filter. Because `t̄_n` is built from the previous filter, each symbol performs
//! one step of a power-type iteration towards the generalized eigenvector of the
//! cross-instant and instantaneous correlations.

use super::{History, MixingState};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, quad_form, rank1_update, real, CMatrix, CVector};

/// Relative residual at which CG stops early.
pub const CG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CgState {
    /// `R̄₁, R̄₂, R̄₃`.
    pub autocorr: [CMatrix; 3],
    /// `t̄₁, t̄₂, t̄₃`.
    pub crosscorr: [CVector; 3],
    /// `λ`.
    pub forget: f64,
    /// `j_max`.
    pub max_iters: usize,
    pub weights: CVector,
    /// Rescale to unit estimated output power after every solve.
    pub constraint: bool,
    /// Reproduce the printed `t̄₁[i] = λ t̄₃[i−1] + …` recursion.
    pub literal_t1: bool,
    /// `Σ λ^k`, the effective sample count behind `R̄₁`.
    pub weight_sum: f64,
}

impl CgState {
    /// `R̄_n[0] = δI` and `t̄_n[0] = δ w₀`, so the initial filter solves the initial system.
    pub fn new(weights: CVector, delta: f64, forget: f64, max_iters: usize) -> Result<Self> {
        if !(forget > 0.0 && forget <= 1.0) {
            return Err(Error::InvalidConfig(format!("CG forgetting factor {forget} outside (0, 1]")));
        }
        let m = weights.len();
        let reg = CMatrix::identity(m, m) * real(delta);
        let t0 = &weights * real(delta);
        Ok(Self {
            autocorr: [reg.clone(), reg.clone(), reg],
            crosscorr: [t0.clone(), t0.clone(), t0],
            forget,
            max_iters,
            weights,
            constraint: false,
            literal_t1: false,
            weight_sum: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn mixed(&self, mix: &MixingState) -> (CMatrix, CVector) {
        let m = self.dim();
        let mut r = CMatrix::zeros(m, m);
        let mut t = CVector::zeros(m);
        for n in 0..3 {
            let rho = real(mix.weights[n]);
            r += &self.autocorr[n] * rho;
            t += &self.crosscorr[n] * rho;
        }
        (r, t)
    }
}

/// Folds the newest window into `R̄_n`, `t̄_n` and returns the mixed `(R̄, t̄)`.
pub fn update_cg_correlations(
    cs: &CgState,
    mix: &MixingState,
    hist: &History,
) -> Result<(CMatrix, CVector, CgState)> {
    if mix.weights.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: mix.weights.len() });
    }
    hist.require(3, cs.dim())?;
    let lam = cs.forget;
    let (r0, r1, r2) = (hist.vector(0), hist.vector(1), hist.vector(2));
    let (b0, b1, b2) = (hist.symbol(0), hist.symbol(1), hist.symbol(2));
    let w = &cs.weights;

    let mut next = cs.clone();
    rank1_update(&mut next.autocorr[0], lam, b1 * b1, r0, r0);
    rank1_update(&mut next.autocorr[1], lam, b2 * b2, r0, r0);
    rank1_update(&mut next.autocorr[2], lam, b2 * b2, r1, r1);

    let t1_prev = if cs.literal_t1 { &cs.crosscorr[2] } else { &cs.crosscorr[0] };
    next.crosscorr[0] = t1_prev * real(lam) + r0 * (inner(r1, w) * (b1 * b0));
    next.crosscorr[1] = &cs.crosscorr[1] * real(lam) + r0 * (inner(r2, w) * (b2 * b0));
    next.crosscorr[2] = &cs.crosscorr[2] * real(lam) + r1 * (inner(r2, w) * (b2 * b1));
    next.weight_sum = lam * cs.weight_sum + 1.0;

    let (r, t) = next.mixed(mix);
    Ok((r, t, next))
}

/// CG on `R w = t` from `w_init`, at most `j_max` iterations.
///
/// Stops early once `‖g_j‖ ≤ 1e-12·‖t‖`, and returns the current iterate when the search
/// direction has no curvature (`R` semidefinite).
pub fn cg_solve(r: &CMatrix, t: &CVector, w_init: &CVector, j_max: usize) -> Result<CVector> {
    let m = r.nrows();
    if r.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, found: r.ncols() });
    }
    if t.len() != m || w_init.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: t.len().max(w_init.len()) });
    }
    let scale = r.norm();
    let stop = CG_TOLERANCE * norm_sqr(t).sqrt();
    let mut w = w_init.clone();
    let mut g = r * &w - t;
    let mut d = -&g;
    for _ in 0..j_max {
        if norm_sqr(&g).sqrt() <= stop {
            break;
        }
        let rd = r * &d;
        let curvature = inner(&d, &rd).re;
        if !(curvature > 1e-14 * scale * norm_sqr(&d)) {
            break;
        }
        let alpha = -inner(&d, &g) / curvature;
        w += &d * alpha;
        g = r * &w - t;
        let beta = inner(&g, &rd) / curvature;
        d = &d * beta - &g;
    }
    Ok(w)
}

/// Correlation update followed by `j_max` CG iterations seeded at the previous filter.
pub fn bidir_cg_step(cs: &CgState, mix: &MixingState, hist: &History) -> Result<CgState> {
    let (r, t, mut next) = update_cg_correlations(cs, mix, hist)?;
    let w = cg_solve(&r, &t, &cs.weights, cs.max_iters)?;
    next.weights = if cs.constraint { normalize_output_power(&next, w) } else { w };
    Ok(next)
}

/// `w / √(wᴴ R̂ w)` with `R̂ = R̄₁ / Σλ^k`.
fn normalize_output_power(cs: &CgState, w: CVector) -> CVector {
    let scale = cs.weight_sum.max(1.0);
    let power = quad_form(&cs.autocorr[0], &w) / scale;
    if power > 0.0 && power.is_finite() {
        w * real(1.0 / power.sqrt())
    } else {
        w
    }
}

/// `wᴴRw − 2 Re(tᴴw)`, the quadratic whose gradient is `R w − t`.
pub fn cg_cost(r: &CMatrix, t: &CVector, w: &CVector) -> f64 {
    quad_form(r, w) - 2.0 * inner(t, w).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermitian_defect, solve, ONE, ZERO};
    use crate::rng::{self, complex_normal, random_sign};
    use rand::Rng;

    fn random_vec(m: usize, r: &mut impl Rng) -> CVector {
        CVector::from_fn(m, |_, _| complex_normal(r, 1.0))
    }

    /// Hermitian PD matrix `Q diag(λ) Qᴴ` with eigenvalues drawn from `[lo, hi]`.
    pub(crate) fn random_hpd(m: usize, lo: f64, hi: f64, r: &mut impl Rng) -> CMatrix {
        let a = CMatrix::from_fn(m, m, |_, _| complex_normal(r, 1.0));
        let q = a.qr().q();
        let eig = CVector::from_fn(m, |_, _| real(lo + (hi - lo) * r.random::<f64>()));
        &q * CMatrix::from_diagonal(&eig) * q.adjoint()
    }

    #[test]
    fn identity_system_in_one_iteration() {
        let w = cg_solve(
            &CMatrix::identity(2, 2),
            &CVector::from_vec(vec![real(3.0), real(4.0)]),
            &CVector::zeros(2),
            1,
        )
        .unwrap();
        assert!((w - CVector::from_vec(vec![real(3.0), real(4.0)])).norm() < 1e-15);
    }

    #[test]
    fn diagonal_system_in_two_iterations() {
        let r = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, real(2.0)]));
        let t = CVector::from_vec(vec![ONE, real(2.0)]);
        let w = cg_solve(&r, &t, &CVector::zeros(2), 2).unwrap();
        assert!((w - CVector::from_vec(vec![ONE, ONE])).norm() < 1e-12);
    }

    #[test]
    fn matches_direct_solve_and_cost_decreases() {
        let mut rg = rng::stream(1, 2);
        for m in [4, 8, 16] {
            for _ in 0..20 {
                let r = random_hpd(m, 0.1, 10.0, &mut rg);
                let t = random_vec(m, &mut rg);
                let direct = solve(&r, &t).unwrap();
                let w = cg_solve(&r, &t, &CVector::zeros(m), m).unwrap();
                assert!((&w - &direct).norm() / direct.norm() <= 1e-8);

                let mut prev = cg_cost(&r, &t, &CVector::zeros(m));
                for j in 1..=m {
                    let wj = cg_solve(&r, &t, &CVector::zeros(m), j).unwrap();
                    let cost = cg_cost(&r, &t, &wj);
                    assert!(cost <= prev + 1e-9 * prev.abs().max(1.0));
                    prev = cost;
                }
            }
        }
    }

    #[test]
    fn zero_iterations_return_the_seed() {
        let seed = CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.0)]);
        let w = cg_solve(&CMatrix::identity(2, 2), &CVector::zeros(2), &seed, 0).unwrap();
        assert_eq!(w, seed);
        assert!(cg_solve(&CMatrix::identity(2, 2), &CVector::zeros(3), &seed, 1).is_err());
    }

    fn random_history(m: usize, r: &mut impl Rng) -> History {
        History::from_samples(
            (0..3).map(|_| random_vec(m, r)).collect(),
            (0..3).map(|_| random_sign(r)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_outer_product_from_tiny_forgetting() {
        let r0 = CVector::from_vec(vec![ONE, ZERO]);
        let h = History::from_samples(vec![r0.clone(), r0.clone(), r0], vec![1.0; 3]).unwrap();
        let cs = CgState::new(CVector::from_vec(vec![ONE, ONE]), 0.01, 1e-300, 3).unwrap();
        let (_, _, next) = update_cg_correlations(&cs, &MixingState::uniform(3, 0.9), &h).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!((&next.autocorr[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn degenerate_mixing_selects_first_pair() {
        let mut rg = rng::stream(2, 2);
        let cs = CgState::new(random_vec(4, &mut rg), 0.01, 0.99, 3).unwrap();
        let h = random_history(4, &mut rg);
        let (r, t, next) = update_cg_correlations(&cs, &MixingState::fixed(vec![1.0, 0.0, 0.0]), &h).unwrap();
        assert_eq!(r, next.autocorr[0]);
        assert_eq!(t, next.crosscorr[0]);
    }

    #[test]
    fn correlations_match_brute_force_sum() {
        let mut rg = rng::stream(3, 2);
        let m = 5;
        let lam = 0.97;
        let delta = 0.01;
        let w0 = random_vec(m, &mut rg);
        let mut cs = CgState::new(w0.clone(), delta, lam, 2).unwrap();
        let mix = MixingState::fixed(vec![0.5, 0.3, 0.2]);
        let steps = 100;
        let mut windows = Vec::new();
        let mut filters = Vec::new();
        let mut last = (CMatrix::zeros(m, m), CVector::zeros(m));
        for _ in 0..steps {
            let h = random_history(m, &mut rg);
            filters.push(cs.weights.clone());
            let (r, t, next) = update_cg_correlations(&cs, &mix, &h).unwrap();
            assert!(hermitian_defect(&r) < 1e-10);
            windows.push(h);
            last = (r, t);
            // move the filter so t̄ sees a different w each step
            cs = CgState { weights: random_vec(m, &mut rg), ..next };
        }
        let mut r_sum = CMatrix::identity(m, m) * real(delta * lam.powi(steps as i32));
        let mut t_sum = &w0 * real(delta * lam.powi(steps as i32));
        for (j, (h, w)) in windows.iter().zip(&filters).enumerate() {
            let age = lam.powi((steps - 1 - j) as i32);
            let (r0, r1, r2) = (h.vector(0), h.vector(1), h.vector(2));
            let (b0, b1, b2) = (h.symbol(0), h.symbol(1), h.symbol(2));
            let terms = [
                (r0 * r0.adjoint() * real(b1 * b1), r0 * (r1.adjoint() * w)[0] * real(b1 * b0)),
                (r0 * r0.adjoint() * real(b2 * b2), r0 * (r2.adjoint() * w)[0] * real(b2 * b0)),
                (r1 * r1.adjoint() * real(b2 * b2), r1 * (r2.adjoint() * w)[0] * real(b2 * b1)),
            ];
            for ((rr, tt), rho) in terms.iter().zip(&mix.weights) {
                r_sum += rr * real(age * rho);
                t_sum += tt * real(age * rho);
            }
        }
        assert!((&last.0 - r_sum).norm() < 1e-9);
        assert!((&last.1 - t_sum).norm() < 1e-9);
    }

    #[test]
    fn static_channel_is_a_fixed_point() {
        let g = CVector::from_vec(vec![c(0.4, -0.2), c(1.0, 0.3), c(-0.6, 0.8), c(0.1, 0.0)]);
        let mut rg = rng::stream(5, 2);
        let w0 = random_vec(4, &mut rg);
        let mut cs = CgState::new(w0.clone(), 0.01, 0.998, 5).unwrap();
        let mix = MixingState::uniform(3, 0.9);
        let mut h = History::new(3);
        for _ in 0..1000 {
            let b = random_sign(&mut rg);
            h.push(&g * real(b), b);
            if h.is_full() {
                cs = bidir_cg_step(&cs, &mix, &h).unwrap();
            }
        }
        assert!((&cs.weights - &w0).norm() <= 1e-12);
    }

    #[test]
    fn first_update_on_rank_deficient_system() {
        let mut rg = rng::stream(6, 2);
        let m = 4;
        let w0 = random_vec(m, &mut rg);
        let cs = CgState::new(w0.clone(), 0.0, 0.5, 10).unwrap();
        let h = random_history(m, &mut rg);
        let mix = MixingState::uniform(3, 0.9);
        let next = bidir_cg_step(&cs, &mix, &h).unwrap();
        let (r, t) = next.mixed(&mix);
        let (r0, r1) = (h.vector(0), h.vector(1));
        let expected = r0 * r0.adjoint() * real(2.0 / 3.0) + r1 * r1.adjoint() * real(1.0 / 3.0);
        assert!((&r - expected).norm() < 1e-12);
        let w = &next.weights;
        assert!(w.iter().all(|x| x.re.is_finite() && x.im.is_finite()));
        assert!((&r * w - &t).norm() <= 1e-8 * t.norm());
        // the correction stays inside span{r[i], r[i−1]}
        let basis = CMatrix::from_columns(&[r0.clone(), r1.clone()]);
        let q = basis.qr().q();
        let delta = w - &w0;
        let outside = &delta - &q * (q.adjoint() * &delta);
        assert!(outside.norm() < 1e-8 * delta.norm().max(1.0));
    }

    #[test]
    fn zero_iterations_keep_weights() {
        let mut rg = rng::stream(7, 2);
        let w0 = random_vec(3, &mut rg);
        let cs = CgState::new(w0.clone(), 0.01, 0.9, 0).unwrap();
        let next = bidir_cg_step(&cs, &MixingState::uniform(3, 0.9), &random_history(3, &mut rg)).unwrap();
        assert_eq!(next.weights, w0);
    }

    #[test]
    fn static_recursion_converges_to_direct_solution() {
        // ρ = (1,0,0), λ = 1: after many symbols w solves R̄₁ w = t̄₁ of the accumulated sums.
        let mut rg = rng::stream(8, 2);
        let m = 4;
        let sig = random_vec(m, &mut rg);
        let interferer = random_vec(m, &mut rg);
        let mut cs = CgState::new(sig.clone(), 0.01, 1.0, m).unwrap();
        let mix = MixingState::fixed(vec![1.0, 0.0, 0.0]);
        let mut h = History::new(3);
        for _ in 0..400 {
            let b = random_sign(&mut rg);
            let r = &sig * real(b) + &interferer * real(random_sign(&mut rg)) + random_vec(m, &mut rg) * real(0.1);
            h.push(r, b);
            if h.is_full() {
                cs = bidir_cg_step(&cs, &mix, &h).unwrap();
            }
        }
        let direct = solve(&cs.autocorr[0], &cs.crosscorr[0]).unwrap();
        assert!((&cs.weights - &direct).norm() <= 1e-6 * direct.norm());
    }

    #[test]
    fn literal_t1_couples_to_t3() {
        let mut rg = rng::stream(9, 2);
        let mut cs = CgState::new(random_vec(3, &mut rg), 0.01, 0.9, 2).unwrap();
        cs.crosscorr[2] = random_vec(3, &mut rg);
        let h = random_history(3, &mut rg);
        let mix = MixingState::uniform(3, 0.9);
        let (_, _, fixed) = update_cg_correlations(&cs, &mix, &h).unwrap();
        let literal_state = CgState { literal_t1: true, ..cs.clone() };
        let (_, _, literal) = update_cg_correlations(&literal_state, &mix, &h).unwrap();
        let diff = &literal.crosscorr[0] - &fixed.crosscorr[0];
        let expected = (&cs.crosscorr[2] - &cs.crosscorr[0]) * real(0.9);
        assert!((diff - expected).norm() < 1e-12);
    }

    #[test]
    fn constraint_normalizes_output_power() {
        let mut rg = rng::stream(10, 2);
        let mut cs = CgState::new(random_vec(4, &mut rg), 0.01, 0.95, 4).unwrap();
        cs.constraint = true;
        let mix = MixingState::uniform(3, 0.9);
        let mut h = History::new(3);
        for _ in 0..50 {
            h.push(random_vec(4, &mut rg), random_sign(&mut rg));
            if h.is_full() {
                cs = bidir_cg_step(&cs, &mix, &h).unwrap();
            }
        }
        let power = quad_form(&cs.autocorr[0], &cs.weights) / cs.weight_sum;
        assert!((power - 1.0).abs() < 1e-9);
    }
}
