use bidir_mmse::analysis::sinr_db;
use bidir_mmse::cdma::{detect_differential, modulate_differential};
use bidir_mmse::linalg::{c, real};
use bidir_mmse::receivers::cg::cg_cost;
use bidir_mmse::receivers::{
    bidir_nlms_step, cg_solve, compute_pair_errors, differential_nlms_step, FilterState, History, MixingState,
};
use bidir_mmse::{CMatrix, CVector};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn cvec(m: usize) -> impl Strategy<Value = CVector> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m).prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(a, b)| c(a, b))))
}

fn signs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(any::<bool>().prop_map(|b| if b { 1.0 } else { -1.0 }), n)
}

/// `A Aᴴ + εI`, positive definite.
fn pd_matrix(m: usize) -> impl Strategy<Value = CMatrix> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m * m).prop_map(move |v| {
        let a = CMatrix::from_iterator(m, m, v.into_iter().map(|(x, y)| c(x, y)));
        &a * a.adjoint() + CMatrix::identity(m, m) * real(0.05)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn static_channel_pair_errors_vanish(s in cvec(10), w in cvec(10), bits in signs(3), g in (0.1f64..2.0, -3.2f64..3.2)) {
        let gain = Complex64::from_polar(g.0, g.1);
        let vectors = bits.iter().map(|&b| &s * (gain * b)).collect();
        let hist = History::from_samples(vectors, bits.clone()).unwrap();
        let e = compute_pair_errors(&w, &hist, 3).unwrap();
        for z in e.errors {
            prop_assert!(z.norm() <= 1e-14);
        }
        let fs = FilterState::new(w.clone(), 1.0, 0.3, 0.9).unwrap();
        let next = bidir_nlms_step(&fs, &MixingState::uniform(3, 0.9), &hist).unwrap();
        prop_assert!((&next.weights - &w).norm() <= 1e-14);
        let diff = differential_nlms_step(&fs, &hist).unwrap();
        prop_assert!((&diff.weights - &w).norm() <= 1e-14);
    }

    #[test]
    fn sinr_is_scale_invariant(w in cvec(6), s in cvec(6), scale in (0.01f64..100.0, -3.2f64..3.2)) {
        prop_assume!(w.norm() > 1e-3);
        let rs = &s * s.adjoint();
        let ri = CMatrix::identity(6, 6) * real(0.1) + &rs * real(0.2);
        let gamma = Complex64::from_polar(scale.0, scale.1);
        let a = sinr_db(&w, &rs, &ri).unwrap();
        let b = sinr_db(&(&w * gamma), &rs, &ri).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn differential_detection_round_trip(data in signs(40), g in (0.1f64..5.0, -3.2f64..3.2)) {
        let gain = Complex64::from_polar(g.0, g.1);
        let stream = modulate_differential(&data, 1.0);
        let z: Vec<Complex64> = stream.transmitted.iter().map(|&b| gain * b).collect();
        for i in 1..z.len() {
            prop_assert_eq!(detect_differential(z[i], z[i - 1]), data[i - 1]);
        }
    }

    #[test]
    fn cg_cost_never_increases(r in pd_matrix(8), t in cvec(8), w0 in cvec(8)) {
        let mut prev = cg_cost(&r, &t, &w0);
        for j in 1..=8 {
            let w = cg_solve(&r, &t, &w0, j).unwrap();
            let cost = cg_cost(&r, &t, &w);
            prop_assert!(cost <= prev + 1e-9 * prev.abs().max(1.0), "iteration {}: {} > {}", j, cost, prev);
            prev = cost;
        }
    }

    #[test]
    fn cg_matches_direct_solve_up_to_sixteen(m in 2usize..=16, seed in any::<u64>()) {
        use bidir_mmse::rng::{complex_normal, stream};
        use rand::Rng;
        let mut rng = stream(seed, 0);
        let g = CMatrix::from_fn(m, m, |_, _| complex_normal(&mut rng, 1.0));
        let q = g.qr().q();
        let eig = CMatrix::from_diagonal(&DVector::from_fn(m, |_, _| real(rng.random_range(0.1..=10.0))));
        let r = &q * eig * q.adjoint();
        let r = (&r + r.adjoint()) * real(0.5);
        let t = DVector::from_fn(m, |_, _| complex_normal(&mut rng, 1.0));
        let direct = bidir_mmse::linalg::solve(&r, &t).unwrap();
        let w = cg_solve(&r, &t, &CVector::zeros(m), m).unwrap();
        let rel = (&w - &direct).norm() / direct.norm();
        prop_assert!(rel < 1e-8, "m = {}, relative error {:e}", m, rel);
    }
}
