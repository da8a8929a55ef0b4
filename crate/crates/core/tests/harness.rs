use bidir_mmse::harness::records::MetricsRecord;
use bidir_mmse::harness::run::{fading_probes, run_ber_curve, run_sinr_vs_fading, simulate_packet, SinrReference};
use bidir_mmse::harness::ExperimentConfig;
use bidir_mmse::scenario::Packet;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

/// Overall BER per (algorithm, sweep), pooling every symbol.
fn pooled_ber(records: &[MetricsRecord], algorithm: &str, sweep: f64) -> f64 {
    let v: Vec<f64> = records
        .iter()
        .filter(|r| r.algorithm == algorithm && r.sweep == sweep)
        .filter_map(|r| r.ber)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

const AWGN_SINGLE_USER: &str = "users = 1\npaths = 1\nisi = false\nchannel = awgn\nfading_grid = 0\n";

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = config(
        "packets = 9\npacket_len = 120\ntrain_len = 40\nfading_grid = 0.005, 0.02\n\
         algorithms = mmse, rls, diff-nlms, bidir-cg\n",
    );
    let one = in_pool(1, || run_sinr_vs_fading(&cfg).unwrap());
    let three = in_pool(3, || run_sinr_vs_fading(&cfg).unwrap());
    assert_eq!(one, three);
    let ber_one = in_pool(1, || run_ber_curve(&cfg).unwrap());
    let ber_four = in_pool(4, || run_ber_curve(&cfg).unwrap());
    assert_eq!(ber_one, ber_four);
}

#[test]
fn packet_seeds_do_not_depend_on_packet_count() {
    let small = config("packets = 6\npacket_len = 80\ntrain_len = 30\nfading_grid = 0.01\nalgorithms = rls, bidir-cg\n");
    let large = ExperimentConfig { packets: 12, ..small.clone() };
    let probes = fading_probes(&small);
    let sc = small.scenario(small.snr_db[0], small.fading_grid[0]);
    let packet_result = |p: u64| {
        let packet = Packet::generate(&sc, small.seed, p, small.packet_len).unwrap();
        simulate_packet(&packet, &small.algorithms, small.train_len, &probes, SinrReference::Normalized).unwrap()
    };
    let mut first_half = Vec::new();
    for p in 0..6 {
        first_half.push(packet_result(p));
    }
    let records_small = run_sinr_vs_fading(&small).unwrap();
    let records_large = run_sinr_vs_fading(&large).unwrap();
    for (a, spec) in small.algorithms.iter().enumerate() {
        for (k, &symbol) in probes.iter().enumerate() {
            let expect = first_half.iter().map(|r| r.sinr[a][k]).sum::<f64>() / 6.0;
            let got = records_small
                .iter()
                .find(|r| r.algorithm == spec.label && r.symbol == symbol)
                .and_then(|r| r.sinr_db)
                .unwrap();
            assert!((got - expect).abs() < 1e-12, "{}: {got} vs {expect}", spec.label);
        }
    }
    assert_ne!(records_small, records_large);
}

#[test]
fn single_user_ber_falls_with_snr() {
    let cfg = config(&format!(
        "{AWGN_SINGLE_USER}snr_db = 0, 2, 4, 6\npackets = 100\npacket_len = 500\ntrain_len = 10\nalgorithms = mmse, mf\n"
    ));
    let records = run_ber_curve(&cfg).unwrap();
    for alg in ["mmse", "mf"] {
        let curve: Vec<f64> = cfg.snr_db.iter().map(|&s| pooled_ber(&records, alg, s)).collect();
        assert!(curve.windows(2).all(|w| w[1] < w[0]), "{alg}: {curve:?}");
    }
}

#[test]
fn differential_detection_penalty_matches_theory() {
    let cfg = config(&format!(
        "{AWGN_SINGLE_USER}snr_db = 7\npackets = 1000\npacket_len = 1000\ntrain_len = 10\n\
         algorithms = mf, mf(mode=differential)\n"
    ));
    let records = run_ber_curve(&cfg).unwrap();
    let coherent = pooled_ber(&records, "mf", 7.0);
    let differential = pooled_ber(&records, "mf(mode=differential)", 7.0);
    let ratio = differential / coherent;
    let snr = 10f64.powf(0.7);
    let theory_dpsk = 0.5 * (-snr).exp();
    let theory_ratio = theory_dpsk / 7.727e-4;
    assert!((differential / theory_dpsk - 1.0).abs() < 0.05, "DPSK {differential} vs {theory_dpsk}");
    assert!((ratio / theory_ratio - 1.0).abs() < 0.2, "ratio {ratio} vs {theory_ratio}");
}

#[test]
fn noiseless_matched_filter_makes_no_errors() {
    let cfg = config(&format!(
        "{AWGN_SINGLE_USER}snr_db = inf\npackets = 20\npacket_len = 200\ntrain_len = 10\n\
         algorithms = mf, mf(mode=differential)\n"
    ));
    let records = run_ber_curve(&cfg).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.ber == Some(0.0)));
}

#[test]
fn rls_tracks_slow_fading_during_training() {
    let cfg = config("packets = 10\npacket_len = 400\ntrain_len = 300\nfading_grid = 0.001\nalgorithms = mmse, rls\n");
    let records = run_sinr_vs_fading(&cfg).unwrap();
    let at = |alg: &str| {
        records
            .iter()
            .find(|r| r.algorithm == alg && r.symbol == cfg.train_len - 1)
            .and_then(|r| r.sinr_db)
            .unwrap()
    };
    let (mmse, rls) = (at("mmse"), at("rls"));
    assert!(rls <= mmse + 1e-9, "rls {rls} above mmse {mmse}");
    assert!(mmse - rls < 3.0, "rls {rls} far below mmse {mmse}");
}

#[test]
fn static_channel_orders_mmse_cg_nlms() {
    let cfg = config("packets = 10\npacket_len = 1000\ntrain_len = 1000\nfading_grid = 0\nalgorithms = mmse, bidir-cg, bidir-nlms\n");
    let records = run_sinr_vs_fading(&cfg).unwrap();
    let at = |alg: &str| records.iter().find(|r| r.algorithm == alg).and_then(|r| r.sinr_db).unwrap();
    let (mmse, cg, nlms) = (at("mmse"), at("bidir-cg"), at("bidir-nlms"));
    assert!(mmse >= cg && cg >= nlms, "mmse {mmse}, cg {cg}, nlms {nlms}");
    assert!(mmse - cg < 3.0, "cg {cg} vs mmse {mmse}");
}
