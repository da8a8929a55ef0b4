//! Monte Carlo experiments over packets.

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{analytical_curve, cached_moments, estimate_moment_matrices, sinr_db, MomentConfig, MomentMatrices, Variant};
use crate::cdma::{detect_coherent, detect_differential, filter_output, Modulation, SpreadingCode};
use crate::error::{Error, Result};
use crate::fading::{clarke_autocorrelation, generate_fading, FadingConfig};
use crate::linalg::CVector;
use crate::rng;
use crate::scenario::{draw_codes, Packet};

use super::config::{AlgorithmKind, AlgorithmSpec, ExperimentConfig};
use super::receiver::Receiver;
use super::records::{ChannelStatRecord, MetricsRecord};

const Z95: f64 = 1.96;

/// How SINR probes are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum SinrReference<'a> {
    /// Instantaneous statistics of the probed symbol, divided by the instantaneous SNR.
    Normalized,
    /// Fixed ensemble matrices `R_S`, `R_I`.
    Ensemble(&'a MomentMatrices),
}

/// Outcome of one packet for every algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketResult {
    /// `errors[a][i]`: bit error at symbol `i`; `None` where no bit is carried.
    pub errors: Vec<Vec<Option<bool>>>,
    /// `sinr[a][k]`: SINR in dB at probe `k`.
    pub sinr: Vec<Vec<f64>>,
}

fn probe_sinr(packet: &Packet, i: usize, w: &CVector, sinr_ref: SinrReference<'_>) -> Result<f64> {
    match sinr_ref {
        SinrReference::Normalized => {
            let stats = packet.statistics(i);
            let raw = sinr_db(w, &stats.signal_covariance(), &stats.interference)?;
            Ok(raw - 10.0 * packet.instant_snr(i).log10())
        }
        SinrReference::Ensemble(m) => sinr_db(w, &m.signal_corr, &m.interference_corr),
    }
}

/// Runs every algorithm over one packet.
///
/// The first `train_len` symbols adapt on the transmitted symbols; afterwards coherent
/// receivers adapt on their own decisions and differential ones on the chain
/// `b̂[i] = â[i] b̂[i−1]`. Probes record the SINR of the filter after symbol `i`.
pub fn simulate_packet(
    packet: &Packet,
    algorithms: &[AlgorithmSpec],
    train_len: usize,
    probes: &[usize],
    sinr_ref: SinrReference<'_>,
) -> Result<PacketResult> {
    let len = packet.len();
    let m = packet.users[0].observation_len();
    let w0 = packet.users[0].code.padded(m);
    let mut coherent = None;
    let mut differential = None;
    let mut out = PacketResult { errors: Vec::new(), sinr: Vec::new() };
    for spec in algorithms {
        let slot = match spec.mode {
            Modulation::Coherent => &mut coherent,
            Modulation::Differential => &mut differential,
        };
        if slot.is_none() {
            *slot = Some(packet.received(spec.mode)?);
        }
        let (stream, rx) = slot.as_ref().unwrap();
        let mut receiver = Receiver::new(spec, w0.clone())?;
        let mut errors = Vec::with_capacity(len);
        let mut sinr = Vec::with_capacity(probes.len());
        let mut probe = probes.iter().copied().peekable();
        let mut z_prev = None;
        let mut last_ref = 1.0;
        for (i, r) in rx.iter().enumerate().take(len) {
            if receiver.needs_statistics() {
                receiver.prepare(&packet.statistics(i))?;
            }
            let z = filter_output(receiver.weights(), r)?;
            let decided = match (spec.mode, z_prev) {
                (Modulation::Coherent, _) => {
                    let b = detect_coherent(z);
                    errors.push(Some(b != packet.data[i]));
                    b
                }
                (Modulation::Differential, Some(zp)) => {
                    let a = detect_differential(z, zp);
                    errors.push(Some(a != packet.data[i]));
                    a * last_ref
                }
                (Modulation::Differential, None) => {
                    errors.push(None);
                    1.0
                }
            };
            let symbol = if i < train_len { stream.transmitted[i] } else { decided };
            receiver.update(r, symbol)?;
            z_prev = Some(z);
            last_ref = symbol;
            while probe.peek() == Some(&i) {
                probe.next();
                sinr.push(probe_sinr(packet, i, receiver.weights(), sinr_ref)?);
            }
        }
        out.errors.push(errors);
        out.sinr.push(sinr);
    }
    Ok(out)
}

/// Runs `(grid point, packet)` items in parallel and returns results in item order.
fn run_grid<F>(points: usize, packets: usize, f: F) -> Result<Vec<Vec<PacketResult>>>
where
    F: Fn(usize, u64) -> Result<PacketResult> + Sync,
{
    let flat: Vec<Result<PacketResult>> = (0..points * packets)
        .into_par_iter()
        .map(|k| f(k / packets, (k % packets) as u64))
        .collect();
    let mut out = Vec::with_capacity(points);
    let mut it = flat.into_iter();
    for _ in 0..points {
        out.push(it.by_ref().take(packets).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

fn mean_ci(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

fn ber_records(
    experiment: &str,
    cfg: &ExperimentConfig,
    sweep: f64,
    results: &[PacketResult],
    out: &mut Vec<MetricsRecord>,
) {
    for (a, spec) in cfg.algorithms.iter().enumerate() {
        for i in 0..cfg.packet_len {
            let bits: Vec<f64> = results
                .iter()
                .filter_map(|r| r.errors[a][i])
                .map(|e| if e { 1.0 } else { 0.0 })
                .collect();
            if bits.is_empty() {
                continue;
            }
            let n = bits.len() as f64;
            let p = bits.iter().sum::<f64>() / n;
            out.push(MetricsRecord {
                experiment: experiment.into(),
                algorithm: spec.label.clone(),
                sweep,
                symbol: i,
                ber: Some(p),
                sinr_db: None,
                ci: Z95 * (p * (1.0 - p) / n).sqrt(),
                seed: cfg.seed,
            });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn sinr_records(
    experiment: &str,
    label: &str,
    cfg: &ExperimentConfig,
    sweep: f64,
    probes: &[usize],
    per_packet: impl Fn(&PacketResult, usize) -> f64,
    results: &[PacketResult],
    out: &mut Vec<MetricsRecord>,
) {
    for (k, &i) in probes.iter().enumerate() {
        let (mean, ci) = mean_ci(results.iter().map(|r| per_packet(r, k)));
        out.push(MetricsRecord {
            experiment: experiment.into(),
            algorithm: label.into(),
            sweep,
            symbol: i,
            ber: None,
            sinr_db: Some(mean),
            ci,
            seed: cfg.seed,
        });
    }
}

/// BER learning curves for every SNR in the grid, at the first fading rate.
pub fn run_ber_curve(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let doppler = cfg.fading_grid[0];
    let results = run_grid(cfg.snr_db.len(), cfg.packets, |g, p| {
        let sc = cfg.scenario(cfg.snr_db[g], doppler);
        let packet = Packet::generate(&sc, cfg.seed, p, cfg.packet_len)?;
        simulate_packet(&packet, &cfg.algorithms, cfg.train_len, &[], SinrReference::Normalized)
    })?;
    let mut out = Vec::new();
    for (g, res) in results.iter().enumerate() {
        ber_records("ber", cfg, cfg.snr_db[g], res, &mut out);
    }
    Ok(out)
}

/// Symbols at which the fading sweep measures SINR: end of training and end of packet.
pub fn fading_probes(cfg: &ExperimentConfig) -> Vec<usize> {
    let mut p = Vec::new();
    if cfg.train_len > 0 {
        p.push(cfg.train_len - 1);
    }
    if p.last() != Some(&(cfg.packet_len - 1)) {
        p.push(cfg.packet_len - 1);
    }
    p
}

/// Mean normalized SINR at the end of training and of the packet, per fading rate.
pub fn run_sinr_vs_fading(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let snr = cfg.snr_db[0];
    let probes = fading_probes(cfg);
    let results = run_grid(cfg.fading_grid.len(), cfg.packets, |g, p| {
        let sc = cfg.scenario(snr, cfg.fading_grid[g]);
        let packet = Packet::generate(&sc, cfg.seed, p, cfg.packet_len)?;
        simulate_packet(&packet, &cfg.algorithms, cfg.train_len, &probes, SinrReference::Normalized)
    })?;
    let mut out = Vec::new();
    for (g, res) in results.iter().enumerate() {
        for (a, spec) in cfg.algorithms.iter().enumerate() {
            let f = |r: &PacketResult, k: usize| r.sinr[a][k];
            sinr_records("sinr-vs-fading", &spec.label, cfg, cfg.fading_grid[g], &probes, f, res, &mut out);
        }
    }
    Ok(out)
}

/// Analytical step matching an NLMS receiver, `μ ρ̄ / E‖r‖²`, and its recursion variant.
pub fn analytical_variant(spec: &AlgorithmSpec, m: &MomentMatrices) -> Option<(Variant, f64)> {
    let per_power = spec.params.mu / m.input_power;
    match spec.kind {
        AlgorithmKind::DiffNlms => Some((Variant::Differential, per_power)),
        AlgorithmKind::BidirNlms | AlgorithmKind::BidirNlmsEq => Some((Variant::Bidirectional, per_power / 3.0)),
        _ => None,
    }
}

pub fn moment_config(cfg: &ExperimentConfig) -> MomentConfig {
    MomentConfig {
        scenario: cfg.scenario(cfg.snr_db[0], cfg.fading_grid[0]),
        code_seed: cfg.seed,
        seed: cfg.seed ^ 0x6d6f_6d65_6e74_7300,
        ensemble_size: cfg.ensemble,
    }
}

pub fn moments_for(cfg: &ExperimentConfig) -> Result<MomentMatrices> {
    let mc = moment_config(cfg);
    match &cfg.cache_dir {
        Some(dir) => cached_moments(&mc, dir),
        None => estimate_moment_matrices(&mc),
    }
}

/// Analytical, simulated and MMSE-bound SINR learning curves at the first grid point.
///
/// All packets share one code set so that the ensemble matrices describe them. Curves are
/// labelled `<algorithm>:simulated`, `<algorithm>:analytical` and `mmse-bound`.
pub fn run_analysis_comparison(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    cfg.validate()?;
    let moments = moments_for(cfg)?;
    let mc = moment_config(cfg);
    let codes: Vec<SpreadingCode> = draw_codes(&mc.scenario, mc.code_seed)?;
    let sweep = cfg.fading_grid[0];
    let probes: Vec<usize> = (0..cfg.packet_len).collect();
    let results = run_grid(1, cfg.packets, |_, p| {
        let packet = Packet::generate_with_codes(&mc.scenario, Some(&codes), cfg.seed, p, cfg.packet_len)?;
        simulate_packet(&packet, &cfg.algorithms, cfg.train_len, &probes, SinrReference::Ensemble(&moments))
    })?;
    let res = &results[0];
    let mut out = Vec::new();
    for (a, spec) in cfg.algorithms.iter().enumerate() {
        let f = |r: &PacketResult, k: usize| r.sinr[a][k];
        let label = format!("{}:simulated", spec.label);
        sinr_records("analysis", &label, cfg, sweep, &probes, f, res, &mut out);
        if let Some((variant, step)) = analytical_variant(spec, &moments) {
            let curve = analytical_curve(&moments, variant, step, cfg.g0, cfg.packet_len)?;
            for (i, v) in curve.into_iter().enumerate() {
                out.push(MetricsRecord {
                    experiment: "analysis".into(),
                    algorithm: format!("{}:analytical", spec.label),
                    sweep,
                    symbol: i,
                    ber: None,
                    sinr_db: Some(v),
                    ci: 0.0,
                    seed: cfg.seed,
                });
            }
        }
    }
    let bound = 10.0 * (moments.p_s_opt / moments.p_i_opt).log10();
    if !bound.is_finite() {
        return Err(Error::InvalidRegime("MMSE bound is not finite"));
    }
    for i in 0..cfg.packet_len {
        out.push(MetricsRecord {
            experiment: "analysis".into(),
            algorithm: "mmse-bound".into(),
            sweep,
            symbol: i,
            ber: None,
            sinr_db: Some(bound),
            ci: 0.0,
            seed: cfg.seed,
        });
    }
    Ok(out)
}

/// Empirical normalized autocorrelation of a single-path channel against `J₀(2π f m)`.
pub fn channel_stats(cfg: &ExperimentConfig) -> Result<Vec<ChannelStatRecord>> {
    if cfg.samples <= cfg.max_lag {
        return Err(Error::InvalidConfig("samples must exceed max_lag".into()));
    }
    let rows: Vec<Result<Vec<ChannelStatRecord>>> = cfg
        .fading_grid
        .par_iter()
        .enumerate()
        .map(|(g, &f)| {
            let seed: u64 = rng::stream(cfg.seed, g as u64).random();
            let seq = generate_fading(&FadingConfig::uniform(f, 1, seed), cfg.samples)?;
            let h = seq.path(0);
            let corr = |lag: usize| {
                let s: num_complex::Complex64 = h[lag..].iter().zip(h).map(|(a, b)| b * a.conj()).sum();
                s.re / (h.len() - lag) as f64
            };
            let r0 = corr(0);
            Ok((0..=cfg.max_lag)
                .map(|lag| ChannelStatRecord {
                    fading_rate: f,
                    lag,
                    empirical: corr(lag) / r0,
                    theoretical: clarke_autocorrelation(f, lag),
                    seed: cfg.seed,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}
