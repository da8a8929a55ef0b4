//! Moment matrices and the weight-error recursions behind the analytical SINR curves.
//!
//! With `ε[i] = w[i] − w_o[i]`, the NLMS mean dynamics give
//! `K ← B K Bᴴ + μ² Σ R_n J_n` with `B = I + μ Σ (F_n − R_n)` and `G ← G · μ Σ (F_n − R_n)`.
//! The SINR is then a ratio of traces against `R_S` and `R_I`.
//!
//! # Cache format
//!
//! [`cached_moments`] stores one JSON document per configuration, named `<key>.json`, where
//! `key` is the SHA-256 of the serialized [`MomentConfig`]. The document has a `header`
//! object (`format`, `key`, `config`, `dim`) followed by the estimates; every matrix is a
//! row-major list of `[re, im]` pairs.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cdma::Modulation;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, inner, norm_sqr, quad_form, rank1_update, spectral_radius, trace_product, CMatrix, CVector};
use crate::receivers::{compute_pair_errors, mmse_oracle_loaded, History};
use crate::scenario::{draw_codes, Packet, ScenarioConfig};

pub const MIN_ENSEMBLE: usize = 1000;
pub const CACHE_FORMAT: &str = "bidir-mmse-moments/1";
const RADIUS_TOLERANCE: f64 = 1e-9;
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrices {
    /// `R_S = E[A² g gᴴ]`.
    pub signal_corr: CMatrix,
    /// `R_I`: MUI, ISI and noise.
    pub interference_corr: CMatrix,
    /// `R₁ = E[b²[i−1] r[i]rᴴ[i]]`, `R₂ = E[b²[i−2] r[i]rᴴ[i]]`, `R₃ = E[b²[i−2] r[i−1]rᴴ[i−1]]`.
    pub autocorr_terms: [CMatrix; 3],
    /// `F₁ = E[b[i−1]b[i] r[i]rᴴ[i−1]]`, `F₂ = E[b[i−2]b[i] r[i]rᴴ[i−2]]`,
    /// `F₃ = E[b[i−2]b[i−1] r[i−1]rᴴ[i−2]]`.
    pub cross_terms: [CMatrix; 3],
    /// `J_min,n = E|e_o,n|²`.
    pub min_mse: [f64; 3],
    pub p_s_opt: f64,
    pub p_i_opt: f64,
    /// `E‖r‖²`.
    pub input_power: f64,
    /// `|E[rᴴ[i] r[i−1]]| / E‖r‖²`, a residual the analysis assumes to be zero.
    pub adjacent_input_corr: f64,
    /// `E[b[i] b[i−1]]`, likewise assumed zero.
    pub adjacent_symbol_corr: f64,
    pub ensemble_size: usize,
}

impl MomentMatrices {
    pub fn dim(&self) -> usize {
        self.signal_corr.nrows()
    }

    /// Copy with `F₂, R₂, F₃, R₃, J₂, J₃` zeroed; the bidirectional recursion on it is the
    /// differential one.
    pub fn without_extra_pairs(&self) -> Self {
        let m = self.dim();
        let z = CMatrix::zeros(m, m);
        let mut out = self.clone();
        for n in 1..3 {
            out.autocorr_terms[n] = z.clone();
            out.cross_terms[n] = z.clone();
            out.min_mse[n] = 0.0;
        }
        out
    }

    fn check_dim(&self, m: usize) -> Result<()> {
        if self.dim() != m {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: m });
        }
        Ok(())
    }
}

/// Everything that determines a moment estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConfig {
    pub scenario: ScenarioConfig,
    /// Seed of the fixed code set, see [`draw_codes`].
    pub code_seed: u64,
    pub seed: u64,
    pub ensemble_size: usize,
}

impl MomentConfig {
    pub fn cache_key(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

struct Accum {
    rs: CMatrix,
    ri: CMatrix,
    r: [CMatrix; 3],
    f: [CMatrix; 3],
    wo: CMatrix,
    j: [f64; 3],
    power: f64,
    adjacent: Complex64,
    symbols: f64,
}

impl Accum {
    fn new(m: usize) -> Self {
        let z = || CMatrix::zeros(m, m);
        Self {
            rs: z(),
            ri: z(),
            r: [z(), z(), z()],
            f: [z(), z(), z()],
            wo: z(),
            j: [0.0; 3],
            power: 0.0,
            adjacent: Complex64::new(0.0, 0.0),
            symbols: 0.0,
        }
    }

    fn merge(mut self, o: Accum) -> Self {
        self.rs += o.rs;
        self.ri += o.ri;
        for n in 0..3 {
            self.r[n] += &o.r[n];
            self.f[n] += &o.f[n];
            self.j[n] += o.j[n];
        }
        self.wo += o.wo;
        self.power += o.power;
        self.adjacent += o.adjacent;
        self.symbols += o.symbols;
        self
    }
}

fn accumulate(cfg: &MomentConfig, codes: &[crate::cdma::SpreadingCode], members: std::ops::Range<usize>) -> Result<Accum> {
    let m = cfg.scenario.observation_len();
    let mut acc = Accum::new(m);
    for e in members {
        let packet = Packet::generate_with_codes(&cfg.scenario, Some(codes), cfg.seed, e as u64, 3)?;
        let (stream, rx) = packet.received(Modulation::Differential)?;
        let b = &stream.transmitted;
        let (r0, r1, r2) = (&rx[0].samples, &rx[1].samples, &rx[2].samples);
        let stats = packet.statistics(2);
        rank1_update(&mut acc.rs, 1.0, 1.0, &stats.desired, &stats.desired);
        acc.ri += &stats.interference;
        rank1_update(&mut acc.r[0], 1.0, b[1] * b[1], r2, r2);
        rank1_update(&mut acc.r[1], 1.0, b[0] * b[0], r2, r2);
        rank1_update(&mut acc.r[2], 1.0, b[0] * b[0], r1, r1);
        rank1_update(&mut acc.f[0], 1.0, b[1] * b[2], r2, r1);
        rank1_update(&mut acc.f[1], 1.0, b[0] * b[2], r2, r0);
        rank1_update(&mut acc.f[2], 1.0, b[0] * b[1], r1, r0);
        let w = mmse_oracle_loaded(&stats.total_covariance(), &stats.desired)?;
        rank1_update(&mut acc.wo, 1.0, 1.0, &w, &w);
        let hist = History::from_samples(vec![r2.clone(), r1.clone(), r0.clone()], vec![b[2], b[1], b[0]])?;
        let errs = compute_pair_errors(&w, &hist, 3)?;
        for (j, e) in acc.j.iter_mut().zip(&errs.errors) {
            *j += e.norm_sqr();
        }
        acc.power += norm_sqr(r2);
        acc.adjacent += inner(r2, r1);
        acc.symbols += b[2] * b[1];
    }
    Ok(acc)
}

/// Monte Carlo moments over `ensemble_size` independent three-symbol realizations sharing
/// one code set.
pub fn estimate_moment_matrices(cfg: &MomentConfig) -> Result<MomentMatrices> {
    if cfg.ensemble_size < MIN_ENSEMBLE {
        return Err(Error::EnsembleTooSmall { got: cfg.ensemble_size, min: MIN_ENSEMBLE });
    }
    cfg.scenario.validate()?;
    let codes = draw_codes(&cfg.scenario, cfg.code_seed)?;
    let m = cfg.scenario.observation_len();
    let chunks: Vec<_> = (0..cfg.ensemble_size)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(cfg.ensemble_size))
        .collect();
    let parts: Vec<Result<Accum>> = chunks.into_par_iter().map(|r| accumulate(cfg, &codes, r)).collect();
    let mut acc = Accum::new(m);
    for part in parts {
        acc = acc.merge(part?);
    }
    let scale = Complex64::new(1.0 / cfg.ensemble_size as f64, 0.0);
    let avg = |x: &CMatrix| x * scale;
    let rs = hermitian_part(&avg(&acc.rs));
    let ri = hermitian_part(&avg(&acc.ri));
    let wo = avg(&acc.wo);
    let n = cfg.ensemble_size as f64;
    Ok(MomentMatrices {
        p_s_opt: trace_product(&rs, &wo).re,
        p_i_opt: trace_product(&ri, &wo).re,
        signal_corr: rs,
        interference_corr: ri,
        autocorr_terms: acc.r.map(|x| hermitian_part(&avg(&x))),
        cross_terms: acc.f.map(|x| avg(&x)),
        min_mse: acc.j.map(|j| j / n),
        input_power: acc.power / n,
        adjacent_input_corr: acc.adjacent.norm() / acc.power,
        adjacent_symbol_corr: acc.symbols / n,
        ensemble_size: cfg.ensemble_size,
    })
}

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    key: String,
    config: MomentConfig,
    dim: usize,
}

type Dump = Vec<[f64; 2]>;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    header: CacheHeader,
    signal_corr: Dump,
    interference_corr: Dump,
    autocorr_terms: [Dump; 3],
    cross_terms: [Dump; 3],
    min_mse: [f64; 3],
    p_s_opt: f64,
    p_i_opt: f64,
    input_power: f64,
    adjacent_input_corr: f64,
    adjacent_symbol_corr: f64,
}

fn dump(a: &CMatrix) -> Dump {
    let m = a.nrows();
    (0..m * m).map(|k| a[(k / m, k % m)]).map(|z| [z.re, z.im]).collect()
}

fn undump(d: &Dump, m: usize) -> Result<CMatrix> {
    if d.len() != m * m {
        return Err(Error::DimensionMismatch { expected: m * m, found: d.len() });
    }
    Ok(DMatrix::from_fn(m, m, |i, j| {
        let [re, im] = d[i * m + j];
        Complex64::new(re, im)
    }))
}

pub fn save_moments(path: &Path, cfg: &MomentConfig, mm: &MomentMatrices) -> Result<()> {
    let file = CacheFile {
        header: CacheHeader {
            format: CACHE_FORMAT.into(),
            key: cfg.cache_key(),
            config: cfg.clone(),
            dim: mm.dim(),
        },
        signal_corr: dump(&mm.signal_corr),
        interference_corr: dump(&mm.interference_corr),
        autocorr_terms: [0, 1, 2].map(|n| dump(&mm.autocorr_terms[n])),
        cross_terms: [0, 1, 2].map(|n| dump(&mm.cross_terms[n])),
        min_mse: mm.min_mse,
        p_s_opt: mm.p_s_opt,
        p_i_opt: mm.p_i_opt,
        input_power: mm.input_power,
        adjacent_input_corr: mm.adjacent_input_corr,
        adjacent_symbol_corr: mm.adjacent_symbol_corr,
    };
    fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

/// Reads a cache file; `Ok(None)` when it was produced by a different configuration.
pub fn load_moments(path: &Path, cfg: &MomentConfig) -> Result<Option<MomentMatrices>> {
    let file: CacheFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.header.format != CACHE_FORMAT || file.header.config != *cfg {
        return Ok(None);
    }
    let m = file.header.dim;
    let autocorr_terms = [
        undump(&file.autocorr_terms[0], m)?,
        undump(&file.autocorr_terms[1], m)?,
        undump(&file.autocorr_terms[2], m)?,
    ];
    let cross_terms = [
        undump(&file.cross_terms[0], m)?,
        undump(&file.cross_terms[1], m)?,
        undump(&file.cross_terms[2], m)?,
    ];
    Ok(Some(MomentMatrices {
        signal_corr: undump(&file.signal_corr, m)?,
        interference_corr: undump(&file.interference_corr, m)?,
        autocorr_terms,
        cross_terms,
        min_mse: file.min_mse,
        p_s_opt: file.p_s_opt,
        p_i_opt: file.p_i_opt,
        input_power: file.input_power,
        adjacent_input_corr: file.adjacent_input_corr,
        adjacent_symbol_corr: file.adjacent_symbol_corr,
        ensemble_size: cfg.ensemble_size,
    }))
}

pub fn cache_path(dir: &Path, cfg: &MomentConfig) -> PathBuf {
    dir.join(format!("{}.json", cfg.cache_key()))
}

/// Loads the estimate for `cfg` from `dir`, computing and storing it on a miss.
pub fn cached_moments(cfg: &MomentConfig, dir: &Path) -> Result<MomentMatrices> {
    let path = cache_path(dir, cfg);
    if path.exists() {
        if let Some(mm) = load_moments(&path, cfg)? {
            return Ok(mm);
        }
    }
    let mm = estimate_moment_matrices(cfg)?;
    fs::create_dir_all(dir)?;
    save_moments(&path, cfg, &mm)?;
    Ok(mm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// All three pairs of a `D = 3` window.
    Bidirectional,
    /// The single adjacent pair.
    Differential,
}

impl Variant {
    fn terms(self) -> usize {
        match self {
            Variant::Bidirectional => 3,
            Variant::Differential => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GInit {
    Identity,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisState {
    /// `K[i] = E[ε εᴴ]`.
    pub weight_err_corr: CMatrix,
    /// `G[i] = E[w_o εᴴ]`.
    pub cross_corr: CMatrix,
    pub step_size: f64,
}

impl AnalysisState {
    /// `K[0] = I`, `G[0]` per `g_init`.
    pub fn new(dim: usize, step_size: f64, g_init: GInit) -> Self {
        let cross_corr = match g_init {
            GInit::Identity => CMatrix::identity(dim, dim),
            GInit::Zero => CMatrix::zeros(dim, dim),
        };
        Self { weight_err_corr: CMatrix::identity(dim, dim), cross_corr, step_size }
    }
}

/// `μ Σ_n (F_n − R_n)` over the pairs of `variant`.
fn bracket(m: &MomentMatrices, variant: Variant, mu: f64) -> CMatrix {
    let dim = m.dim();
    let mut acc = CMatrix::zeros(dim, dim);
    for n in 0..variant.terms() {
        acc += &m.cross_terms[n] - &m.autocorr_terms[n];
    }
    acc * Complex64::new(mu, 0.0)
}

fn check_radius(a: &CMatrix) -> Result<()> {
    let radius = spectral_radius(a);
    if !(radius <= 1.0 + RADIUS_TOLERANCE) {
        return Err(Error::NonContractive { radius });
    }
    Ok(())
}

pub fn k_step(state: &AnalysisState, m: &MomentMatrices, variant: Variant) -> Result<AnalysisState> {
    m.check_dim(state.weight_err_corr.nrows())?;
    let dim = m.dim();
    let mu = state.step_size;
    let b = CMatrix::identity(dim, dim) + bracket(m, variant, mu);
    check_radius(&b)?;
    let mut k = &b * &state.weight_err_corr * b.adjoint();
    for n in 0..variant.terms() {
        k += &m.autocorr_terms[n] * Complex64::new(mu * mu * m.min_mse[n], 0.0);
    }
    Ok(AnalysisState { weight_err_corr: hermitian_part(&k), ..state.clone() })
}

pub fn g_step(state: &AnalysisState, m: &MomentMatrices, variant: Variant) -> Result<AnalysisState> {
    m.check_dim(state.cross_corr.nrows())?;
    let br = bracket(m, variant, state.step_size);
    check_radius(&br)?;
    Ok(AnalysisState { cross_corr: &state.cross_corr * br, ..state.clone() })
}

/// Trace-form SINR of the recursion state, in dB.
pub fn analytical_sinr(state: &AnalysisState, m: &MomentMatrices) -> Result<f64> {
    m.check_dim(state.weight_err_corr.nrows())?;
    let k = &state.weight_err_corr;
    let g = &state.cross_corr;
    let gh = g.adjoint();
    let part = |r: &CMatrix, p: f64| {
        trace_product(k, r).re + trace_product(g, r).re + p + trace_product(&gh, r).re
    };
    let num = part(&m.signal_corr, m.p_s_opt);
    let den = part(&m.interference_corr, m.p_i_opt);
    if !(den > 0.0) {
        return Err(Error::InvalidRegime("non-positive interference term"));
    }
    if !(num > 0.0) {
        return Err(Error::InvalidRegime("non-positive signal term"));
    }
    Ok(10.0 * (num / den).log10())
}

/// `wᴴ R_S w / wᴴ R_I w` in dB.
pub fn sinr_db(w: &CVector, signal: &CMatrix, interference: &CMatrix) -> Result<f64> {
    if w.len() != signal.nrows() {
        return Err(Error::DimensionMismatch { expected: signal.nrows(), found: w.len() });
    }
    if norm_sqr(w) == 0.0 {
        return Err(Error::ZeroFilter);
    }
    let den = quad_form(interference, w);
    if !(den > 0.0) {
        return Err(Error::InvalidRegime("filter sees no interference power"));
    }
    Ok(10.0 * (quad_form(signal, w) / den).log10())
}

pub fn simulated_sinr(w: &CVector, m: &MomentMatrices) -> Result<f64> {
    sinr_db(w, &m.signal_corr, &m.interference_corr)
}

/// Analytical SINR for `len` symbols; entry `i` is evaluated on `K[i]`, `G[i]`.
pub fn analytical_curve(
    m: &MomentMatrices,
    variant: Variant,
    step_size: f64,
    g_init: GInit,
    len: usize,
) -> Result<Vec<f64>> {
    let mut state = AnalysisState::new(m.dim(), step_size, g_init);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        out.push(analytical_sinr(&state, m)?);
        if i + 1 < len {
            state = k_step(&state, m, variant)?;
            state = g_step(&state, m, variant)?;
        }
    }
    Ok(out)
}
