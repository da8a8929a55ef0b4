//! Experiment configuration: a flat `key = value` text format.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated. Each entry of
//! `algorithms` may carry its own parameter overrides, e.g. `rls(lambda_rls=0.95, delta=0.1)`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::GInit;
use crate::cdma::Modulation;
use crate::error::{Error, Result};
use crate::scenario::{ChannelKind, ScenarioConfig};

/// `(key, default, description)` for every recognized key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("users", "5", "number of users K"),
    ("gain", "16", "processing gain N (chips per symbol)"),
    ("paths", "3", "multipath taps L, uniform power profile"),
    ("snr_db", "15", "SNR grid in dB (list)"),
    ("fading_grid", "0.001, 0.002, 0.005, 0.01, 0.02", "normalized Doppler grid f_d*T_s (list)"),
    ("packet_len", "1000", "symbols per packet"),
    ("train_len", "200", "training symbols at the start of each packet"),
    ("packets", "100", "packets N_p per grid point"),
    ("algorithms", "mmse, rls, diff-cg, bidir-cg-eq, bidir-cg", "receivers to run (list)"),
    ("mu", "0.05", "NLMS step size"),
    ("lambda_e", "0.9", "mixing-factor forgetting factor"),
    ("lambda_m", "0.9", "NLMS input-power forgetting factor"),
    ("lambda_cg", "0.998", "CG correlation forgetting factor"),
    ("jmax", "5", "CG iterations per symbol"),
    ("lambda_rls", "0.99", "RLS forgetting factor"),
    ("delta", "0.01", "RLS/CG regularization"),
    ("cg_constraint", "true", "rescale CG filters to unit output power"),
    ("paper_literal_t1", "false", "use the printed t1 recursion (seeded from t3)"),
    ("isi", "true", "include inter-symbol interference"),
    ("channel", "rayleigh", "rayleigh or awgn"),
    ("seed", "1", "master seed"),
    ("ensemble", "10000", "ensemble size for moment matrices"),
    ("g0", "identity", "initial G of the analytical recursion: identity or zero"),
    ("cache_dir", "", "directory for cached moment matrices (empty disables)"),
    ("samples", "100000", "channel-stats sequence length"),
    ("max_lag", "5", "channel-stats largest lag"),
];

const ALGORITHM_KEYS: &[&str] =
    &["mu", "lambda_e", "lambda_m", "lambda_cg", "jmax", "lambda_rls", "delta", "cg_constraint", "paper_literal_t1", "mode"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    /// Per-symbol MMSE filter from the true statistics.
    Mmse,
    /// Fixed filter matched to the desired user's code.
    MatchedFilter,
    Nlms,
    Rls,
    DiffNlms,
    BidirNlms,
    BidirNlmsEq,
    DiffCg,
    BidirCg,
    BidirCgEq,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 10] = [
        AlgorithmKind::Mmse,
        AlgorithmKind::MatchedFilter,
        AlgorithmKind::Nlms,
        AlgorithmKind::Rls,
        AlgorithmKind::DiffNlms,
        AlgorithmKind::BidirNlms,
        AlgorithmKind::BidirNlmsEq,
        AlgorithmKind::DiffCg,
        AlgorithmKind::BidirCg,
        AlgorithmKind::BidirCgEq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Mmse => "mmse",
            AlgorithmKind::MatchedFilter => "mf",
            AlgorithmKind::Nlms => "nlms",
            AlgorithmKind::Rls => "rls",
            AlgorithmKind::DiffNlms => "diff-nlms",
            AlgorithmKind::BidirNlms => "bidir-nlms",
            AlgorithmKind::BidirNlmsEq => "bidir-nlms-eq",
            AlgorithmKind::DiffCg => "diff-cg",
            AlgorithmKind::BidirCg => "bidir-cg",
            AlgorithmKind::BidirCgEq => "bidir-cg-eq",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownAlgorithm(name.to_string()))
    }

    /// Receivers built on cross-instant pair errors only work with differential symbols.
    pub fn is_pairwise(self) -> bool {
        !matches!(self, AlgorithmKind::Mmse | AlgorithmKind::MatchedFilter | AlgorithmKind::Nlms | AlgorithmKind::Rls)
    }

    pub fn default_mode(self) -> Modulation {
        if self.is_pairwise() {
            Modulation::Differential
        } else {
            Modulation::Coherent
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub mu: f64,
    pub lambda_e: f64,
    pub lambda_m: f64,
    pub lambda_cg: f64,
    pub jmax: usize,
    pub lambda_rls: f64,
    pub delta: f64,
    pub cg_constraint: bool,
    pub literal_t1: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    /// Name as written in the config, used as the CSV `algorithm` field.
    pub label: String,
    pub kind: AlgorithmKind,
    pub params: AlgorithmParams,
    pub mode: Modulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub users: usize,
    pub gain: usize,
    pub paths: usize,
    pub snr_db: Vec<f64>,
    pub fading_grid: Vec<f64>,
    pub packet_len: usize,
    pub train_len: usize,
    pub packets: usize,
    pub algorithms: Vec<AlgorithmSpec>,
    pub isi: bool,
    pub channel: ChannelKind,
    pub seed: u64,
    pub ensemble: usize,
    pub g0: GInit,
    pub cache_dir: Option<PathBuf>,
    pub samples: usize,
    pub max_lag: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_pairs(&BTreeMap::new()).expect("defaults are valid")
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse `{}` for `{key}`", raw.trim())))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::InvalidConfig(format!("cannot parse `{other}` for `{key}`"))),
    }
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_value(key, s)).collect()
}

/// Splits on commas outside parentheses.
fn split_top_level(raw: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in raw.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(Error::InvalidConfig(format!("unbalanced parentheses in `{raw}`")));
        }
        if ch == ',' && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    if depth != 0 {
        return Err(Error::InvalidConfig(format!("unbalanced parentheses in `{raw}`")));
    }
    out.push(cur);
    Ok(out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
}

fn set_param(p: &mut AlgorithmParams, key: &str, raw: &str) -> Result<()> {
    match key {
        "mu" => p.mu = parse_value(key, raw)?,
        "lambda_e" => p.lambda_e = parse_value(key, raw)?,
        "lambda_m" => p.lambda_m = parse_value(key, raw)?,
        "lambda_cg" => p.lambda_cg = parse_value(key, raw)?,
        "jmax" => p.jmax = parse_value(key, raw)?,
        "lambda_rls" => p.lambda_rls = parse_value(key, raw)?,
        "delta" => p.delta = parse_value(key, raw)?,
        "cg_constraint" => p.cg_constraint = parse_bool(key, raw)?,
        "paper_literal_t1" => p.literal_t1 = parse_bool(key, raw)?,
        _ => return Err(Error::InvalidConfig(format!("`{key}` is not an algorithm parameter"))),
    }
    Ok(())
}

fn parse_mode(raw: &str) -> Result<Modulation> {
    match raw.trim() {
        "coherent" => Ok(Modulation::Coherent),
        "differential" => Ok(Modulation::Differential),
        other => Err(Error::InvalidConfig(format!("unknown modulation mode `{other}`"))),
    }
}

fn parse_algorithm(entry: &str, base: &AlgorithmParams) -> Result<AlgorithmSpec> {
    let (name, args) = match entry.find('(') {
        Some(open) => {
            let close = entry.rfind(')').filter(|&c| c == entry.len() - 1).ok_or_else(|| {
                Error::InvalidConfig(format!("malformed algorithm entry `{entry}`"))
            })?;
            (entry[..open].trim(), Some(&entry[open + 1..close]))
        }
        None => (entry.trim(), None),
    };
    let kind = AlgorithmKind::parse(name)?;
    let mut params = base.clone();
    let mut mode = kind.default_mode();
    let mut label = name.to_string();
    if let Some(args) = args {
        let mut shown = Vec::new();
        for item in args.split([',', ';']).map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value in `{item}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !ALGORITHM_KEYS.contains(&k) {
                return Err(Error::InvalidConfig(format!("`{k}` is not an algorithm parameter")));
            }
            if k == "mode" {
                mode = parse_mode(v)?;
            } else {
                set_param(&mut params, k, v)?;
            }
            shown.push(format!("{k}={v}"));
        }
        if !shown.is_empty() {
            label = format!("{name}({})", shown.join(";"));
        }
    }
    if kind.is_pairwise() && mode == Modulation::Coherent {
        return Err(Error::InvalidConfig(format!("{name} needs differential modulation")));
    }
    Ok(AlgorithmSpec { label, kind, params, mode })
}

/// Parses `key = value` lines into a map; later lines win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::ConfigParse { line: n + 1, msg: format!("expected `key = value`, got `{line}`") })?;
        let k = k.trim();
        if !KEYS.iter().any(|(name, _, _)| *name == k) {
            return Err(Error::ConfigParse { line: n + 1, msg: format!("unknown key `{k}`") });
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Builds a config from explicit values, falling back to defaults for missing keys.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        for k in pairs.keys() {
            if !KEYS.iter().any(|(name, _, _)| name == k) {
                return Err(Error::InvalidConfig(format!("unknown key `{k}`")));
            }
        }
        let get = |key: &str| -> &str {
            pairs
                .get(key)
                .map(String::as_str)
                .unwrap_or_else(|| KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d).unwrap())
        };
        let mut base = AlgorithmParams {
            mu: 0.0,
            lambda_e: 0.0,
            lambda_m: 0.0,
            lambda_cg: 0.0,
            jmax: 0,
            lambda_rls: 0.0,
            delta: 0.0,
            cg_constraint: false,
            literal_t1: false,
        };
        for key in ALGORITHM_KEYS.iter().filter(|k| **k != "mode") {
            set_param(&mut base, key, get(key))?;
        }
        let algorithms = split_top_level(get("algorithms"))?
            .iter()
            .map(|e| parse_algorithm(e, &base))
            .collect::<Result<Vec<_>>>()?;
        let channel = match get("channel").trim() {
            "rayleigh" => ChannelKind::Rayleigh,
            "awgn" => ChannelKind::Awgn,
            other => return Err(Error::InvalidConfig(format!("unknown channel `{other}`"))),
        };
        let g0 = match get("g0").trim() {
            "identity" => GInit::Identity,
            "zero" => GInit::Zero,
            other => return Err(Error::InvalidConfig(format!("unknown g0 `{other}`"))),
        };
        let cache_dir = Some(get("cache_dir").trim()).filter(|s| !s.is_empty()).map(PathBuf::from);
        let cfg = Self {
            users: parse_value("users", get("users"))?,
            gain: parse_value("gain", get("gain"))?,
            paths: parse_value("paths", get("paths"))?,
            snr_db: parse_list("snr_db", get("snr_db"))?,
            fading_grid: parse_list("fading_grid", get("fading_grid"))?,
            packet_len: parse_value("packet_len", get("packet_len"))?,
            train_len: parse_value("train_len", get("train_len"))?,
            packets: parse_value("packets", get("packets"))?,
            algorithms,
            isi: parse_bool("isi", get("isi"))?,
            channel,
            seed: parse_value("seed", get("seed"))?,
            ensemble: parse_value("ensemble", get("ensemble"))?,
            g0,
            cache_dir,
            samples: parse_value("samples", get("samples"))?,
            max_lag: parse_value("max_lag", get("max_lag"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_len > self.packet_len {
            return Err(Error::InvalidConfig(format!(
                "train_len {} exceeds packet_len {}",
                self.train_len, self.packet_len
            )));
        }
        if self.packets == 0 {
            return Err(Error::InvalidConfig("packets must be at least 1".into()));
        }
        if self.packet_len == 0 {
            return Err(Error::ZeroLength);
        }
        if self.snr_db.is_empty() || self.fading_grid.is_empty() {
            return Err(Error::InvalidConfig("grids must be nonempty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms selected".into()));
        }
        for a in &self.algorithms {
            let p = &a.params;
            if !(p.mu >= 0.0) || !(p.delta > 0.0) {
                return Err(Error::InvalidConfig(format!("{}: mu must be >= 0 and delta > 0", a.label)));
            }
            for (name, v) in [("lambda_e", p.lambda_e), ("lambda_m", p.lambda_m)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidConfig(format!("{}: {name} outside [0, 1]", a.label)));
                }
            }
            for (name, v) in [("lambda_cg", p.lambda_cg), ("lambda_rls", p.lambda_rls)] {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::InvalidConfig(format!("{}: {name} outside (0, 1]", a.label)));
                }
            }
        }
        self.scenario(self.snr_db[0], self.fading_grid[0]).validate()
    }

    pub fn scenario(&self, snr_db: f64, normalized_doppler: f64) -> ScenarioConfig {
        ScenarioConfig {
            users: self.users,
            gain: self.gain,
            paths: self.paths,
            snr_db,
            normalized_doppler,
            isi: self.isi,
            channel: self.channel,
        }
    }
}
