//! Receivers as per-symbol state machines driven by the experiment loop.

use crate::cdma::{InstantStatistics, ReceivedVector};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CVector};
use crate::receivers::{
    bidir_cg_step, bidir_nlms_step, compute_pair_errors, conventional_nlms_step, conventional_rls_step,
    differential_nlms_step, mmse_oracle_loaded, update_mixing, CgState, FilterState, History, MixingState,
    RlsState,
};

use super::config::{AlgorithmKind, AlgorithmSpec};

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Engine {
    Oracle(CVector),
    Fixed(CVector),
    Nlms { fs: FilterState, started: bool },
    Rls(RlsState),
    PairNlms { fs: FilterState, started: bool, mix: MixingState, adaptive: bool, hist: History },
    PairCg { cs: CgState, mix: MixingState, adaptive: bool, hist: History },
}

#[derive(Debug, Clone)]
pub struct Receiver {
    engine: Engine,
}

impl Receiver {
    /// A receiver starting from `w0`, typically the desired user's code.
    pub fn new(spec: &AlgorithmSpec, w0: CVector) -> Result<Self> {
        let p = &spec.params;
        let nlms = || FilterState::new(w0.clone(), 1.0, p.mu, p.lambda_m);
        let cg = |d_weights: MixingState, adaptive: bool| -> Result<Engine> {
            let mut cs = CgState::new(w0.clone(), p.delta, p.lambda_cg, p.jmax)?;
            cs.constraint = p.cg_constraint;
            cs.literal_t1 = p.literal_t1;
            Ok(Engine::PairCg { cs, mix: d_weights, adaptive, hist: History::new(3) })
        };
        let engine = match spec.kind {
            AlgorithmKind::Mmse => Engine::Oracle(w0),
            AlgorithmKind::MatchedFilter => Engine::Fixed(w0),
            AlgorithmKind::Nlms => Engine::Nlms { fs: nlms()?, started: false },
            AlgorithmKind::Rls => Engine::Rls(RlsState::new(w0, p.delta, p.lambda_rls)?),
            AlgorithmKind::DiffNlms => Engine::PairNlms {
                fs: nlms()?,
                started: false,
                mix: MixingState::fixed(vec![1.0]),
                adaptive: false,
                hist: History::new(2),
            },
            AlgorithmKind::BidirNlms | AlgorithmKind::BidirNlmsEq => {
                let adaptive = spec.kind == AlgorithmKind::BidirNlms;
                Engine::PairNlms {
                    fs: nlms()?,
                    started: false,
                    mix: MixingState::uniform(3, p.lambda_e),
                    adaptive,
                    hist: History::new(3),
                }
            }
            AlgorithmKind::DiffCg => cg(MixingState::fixed(vec![1.0, 0.0, 0.0]), false)?,
            AlgorithmKind::BidirCg => cg(MixingState::uniform(3, p.lambda_e), true)?,
            AlgorithmKind::BidirCgEq => cg(MixingState::uniform(3, 1.0), false)?,
        };
        Ok(Self { engine })
    }

    pub fn weights(&self) -> &CVector {
        match &self.engine {
            Engine::Oracle(w) | Engine::Fixed(w) => w,
            Engine::Nlms { fs, .. } | Engine::PairNlms { fs, .. } => &fs.weights,
            Engine::Rls(s) => &s.weights,
            Engine::PairCg { cs, .. } => &cs.weights,
        }
    }

    /// Current mixing weights, if the receiver has any.
    pub fn mixing(&self) -> Option<&[f64]> {
        match &self.engine {
            Engine::PairNlms { mix, .. } | Engine::PairCg { mix, .. } => Some(&mix.weights),
            _ => None,
        }
    }

    /// Whether [`Receiver::prepare`] needs the true statistics of the coming symbol.
    pub fn needs_statistics(&self) -> bool {
        matches!(self.engine, Engine::Oracle(_))
    }

    /// Hook before the filter output for symbol `i` is formed.
    pub fn prepare(&mut self, stats: &InstantStatistics) -> Result<()> {
        if let Engine::Oracle(w) = &mut self.engine {
            *w = mmse_oracle_loaded(&stats.total_covariance(), &stats.desired)?;
        }
        Ok(())
    }

    /// Adapts on `r[i]` with reference symbol `b[i]` (known or decided).
    pub fn update(&mut self, r: &ReceivedVector, reference: f64) -> Result<()> {
        if r.samples.len() != self.weights().len() {
            return Err(Error::DimensionMismatch { expected: self.weights().len(), found: r.samples.len() });
        }
        match &mut self.engine {
            Engine::Oracle(_) | Engine::Fixed(_) => {}
            Engine::Nlms { fs, started } => {
                start_power(fs, started, norm_sqr(&r.samples));
                *fs = conventional_nlms_step(fs, r, reference)?;
            }
            Engine::Rls(s) => *s = conventional_rls_step(s, r, reference)?,
            Engine::PairNlms { fs, started, mix, adaptive, hist } => {
                hist.push(r.samples.clone(), reference);
                if hist.is_full() {
                    start_power(fs, started, norm_sqr(&r.samples));
                    if *adaptive {
                        *mix = update_mixing(mix, &compute_pair_errors(&fs.weights, hist, 3)?);
                    }
                    *fs = if mix.weights.len() == 1 { differential_nlms_step(fs, hist)? } else { bidir_nlms_step(fs, mix, hist)? };
                }
            }
            Engine::PairCg { cs, mix, adaptive, hist } => {
                hist.push(r.samples.clone(), reference);
                if hist.is_full() {
                    if *adaptive {
                        *mix = update_mixing(mix, &compute_pair_errors(&cs.weights, hist, 3)?);
                    }
                    *cs = bidir_cg_step(cs, mix, hist)?;
                }
            }
        }
        Ok(())
    }
}

fn start_power(fs: &mut FilterState, started: &mut bool, energy: f64) {
    if !*started {
        if energy > 0.0 {
            fs.power_norm = energy;
        }
        *started = true;
    }
}
