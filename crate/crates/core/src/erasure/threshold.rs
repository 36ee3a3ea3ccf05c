//! Head, tail and BP thresholds by bisection on the channel erasure
//! probability.

use super::de::{ChannelErasure, ErasureDe, Schedule};
use super::transfer::{TransferFn, TransferMode, MIN_MC_SAMPLES};
use crate::ensemble::{retained_fraction, CouplingGraph, EnsembleKind, EnsembleSpec, Rational};
use crate::error::{Error, Result};
use crate::trellis::{GeneratorSpec, Trellis};

/// `eps_v = (1 - rho) + rho * eps`: a punctured parity bit is an erasure.
pub fn punctured_parity_erasure(eps: f64, rate: Rational) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidProbability(eps));
    }
    let rho = retained_fraction(rate)?;
    let rho = *rho.numer() as f64 / *rho.denom() as f64;
    Ok((1.0 - rho) + rho * eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdConfig {
    pub mode: TransferMode,
    /// Window in full time instants; `None` means `10 m`.
    pub window: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub precision: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { mode: TransferMode::ExactSubset, window: None, max_iters: 4000, tol: 1e-6, precision: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub eps_h: f64,
    pub eps_t: f64,
    pub eps_bp_full: f64,
    pub eps_bp_window: f64,
    pub precision: f64,
    pub mode: TransferMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainEnd {
    Head,
    Tail,
}

/// Trellis length used for DE graphs: any value that makes every segment
/// fraction exact works.
pub fn de_block_len(spec: &EnsembleSpec) -> usize {
    let m = spec.coupling_memory().max(1);
    match spec.kind {
        EnsembleKind::SingleSidedScPcc => 1000 * (m + 1),
        _ => 2 * m * (m + 1) * (m + 1),
    }
}

/// Window size in native positions.
pub fn window_positions(spec: &EnsembleSpec, window: Option<usize>) -> usize {
    let w = window.unwrap_or(10 * spec.coupling_memory().max(1));
    if spec.kind.is_folded() {
        2 * w
    } else {
        w
    }
}

fn check_mode(mode: TransferMode) -> Result<()> {
    match mode {
        TransferMode::MonteCarlo { samples, .. } if samples < MIN_MC_SAMPLES => {
            Err(Error::SampleSizeTooSmall(samples, MIN_MC_SAMPLES))
        }
        _ => Ok(()),
    }
}

/// Threshold of one chain end. A probe converges when the end block's
/// a-posteriori erasure falls below `tol` while only the `w` positions next
/// to that end are updated.
pub fn end_threshold(spec: &EnsembleSpec, rate: Rational, cfg: &ThresholdConfig, end: ChainEnd, transfer: &TransferFn) -> Result<f64> {
    check_mode(cfg.mode)?;
    let w_inst = cfg.window.unwrap_or(10 * spec.coupling_memory().max(1));
    let m = spec.coupling_memory().max(spec.coupling);
    let chain = spec.with_length(w_inst + 2 * m + 2, de_block_len(spec));
    let graph = CouplingGraph::build(&chain)?;
    let de = ErasureDe::new(&graph, transfer)?;
    let w = window_positions(spec, cfg.window);
    let schedule = match end {
        ChainEnd::Head => Schedule::Window(w),
        ChainEnd::Tail => Schedule::TailWindow(w),
    };
    let converges = |eps: f64| -> Result<bool> {
        let ch = ChannelErasure { eps, eps_v: punctured_parity_erasure(eps, rate)? };
        Ok(de.run(ch, schedule, cfg.max_iters, cfg.tol, false)?.converged)
    };
    bisect(converges, cfg.precision)
}

/// Largest converging value in `[0, 1]` assuming monotonicity.
pub fn bisect(mut converges: impl FnMut(f64) -> Result<bool>, precision: f64) -> Result<f64> {
    if !converges(0.0)? {
        return Err(Error::BracketFailure);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if converges(hi)? {
        return Ok(hi);
    }
    while hi - lo > precision {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn head_tail_thresholds_with(spec: &EnsembleSpec, rate: Rational, cfg: &ThresholdConfig, transfer: &TransferFn) -> Result<ThresholdResult> {
    let eps_h = end_threshold(spec, rate, cfg, ChainEnd::Head, transfer)?;
    let eps_t = end_threshold(spec, rate, cfg, ChainEnd::Tail, transfer)?;
    Ok(ThresholdResult {
        eps_h,
        eps_t,
        eps_bp_full: eps_h.max(eps_t),
        eps_bp_window: eps_h,
        precision: cfg.precision,
        mode: cfg.mode,
    })
}

pub fn head_tail_thresholds(spec: &EnsembleSpec, rate: Rational, cfg: &ThresholdConfig) -> Result<ThresholdResult> {
    let transfer = TransferFn::new(&Trellis::new(&spec.generator)?, cfg.mode)?;
    head_tail_thresholds_with(spec, rate, cfg, &transfer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub lambda1: f64,
    pub rate: Rational,
    pub result: ThresholdResult,
}

/// BP thresholds of single-sided SC-PCC (`m = 1`) for each `lambda_1` and
/// rate.
pub fn lambda_sweep_thresholds(g: &GeneratorSpec, lambda1: &[f64], rates: &[Rational], cfg: &ThresholdConfig) -> Result<Vec<LambdaRow>> {
    let transfer = TransferFn::new(&Trellis::new(g)?, cfg.mode)?;
    let mut rows = Vec::new();
    for &l in lambda1 {
        if !(0.0..=0.5).contains(&l) {
            return Err(Error::InvalidConfig(format!("lambda_1 = {l} outside [0, 0.5]")));
        }
        let spec = EnsembleSpec::single_sided(g.clone(), vec![1.0 - l, l], 10, 1000);
        for &rate in rates {
            let result = head_tail_thresholds_with(&spec, rate, cfg, &transfer)?;
            rows.push(LambdaRow { lambda1: l, rate, result });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncoupledKind {
    /// Parallel concatenation of two rate-1/2 codes.
    Pcc,
    /// Braided block code of two rate-2/3 codes.
    Bcc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    pub eps: f64,
    /// The coupled ensemble whose BP threshold stands in for MAP.
    pub coupled: EnsembleSpec,
    pub method: &'static str,
}

pub const SATURATION_LABEL: &str = "approximation via saturation";

/// Estimates the MAP threshold of an uncoupled ensemble by the full BP
/// threshold of a strongly coupled relative: HSC-BCC with the delay factor
/// giving the best threshold up to `max_delta`, or single-sided SC-PCC with
/// `lambda_1 = 0.5`.
pub fn saturated_map_estimate(kind: UncoupledKind, g: &GeneratorSpec, rate: Rational, max_delta: usize, cfg: &ThresholdConfig) -> Result<MapEstimate> {
    let transfer = TransferFn::new(&Trellis::new(g)?, cfg.mode)?;
    match kind {
        UncoupledKind::Pcc => {
            let spec = EnsembleSpec::single_sided(g.clone(), vec![0.5, 0.5], 10, 1000);
            let r = head_tail_thresholds_with(&spec, rate, cfg, &transfer)?;
            Ok(MapEstimate { eps: r.eps_bp_full, coupled: spec, method: SATURATION_LABEL })
        }
        UncoupledKind::Bcc => {
            let mut best: Option<MapEstimate> = None;
            for delta in 2..=max_delta.max(2) {
                let spec = EnsembleSpec::hsc_bcc(g.clone(), delta, 2 * delta, 8);
                let r = head_tail_thresholds_with(&spec, rate, cfg, &transfer)?;
                if best.as_ref().map_or(true, |b| r.eps_bp_full > b.eps) {
                    best = Some(MapEstimate { eps: r.eps_bp_full, coupled: spec, method: SATURATION_LABEL });
                }
            }
            Ok(best.expect("at least one delay factor"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_erasure_formula() {
        let r = |n, d| Rational::new(n, d);
        assert_eq!(punctured_parity_erasure(0.3, r(1, 3)).unwrap(), 0.3);
        assert!((punctured_parity_erasure(0.4, r(1, 2)).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(punctured_parity_erasure(1.0, r(9, 10)).unwrap(), 1.0);
        assert!(punctured_parity_erasure(0.4, r(1, 5)).is_err());
    }

    #[test]
    fn bisection_finds_step() {
        let t = bisect(|x| Ok(x <= 0.4321), 1e-6).unwrap();
        assert!((t - 0.4321).abs() < 1e-6);
        assert!(matches!(bisect(|_| Ok(false), 1e-3), Err(Error::BracketFailure)));
    }

    #[test]
    fn small_mc_rejected() {
        let cfg = ThresholdConfig { mode: TransferMode::MonteCarlo { samples: 100, seed: 1 }, ..Default::default() };
        let spec = EnsembleSpec::type1(GeneratorSpec::g457(), 10, 8);
        assert!(matches!(
            head_tail_thresholds(&spec, Rational::new(1, 3), &cfg),
            Err(Error::SampleSizeTooSmall(100, _))
        ));
    }
}
