//! Sweep drivers behind the subcommands. Each returns the CSV rows of one
//! point; the caller owns the output file.

use anyhow::{bail, Result};
use hsctc::erasure::{de_block_len, head_tail_thresholds, window_positions, ChannelErasure, ErasureDe, Schedule, TransferFn};
use hsctc::{ChannelParams, CouplingGraph, EnsembleSpec, Rational, StopRule, TrialOutcome, TrialSetup, Trellis};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{ChannelKind, ExperimentConfig, TraceEnd};

pub fn pool(jobs: usize) -> Result<ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

pub fn channel_params(kind: ChannelKind, x: f64) -> ChannelParams {
    match kind {
        ChannelKind::Awgn => ChannelParams::Awgn { ebn0_db: x },
        ChannelKind::Bec => ChannelParams::Bec { eps: x },
    }
}

pub fn trial_setup(cfg: &ExperimentConfig) -> TrialSetup {
    TrialSetup { spec: cfg.spec.clone(), rate: cfg.rate, window: cfg.window.clone(), fresh_interleavers: cfg.fresh_interleavers }
}

/// Runs trials `0, 1, ...` until `budget` trials or `target` failures,
/// evaluating batches in parallel. Results are consumed in trial order and
/// cut at the exact trial that reaches the target, so the outcome does not
/// depend on the thread count.
pub fn run_until(
    pool: &ThreadPool,
    budget: usize,
    target: usize,
    trial: impl Fn(u64) -> hsctc::Result<TrialOutcome> + Sync,
    failed: impl Fn(&TrialOutcome) -> bool,
) -> Result<Vec<TrialOutcome>> {
    let batch = 4 * pool.current_num_threads().max(1);
    let mut out = Vec::new();
    let mut failures = 0;
    let mut next = 0usize;
    while next < budget && failures < target {
        let end = (next + batch).min(budget);
        let results: Vec<_> = pool.install(|| (next..end).into_par_iter().map(|t| trial(t as u64)).collect::<Vec<_>>());
        for r in results {
            let o = r?;
            failures += usize::from(failed(&o));
            out.push(o);
            if failures >= target {
                break;
            }
        }
        next = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub bit_errors: usize,
    pub bits: usize,
    pub frame_errors: usize,
    pub frames: usize,
    pub latency: u64,
    pub mean_iters: f64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    pub fn fer(&self) -> f64 {
        self.frame_errors as f64 / self.frames as f64
    }
}

/// BER of one channel point. Only completed frames count.
pub fn ber_point(pool: &ThreadPool, setup: &TrialSetup, ch: ChannelParams, seed: u64, budget: usize, target: usize) -> Result<BerPoint> {
    let runs = run_until(pool, budget, target, |t| setup.run_trial(ch, seed, t, false), |o| o.bit_errors > 0)?;
    let windows: usize = runs.iter().map(|o| o.iterations.len()).sum();
    let iters: usize = runs.iter().flat_map(|o| &o.iterations).sum();
    Ok(BerPoint {
        bit_errors: runs.iter().map(|o| o.bit_errors).sum(),
        bits: runs.iter().map(|o| o.bits).sum(),
        frame_errors: runs.iter().filter(|o| o.bit_errors > 0).count(),
        frames: runs.len(),
        latency: runs.first().map_or(0, |o| o.latency),
        mean_iters: iters as f64 / windows.max(1) as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WderPoint {
    pub window_errors: usize,
    pub trials: usize,
    pub successes: usize,
    pub mean_iters: f64,
}

/// First-window error rate with fixed iterations and the mean iteration at
/// which successful attempts first became correct.
pub fn wder_point(pool: &ThreadPool, setup: &TrialSetup, ch: ChannelParams, seed: u64, budget: usize, target: usize) -> Result<WderPoint> {
    let mut setup = setup.clone();
    setup.window.stop = StopRule::FixedIters;
    let runs = run_until(pool, budget, target, |t| setup.run_trial(ch, seed, t, true), |o| o.first_window_error)?;
    let samples: Vec<usize> = runs.iter().filter_map(|o| o.genie_iterations).collect();
    Ok(WderPoint {
        window_errors: runs.iter().filter(|o| o.first_window_error).count(),
        trials: runs.len(),
        successes: samples.len(),
        mean_iters: if samples.is_empty() { f64::NAN } else { samples.iter().sum::<usize>() as f64 / samples.len() as f64 },
    })
}

/// One threshold computation of a sweep.
#[derive(Debug, Clone)]
pub struct ThresholdPoint {
    pub spec: EnsembleSpec,
    pub lambda1: Option<f64>,
    pub rate: Rational,
}

pub fn threshold_points(cfg: &ExperimentConfig) -> Vec<ThresholdPoint> {
    let rates = &cfg.threshold.rates;
    if cfg.threshold.lambda1.is_empty() {
        return rates.iter().map(|&rate| ThresholdPoint { spec: cfg.spec.clone(), lambda1: None, rate }).collect();
    }
    let mut out = Vec::new();
    for &l in &cfg.threshold.lambda1 {
        let spec = EnsembleSpec::single_sided(cfg.spec.generator.clone(), vec![1.0 - l, l], cfg.spec.coupling_length, cfg.spec.block_len);
        out.extend(rates.iter().map(|&rate| ThresholdPoint { spec: spec.clone(), lambda1: Some(l), rate }));
    }
    out
}

pub const THRESHOLD_COLUMNS: &[&str] =
    &["point", "kind", "generator", "coupling", "lambda1", "rate", "eps_h", "eps_t", "eps_bp_full", "eps_bp_window", "mode", "precision"];

pub fn threshold_row(cfg: &ExperimentConfig, index: usize, p: &ThresholdPoint) -> Result<Vec<String>> {
    let r = head_tail_thresholds(&p.spec, p.rate, &cfg.threshold.cfg)?;
    Ok(vec![
        index.to_string(),
        p.spec.kind.to_string(),
        p.spec.generator.label.clone(),
        p.spec.coupling.to_string(),
        p.lambda1.map(|l| l.to_string()).unwrap_or_default(),
        p.rate.to_string(),
        format!("{:.6}", r.eps_h),
        format!("{:.6}", r.eps_t),
        format!("{:.6}", r.eps_bp_full),
        format!("{:.6}", r.eps_bp_window),
        match r.mode {
            hsctc::erasure::TransferMode::ExactSubset => "exact".to_string(),
            hsctc::erasure::TransferMode::MonteCarlo { samples, seed } => format!("mc:{samples}:{seed}"),
        },
        format!("{:e}", r.precision),
    ])
}

pub const DE_TRACE_COLUMNS: &[&str] = &["point", "eps", "end", "iteration", "position", "app", "converged"];

/// Per-iteration a-posteriori erasure of every position at one `eps`.
pub fn de_trace_rows(cfg: &ExperimentConfig, index: usize, eps: f64) -> Result<Vec<Vec<String>>> {
    let spec = cfg.spec.with_length(cfg.spec.coupling_length, de_block_len(&cfg.spec));
    let graph = CouplingGraph::build(&spec)?;
    let transfer = TransferFn::new(&Trellis::new(&spec.generator)?, cfg.threshold.cfg.mode)?;
    let de = ErasureDe::new(&graph, &transfer)?;
    let w = window_positions(&spec, cfg.threshold.cfg.window);
    let schedule = match cfg.threshold.end {
        TraceEnd::Full => Schedule::Full,
        TraceEnd::Head => Schedule::Window(w),
        TraceEnd::Tail => Schedule::TailWindow(w),
    };
    let ch = match cfg.rate {
        Some(r) => ChannelErasure { eps, eps_v: hsctc::erasure::punctured_parity_erasure(eps, r)? },
        None => ChannelErasure::unpunctured(eps),
    };
    let run = de.run(ch, schedule, cfg.threshold.cfg.max_iters, cfg.threshold.cfg.tol, true)?;
    let mut rows = Vec::new();
    for (it, app) in run.trajectory.iter().enumerate() {
        for (pos, a) in app.iter().enumerate() {
            rows.push(vec![
                index.to_string(),
                eps.to_string(),
                cfg.threshold.end.to_string(),
                (it + 1).to_string(),
                (pos + 1).to_string(),
                format!("{a:.9e}"),
                run.converged.to_string(),
            ]);
        }
    }
    Ok(rows)
}

pub const BER_COLUMNS: &[&str] =
    &["point", "channel", "param", "ber", "fer", "bit_errors", "frame_errors", "frames", "bits_simulated", "latency", "mean_iters"];

pub fn ber_row(cfg: &ExperimentConfig, index: usize, x: f64, p: &BerPoint) -> Vec<String> {
    vec![
        index.to_string(),
        cfg.channel.to_string(),
        x.to_string(),
        format!("{:.6e}", p.ber()),
        format!("{:.6e}", p.fer()),
        p.bit_errors.to_string(),
        p.frame_errors.to_string(),
        p.frames.to_string(),
        p.bits.to_string(),
        p.latency.to_string(),
        format!("{:.4}", p.mean_iters),
    ]
}

pub const WDER_COLUMNS: &[&str] = &["point", "channel", "param", "schedule", "wder", "window_errors", "trials", "successes", "mean_iters"];

pub fn wder_row(cfg: &ExperimentConfig, index: usize, x: f64, p: &WderPoint) -> Vec<String> {
    vec![
        index.to_string(),
        cfg.channel.to_string(),
        x.to_string(),
        cfg.window.sweep.to_string(),
        format!("{:.6e}", p.window_errors as f64 / p.trials as f64),
        p.window_errors.to_string(),
        p.trials.to_string(),
        p.successes.to_string(),
        format!("{:.4}", p.mean_iters),
    ]
}

pub fn require_bec(cfg: &ExperimentConfig, what: &str) -> Result<()> {
    if cfg.channel != ChannelKind::Bec {
        bail!("[channel] kind: {what} needs kind = bec");
    }
    Ok(())
}
