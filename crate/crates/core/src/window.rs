//! Sliding-window iterative decoding of a coupled chain.
//!
//! The decoder is generic over the message domain: LLRs with the BCJR
//! decoder for AWGN, or known/erased flags with the subset decoder for the
//! erasure channel. Every attachment of a piece to a factor port keeps its
//! own extrinsic message; a port's a-priori input is the channel message
//! combined with the messages of the piece's other attachments.

use std::sync::Arc;

use rand::RngCore;

use crate::bcjr::{BcjrDecoder, MaxStar};
use crate::channel::{awgn_llrs, bec_known, ebn0_to_sigma2, stream_rng};
use crate::ensemble::{ChainEncoder, CoupledFrame, CouplingGraph, EnsembleSpec, InterleaverSet, PortLayout, Rational};
use crate::erasure::SubsetTables;
use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Decision value of a bit the erasure decoder could not recover.
pub const ERASED: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Forward then backward over the window's factor nodes.
    RoundTrip,
    /// Two forward passes.
    DoubleForward,
}

impl std::str::FromStr for Sweep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rt" | "round-trip" => Ok(Sweep::RoundTrip),
            "ff" | "double-forward" => Ok(Sweep::DoubleForward),
            _ => Err(Error::InvalidConfig(format!("unknown schedule {s:?} (expected rt or ff)"))),
        }
    }
}

impl std::fmt::Display for Sweep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sweep::RoundTrip => "rt",
            Sweep::DoubleForward => "ff",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    FixedIters,
    /// Stop a window once its emitted blocks match the truth.
    GenieAided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    /// Window size in time instants. A folded chain has two positions per
    /// instant, so its window spans `2 w` positions.
    pub w: usize,
    /// Maximum horizontal iterations per window.
    pub i_h: usize,
    pub sweep: Sweep,
    pub stop: StopRule,
    pub max_star: MaxStar,
}

impl WindowConfig {
    pub fn new(w: usize, i_h: usize, sweep: Sweep) -> Self {
        WindowConfig { w, i_h, sweep, stop: StopRule::FixedIters, max_star: MaxStar::default() }
    }

    pub fn validate(&self, spec: &EnsembleSpec) -> Result<()> {
        if self.i_h == 0 {
            return Err(Error::InvalidConfig("i_h must be at least 1".into()));
        }
        let span = self.span(spec.kind.is_folded());
        if span < spec.coupling_span() {
            return Err(Error::InvalidConfig(format!(
                "window of {span} positions is shorter than the coupling span {}",
                spec.coupling_span()
            )));
        }
        if span > spec.num_positions() {
            return Err(Error::InvalidConfig(format!("window {} exceeds the chain length {}", self.w, spec.coupling_length)));
        }
        Ok(())
    }

    /// Positions covered by one window.
    pub fn span(&self, folded: bool) -> usize {
        if folded {
            2 * self.w
        } else {
            self.w
        }
    }

    /// `4 w I_h K` bits.
    pub fn latency(&self, block_len: usize) -> u64 {
        4 * (self.w * self.i_h * block_len) as u64
    }
}

/// Outcome of decoding one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    /// Decisions on the free information of each position (index 0 is
    /// position 1); positions never emitted are empty.
    pub decisions: Vec<Vec<u8>>,
    /// Per window: positions emitted.
    pub emitted: Vec<Vec<usize>>,
    /// Per window: iterations run. Fewer than `i_h` when a fixed point was
    /// reached or genie-aided stopping fired.
    pub iterations: Vec<usize>,
    /// Per window: first iteration after which the emitted decisions
    /// matched the truth (only with truth supplied).
    pub genie_iterations: Vec<Option<usize>>,
    pub latency: u64,
}

impl DecodeReport {
    pub fn first_window_positions(&self) -> &[usize] {
        self.emitted.first().map_or(&[], |v| v.as_slice())
    }

    /// Decisions of the first window in position order.
    pub fn first_window_decisions(&self) -> Vec<u8> {
        self.first_window_positions().iter().flat_map(|&p| self.decisions[p - 1].iter().copied()).collect()
    }

    /// All emitted decisions in position order.
    pub fn info_decisions(&self) -> Vec<u8> {
        self.decisions.iter().flatten().copied().collect()
    }
}

/// Message algebra plus the component decoder of one domain.
pub trait MessageDomain {
    type Msg: Copy + Default + PartialEq + std::fmt::Debug;

    fn combine(a: Self::Msg, b: Self::Msg) -> Self::Msg;

    /// Extrinsic outputs for each port given combined observations. The
    /// component encoder always starts in state 0.
    fn decode(&mut self, obs: &[Vec<Self::Msg>], ext: &mut [Vec<Self::Msg>]) -> Result<()>;

    /// Hard decision on bit `offset` of `piece` from its total message.
    fn decide(&self, total: Self::Msg, piece: usize, offset: usize) -> u8;
}

/// Log-likelihood ratios with the BCJR decoder.
pub struct LlrDomain {
    bcjr: BcjrDecoder,
}

impl LlrDomain {
    pub fn new(trellis: &Trellis, max_star: MaxStar) -> Result<Self> {
        Ok(LlrDomain { bcjr: BcjrDecoder::new(trellis, max_star)? })
    }
}

impl MessageDomain for LlrDomain {
    type Msg = f32;

    #[inline]
    fn combine(a: f32, b: f32) -> f32 {
        a + b
    }

    fn decode(&mut self, obs: &[Vec<f32>], ext: &mut [Vec<f32>]) -> Result<()> {
        self.bcjr.decode(obs, true, ext, None)
    }

    #[inline]
    fn decide(&self, total: f32, _: usize, _: usize) -> u8 {
        u8::from(total < 0.0)
    }
}

/// Known/erased flags with the subset decoder. A known bit is recovered
/// exactly, so decisions copy the transmitted value; erased bits decide to
/// [`ERASED`].
pub struct ErasureDomain {
    tables: SubsetTables,
    bits: Vec<Vec<u8>>,
}

impl ErasureDomain {
    pub fn new(trellis: &Trellis, frame: &CoupledFrame) -> Result<Self> {
        Ok(ErasureDomain { tables: SubsetTables::new(trellis)?, bits: frame.bits.clone() })
    }
}

impl MessageDomain for ErasureDomain {
    type Msg = bool;

    #[inline]
    fn combine(a: bool, b: bool) -> bool {
        a || b
    }

    fn decode(&mut self, obs: &[Vec<bool>], ext: &mut [Vec<bool>]) -> Result<()> {
        let out = self.tables.decode_block(obs, true)?;
        for (e, o) in ext.iter_mut().zip(out) {
            *e = o;
        }
        Ok(())
    }

    fn decide(&self, total: bool, piece: usize, offset: usize) -> u8 {
        if total {
            self.bits[piece][offset]
        } else {
            ERASED
        }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Tap {
    chan: u32,
    own: u32,
    other: u32,
}

/// Window decoder bound to one chain layout and message domain.
pub struct WindowDecoder<D: MessageDomain> {
    graph: Arc<CouplingGraph>,
    domain: D,
    /// `taps[factor][port][j]`
    taps: Vec<Vec<Vec<Tap>>>,
    /// Per piece: flat channel offset and the flat offsets of its slots.
    piece_chan: Vec<u32>,
    piece_slots: Vec<Vec<u32>>,
    chan: Vec<D::Msg>,
    ext: Vec<D::Msg>,
    obs: Vec<Vec<D::Msg>>,
    out: Vec<Vec<D::Msg>>,
    /// Factor visits in order, when tracing is on.
    pub trace: Option<Vec<usize>>,
}

impl<D: MessageDomain> WindowDecoder<D> {
    pub fn new(graph: Arc<CouplingGraph>, layout: &PortLayout, domain: D) -> Self {
        let mut piece_chan = Vec::with_capacity(graph.pieces.len());
        let mut piece_slots = Vec::with_capacity(graph.pieces.len());
        let (mut c, mut s) = (0u32, 0u32);
        for p in &graph.pieces {
            piece_chan.push(c);
            c += p.len as u32;
            piece_slots.push(
                (0..p.occurrences.len())
                    .map(|_| {
                        let at = s;
                        s += p.len as u32;
                        at
                    })
                    .collect::<Vec<_>>(),
            );
        }
        let taps = graph
            .factors
            .iter()
            .enumerate()
            .map(|(f, node)| {
                (0..node.ports.len())
                    .map(|port| {
                        layout
                            .port(f, port)
                            .iter()
                            .map(|&(piece, off)| {
                                let piece = piece as usize;
                                let occs = &graph.pieces[piece].occurrences;
                                let own = occs.iter().position(|o| o.factor == f && o.port == port).expect("attachment");
                                let other = (0..occs.len()).find(|&o| o != own);
                                Tap {
                                    chan: piece_chan[piece] + off,
                                    own: piece_slots[piece][own] + off,
                                    other: other.map_or(NONE, |o| piece_slots[piece][o] + off),
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let ports = graph.num_inputs + 1;
        WindowDecoder {
            graph,
            domain,
            taps,
            piece_chan,
            piece_slots,
            chan: vec![D::Msg::default(); c as usize],
            ext: vec![D::Msg::default(); s as usize],
            obs: vec![Vec::new(); ports],
            out: vec![Vec::new(); ports],
            trace: None,
        }
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    /// Loads per-piece channel messages and clears every extrinsic.
    pub fn load(&mut self, channel: &[Vec<D::Msg>]) -> Result<()> {
        if channel.len() != self.graph.pieces.len() {
            return Err(Error::LengthMismatch { expected: self.graph.pieces.len(), got: channel.len() });
        }
        for (p, ch) in channel.iter().enumerate() {
            let len = self.graph.pieces[p].len;
            if ch.len() != len {
                return Err(Error::LengthMismatch { expected: len, got: ch.len() });
            }
            let at = self.piece_chan[p] as usize;
            self.chan[at..at + len].copy_from_slice(ch);
        }
        self.ext.iter_mut().for_each(|e| *e = D::Msg::default());
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
        Ok(())
    }

    /// A-priori input of one port: channel combined with the other
    /// attachment's extrinsic, in trellis order.
    pub fn port_apriori(&self, factor: usize, port: usize) -> Vec<D::Msg> {
        self.taps[factor][port]
            .iter()
            .map(|t| if t.other == NONE { D::Msg::default() } else { self.ext[t.other as usize] })
            .collect()
    }

    /// Latest extrinsic output of one port, in trellis order.
    pub fn port_extrinsic(&self, factor: usize, port: usize) -> Vec<D::Msg> {
        self.taps[factor][port].iter().map(|t| self.ext[t.own as usize]).collect()
    }

    /// Decodes one factor node and stores its extrinsic outputs. Returns
    /// whether any stored message changed.
    pub fn visit(&mut self, f: usize) -> Result<bool> {
        for (port, taps) in self.taps[f].iter().enumerate() {
            let buf = &mut self.obs[port];
            buf.clear();
            buf.extend(taps.iter().map(|t| {
                let c = self.chan[t.chan as usize];
                if t.other == NONE {
                    c
                } else {
                    D::combine(c, self.ext[t.other as usize])
                }
            }));
        }
        self.domain.decode(&self.obs, &mut self.out)?;
        let mut changed = false;
        for (port, taps) in self.taps[f].iter().enumerate() {
            for (t, &e) in taps.iter().zip(&self.out[port]) {
                let slot = &mut self.ext[t.own as usize];
                changed |= *slot != e;
                *slot = e;
            }
        }
        if let Some(tr) = self.trace.as_mut() {
            tr.push(f);
        }
        Ok(changed)
    }

    /// Channel message of every bit of `piece` combined with all of its
    /// extrinsics.
    pub fn piece_total(&self, piece: usize) -> Vec<D::Msg> {
        let base = self.piece_chan[piece] as usize;
        (0..self.graph.pieces[piece].len)
            .map(|i| self.piece_slots[piece].iter().fold(self.chan[base + i], |acc, &s| D::combine(acc, self.ext[s as usize + i])))
            .collect()
    }

    /// Decision on the free information of one position (1-based).
    pub fn position_decisions(&self, position: usize, by_position: &[Vec<usize>]) -> Vec<u8> {
        let mut out = Vec::new();
        for &p in &by_position[position - 1] {
            out.extend(self.piece_total(p).into_iter().enumerate().map(|(i, t)| self.domain.decide(t, p, i)));
        }
        out
    }

    /// One horizontal iteration; returns whether any message changed.
    fn sweep(&mut self, factors: &[usize], sweep: Sweep) -> Result<bool> {
        let mut changed = false;
        for &f in factors {
            changed |= self.visit(f)?;
        }
        match sweep {
            Sweep::RoundTrip => {
                for &f in factors.iter().rev() {
                    changed |= self.visit(f)?;
                }
            }
            Sweep::DoubleForward => {
                for &f in factors {
                    changed |= self.visit(f)?;
                }
            }
        }
        Ok(changed)
    }

    /// Slides the window along the chain. `truth` holds the information
    /// decisions expected at every position; `max_windows` stops after that
    /// many windows.
    pub fn run(&mut self, cfg: &WindowConfig, truth: Option<&[Vec<u8>]>, max_windows: Option<usize>) -> Result<DecodeReport> {
        let n = self.graph.num_positions;
        if cfg.i_h == 0 || cfg.w == 0 {
            return Err(Error::InvalidConfig("window and i_h must be positive".into()));
        }
        let folded = self.graph.kind.is_folded();
        let span = cfg.span(folded);
        if span > n {
            return Err(Error::InvalidConfig(format!("window of {span} positions exceeds the chain length {n}")));
        }
        if cfg.stop == StopRule::GenieAided && truth.is_none() {
            return Err(Error::InvalidConfig("genie-aided stopping needs the transmitted bits".into()));
        }
        let by_position = self.graph.info_by_position();
        let mut report = DecodeReport {
            decisions: vec![Vec::new(); n],
            emitted: Vec::new(),
            iterations: Vec::new(),
            genie_iterations: Vec::new(),
            latency: cfg.latency(self.graph.block_len),
        };
        let mut start = 1;
        while start <= n && max_windows.map_or(true, |m| report.emitted.len() < m) {
            let end = (start + span - 1).min(n);
            let first = report.emitted.is_empty();
            let emit: Vec<usize> = if end == n {
                (start..=n).collect()
            } else if first && folded {
                vec![start, start + 1]
            } else {
                vec![start]
            };
            let factors: Vec<usize> =
                (0..self.graph.factors.len()).filter(|&f| (start..=end).contains(&self.graph.factors[f].position)).collect();
            let mut genie = None;
            let mut iters = 0;
            for it in 1..=cfg.i_h {
                let changed = self.sweep(&factors, cfg.sweep)?;
                iters = it;
                if let (Some(t), None) = (truth, genie) {
                    if emit.iter().all(|&p| self.position_decisions(p, &by_position) == t[p - 1]) {
                        genie = Some(it);
                        if cfg.stop == StopRule::GenieAided {
                            break;
                        }
                    }
                }
                // a sweep that changed nothing is a fixed point: later
                // sweeps would repeat it exactly
                if !changed {
                    break;
                }
            }
            for &p in &emit {
                report.decisions[p - 1] = self.position_decisions(p, &by_position);
            }
            start = emit.last().unwrap() + 1;
            report.emitted.push(emit);
            report.iterations.push(iters);
            report.genie_iterations.push(genie);
        }
        Ok(report)
    }

    /// Every factor of the chain as one window, for `i_h` iterations.
    pub fn run_full(&mut self, i_h: usize, sweep: Sweep) -> Result<Vec<Vec<u8>>> {
        let all: Vec<usize> = (0..self.graph.factors.len()).collect();
        for _ in 0..i_h {
            if !self.sweep(&all, sweep)? {
                break;
            }
        }
        let by_position = self.graph.info_by_position();
        Ok((1..=self.graph.num_positions).map(|p| self.position_decisions(p, &by_position)).collect())
    }
}

/// Free information bits of a frame grouped by position, the layout used
/// for decisions and truth.
pub fn info_by_position_bits(frame: &CoupledFrame) -> Vec<Vec<u8>> {
    frame.graph.info_by_position().iter().map(|ps| ps.iter().flat_map(|&p| frame.bits[p].iter().copied()).collect()).collect()
}

/// Window decoding of AWGN channel LLRs.
pub fn window_decode(
    encoder: &ChainEncoder,
    channel: &[Vec<f32>],
    cfg: &WindowConfig,
    truth: Option<&[Vec<u8>]>,
) -> Result<DecodeReport> {
    let mut dec = WindowDecoder::new(Arc::clone(&encoder.graph), &encoder.layout, LlrDomain::new(&encoder.trellis, cfg.max_star)?);
    dec.load(channel)?;
    dec.run(cfg, truth, None)
}

/// Whole-chain iterative decoding with the same sweep, written against the
/// port layout directly. Serves as the reference for window decoding.
pub fn full_decode<D: MessageDomain>(
    graph: &CouplingGraph,
    layout: &PortLayout,
    domain: &mut D,
    channel: &[Vec<D::Msg>],
    i_h: usize,
    sweep: Sweep,
) -> Result<Vec<Vec<u8>>> {
    let ports = graph.num_inputs + 1;
    // ext[piece][occurrence][bit]
    let mut ext: Vec<Vec<Vec<D::Msg>>> =
        graph.pieces.iter().map(|p| vec![vec![D::Msg::default(); p.len]; p.occurrences.len()]).collect();
    let mut order: Vec<usize> = (0..graph.factors.len()).collect();
    let mut visits = Vec::new();
    for _ in 0..i_h {
        visits.extend(order.iter().copied());
        if sweep == Sweep::RoundTrip {
            order.reverse();
        }
        visits.extend(order.iter().copied());
        if sweep == Sweep::RoundTrip {
            order.reverse();
        }
    }
    let mut out = vec![Vec::new(); ports];
    for f in visits {
        let mut obs = vec![Vec::new(); ports];
        for (port, o) in obs.iter_mut().enumerate() {
            for &(piece, off) in layout.port(f, port) {
                let (piece, off) = (piece as usize, off as usize);
                let mut m = channel[piece][off];
                for (k, occ) in graph.pieces[piece].occurrences.iter().enumerate() {
                    if !(occ.factor == f && occ.port == port) {
                        m = D::combine(m, ext[piece][k][off]);
                    }
                }
                o.push(m);
            }
        }
        domain.decode(&obs, &mut out)?;
        for (port, vals) in out.iter().enumerate() {
            for (&(piece, off), &v) in layout.port(f, port).iter().zip(vals) {
                let piece = piece as usize;
                let k = graph.pieces[piece].occurrences.iter().position(|o| o.factor == f && o.port == port).unwrap();
                ext[piece][k][off as usize] = v;
            }
        }
    }
    Ok(graph
        .info_by_position()
        .iter()
        .map(|ps| {
            ps.iter()
                .flat_map(|&p| {
                    let ext = &ext[p];
                    let domain = &*domain;
                    (0..graph.pieces[p].len).map(move |i| {
                        let total = ext.iter().fold(channel[p][i], |acc, e| D::combine(acc, e[i]));
                        domain.decide(total, p, i)
                    })
                })
                .collect()
        })
        .collect())
}

/// Channel for Monte-Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelParams {
    Awgn { ebn0_db: f64 },
    Bec { eps: f64 },
}

/// A chain ready for repeated trials: encoder, optional puncturing rate and
/// decoder settings.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub spec: EnsembleSpec,
    pub rate: Option<Rational>,
    pub window: WindowConfig,
    /// Draw fresh interleavers for every trial instead of a fixed set.
    pub fresh_interleavers: bool,
}

/// Outcome of one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub bit_errors: usize,
    pub bits: usize,
    pub first_window_error: bool,
    pub first_window_bits: usize,
    pub genie_iterations: Option<usize>,
    pub iterations: Vec<usize>,
    pub latency: u64,
}

impl TrialSetup {
    fn interleavers(&self, graph: &CouplingGraph, seed: u64, trial: u64) -> InterleaverSet {
        let s = if self.fresh_interleavers { stream_rng(seed, 3 * trial + 2).next_u64() } else { seed ^ 0x5eed };
        InterleaverSet::generate(s, &graph.interleavers)
    }

    /// Encoder and (punctured) frame of trial `trial`.
    pub fn encode_trial(&self, seed: u64, trial: u64) -> Result<(ChainEncoder, CoupledFrame)> {
        let graph = CouplingGraph::build(&self.spec)?;
        let ils = self.interleavers(&graph, seed, trial);
        let enc = ChainEncoder::new(&self.spec, &ils)?;
        let mut rng = stream_rng(seed, 3 * trial);
        let info: Vec<u8> = (0..enc.num_info_bits()).map(|_| (rng.next_u32() & 1) as u8).collect();
        let mut frame = enc.encode(&info)?;
        if let Some(r) = self.rate {
            frame = crate::ensemble::puncture(&frame, r, rng.next_u64())?;
        }
        Ok((enc, frame))
    }

    /// Channel noise generator of trial `trial`.
    pub fn noise_rng(seed: u64, trial: u64) -> rand_chacha::ChaCha8Rng {
        stream_rng(seed, 3 * trial + 1)
    }

    /// Runs trial `trial` of a seeded sequence: random information,
    /// interleavers and puncturing from their own streams. With
    /// `first_window_only` only the first window is decoded.
    pub fn run_trial(&self, channel: ChannelParams, seed: u64, trial: u64, first_window_only: bool) -> Result<TrialOutcome> {
        self.window.validate(&self.spec)?;
        let (enc, frame) = self.encode_trial(seed, trial)?;
        let truth = info_by_position_bits(&frame);
        let mut noise = Self::noise_rng(seed, trial);
        let limit = first_window_only.then_some(1);
        let report = match channel {
            ChannelParams::Awgn { ebn0_db } => {
                let sigma2 = ebn0_to_sigma2(ebn0_db, frame.realized_rate());
                let llrs = awgn_llrs(&frame, sigma2, &mut noise)?;
                let mut dec = WindowDecoder::new(Arc::clone(&enc.graph), &enc.layout, LlrDomain::new(&enc.trellis, self.window.max_star)?);
                dec.load(&llrs)?;
                dec.run(&self.window, Some(&truth), limit)?
            }
            ChannelParams::Bec { eps } => {
                let known = bec_known(&frame, eps, &mut noise)?;
                let mut dec = WindowDecoder::new(Arc::clone(&enc.graph), &enc.layout, ErasureDomain::new(&enc.trellis, &frame)?);
                dec.load(&known)?;
                dec.run(&self.window, Some(&truth), limit)?
            }
        };
        let mut bit_errors = 0;
        let mut bits = 0;
        for emit in &report.emitted {
            for &p in emit {
                bits += truth[p - 1].len();
                bit_errors += report.decisions[p - 1].iter().zip(&truth[p - 1]).filter(|(a, b)| a != b).count();
            }
        }
        let fw = report.first_window_positions();
        let first_window_bits = fw.iter().map(|&p| truth[p - 1].len()).sum();
        let first_window_error = fw.iter().any(|&p| report.decisions[p - 1] != truth[p - 1]);
        Ok(TrialOutcome {
            bit_errors,
            bits,
            first_window_error,
            first_window_bits,
            genie_iterations: report.genie_iterations.first().copied().flatten(),
            iterations: report.iterations,
            latency: report.latency,
        })
    }
}

/// First-window error rate and mean genie iterations over successful
/// attempts.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstWindowStats {
    pub trials: usize,
    pub window_errors: usize,
    pub wder: f64,
    pub successes: usize,
    pub mean_iterations: f64,
    /// Iteration count of every successful attempt.
    pub iteration_samples: Vec<usize>,
}

/// WDER with fixed iterations and, from the same runs, the first iteration
/// at which the window's decisions became correct.
pub fn first_window_stats(setup: &TrialSetup, channel: ChannelParams, num_trials: usize, seed: u64) -> Result<FirstWindowStats> {
    if num_trials == 0 {
        return Err(Error::InvalidConfig("num_trials must be at least 1".into()));
    }
    let mut setup = setup.clone();
    setup.window.stop = StopRule::FixedIters;
    let mut window_errors = 0;
    let mut samples = Vec::new();
    for t in 0..num_trials {
        let o = setup.run_trial(channel, seed, t as u64, true)?;
        window_errors += usize::from(o.first_window_error);
        if let Some(i) = o.genie_iterations {
            samples.push(i);
        }
    }
    let mean = if samples.is_empty() { f64::NAN } else { samples.iter().sum::<usize>() as f64 / samples.len() as f64 };
    Ok(FirstWindowStats {
        trials: num_trials,
        window_errors,
        wder: window_errors as f64 / num_trials as f64,
        successes: samples.len(),
        mean_iterations: mean,
        iteration_samples: samples,
    })
}
