//! Density evolution over the coupling graph.
//!
//! Every piece carries one extrinsic erasure probability per attachment.
//! The a-priori erasure probability of a port is the length-weighted average
//! over its segments of the channel erasure probability times the extrinsic
//! probabilities from the piece's other attachments. Parity that would feed
//! a factor beyond the chain end sees a known extrinsic there.

use super::transfer::TransferFn;
use crate::ensemble::{CouplingGraph, Observation, PieceKind};
use crate::error::{Error, Result};

/// Erasure probabilities of the received bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelErasure {
    /// Systematic bits.
    pub eps: f64,
    /// Parity bits, with puncturing counted as erasure.
    pub eps_v: f64,
}

impl ChannelErasure {
    pub fn unpunctured(eps: f64) -> Self {
        ChannelErasure { eps, eps_v: eps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Whole chain; converged when every position is.
    Full,
    /// Only positions `1..=w` are updated; converged when the head block is.
    Window(usize),
    /// Only the last `w` positions are updated; converged when the tail
    /// block is.
    TailWindow(usize),
}

/// Per-attachment extrinsic erasure probabilities: `ext[piece][occurrence]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasureState {
    pub ext: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl ErasureState {
    /// Every attachment starts fully erased.
    pub fn new(graph: &CouplingGraph) -> Self {
        ErasureState { ext: graph.pieces.iter().map(|p| vec![1.0; p.occurrences.len()]).collect(), iteration: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeRun {
    /// A-posteriori info erasure per position (index 0 is position 1), one
    /// row per iteration; empty unless recording was requested.
    pub trajectory: Vec<Vec<f64>>,
    pub final_app: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    piece: usize,
    occ: usize,
    frac: f64,
}

/// Density evolution engine for one graph and transfer function.
pub struct ErasureDe<'a> {
    graph: &'a CouplingGraph,
    transfer: &'a TransferFn,
    /// `slots[factor][port]`
    slots: Vec<Vec<Vec<Slot>>>,
    by_position: Vec<Vec<usize>>,
}

/// Below this per-iteration change a non-converged run is declared stuck.
const STALL: f64 = 1e-13;

impl<'a> ErasureDe<'a> {
    pub fn new(graph: &'a CouplingGraph, transfer: &'a TransferFn) -> Result<Self> {
        if transfer.num_ports() != graph.num_inputs + 1 {
            return Err(Error::LengthMismatch { expected: graph.num_inputs + 1, got: transfer.num_ports() });
        }
        let slots = graph
            .factors
            .iter()
            .enumerate()
            .map(|(f, node)| {
                node.ports
                    .iter()
                    .enumerate()
                    .map(|(port, p)| {
                        p.segments
                            .iter()
                            .map(|s| {
                                let piece = &graph.pieces[s.piece];
                                let occ = piece
                                    .occurrences
                                    .iter()
                                    .position(|o| o.factor == f && o.port == port)
                                    .expect("segment without occurrence");
                                Slot { piece: s.piece, occ, frac: piece.len as f64 / p.len as f64 }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(ErasureDe { graph, transfer, slots, by_position: graph.info_by_position() })
    }

    pub fn graph(&self) -> &CouplingGraph {
        self.graph
    }

    fn channel(&self, piece: usize, ch: ChannelErasure) -> f64 {
        let p = &self.graph.pieces[piece];
        match (p.observation, p.kind) {
            (Observation::Known, _) => 0.0,
            (Observation::Channel, PieceKind::Info { .. }) => ch.eps,
            (Observation::Channel, PieceKind::Parity { .. }) => ch.eps_v,
        }
    }

    /// A-priori erasure probability entering `port` of `factor`.
    pub fn port_apriori(&self, state: &ErasureState, factor: usize, port: usize, ch: ChannelErasure) -> f64 {
        self.slots[factor][port]
            .iter()
            .map(|s| {
                let piece = &self.graph.pieces[s.piece];
                let others: f64 = if piece.truncated {
                    0.0
                } else {
                    state.ext[s.piece].iter().enumerate().filter(|&(i, _)| i != s.occ).map(|(_, &e)| e).product()
                };
                s.frac * self.channel(s.piece, ch) * others
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// One flooding iteration over the factors for which `active` holds.
    pub fn step_masked(&self, state: &ErasureState, ch: ChannelErasure, active: impl Fn(usize) -> bool) -> Result<ErasureState> {
        let mut next = state.clone();
        let mut probs = vec![0.0; self.graph.num_inputs + 1];
        for f in 0..self.graph.factors.len() {
            if !active(f) {
                continue;
            }
            for (port, p) in probs.iter_mut().enumerate() {
                *p = self.port_apriori(state, f, port, ch);
            }
            let out = self.transfer.eval(&probs)?;
            for (port, slots) in self.slots[f].iter().enumerate() {
                for s in slots {
                    next.ext[s.piece][s.occ] = out[port];
                }
            }
        }
        next.iteration += 1;
        Ok(next)
    }

    pub fn step(&self, state: &ErasureState, ch: ChannelErasure) -> Result<ErasureState> {
        self.step_masked(state, ch, |_| true)
    }

    /// A-posteriori erasure probability of a piece.
    pub fn piece_app(&self, state: &ErasureState, piece: usize, ch: ChannelErasure) -> f64 {
        self.channel(piece, ch) * state.ext[piece].iter().product::<f64>()
    }

    /// Worst a-posteriori info erasure at each position.
    pub fn position_app(&self, state: &ErasureState, ch: ChannelErasure) -> Vec<f64> {
        self.by_position
            .iter()
            .map(|ps| ps.iter().map(|&p| self.piece_app(state, p, ch)).fold(0.0, f64::max))
            .collect()
    }

    /// Positions (0-based) whose convergence decides the schedule.
    fn targets(&self, schedule: Schedule) -> Vec<usize> {
        let free: Vec<usize> = (0..self.by_position.len()).filter(|&i| !self.by_position[i].is_empty()).collect();
        let block = if self.graph.kind.is_folded() { 2 } else { 1 };
        match schedule {
            Schedule::Full => free,
            Schedule::Window(_) => free.iter().copied().take(block).collect(),
            Schedule::TailWindow(_) => free.iter().rev().copied().take(block).collect(),
        }
    }

    fn active(&self, schedule: Schedule) -> Vec<bool> {
        let n = self.graph.num_positions;
        self.graph
            .factors
            .iter()
            .map(|f| match schedule {
                Schedule::Full => true,
                Schedule::Window(w) => f.position <= w,
                Schedule::TailWindow(w) => f.position + w > n,
            })
            .collect()
    }

    /// Iterates from the all-erased state until the schedule's target
    /// positions fall below `tol`, the state stops moving, or `max_iters`.
    pub fn run(&self, ch: ChannelErasure, schedule: Schedule, max_iters: usize, tol: f64, record: bool) -> Result<DeRun> {
        let targets = self.targets(schedule);
        let active = self.active(schedule);
        let mut state = ErasureState::new(self.graph);
        let mut trajectory = Vec::new();
        let mut converged = false;
        let mut app = self.position_app(&state, ch);
        for _ in 0..max_iters {
            let next = self.step_masked(&state, ch, |f| active[f])?;
            let delta = next
                .ext
                .iter()
                .zip(&state.ext)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            state = next;
            app = self.position_app(&state, ch);
            if record {
                trajectory.push(app.clone());
            }
            if targets.iter().all(|&t| app[t] < tol) {
                converged = true;
                break;
            }
            if delta < STALL {
                break;
            }
        }
        Ok(DeRun { trajectory, final_app: app, converged, iterations: state.iteration })
    }
}

/// Convenience wrapper: one DE iteration.
pub fn de_step(graph: &CouplingGraph, transfer: &TransferFn, state: &ErasureState, ch: ChannelErasure) -> Result<ErasureState> {
    ErasureDe::new(graph, transfer)?.step(state, ch)
}

/// Convenience wrapper: a full run without recording.
pub fn de_run(
    graph: &CouplingGraph,
    transfer: &TransferFn,
    ch: ChannelErasure,
    schedule: Schedule,
    max_iters: usize,
    tol: f64,
) -> Result<DeRun> {
    ErasureDe::new(graph, transfer)?.run(ch, schedule, max_iters, tol, true)
}
