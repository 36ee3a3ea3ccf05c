//! Chain encoding, port layouts and puncturing.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{CouplingGraph, Observation, PieceKind};
use super::{EnsembleSpec, InterleaverSet, Rational};
use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Where each trellis position of every factor port reads its bit from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortLayout {
    /// `[factor][port][j] = (piece, offset)`.
    map: Vec<Vec<Vec<(u32, u32)>>>,
}

impl PortLayout {
    pub fn new(graph: &CouplingGraph, ils: &InterleaverSet) -> Result<Self> {
        ils.check(&graph.interleavers)?;
        let map = graph
            .factors
            .iter()
            .map(|node| {
                node.ports
                    .iter()
                    .map(|port| {
                        let mut flat = Vec::with_capacity(port.len);
                        for seg in &port.segments {
                            let len = graph.pieces[seg.piece].len;
                            let perm = seg.interleaver.as_deref().and_then(|n| ils.get(n));
                            for i in 0..len {
                                let src = perm.map_or(i, |p| p.source(i));
                                flat.push((seg.piece as u32, src as u32));
                            }
                        }
                        match port.interleaver.as_deref().and_then(|n| ils.get(n)) {
                            Some(p) => p.apply(&flat),
                            None => flat,
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(PortLayout { map })
    }

    #[inline]
    pub fn port(&self, factor: usize, port: usize) -> &[(u32, u32)] {
        &self.map[factor][port]
    }

    /// Reads one port's values out of per-piece storage.
    pub fn gather<T: Copy>(&self, factor: usize, port: usize, pieces: &[Vec<T>], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.map[factor][port].iter().map(|&(p, o)| pieces[p as usize][o as usize]));
    }
}

/// Parity fraction kept per factor node to reach `rate` from a rate-1/3
/// mother code: `(1 - R) / (2R)`.
pub fn retained_fraction(rate: Rational) -> Result<Rational> {
    let (n, d) = (*rate.numer(), *rate.denom());
    if 3 * n < d || n >= d {
        return Err(Error::RateOutOfRange(format!("{n}/{d} is outside [1/3, 1)")));
    }
    Ok(Rational::new(d - n, 2 * n))
}

/// An encoded chain: per-piece bits plus the parity transmission mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFrame {
    pub graph: Arc<CouplingGraph>,
    /// Bits of every piece, indexed like `graph.pieces`.
    pub bits: Vec<Vec<u8>>,
    /// Transmission mask for parity pieces (`None` for info pieces and
    /// parity that is never sent).
    pub mask: Vec<Option<Vec<bool>>>,
    /// Target rate the mask was drawn for, if punctured.
    pub target_rate: Option<Rational>,
}

impl CoupledFrame {
    /// Free information bits in position order.
    pub fn info_bits(&self) -> Vec<u8> {
        self.graph.info_by_position().iter().flatten().flat_map(|&p| self.bits[p].iter().copied()).collect()
    }

    /// Parity port bits of one factor node.
    pub fn parity(&self, factor: usize) -> Vec<u8> {
        let node = &self.graph.factors[factor];
        node.ports[node.parity_port()].segments.iter().flat_map(|s| self.bits[s.piece].iter().copied()).collect()
    }

    /// Whether bit `i` of `piece` is sent over the channel.
    #[inline]
    pub fn is_transmitted(&self, piece: usize, i: usize) -> bool {
        let p = &self.graph.pieces[piece];
        match p.observation {
            Observation::Known => false,
            Observation::Channel => match p.kind {
                PieceKind::Info { .. } => true,
                PieceKind::Parity { .. } => self.mask[piece].as_ref().map_or(true, |m| m[i]),
            },
        }
    }

    pub fn num_transmitted(&self) -> usize {
        (0..self.bits.len()).map(|p| (0..self.bits[p].len()).filter(|&i| self.is_transmitted(p, i)).count()).sum()
    }

    /// Information bits over transmitted bits, after puncturing.
    pub fn realized_rate(&self) -> Rational {
        Rational::new(self.graph.free_info_bits() as u64, self.num_transmitted() as u64)
    }

    /// Transmitted bits: all free info in position order, then the retained
    /// parity of each factor node in node order.
    pub fn transmitted(&self) -> Vec<u8> {
        let mut out = self.info_bits();
        for node in &self.graph.factors {
            for seg in &node.ports[node.parity_port()].segments {
                out.extend((0..self.bits[seg.piece].len()).filter(|&i| self.is_transmitted(seg.piece, i)).map(|i| self.bits[seg.piece][i]));
            }
        }
        out
    }

    /// Text dump. One line per block: a tag, its coordinates and the bits as
    /// `0`/`1` characters in index order (first bit leftmost). Parity lines
    /// carry the transmission mask on the following `mask` line.
    pub fn dump(&self) -> String {
        let g = &self.graph;
        let mut s = String::new();
        let _ = writeln!(s, "# hsctc frame v1");
        let _ = writeln!(s, "kind {} positions {} K {}", g.kind, g.num_positions, g.block_len);
        let bitstr = |b: &[u8]| b.iter().map(|&x| if x == 1 { '1' } else { '0' }).collect::<String>();
        for (pos, pieces) in g.info_by_position().iter().enumerate() {
            let bits: Vec<u8> = pieces.iter().flat_map(|&p| self.bits[p].iter().copied()).collect();
            let _ = writeln!(s, "info {} {}", pos + 1, bitstr(&bits));
        }
        for (f, node) in g.factors.iter().enumerate() {
            let _ = writeln!(s, "parity {} {:?} {}", node.position, node.side, bitstr(&self.parity(f)));
            let mask: String = node.ports[node.parity_port()]
                .segments
                .iter()
                .flat_map(|seg| (0..self.bits[seg.piece].len()).map(move |i| (seg.piece, i)))
                .map(|(p, i)| if self.is_transmitted(p, i) { '1' } else { '0' })
                .collect();
            let _ = writeln!(s, "mask {} {:?} {}", node.position, node.side, mask);
        }
        s
    }
}

/// Encoder bound to one ensemble and interleaver set.
#[derive(Debug, Clone)]
pub struct ChainEncoder {
    pub graph: Arc<CouplingGraph>,
    pub trellis: Trellis,
    pub layout: PortLayout,
}

impl ChainEncoder {
    pub fn new(spec: &EnsembleSpec, ils: &InterleaverSet) -> Result<Self> {
        let graph = Arc::new(CouplingGraph::build(spec)?);
        let trellis = Trellis::new(&spec.generator)?;
        let layout = PortLayout::new(&graph, ils)?;
        Ok(ChainEncoder { graph, trellis, layout })
    }

    pub fn num_info_bits(&self) -> usize {
        self.graph.free_info_bits()
    }

    /// Encodes free information bits given in position order. Every factor
    /// node starts from the zero state.
    pub fn encode(&self, info: &[u8]) -> Result<CoupledFrame> {
        let g = &self.graph;
        if info.len() != g.free_info_bits() {
            return Err(Error::LengthMismatch { expected: g.free_info_bits(), got: info.len() });
        }
        let mut bits: Vec<Vec<u8>> = g.pieces.iter().map(|p| vec![0u8; p.len]).collect();
        let mut at = 0;
        for &p in g.info_by_position().iter().flatten() {
            let len = bits[p].len();
            bits[p].copy_from_slice(&info[at..at + len]);
            at += len;
        }
        let k = g.num_inputs;
        let mut inputs: Vec<Vec<u8>> = vec![Vec::new(); k];
        for (f, node) in g.factors.iter().enumerate() {
            for (port, buf) in inputs.iter_mut().enumerate() {
                self.layout.gather(f, port, &bits, buf);
            }
            let (parity, _) = self.trellis.encode(&inputs, 0)?;
            let mut off = 0;
            for seg in &node.ports[node.parity_port()].segments {
                let len = bits[seg.piece].len();
                bits[seg.piece].copy_from_slice(&parity[off..off + len]);
                off += len;
            }
        }
        let mask = vec![None; bits.len()];
        Ok(CoupledFrame { graph: Arc::clone(&self.graph), bits, mask, target_rate: None })
    }
}

/// Encodes a chain in one call.
pub fn encode_chain(spec: &EnsembleSpec, info: &[u8], ils: &InterleaverSet) -> Result<CoupledFrame> {
    ChainEncoder::new(spec, ils)?.encode(info)
}

/// Draws an independent random parity mask for every factor node, keeping
/// `round(rho * K)` parity bits per node.
pub fn puncture(frame: &CoupledFrame, target_rate: Rational, seed: u64) -> Result<CoupledFrame> {
    let rho = retained_fraction(target_rate)?;
    let g = &frame.graph;
    let keep_frac = *rho.numer() as f64 / *rho.denom() as f64;
    let mut out = frame.clone();
    out.target_rate = Some(target_rate);
    for (f, node) in g.factors.iter().enumerate() {
        let segs = &node.ports[node.parity_port()].segments;
        let n: usize = segs.iter().map(|s| g.pieces[s.piece].len).sum();
        let keep = (keep_frac * n as f64).round() as usize;
        let mut mask = vec![false; n];
        mask[..keep].iter_mut().for_each(|m| *m = true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(f as u64);
        mask.shuffle(&mut rng);
        let mut off = 0;
        for s in segs {
            let len = g.pieces[s.piece].len;
            out.mask[s.piece] = Some(mask[off..off + len].to_vec());
            off += len;
        }
    }
    Ok(out)
}
