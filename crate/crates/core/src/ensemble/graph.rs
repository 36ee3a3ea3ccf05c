//! Compact coupling graphs.
//!
//! Every factor node is one component encoder. Its input ports and its parity
//! port are concatenations of *pieces*: blocks of bits that are encoded
//! together by the same pair of factor nodes (or by a single node at the
//! chain boundary). A segment may be interleaved on its own, and a whole port
//! may be interleaved after concatenation. The same structure drives the
//! encoder, density evolution and the window decoder.

use std::collections::HashMap;

use super::{EnsembleKind, EnsembleSpec, InterleaverRequirement, Rational};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// The single factor of a folded (half-instant) chain position.
    Folded,
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceKind {
    /// Information bits emitted with chain position `position`.
    Info { position: i64 },
    /// Parity produced by `factor`; `None` for blocks before the chain start.
    Parity { factor: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// Sent over the channel (subject to puncturing for parity).
    Channel,
    /// Zero block: termination or outside the chain.
    Known,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occurrence {
    pub factor: usize,
    pub port: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub kind: PieceKind,
    pub len: usize,
    pub observation: Observation,
    pub occurrences: Vec<Occurrence>,
    /// Parity whose consumer lies past the chain end.
    pub truncated: bool,
}

impl Piece {
    pub fn is_free_info(&self) -> bool {
        matches!(self.kind, PieceKind::Info { .. }) && self.observation == Observation::Channel && self.len > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub piece: usize,
    pub interleaver: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub segments: Vec<Segment>,
    pub interleaver: Option<String>,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorNode {
    /// Native chain position (1-based).
    pub position: usize,
    pub side: Side,
    /// Input ports `0..k` followed by the parity port.
    pub ports: Vec<Port>,
}

impl FactorNode {
    pub fn parity_port(&self) -> usize {
        self.ports.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    Info1,
    Info2,
    Parity,
}

/// One piece attached to one factor port.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub piece: usize,
    pub factor: usize,
    pub port: usize,
    pub class: EdgeClass,
    /// Share of the port occupied by the piece.
    pub fraction: f64,
    pub observed: bool,
    /// The other factor the piece is attached to, if any.
    pub partner: Option<usize>,
    /// Partner position minus own position.
    pub offset: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    pub kind: EnsembleKind,
    pub num_positions: usize,
    pub block_len: usize,
    pub num_inputs: usize,
    pub factors: Vec<FactorNode>,
    pub pieces: Vec<Piece>,
    pub interleavers: Vec<InterleaverRequirement>,
}

#[derive(Default)]
struct Builder {
    pieces: Vec<Piece>,
    keys: HashMap<(u8, Side, i64, i64), usize>,
}

impl Builder {
    fn mark_truncated(&mut self) {
        for p in &mut self.pieces {
            p.truncated = matches!(p.kind, PieceKind::Parity { factor: Some(_) }) && p.occurrences.len() == 1;
        }
    }

    fn piece(&mut self, key: (u8, Side, i64, i64), kind: PieceKind, len: usize, obs: Observation) -> usize {
        *self.keys.entry(key).or_insert_with(|| {
            self.pieces.push(Piece { kind, len, observation: obs, occurrences: Vec::new(), truncated: false });
            self.pieces.len() - 1
        })
    }

    fn port(&mut self, factor: usize, port: usize, segs: Vec<(usize, Option<&str>)>, il: Option<&str>) -> Port {
        let mut segments = Vec::new();
        let mut len = 0;
        for (p, s_il) in segs {
            if self.pieces[p].len == 0 {
                continue;
            }
            len += self.pieces[p].len;
            self.pieces[p].occurrences.push(Occurrence { factor, port });
            segments.push(Segment { piece: p, interleaver: s_il.map(str::to_string) });
        }
        Port { segments, interleaver: il.map(str::to_string), len }
    }
}

const INFO: u8 = 0;
const PARITY: u8 = 1;

fn req(name: &str, len: usize) -> InterleaverRequirement {
    InterleaverRequirement { name: name.into(), len, optional: false }
}

/// Segment lengths `lambda_bar_i * K` for `i = -m..=m`, rounded down with the
/// remainder given to `i = 0`.
fn two_sided_lengths(m: usize, k: usize) -> Vec<usize> {
    let d = (m + 1) * (m + 1);
    let mut lens: Vec<usize> =
        (-(m as i64)..=m as i64).map(|i| (m + 1 - i.unsigned_abs() as usize) * k / d).collect();
    let rest: usize = lens.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, &l)| l).sum();
    lens[m] = k - rest;
    lens
}

fn single_sided_lengths(lambda: &[f64], k: usize) -> Result<Vec<usize>> {
    lambda
        .iter()
        .map(|&l| {
            let x = l * k as f64;
            let r = x.round();
            if (x - r).abs() > 1e-6 {
                Err(Error::InvalidEnsemble(format!(
                    "lambda {l} times K = {k} is not an integer block size"
                )))
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

impl CouplingGraph {
    pub fn build(spec: &EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let g = match spec.kind {
            EnsembleKind::HscPcc | EnsembleKind::HscBcc => Self::build_folded(spec)?,
            _ => Self::build_unfolded(spec)?,
        };
        debug_assert!(g.factors.iter().all(|f| f.ports.iter().all(|p| p.len == g.block_len)));
        Ok(g)
    }

    fn build_folded(spec: &EnsembleSpec) -> Result<Self> {
        let k = spec.block_len;
        if k % 2 != 0 {
            return Err(Error::InvalidEnsemble("K must be even for folded chains".into()));
        }
        let half = k / 2;
        let n = 2 * spec.coupling_length as i64;
        let bcc = spec.kind == EnsembleKind::HscBcc;
        // HSC-PCC: info at position tau is re-encoded at tau + 1.
        // HSC-BCC: info at tau + delta - 1, parity at tau + delta.
        let delta = if bcc { spec.coupling as i64 } else { 1 };
        let info_lag = if bcc { delta - 1 } else { 1 };
        let last_free = if bcc { n - delta } else { n - 1 };

        let mut b = Builder::default();
        let mut factors = Vec::new();
        for tau in 1..=n {
            let f = factors.len();
            let obs = |pos: i64| {
                if pos >= 1 && pos <= last_free {
                    Observation::Channel
                } else {
                    Observation::Known
                }
            };
            let own = b.piece((INFO, Side::Folded, tau, 0), PieceKind::Info { position: tau }, half, obs(tau));
            let prev_pos = tau - info_lag;
            let prev = b.piece(
                (INFO, Side::Folded, prev_pos, 0),
                PieceKind::Info { position: prev_pos },
                half,
                obs(prev_pos),
            );
            let mut ports = vec![b.port(f, 0, vec![(own, None), (prev, Some("pi1"))], None)];
            if bcc {
                let src = tau - delta;
                let (kind, o) = if src >= 1 {
                    (PieceKind::Parity { factor: Some((src - 1) as usize) }, Observation::Channel)
                } else {
                    (PieceKind::Parity { factor: None }, Observation::Known)
                };
                let p = b.piece((PARITY, Side::Folded, src, 0), kind, k, o);
                ports.push(b.port(f, 1, vec![(p, None)], Some("pi2")));
            }
            let par = b.piece(
                (PARITY, Side::Folded, tau, 0),
                PieceKind::Parity { factor: Some(f) },
                k,
                Observation::Channel,
            );
            let pp = ports.len();
            ports.push(b.port(f, pp, vec![(par, None)], None));
            factors.push(FactorNode { position: tau as usize, side: Side::Folded, ports });
        }
        let mut interleavers = vec![req("pi1", half)];
        if bcc {
            interleavers.push(req("pi2", k));
            b.mark_truncated();
        }
        Ok(CouplingGraph {
            kind: spec.kind,
            num_positions: n as usize,
            block_len: k,
            num_inputs: spec.generator.num_inputs,
            factors,
            pieces: b.pieces,
            interleavers,
        })
    }

    fn build_unfolded(spec: &EnsembleSpec) -> Result<Self> {
        let kind = spec.kind;
        let k = spec.block_len;
        let t_len = spec.coupling_length as i64;
        let m = spec.coupling_memory();
        let bcc = matches!(kind, EnsembleKind::Type1Bcc | EnsembleKind::Type2Bcc | EnsembleKind::ScBccVariant);
        if bcc && k % m != 0 {
            return Err(Error::InvalidEnsemble(format!("K = {k} is not divisible by m = {m}")));
        }
        let in_chain = |t: i64| t >= 1 && t <= t_len;

        // info segment layout: offsets i with lengths
        let (offsets, lens): (Vec<i64>, Vec<usize>) = match kind {
            EnsembleKind::Type1Bcc => (vec![0], vec![k]),
            EnsembleKind::Type2Bcc | EnsembleKind::ScPcc => {
                ((-(m as i64)..=m as i64).collect(), two_sided_lengths(m, k))
            }
            EnsembleKind::SingleSidedScPcc => ((0..=m as i64).collect(), single_sided_lengths(&spec.lambda, k)?),
            EnsembleKind::ScBccVariant => {
                if k % 2 != 0 {
                    return Err(Error::InvalidEnsemble("K must be even".into()));
                }
                (vec![0, 1], vec![k / 2, k / 2])
            }
            _ => unreachable!(),
        };
        let seg_len = |i: i64| lens[offsets.iter().position(|&o| o == i).unwrap()];

        let mut b = Builder::default();
        let info_piece = |b: &mut Builder, t: i64, i: i64| {
            // piece (t, i): encoded at L_t and U_{t+i}
            let obs = if in_chain(t) && in_chain(t + i) { Observation::Channel } else { Observation::Known };
            b.piece((INFO, Side::Lower, t, i), PieceKind::Info { position: t }, seg_len(i), obs)
        };
        let par_len = k / m.max(1);

        let mut factors = Vec::new();
        for t in 1..=t_len {
            for side in [Side::Upper, Side::Lower] {
                let f = factors.len();
                let mut ports = Vec::new();
                // information port
                let info_port = match (kind, side) {
                    (EnsembleKind::Type1Bcc, Side::Upper) => {
                        let u = info_piece(&mut b, t, 0);
                        b.port(f, 0, vec![(u, None)], None)
                    }
                    (EnsembleKind::Type1Bcc, _) => {
                        let u = info_piece(&mut b, t, 0);
                        b.port(f, 0, vec![(u, None)], Some("pi1"))
                    }
                    (_, Side::Lower) => {
                        let segs = offsets.iter().map(|&i| (info_piece(&mut b, t, i), None)).collect();
                        let il = (kind == EnsembleKind::SingleSidedScPcc).then_some("pi_lower");
                        b.port(f, 0, segs, il)
                    }
                    (_, _) => {
                        let segs = offsets.iter().map(|&i| (info_piece(&mut b, t - i, i), None)).collect();
                        let il = if bcc { "pi1" } else { "pi" };
                        b.port(f, 0, segs, Some(il))
                    }
                };
                ports.push(info_port);
                if bcc {
                    // parity of the opposite side from t-m..t-1, oldest first
                    let other = if side == Side::Upper { Side::Lower } else { Side::Upper };
                    let segs = (1..=m as i64)
                        .rev()
                        .map(|j| {
                            let src = t - j;
                            let (pk, obs) = if in_chain(src) {
                                let sf = 2 * (src - 1) as usize + usize::from(other == Side::Lower);
                                (PieceKind::Parity { factor: Some(sf) }, Observation::Channel)
                            } else {
                                (PieceKind::Parity { factor: None }, Observation::Known)
                            };
                            (b.piece((PARITY, other, src, j), pk, par_len, obs), None)
                        })
                        .collect();
                    let il = if side == Side::Upper { "pi2" } else { "pi3" };
                    ports.push(b.port(f, 1, segs, Some(il)));
                    let own: Vec<_> = (1..=m as i64)
                        .map(|j| {
                            let p = b.piece(
                                (PARITY, side, t, j),
                                PieceKind::Parity { factor: Some(f) },
                                par_len,
                                Observation::Channel,
                            );
                            (p, None)
                        })
                        .collect();
                    ports.push(b.port(f, 2, own, None));
                } else {
                    let p = b.piece((PARITY, side, t, 0), PieceKind::Parity { factor: Some(f) }, k, Observation::Channel);
                    ports.push(b.port(f, 1, vec![(p, None)], None));
                }
                factors.push(FactorNode { position: t as usize, side, ports });
            }
        }
        if bcc {
            b.mark_truncated();
        }
        let interleavers = match kind {
            EnsembleKind::Type1Bcc | EnsembleKind::Type2Bcc | EnsembleKind::ScBccVariant => {
                vec![req("pi1", k), req("pi2", k), req("pi3", k)]
            }
            EnsembleKind::SingleSidedScPcc => vec![
                req("pi", k),
                InterleaverRequirement { name: "pi_lower".into(), len: k, optional: true },
            ],
            _ => vec![req("pi", k)],
        };
        Ok(CouplingGraph {
            kind,
            num_positions: t_len as usize,
            block_len: k,
            num_inputs: spec.generator.num_inputs,
            factors,
            pieces: b.pieces,
            interleavers,
        })
    }

    /// Bits per factor-node trellis section.
    pub fn trellis_len(&self) -> usize {
        self.block_len
    }

    pub fn free_info_bits(&self) -> usize {
        self.pieces.iter().filter(|p| p.is_free_info()).map(|p| p.len).sum()
    }

    pub fn transmitted_parity_bits(&self) -> usize {
        self.pieces
            .iter()
            .filter(|p| matches!(p.kind, PieceKind::Parity { .. }) && p.observation == Observation::Channel)
            .map(|p| p.len)
            .sum()
    }

    /// Rate of the unpunctured terminated chain.
    pub fn base_rate(&self) -> Rational {
        let info = self.free_info_bits() as u64;
        Rational::new(info, info + self.transmitted_parity_bits() as u64)
    }

    /// All piece-to-port attachments.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (f, node) in self.factors.iter().enumerate() {
            let pp = node.parity_port();
            for (port_idx, port) in node.ports.iter().enumerate() {
                let class = if port_idx == pp {
                    EdgeClass::Parity
                } else if port_idx == 0 {
                    EdgeClass::Info1
                } else {
                    EdgeClass::Info2
                };
                for seg in &port.segments {
                    let piece = &self.pieces[seg.piece];
                    let partner = piece
                        .occurrences
                        .iter()
                        .find(|o| !(o.factor == f && o.port == port_idx))
                        .map(|o| o.factor);
                    out.push(Edge {
                        piece: seg.piece,
                        factor: f,
                        port: port_idx,
                        class,
                        fraction: piece.len as f64 / port.len as f64,
                        observed: piece.observation == Observation::Channel,
                        partner,
                        offset: partner.map(|p| self.factors[p].position as i64 - node.position as i64),
                    });
                }
            }
        }
        out
    }

    /// Index of the factor at a native position and side.
    pub fn factor_at(&self, position: usize, side: Side) -> Option<usize> {
        self.factors.iter().position(|f| f.position == position && f.side == side)
    }

    /// Free information pieces grouped by native position (index 0 is
    /// position 1).
    pub fn info_by_position(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_positions];
        for (i, p) in self.pieces.iter().enumerate() {
            if let (true, PieceKind::Info { position }) = (p.is_free_info(), p.kind) {
                out[(position - 1) as usize].push(i);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::GeneratorSpec;

    fn g2() -> GeneratorSpec {
        GeneratorSpec::g457()
    }

    fn edges_into(g: &CouplingGraph, f: usize, port: usize) -> Vec<Edge> {
        g.edges().into_iter().filter(|e| e.factor == f && e.port == port).collect()
    }

    #[test]
    fn port_fractions_sum_to_one() {
        let specs = vec![
            EnsembleSpec::type1(g2(), 6, 12),
            EnsembleSpec::type2(g2(), 1, 6, 12),
            EnsembleSpec::type2(g2(), 2, 6, 18),
            EnsembleSpec::sc_pcc(GeneratorSpec::g15_13(), 2, 6, 18),
            EnsembleSpec::single_sided(GeneratorSpec::g15_13(), vec![0.7, 0.3], 6, 10),
            EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), 6, 12),
            EnsembleSpec::hsc_bcc(g2(), 3, 6, 12),
            EnsembleSpec::variant(g2(), 6, 12),
        ];
        for spec in specs {
            let g = CouplingGraph::build(&spec).unwrap();
            for (f, node) in g.factors.iter().enumerate() {
                for p in 0..node.ports.len() {
                    let s: f64 = edges_into(&g, f, p).iter().map(|e| e.fraction).sum();
                    assert!((s - 1.0).abs() < 1e-12, "{:?} factor {f} port {p}", spec.kind);
                }
            }
        }
    }

    #[test]
    fn hsc_pcc_interior_shares_halves() {
        let g = CouplingGraph::build(&EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), 5, 8)).unwrap();
        let f = g.factor_at(4, Side::Folded).unwrap();
        let e = edges_into(&g, f, 0);
        assert_eq!(e.len(), 2);
        assert!(e.iter().all(|e| e.fraction == 0.5));
        let mut offs: Vec<i64> = e.iter().map(|e| e.offset.unwrap()).collect();
        offs.sort();
        assert_eq!(offs, vec![-1, 1]);
    }

    #[test]
    fn uncoupled_single_sided_has_no_cross_time_edges() {
        let spec = EnsembleSpec::single_sided(GeneratorSpec::g15_13(), vec![1.0, 0.0], 5, 8);
        let g = CouplingGraph::build(&spec).unwrap();
        assert!(g.edges().iter().all(|e| e.offset.unwrap_or(0) == 0));
    }

    #[test]
    fn hsc_bcc_delta2_ports() {
        let g = CouplingGraph::build(&EnsembleSpec::hsc_bcc(g2(), 2, 6, 8)).unwrap();
        let f = g.factor_at(5, Side::Folded).unwrap();
        let info = edges_into(&g, f, 0);
        let mut offs: Vec<(i64, f64)> = info.iter().map(|e| (e.offset.unwrap(), e.fraction)).collect();
        offs.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(offs, vec![(-1, 0.5), (1, 0.5)]);
        let p2 = edges_into(&g, f, 1);
        assert_eq!(p2.len(), 1);
        assert_eq!(p2[0].offset, Some(-2));
        assert_eq!(p2[0].class, EdgeClass::Info2);
        let par = edges_into(&g, f, 2);
        assert_eq!(par[0].offset, Some(2));
    }

    #[test]
    fn type1_parity_crosses_sides() {
        let g = CouplingGraph::build(&EnsembleSpec::type1(g2(), 4, 8)).unwrap();
        let u2 = g.factor_at(2, Side::Upper).unwrap();
        let l1 = g.factor_at(1, Side::Lower).unwrap();
        let e = edges_into(&g, u2, 1);
        assert_eq!(e[0].partner, Some(l1));
    }

    #[test]
    fn hsc_bcc_termination_counts() {
        let g = CouplingGraph::build(&EnsembleSpec::hsc_bcc(g2(), 2, 50, 100)).unwrap();
        assert_eq!(g.free_info_bits(), 100 * 49);
    }

    #[test]
    fn two_sided_lengths_remainder_goes_to_center() {
        assert_eq!(two_sided_lengths(1, 10), vec![2, 6, 2]);
        assert_eq!(two_sided_lengths(2, 18), vec![2, 4, 6, 4, 2]);
        assert_eq!(two_sided_lengths(1, 8).iter().sum::<usize>(), 8);
    }

    #[test]
    fn every_piece_has_at_most_two_occurrences() {
        for kind in EnsembleKind::ALL {
            let g = match kind.component_inputs() {
                1 => GeneratorSpec::g15_13(),
                _ => g2(),
            };
            let spec = match kind {
                EnsembleKind::HscBcc => EnsembleSpec::hsc_bcc(g, 3, 6, 12),
                _ => EnsembleSpec::new(kind, 1, g, 6, 12),
            };
            let graph = CouplingGraph::build(&spec).unwrap();
            for p in &graph.pieces {
                assert!(!p.occurrences.is_empty() && p.occurrences.len() <= 2, "{kind}");
            }
        }
    }
}
