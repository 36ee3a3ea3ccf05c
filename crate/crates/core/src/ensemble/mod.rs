//! Coupled-chain ensembles: ensemble descriptions, coupling graphs, encoding,
//! rates and puncturing.

mod frame;
mod graph;
mod interleaver;

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

pub use frame::{encode_chain, puncture, retained_fraction, ChainEncoder, CoupledFrame, PortLayout};
pub use graph::{
    CouplingGraph, Edge, EdgeClass, FactorNode, Observation, Occurrence, Piece, PieceKind, Port,
    Segment, Side,
};
pub use interleaver::{InterleaverRequirement, InterleaverSet, Permutation};

use crate::error::{Error, Result};
use crate::trellis::GeneratorSpec;

/// Exact rational used for code rates and coupling fractions.
pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Type1Bcc,
    Type2Bcc,
    ScPcc,
    SingleSidedScPcc,
    HscPcc,
    HscBcc,
    /// Type-1 parity coupling combined with half information coupling.
    ScBccVariant,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 7] = [
        EnsembleKind::Type1Bcc,
        EnsembleKind::Type2Bcc,
        EnsembleKind::ScPcc,
        EnsembleKind::SingleSidedScPcc,
        EnsembleKind::HscPcc,
        EnsembleKind::HscBcc,
        EnsembleKind::ScBccVariant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Type1Bcc => "type1-bcc",
            EnsembleKind::Type2Bcc => "type2-bcc",
            EnsembleKind::ScPcc => "sc-pcc",
            EnsembleKind::SingleSidedScPcc => "single-sided-sc-pcc",
            EnsembleKind::HscPcc => "hsc-pcc",
            EnsembleKind::HscBcc => "hsc-bcc",
            EnsembleKind::ScBccVariant => "sc-bcc-variant",
        }
    }

    /// Whether the chain is indexed by half instants with one factor each.
    pub fn is_folded(self) -> bool {
        matches!(self, EnsembleKind::HscPcc | EnsembleKind::HscBcc)
    }

    /// Number of component-code inputs the ensemble needs.
    pub fn component_inputs(self) -> usize {
        match self {
            EnsembleKind::ScPcc | EnsembleKind::SingleSidedScPcc | EnsembleKind::HscPcc => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        EnsembleKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .or(match norm.as_str() {
                "type1" | "bcc1" => Some(EnsembleKind::Type1Bcc),
                "type2" | "bcc2" => Some(EnsembleKind::Type2Bcc),
                "single-sided" => Some(EnsembleKind::SingleSidedScPcc),
                "variant" => Some(EnsembleKind::ScBccVariant),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidEnsemble(format!("unknown ensemble kind '{s}'")))
    }
}

/// Full description of a coupled ensemble at a given chain length.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    /// Coupling memory `m`, or the delay factor `delta` for HSC-BCC.
    pub coupling: usize,
    /// Segment fractions `lambda_0..lambda_m` (single-sided SC-PCC only).
    pub lambda: Vec<f64>,
    pub generator: GeneratorSpec,
    /// Coupling length `T` in full time instants.
    pub coupling_length: usize,
    /// Information bits per full time instant, `K`.
    pub block_len: usize,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, coupling: usize, generator: GeneratorSpec, t: usize, k: usize) -> Self {
        let lambda = match kind {
            EnsembleKind::SingleSidedScPcc => vec![1.0 / (coupling as f64 + 1.0); coupling + 1],
            _ => Vec::new(),
        };
        EnsembleSpec { kind, coupling, lambda, generator, coupling_length: t, block_len: k }
    }

    pub fn type1(g: GeneratorSpec, t: usize, k: usize) -> Self {
        Self::new(EnsembleKind::Type1Bcc, 1, g, t, k)
    }

    pub fn type2(g: GeneratorSpec, m: usize, t: usize, k: usize) -> Self {
        Self::new(EnsembleKind::Type2Bcc, m, g, t, k)
    }

    pub fn sc_pcc(g: GeneratorSpec, m: usize, t: usize, k: usize) -> Self {
        Self::new(EnsembleKind::ScPcc, m, g, t, k)
    }

    pub fn single_sided(g: GeneratorSpec, lambda: Vec<f64>, t: usize, k: usize) -> Self {
        let m = lambda.len().saturating_sub(1);
        EnsembleSpec { kind: EnsembleKind::SingleSidedScPcc, coupling: m, lambda, generator: g, coupling_length: t, block_len: k }
    }

    pub fn hsc_pcc(g: GeneratorSpec, t: usize, k: usize) -> Self {
        Self::new(EnsembleKind::HscPcc, 1, g, t, k)
    }

    pub fn hsc_bcc(g: GeneratorSpec, delta: usize, t: usize, k: usize) -> Self {
        Self::new(EnsembleKind::HscBcc, delta, g, t, k)
    }

    pub fn variant(g: GeneratorSpec, t: usize, k: usize) -> Self {
        Self::new(EnsembleKind::ScBccVariant, 1, g, t, k)
    }

    pub fn with_length(&self, t: usize, k: usize) -> Self {
        EnsembleSpec { coupling_length: t, block_len: k, ..self.clone() }
    }

    /// Coupling memory of the (unfolded) turbo form.
    pub fn coupling_memory(&self) -> usize {
        match self.kind {
            EnsembleKind::HscBcc => self.coupling.div_ceil(2),
            EnsembleKind::HscPcc | EnsembleKind::ScBccVariant => 1,
            _ => self.coupling,
        }
    }

    /// Number of native chain positions: half instants for folded chains.
    pub fn num_positions(&self) -> usize {
        if self.kind.is_folded() {
            2 * self.coupling_length
        } else {
            self.coupling_length
        }
    }

    /// Smallest window that covers one coupling span, in native positions.
    pub fn coupling_span(&self) -> usize {
        match self.kind {
            EnsembleKind::HscBcc => self.coupling,
            EnsembleKind::HscPcc => 2,
            _ => self.coupling + 1,
        }
    }

    /// Smallest window, in time instants, that covers one coupling span.
    pub fn min_window(&self) -> usize {
        if self.kind.is_folded() {
            self.coupling_span().div_ceil(2)
        } else {
            self.coupling_span()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEnsemble(m));
        if self.generator.num_inputs != self.kind.component_inputs() {
            return bad(format!(
                "{} needs a component code with {} input(s), {} has {}",
                self.kind,
                self.kind.component_inputs(),
                self.generator.label,
                self.generator.num_inputs
            ));
        }
        if self.coupling_length == 0 || self.block_len == 0 {
            return bad("coupling length and block length must be positive".into());
        }
        match self.kind {
            EnsembleKind::HscBcc => {
                if self.coupling < 2 {
                    return bad("HSC-BCC needs a delay factor of at least 2".into());
                }
                if self.coupling_length < self.coupling {
                    return bad(format!(
                        "T = {} is too short to terminate a delay factor of {}",
                        self.coupling_length, self.coupling
                    ));
                }
            }
            EnsembleKind::HscPcc | EnsembleKind::ScBccVariant => {
                if self.coupling != 1 {
                    return bad(format!("{} has coupling memory 1", self.kind));
                }
            }
            EnsembleKind::SingleSidedScPcc => {
                if self.lambda.len() < 2 {
                    return bad("single-sided SC-PCC needs lambda_0..lambda_m with m >= 1".into());
                }
                if self.lambda.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
                    return bad("lambda entries must lie in [0, 1]".into());
                }
                let sum: f64 = self.lambda.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return bad(format!("lambda sums to {sum}, expected 1"));
                }
            }
            _ => {
                if self.coupling == 0 {
                    return bad("coupling memory must be at least 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Average segment ratios of the original SC-PCC construction, indexed by
/// `i + m` for `i` in `-m..=m`, together with the average coupling ratio.
pub fn lambda_stats(m: usize) -> (Vec<Rational>, Rational) {
    let m64 = m as u64;
    let denom = (m64 + 1) * (m64 + 1);
    let per: Vec<Rational> = (-(m as i64)..=m as i64)
        .map(|i| Rational::new(m64 - i.unsigned_abs() + 1, denom))
        .collect();
    (per, Rational::new(m64, m64 + 1))
}

/// Unpunctured code rate of the terminated chain, as an exact rational.
pub fn code_rate(spec: &EnsembleSpec) -> Result<Rational> {
    let graph = CouplingGraph::build(spec)?;
    Ok(graph.base_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_stats_m1() {
        let (l, avg) = lambda_stats(1);
        assert_eq!(l, vec![Rational::new(1, 4), Rational::new(1, 2), Rational::new(1, 4)]);
        assert_eq!(avg, Rational::new(1, 2));
    }

    #[test]
    fn lambda_stats_m2() {
        let (l, avg) = lambda_stats(2);
        assert_eq!(l[2], Rational::new(3, 9));
        assert_eq!(l[3], Rational::new(2, 9));
        assert_eq!(l[4], Rational::new(1, 9));
        assert_eq!(l[0], l[4]);
        assert_eq!(l[1], l[3]);
        assert_eq!(avg, Rational::new(2, 3));
    }

    #[test]
    fn lambda_stats_sum_to_one() {
        for m in 1..12 {
            let (l, _) = lambda_stats(m);
            assert_eq!(l.into_iter().sum::<Rational>(), Rational::from_integer(1));
        }
    }

    #[test]
    fn kind_parsing() {
        for k in EnsembleKind::ALL {
            assert_eq!(k.name().parse::<EnsembleKind>().unwrap(), k);
        }
        assert!("nope".parse::<EnsembleKind>().is_err());
    }

    #[test]
    fn rate_formulas() {
        let g = GeneratorSpec::g537();
        let r = code_rate(&EnsembleSpec::hsc_pcc(GeneratorSpec::g15_13(), 50, 100)).unwrap();
        assert_eq!(r, Rational::new(495, 1495));
        for delta in 2..=4u64 {
            let r = code_rate(&EnsembleSpec::hsc_bcc(g.clone(), delta as usize, 50, 100)).unwrap();
            assert_eq!(r, Rational::new(100 - delta, 300 - delta));
        }
        let r = code_rate(&EnsembleSpec::type1(GeneratorSpec::g457(), 20, 64)).unwrap();
        assert_eq!(r, Rational::new(1, 3));
    }

    #[test]
    fn rate_tends_to_one_third() {
        let r = code_rate(&EnsembleSpec::hsc_bcc(GeneratorSpec::g537(), 2, 5000, 4)).unwrap();
        let x = *r.numer() as f64 / *r.denom() as f64;
        assert!((x - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn validation() {
        let g = GeneratorSpec::g537();
        assert!(EnsembleSpec::hsc_bcc(g.clone(), 1, 10, 8).validate().is_err());
        assert!(EnsembleSpec::hsc_bcc(g.clone(), 4, 3, 8).validate().is_err());
        assert!(EnsembleSpec::hsc_pcc(g.clone(), 10, 8).validate().is_err());
        let bad = EnsembleSpec::single_sided(GeneratorSpec::g15_13(), vec![0.7, 0.5], 10, 8);
        assert!(bad.validate().is_err());
        assert!(code_rate(&EnsembleSpec::hsc_bcc(g, 3, 2, 8)).is_err());
    }
}
