//! Component-code transfer functions on the erasure channel.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::subset::SubsetTables;
use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Smallest Monte-Carlo section length accepted by threshold workflows.
pub const MIN_MC_SAMPLES: usize = 10_000;

const MC_BATCHES: usize = 50;
/// Sections at either end excluded from Monte-Carlo statistics.
const BURN_IN: usize = 64;
const CACHE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferMode {
    /// One forward-backward pass over `samples` i.i.d. erased sections.
    MonteCarlo { samples: usize, seed: u64 },
    /// Stationary analysis of the state-set chains.
    ExactSubset,
}

impl std::fmt::Display for TransferMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransferMode::ExactSubset => write!(f, "exact"),
            TransferMode::MonteCarlo { samples, .. } => write!(f, "mc{samples}"),
        }
    }
}

/// A-priori erasure probabilities of one factor node: inputs then parity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferQuery {
    pub input_erasure: Vec<f64>,
    pub parity_erasure: f64,
}

impl TransferQuery {
    pub fn new(input_erasure: Vec<f64>, parity_erasure: f64) -> Self {
        TransferQuery { input_erasure, parity_erasure }
    }

    pub fn probs(&self) -> Vec<f64> {
        let mut v = self.input_erasure.clone();
        v.push(self.parity_erasure);
        v
    }
}

/// Extrinsic erasure probabilities per port, with Monte-Carlo standard
/// errors (zero in exact mode).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOutput {
    pub extrinsic: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Transfer-function evaluator bound to one trellis.
///
/// Monte-Carlo mode reuses the same uniforms for every call, so outputs are
/// monotone in the query probabilities and comparable across bisection
/// probes. Exact results are memoised on the bit patterns of the query.
#[derive(Debug)]
pub struct TransferFn {
    tables: SubsetTables,
    mode: TransferMode,
    uniforms: Vec<f32>,
    cache: RefCell<HashMap<[u64; 4], Vec<f64>>>,
}

impl TransferFn {
    pub fn new(trellis: &Trellis, mode: TransferMode) -> Result<Self> {
        let tables = SubsetTables::new(trellis)?;
        let ports = tables.num_ports();
        let uniforms = match mode {
            TransferMode::ExactSubset => Vec::new(),
            TransferMode::MonteCarlo { samples, seed } => {
                if samples == 0 {
                    return Err(Error::SampleSizeTooSmall(samples, 1));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..(samples + 2 * BURN_IN) * ports).map(|_| rng.gen::<f32>()).collect()
            }
        };
        Ok(TransferFn { tables, mode, uniforms, cache: RefCell::new(HashMap::new()) })
    }

    pub fn mode(&self) -> TransferMode {
        self.mode
    }

    pub fn num_ports(&self) -> usize {
        self.tables.num_ports()
    }

    pub fn tables(&self) -> &SubsetTables {
        &self.tables
    }

    fn check(&self, probs: &[f64]) -> Result<()> {
        if probs.len() != self.num_ports() {
            return Err(Error::LengthMismatch { expected: self.num_ports(), got: probs.len() });
        }
        match probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            Some(&p) => Err(Error::InvalidProbability(p)),
            None => Ok(()),
        }
    }

    /// Extrinsic erasure probabilities only.
    pub fn eval(&self, probs: &[f64]) -> Result<Vec<f64>> {
        self.check(probs)?;
        let mut key = [u64::MAX; 4];
        let cacheable = probs.len() <= 4;
        if cacheable {
            for (k, p) in key.iter_mut().zip(probs) {
                *k = p.to_bits();
            }
            if let Some(v) = self.cache.borrow().get(&key) {
                return Ok(v.clone());
            }
        }
        let out = match self.mode {
            TransferMode::ExactSubset => self.tables.exact_transfer(probs)?,
            TransferMode::MonteCarlo { .. } => self.monte_carlo(probs).extrinsic,
        };
        if cacheable {
            let mut c = self.cache.borrow_mut();
            if c.len() >= CACHE_LIMIT {
                c.clear();
            }
            c.insert(key, out.clone());
        }
        Ok(out)
    }

    /// Full evaluation including standard errors.
    pub fn eval_with_error(&self, probs: &[f64]) -> Result<TransferOutput> {
        self.check(probs)?;
        Ok(match self.mode {
            TransferMode::ExactSubset => {
                let extrinsic = self.tables.exact_transfer(probs)?;
                let std_err = vec![0.0; extrinsic.len()];
                TransferOutput { extrinsic, std_err }
            }
            TransferMode::MonteCarlo { .. } => self.monte_carlo(probs),
        })
    }

    fn monte_carlo(&self, probs: &[f64]) -> TransferOutput {
        let ports = self.num_ports();
        let n = self.uniforms.len() / ports - 2 * BURN_IN;
        let pats: Vec<usize> = self
            .uniforms
            .chunks_exact(ports)
            .map(|u| u.iter().zip(probs).enumerate().fold(0, |acc, (i, (&x, &p))| acc | (usize::from((x as f64) < p) << i)))
            .collect();
        let known: Vec<Vec<bool>> = self
            .tables
            .decode_patterns(&pats, false)
            .into_iter()
            .map(|k| k[BURN_IN..BURN_IN + n].to_vec())
            .collect();
        // batch means give an honest error bar for the correlated outputs
        let batches = MC_BATCHES.min(n);
        let mut extrinsic = Vec::with_capacity(ports);
        let mut std_err = Vec::with_capacity(ports);
        for k in &known {
            let total = k.iter().filter(|&&x| !x).count() as f64 / n as f64;
            let means: Vec<f64> = (0..batches)
                .map(|b| {
                    let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
                    k[lo..hi].iter().filter(|&&x| !x).count() as f64 / (hi - lo) as f64
                })
                .collect();
            let var = if batches > 1 {
                means.iter().map(|m| (m - total).powi(2)).sum::<f64>() / (batches - 1) as f64 / batches as f64
            } else {
                total * (1.0 - total) / n as f64
            };
            extrinsic.push(total);
            std_err.push(var.sqrt());
        }
        TransferOutput { extrinsic, std_err }
    }
}

/// One-shot transfer evaluation.
pub fn erasure_transfer(trellis: &Trellis, query: &TransferQuery, mode: TransferMode) -> Result<TransferOutput> {
    TransferFn::new(trellis, mode)?.eval_with_error(&query.probs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::GeneratorSpec;

    fn t457() -> Trellis {
        Trellis::new(&GeneratorSpec::g457()).unwrap()
    }

    #[test]
    fn extremes() {
        for mode in [TransferMode::ExactSubset, TransferMode::MonteCarlo { samples: 2000, seed: 1 }] {
            let z = erasure_transfer(&t457(), &TransferQuery::new(vec![0.0, 0.0], 0.0), mode).unwrap();
            assert!(z.extrinsic.iter().all(|&x| x == 0.0));
            let o = erasure_transfer(&t457(), &TransferQuery::new(vec![1.0, 1.0], 1.0), mode).unwrap();
            assert!(o.extrinsic.iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn monte_carlo_matches_exact_at_half() {
        let q = TransferQuery::new(vec![0.5, 0.5], 0.5);
        let ex = erasure_transfer(&t457(), &q, TransferMode::ExactSubset).unwrap();
        let mc = erasure_transfer(&t457(), &q, TransferMode::MonteCarlo { samples: 1_000_000, seed: 7 }).unwrap();
        for i in 0..3 {
            let d = (ex.extrinsic[i] - mc.extrinsic[i]).abs();
            assert!(d <= 3.0 * mc.std_err[i], "port {i}: {} vs {} (se {})", ex.extrinsic[i], mc.extrinsic[i], mc.std_err[i]);
        }
    }

    #[test]
    fn cache_returns_same_values() {
        let f = TransferFn::new(&t457(), TransferMode::ExactSubset).unwrap();
        let a = f.eval(&[0.3, 0.4, 0.5]).unwrap();
        let b = f.eval(&[0.3, 0.4, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_queries() {
        let f = TransferFn::new(&t457(), TransferMode::ExactSubset).unwrap();
        assert!(f.eval(&[0.3, 0.4]).is_err());
        assert!(f.eval(&[0.3, 1.4, 0.0]).is_err());
    }
}
