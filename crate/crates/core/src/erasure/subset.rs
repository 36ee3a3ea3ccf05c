//! Erasure-domain forward-backward recursion over sets of trellis states.
//!
//! On the erasure channel the all-zero codeword may be assumed, so a bit is
//! either known to be 0 or erased. The forward recursion tracks the set of
//! states consistent with the past observations, the backward recursion the
//! set of states from which the future observations can be met. A bit's
//! extrinsic value is known iff every transition compatible with both sets
//! and with the other observations of its own trellis section agrees on it.
//!
//! Observation patterns pack one flag per port (`k` inputs then parity) into
//! an integer; a set bit means erased.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Largest trellis handled by exact subset tracking.
pub const MAX_SUBSET_STATES: usize = 16;

const SNAP: f64 = 1e-20;

/// Precomputed set-transition and extrinsic tables for one trellis.
#[derive(Debug, Clone)]
pub struct SubsetTables {
    num_ports: usize,
    num_patterns: usize,
    fwd_sets: Vec<u32>,
    fwd_next: Vec<u16>,
    fwd_full: usize,
    fwd_zero: usize,
    bwd_sets: Vec<u32>,
    bwd_next: Vec<u16>,
    bwd_full: usize,
    /// `ext[port][(a * nb + b) * num_patterns + pattern]` is true when the
    /// port's bit stays erased. The port's own flag in `pattern` is ignored.
    ext: Vec<Vec<bool>>,
    fwd_class: Vec<usize>,
    bwd_class: Vec<usize>,
}

fn enumerate_sets(
    starts: &[u32],
    num_patterns: usize,
    step: impl Fn(u32, usize) -> u32,
) -> (Vec<u32>, Vec<u16>) {
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut sets = Vec::new();
    for &s in starts {
        if !index.contains_key(&s) {
            index.insert(s, sets.len());
            sets.push(s);
        }
    }
    let mut next = Vec::new();
    let mut i = 0;
    while i < sets.len() {
        for pat in 0..num_patterns {
            let n = step(sets[i], pat);
            let id = *index.entry(n).or_insert_with(|| {
                sets.push(n);
                sets.len() - 1
            });
            next.push(id as u16);
        }
        i += 1;
    }
    (sets, next)
}

/// Indices of the closed class reached from `start` when every pattern has
/// positive probability; `None` if more than one closed class is reachable.
fn recurrent_class(n: usize, num_patterns: usize, next: &[u16], start: usize) -> Option<Vec<usize>> {
    let edges = |a: usize| (0..num_patterns).map(move |p| next[a * num_patterns + p] as usize);
    let reach_from = |a: usize| {
        let mut seen = vec![false; n];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(x) = stack.pop() {
            for y in edges(x) {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    };
    let from_start = reach_from(start);
    let reach: Vec<Vec<bool>> = (0..n).map(reach_from).collect();
    let recurrent: Vec<usize> = (0..n)
        .filter(|&r| from_start[r] && (0..n).all(|x| !reach[r][x] || reach[x][r]))
        .collect();
    let first = *recurrent.first()?;
    if recurrent.iter().all(|&r| reach[first][r]) {
        Some(recurrent)
    } else {
        None
    }
}

impl SubsetTables {
    pub fn new(trellis: &Trellis) -> Result<Self> {
        let ns = trellis.num_states();
        if ns > MAX_SUBSET_STATES {
            return Err(Error::TrellisTooLarge(ns));
        }
        let k = trellis.num_inputs();
        let nt = trellis.num_tuples();
        let num_ports = k + 1;
        let num_patterns = 1usize << num_ports;
        let full: u32 = ((1u64 << ns) - 1) as u32;

        // Tuples compatible with a pattern, ignoring port `skip`.
        let allowed = |s: usize, u: usize, pat: usize, skip: usize| -> bool {
            for i in 0..k {
                if i != skip && pat & (1 << i) == 0 && (u >> i) & 1 == 1 {
                    return false;
                }
            }
            !(skip != k && pat & (1 << k) == 0 && trellis.parity(s, u) == 1)
        };

        let fwd_step = |set: u32, pat: usize| -> u32 {
            let mut out = 0u32;
            for s in (0..ns).filter(|&s| set & (1 << s) != 0) {
                for u in 0..nt {
                    if allowed(s, u, pat, usize::MAX) {
                        out |= 1 << trellis.next_state(s, u);
                    }
                }
            }
            out
        };
        let bwd_step = |set: u32, pat: usize| -> u32 {
            let mut out = 0u32;
            for s in 0..ns {
                for u in 0..nt {
                    if allowed(s, u, pat, usize::MAX) && set & (1 << trellis.next_state(s, u)) != 0 {
                        out |= 1 << s;
                        break;
                    }
                }
            }
            out
        };

        let (fwd_sets, fwd_next) = enumerate_sets(&[full, 1], num_patterns, fwd_step);
        let (bwd_sets, bwd_next) = enumerate_sets(&[full], num_patterns, bwd_step);
        let fwd_full = 0;
        let fwd_zero = 1.min(fwd_sets.len() - 1);
        let bwd_full = 0;

        let nf = fwd_sets.len();
        let nb = bwd_sets.len();
        let mut ext = vec![vec![false; nf * nb * num_patterns]; num_ports];
        for (port, table) in ext.iter_mut().enumerate() {
            for (a, &aset) in fwd_sets.iter().enumerate() {
                for (b, &bset) in bwd_sets.iter().enumerate() {
                    for pat in 0..num_patterns {
                        let mut erased = false;
                        'search: for s in (0..ns).filter(|&s| aset & (1 << s) != 0) {
                            for u in 0..nt {
                                if !allowed(s, u, pat, port)
                                    || bset & (1 << trellis.next_state(s, u)) == 0
                                {
                                    continue;
                                }
                                let bit = if port < k { (u >> port) & 1 } else { trellis.parity(s, u) as usize };
                                if bit == 1 {
                                    erased = true;
                                    break 'search;
                                }
                            }
                        }
                        table[(a * nb + b) * num_patterns + pat] = erased;
                    }
                }
            }
        }

        let fwd_class = recurrent_class(nf, num_patterns, &fwd_next, fwd_full)
            .ok_or(Error::NonConvergent(0))?;
        let bwd_class = recurrent_class(nb, num_patterns, &bwd_next, bwd_full)
            .ok_or(Error::NonConvergent(0))?;

        Ok(SubsetTables {
            num_ports,
            num_patterns,
            fwd_sets,
            fwd_next,
            fwd_full,
            fwd_zero,
            bwd_sets,
            bwd_next,
            bwd_full,
            ext,
            fwd_class,
            bwd_class,
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn num_forward_sets(&self) -> usize {
        self.fwd_sets.len()
    }

    pub fn num_backward_sets(&self) -> usize {
        self.bwd_sets.len()
    }

    #[inline]
    fn ext_erased(&self, port: usize, a: usize, b: usize, pat: usize) -> bool {
        self.ext[port][(a * self.bwd_sets.len() + b) * self.num_patterns + pat]
    }

    /// Runs the erasure forward-backward recursion on one concrete block.
    ///
    /// `known[port][n]` tells whether the port's bit at position `n` is known
    /// from the channel or from a-priori messages. Returns, per port, whether
    /// the extrinsic output is known. With `pin_start` the encoder is assumed
    /// to start in state 0.
    pub fn decode_block<S: AsRef<[bool]>>(&self, known: &[S], pin_start: bool) -> Result<Vec<Vec<bool>>> {
        if known.len() != self.num_ports {
            return Err(Error::LengthMismatch { expected: self.num_ports, got: known.len() });
        }
        let n = known[0].as_ref().len();
        for k in known {
            if k.as_ref().len() != n {
                return Err(Error::LengthMismatch { expected: n, got: k.as_ref().len() });
            }
        }
        let pats: Vec<usize> = (0..n)
            .map(|pos| {
                known
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (p, k)| if k.as_ref()[pos] { acc } else { acc | (1 << p) })
            })
            .collect();
        Ok(self.decode_patterns(&pats, pin_start))
    }

    /// Same as [`decode_block`](Self::decode_block) on precomputed patterns.
    pub fn decode_patterns(&self, pats: &[usize], pin_start: bool) -> Vec<Vec<bool>> {
        let n = pats.len();
        let np = self.num_patterns;
        let mut fwd = Vec::with_capacity(n + 1);
        let mut a = if pin_start { self.fwd_zero } else { self.fwd_full };
        fwd.push(a);
        for &p in pats {
            a = self.fwd_next[a * np + p] as usize;
            fwd.push(a);
        }
        let mut bwd = vec![self.bwd_full; n + 1];
        for pos in (0..n).rev() {
            bwd[pos] = self.bwd_next[bwd[pos + 1] * np + pats[pos]] as usize;
        }
        (0..self.num_ports)
            .map(|port| {
                (0..n)
                    .map(|pos| !self.ext_erased(port, fwd[pos], bwd[pos + 1], pats[pos]))
                    .collect()
            })
            .collect()
    }

    fn pattern_weights(&self, probs: &[f64]) -> Vec<f64> {
        (0..self.num_patterns)
            .map(|pat| {
                probs
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| if pat & (1 << i) != 0 { p } else { 1.0 - p })
                    .product()
            })
            .collect()
    }

    /// Exact stationary extrinsic erasure probabilities for i.i.d. port
    /// erasures with the given per-port probabilities (`k` inputs, parity).
    pub fn exact_transfer(&self, probs: &[f64]) -> Result<Vec<f64>> {
        if probs.len() != self.num_ports {
            return Err(Error::LengthMismatch { expected: self.num_ports, got: probs.len() });
        }
        for &p in probs {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::InvalidProbability(p));
            }
        }
        // vanishing probabilities only cause underflow in the elimination
        let snapped: Vec<f64> = probs.iter().map(|&p| if p < SNAP { 0.0 } else { p }).collect();
        let probs = &snapped[..];
        let w = self.pattern_weights(probs);
        let interior = probs.iter().all(|&p| p > 0.0 && p < 1.0);
        let pi_f = stationary(
            self.fwd_sets.len(),
            self.num_patterns,
            &self.fwd_next,
            &w,
            self.fwd_full,
            interior.then_some(self.fwd_class.as_slice()),
        )?;
        let pi_b = stationary(
            self.bwd_sets.len(),
            self.num_patterns,
            &self.bwd_next,
            &w,
            self.bwd_full,
            interior.then_some(self.bwd_class.as_slice()),
        )?;

        let nb = self.bwd_sets.len();
        let mut out = vec![0.0; self.num_ports];
        for (port, o) in out.iter_mut().enumerate() {
            let own = 1usize << port;
            // weights of the other ports' flags, with this port forced erased
            let pw: Vec<(usize, f64)> = (0..self.num_patterns)
                .filter(|pat| pat & own != 0)
                .map(|pat| {
                    let wt: f64 = probs
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != port)
                        .map(|(i, &p)| if pat & (1 << i) != 0 { p } else { 1.0 - p })
                        .product();
                    (pat, wt)
                })
                .filter(|&(_, wt)| wt > 0.0)
                .collect();
            let table = &self.ext[port];
            let mut acc = 0.0;
            for (a, &pa) in pi_f.iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (b, &pb) in pi_b.iter().enumerate() {
                    if pb == 0.0 {
                        continue;
                    }
                    let base = (a * nb + b) * self.num_patterns;
                    let s: f64 = pw.iter().filter(|&&(pat, _)| table[base + pat]).map(|&(_, wt)| wt).sum();
                    acc += pa * pb * s;
                }
            }
            *o = acc.clamp(0.0, 1.0);
        }
        Ok(out)
    }
}

/// Stationary distribution of the set chain started from `start`.
///
/// With `class` given (all pattern weights positive) the chain restricted to
/// that closed class is solved directly by Grassmann-Taksar-Heyman
/// elimination. Otherwise the support graph is analysed first and, if more
/// than one closed class can be reached, the distribution is obtained by
/// iterating from `start` to a fixed point.
fn stationary(
    n: usize,
    np: usize,
    next: &[u16],
    weights: &[f64],
    start: usize,
    class: Option<&[usize]>,
) -> Result<Vec<f64>> {
    let owned;
    let class = match class {
        Some(c) => c,
        None => {
            let support: Vec<usize> = (0..np).filter(|&p| weights[p] > 0.0).collect();
            let sub_next: Vec<u16> = (0..n)
                .flat_map(|a| support.iter().map(move |&p| next[a * np + p]))
                .collect();
            match recurrent_class(n, support.len(), &sub_next, start) {
                Some(c) => {
                    owned = c;
                    &owned
                }
                None => return power_iteration(n, np, next, weights, start),
            }
        }
    };
    let m = class.len();
    let mut pos = vec![usize::MAX; n];
    for (i, &c) in class.iter().enumerate() {
        pos[c] = i;
    }
    let mut p = vec![0.0f64; m * m];
    for (i, &a) in class.iter().enumerate() {
        for pat in 0..np {
            let w = weights[pat];
            if w == 0.0 {
                continue;
            }
            let j = pos[next[a * np + pat] as usize];
            debug_assert!(j != usize::MAX, "class is not closed");
            if j != usize::MAX {
                p[i * m + j] += w;
            }
        }
    }
    for k in (1..m).rev() {
        let s: f64 = (0..k).map(|j| p[k * m + j]).sum();
        if s <= 0.0 {
            return power_iteration(n, np, next, weights, start);
        }
        for i in 0..k {
            p[i * m + k] /= s;
        }
        for i in 0..k {
            let pik = p[i * m + k];
            if pik == 0.0 {
                continue;
            }
            for j in 0..k {
                p[i * m + j] += pik * p[k * m + j];
            }
        }
    }
    let mut pi_c = vec![0.0; m];
    pi_c[0] = 1.0;
    for k in 1..m {
        pi_c[k] = (0..k).map(|i| pi_c[i] * p[i * m + k]).sum();
    }
    let total: f64 = pi_c.iter().sum();
    let mut pi = vec![0.0; n];
    for (i, &c) in class.iter().enumerate() {
        pi[c] = pi_c[i] / total;
    }
    Ok(pi)
}

const POWER_MAX_ITERS: usize = 1_000_000;
const POWER_TOL: f64 = 1e-10;

fn power_iteration(n: usize, np: usize, next: &[u16], weights: &[f64], start: usize) -> Result<Vec<f64>> {
    let mut pi = vec![0.0; n];
    pi[start] = 1.0;
    let mut nxt = vec![0.0; n];
    for _ in 0..POWER_MAX_ITERS {
        nxt.iter_mut().for_each(|x| *x = 0.0);
        for a in 0..n {
            if pi[a] == 0.0 {
                continue;
            }
            for pat in 0..np {
                nxt[next[a * np + pat] as usize] += pi[a] * weights[pat];
            }
        }
        let diff: f64 = pi.iter().zip(&nxt).map(|(x, y)| (x - y).abs()).sum();
        std::mem::swap(&mut pi, &mut nxt);
        if diff < POWER_TOL {
            return Ok(pi);
        }
    }
    Err(Error::NonConvergent(POWER_MAX_ITERS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::GeneratorSpec;

    fn tables(g: GeneratorSpec) -> SubsetTables {
        SubsetTables::new(&Trellis::new(&g).unwrap()).unwrap()
    }

    #[test]
    fn reachable_sets_are_subspaces() {
        // With the all-zero codeword every consistent set is a linear subspace.
        let t = tables(GeneratorSpec::g457());
        assert_eq!(t.num_forward_sets(), 5);
        assert_eq!(t.num_backward_sets(), 5);
        let t = tables(GeneratorSpec::g15_13());
        assert_eq!(t.num_forward_sets(), 16);
    }

    #[test]
    fn extremes() {
        let t = tables(GeneratorSpec::g457());
        assert_eq!(t.exact_transfer(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(t.exact_transfer(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn known_inputs_with_partly_erased_parity() {
        // observed parities pin the state, after which known inputs keep it
        // pinned and every erased parity is resolved
        let t = tables(GeneratorSpec::g457());
        assert_eq!(t.exact_transfer(&[0.0, 0.0, 0.5]).unwrap(), vec![0.0; 3]);
        let out = t.exact_transfer(&[0.0, 0.5, 0.5]).unwrap();
        assert!(out.iter().all(|&x| x > 0.0 && x < 1.0), "{out:?}");
    }

    #[test]
    fn rejects_bad_probability() {
        let t = tables(GeneratorSpec::g457());
        assert!(t.exact_transfer(&[0.1, 1.5, 0.2]).is_err());
        assert!(t.exact_transfer(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn decode_block_all_known() {
        let t = tables(GeneratorSpec::g537());
        let known = vec![vec![true; 20]; 3];
        // an input that does not reach the parity of its own section is only
        // seen through later sections, so the open end may stay erased
        let out = t.decode_block(&known, true).unwrap();
        assert!(out.iter().all(|p| p[..19].iter().all(|&k| k)), "{out:?}");
        // a free-running start leaves only the first sections ambiguous
        let free = t.decode_block(&known, false).unwrap();
        assert!(free.iter().all(|p| p[4..19].iter().all(|&k| k)));
    }

    #[test]
    fn pinned_start_resolves_parity() {
        let t = tables(GeneratorSpec::g457());
        let known = vec![vec![true; 10], vec![true; 10], vec![false; 10]];
        let free = t.decode_block(&known, false).unwrap();
        let pinned = t.decode_block(&known, true).unwrap();
        assert!(!free[2][0]);
        assert!(pinned[2].iter().all(|&k| k));
    }
}
