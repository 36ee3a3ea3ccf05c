//! Soft-input soft-output decoding of one component code (log-MAP BCJR in
//! single precision).
//!
//! LLRs are `ln P(bit = 0) / P(bit = 1)`. Every port (inputs, then parity)
//! takes one combined observation per position: channel plus a-priori. The
//! extrinsic output of a port excludes that port's own observation at the
//! same position, computed from the other ports' terms directly so the
//! exclusion is exact.

use crate::error::{Error, Result};
use crate::trellis::Trellis;

/// Stand-in for minus infinity in state metrics.
pub const NEG_INF: f32 = -1e30;

/// Most ports a component code may have.
pub const MAX_PORTS: usize = 4;

/// Most trellis states the decoder supports.
pub const MAX_STATES: usize = 64;

/// LLR magnitude used for bits known to be zero.
pub const KNOWN_LLR: f32 = 127.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxStar {
    /// `max(a, b) + ln(1 + e^-|a-b|)`.
    Exact,
    /// `max(a, b) + max(0, offset - slope |a-b|)`.
    Linear { offset: f32, slope: f32 },
}

impl MaxStar {
    #[allow(clippy::approx_constant)]
    pub const LINEAR: MaxStar = MaxStar::Linear { offset: 0.6931, slope: 0.25 };

    #[inline(always)]
    pub fn apply(self, a: f32, b: f32) -> f32 {
        match self {
            MaxStar::Exact => ExactCorr.apply(a, b),
            MaxStar::Linear { offset, slope } => LinearCorr { offset, slope }.apply(a, b),
        }
    }
}

/// Correction term of one max* flavour, resolved at compile time inside the
/// recursion.
trait Corr: Copy {
    fn corr(self, d: f32) -> f32;

    #[inline(always)]
    fn apply(self, a: f32, b: f32) -> f32 {
        let m = if a > b { a } else { b };
        m + self.corr((a - b).abs())
    }
}

#[derive(Clone, Copy)]
struct ExactCorr;

impl Corr for ExactCorr {
    #[inline(always)]
    fn corr(self, d: f32) -> f32 {
        (-d).exp().ln_1p()
    }
}

#[derive(Clone, Copy)]
struct LinearCorr {
    offset: f32,
    slope: f32,
}

impl Corr for LinearCorr {
    #[inline(always)]
    fn corr(self, d: f32) -> f32 {
        let c = self.offset - self.slope * d;
        if c > 0.0 {
            c
        } else {
            0.0
        }
    }
}

impl Default for MaxStar {
    fn default() -> Self {
        MaxStar::LINEAR
    }
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    from: u16,
    to: u16,
    /// Port bits, bit `p` set when port `p` carries a one.
    bits: u8,
}

/// Reusable decoder for one trellis; holds the metric buffers.
#[derive(Debug, Clone)]
pub struct BcjrDecoder {
    num_states: usize,
    num_ports: usize,
    branches: Vec<Branch>,
    pub max_star: MaxStar,
    alpha: Vec<f32>,
    gamma: Vec<f32>,
}

impl BcjrDecoder {
    pub fn new(trellis: &Trellis, max_star: MaxStar) -> Result<Self> {
        let k = trellis.num_inputs();
        if trellis.num_states() > MAX_STATES || k + 1 > MAX_PORTS {
            return Err(Error::TrellisTooLarge(trellis.num_states()));
        }
        let mut branches = Vec::new();
        for s in 0..trellis.num_states() {
            for u in 0..trellis.num_tuples() {
                let bits = (u as u8) | (trellis.parity(s, u) << k);
                branches.push(Branch { from: s as u16, to: trellis.next_state(s, u) as u16, bits });
            }
        }
        Ok(BcjrDecoder {
            num_states: trellis.num_states(),
            num_ports: k + 1,
            branches,
            max_star,
            alpha: Vec::new(),
            gamma: Vec::new(),
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    fn check<S: AsRef<[f32]>>(&self, obs: &[S]) -> Result<usize> {
        if obs.len() != self.num_ports {
            return Err(Error::LengthMismatch { expected: self.num_ports, got: obs.len() });
        }
        let n = obs[0].as_ref().len();
        for o in obs {
            let o = o.as_ref();
            if o.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: o.len() });
            }
            if let Some(i) = o.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(n)
    }

    /// Decodes one block. `obs[p][n]` is the channel plus a-priori LLR of
    /// port `p` at position `n`. Writes extrinsic LLRs into `ext` and, when
    /// given, a-posteriori LLRs into `app`. With `pin_start` the encoder is
    /// taken to start in state 0; otherwise both ends are free.
    pub fn decode<S: AsRef<[f32]>>(
        &mut self,
        obs: &[S],
        pin_start: bool,
        ext: &mut [Vec<f32>],
        mut app: Option<&mut [Vec<f32>]>,
    ) -> Result<()> {
        let n = self.check(obs)?;
        let np = self.num_ports;
        let ms = self.max_star;
        if ext.len() != np {
            return Err(Error::LengthMismatch { expected: np, got: ext.len() });
        }
        for e in ext.iter_mut() {
            e.resize(n, 0.0);
        }
        if let Some(a) = app.as_deref_mut() {
            for v in a.iter_mut() {
                v.resize(n, 0.0);
            }
        }

        // per step: metric of every port-bit pattern, in full and with one
        // port left out; layout [n][(np + 1) * npat], full table last
        let npat = 1usize << np;
        let stride = (np + 1) * npat;
        self.gamma.resize(n * stride, 0.0);
        for i in 0..n {
            let g = &mut self.gamma[i * stride..(i + 1) * stride];
            let h: [f32; MAX_PORTS] = std::array::from_fn(|p| if p < np { 0.5 * obs[p].as_ref()[i] } else { 0.0 });
            for pat in 0..npat {
                let term = |p: usize| if pat >> p & 1 == 0 { h[p] } else { -h[p] };
                g[np * npat + pat] = (0..np).map(term).sum();
                for p in 0..np {
                    g[p * npat + pat] = (0..np).filter(|&q| q != p).map(term).sum();
                }
            }
        }

        let (ns, nb) = (self.num_states, self.branches.len());
        let args = Recursion {
            branches: &self.branches,
            gamma: &self.gamma,
            alpha: &mut self.alpha,
        };
        match (ms, ns, np, nb) {
            (MaxStar::Linear { offset, slope }, 4, 3, 16) => recurse(args, LinearCorr { offset, slope }, 4, 3, n, pin_start, ext, app),
            (MaxStar::Linear { offset, slope }, 8, 2, 16) => recurse(args, LinearCorr { offset, slope }, 8, 2, n, pin_start, ext, app),
            (MaxStar::Linear { offset, slope }, _, _, _) => recurse(args, LinearCorr { offset, slope }, ns, np, n, pin_start, ext, app),
            (MaxStar::Exact, _, _, _) => recurse(args, ExactCorr, ns, np, n, pin_start, ext, app),
        }
        Ok(())
    }
}

struct Recursion<'a> {
    branches: &'a [Branch],
    gamma: &'a [f32],
    alpha: &'a mut Vec<f32>,
}

/// Forward-backward pass over precomputed pattern metrics. Inlined at each
/// call site so constant sizes unroll the state loops.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn recurse<C: Corr>(
    r: Recursion,
    ms: C,
    ns: usize,
    np: usize,
    n: usize,
    pin_start: bool,
    ext: &mut [Vec<f32>],
    mut app: Option<&mut [Vec<f32>]>,
) {
    let Recursion { branches, gamma, alpha } = r;
    let npat = 1usize << np;
    let stride = (np + 1) * npat;
    alpha.resize((n + 1) * ns, NEG_INF);
    let mut a = [NEG_INF; MAX_STATES];
    if pin_start {
        a[0] = 0.0;
    } else {
        a[..ns].iter_mut().for_each(|x| *x = 0.0);
    }
    alpha[..ns].copy_from_slice(&a[..ns]);
    for i in 0..n {
        let full = &gamma[i * stride + np * npat..(i + 1) * stride];
        let mut next = [NEG_INF; MAX_STATES];
        for b in branches {
            let t = &mut next[b.to as usize];
            *t = ms.apply(*t, a[b.from as usize] + full[b.bits as usize]);
        }
        let norm = next[..ns].iter().copied().fold(NEG_INF, f32::max);
        for x in &mut next[..ns] {
            *x -= norm;
        }
        alpha[(i + 1) * ns..(i + 2) * ns].copy_from_slice(&next[..ns]);
        a = next;
    }

    let mut beta = [NEG_INF; MAX_STATES];
    beta[..ns].iter_mut().for_each(|x| *x = 0.0);
    for i in (0..n).rev() {
        let g = &gamma[i * stride..(i + 1) * stride];
        let full = &g[np * npat..];
        let al = &alpha[i * ns..(i + 1) * ns];
        let mut num = [NEG_INF; 2 * MAX_PORTS];
        let mut app_num = [NEG_INF; 2 * MAX_PORTS];
        let mut prev = [NEG_INF; MAX_STATES];
        for b in branches {
            let bits = b.bits as usize;
            let be = beta[b.to as usize];
            let ab = al[b.from as usize] + be;
            for p in 0..np {
                let slot = 2 * p + (bits >> p & 1);
                num[slot] = ms.apply(num[slot], ab + g[p * npat + bits]);
            }
            if app.is_some() {
                for p in 0..np {
                    let slot = 2 * p + (bits >> p & 1);
                    app_num[slot] = ms.apply(app_num[slot], ab + full[bits]);
                }
            }
            let t = &mut prev[b.from as usize];
            *t = ms.apply(*t, full[bits] + be);
        }
        for p in 0..np {
            ext[p][i] = num[2 * p] - num[2 * p + 1];
        }
        if let Some(o) = app.as_deref_mut() {
            for p in 0..np {
                o[p][i] = app_num[2 * p] - app_num[2 * p + 1];
            }
        }
        let norm = prev[..ns].iter().copied().fold(NEG_INF, f32::max);
        for x in &mut prev[..ns] {
            *x -= norm;
        }
        beta = prev;
    }
}

/// One-shot decode: channel and a-priori LLRs per port; returns extrinsic
/// LLRs per port.
pub fn bcjr_decode(
    trellis: &Trellis,
    channel: &[Vec<f32>],
    apriori: &[Vec<f32>],
    max_star: MaxStar,
    pin_start: bool,
) -> Result<Vec<Vec<f32>>> {
    if channel.len() != apriori.len() {
        return Err(Error::LengthMismatch { expected: channel.len(), got: apriori.len() });
    }
    let obs: Vec<Vec<f32>> = channel
        .iter()
        .zip(apriori)
        .map(|(c, a)| {
            if c.len() != a.len() {
                return Err(Error::LengthMismatch { expected: c.len(), got: a.len() });
            }
            Ok(c.iter().zip(a).map(|(x, y)| x + y).collect())
        })
        .collect::<Result<_>>()?;
    let mut dec = BcjrDecoder::new(trellis, max_star)?;
    let mut ext = vec![Vec::new(); obs.len()];
    dec.decode(&obs, pin_start, &mut ext, None)?;
    Ok(ext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::GeneratorSpec;

    #[test]
    fn zero_observations_give_zero_extrinsics() {
        let t = Trellis::new(&GeneratorSpec::g457()).unwrap();
        let z = vec![vec![0.0f32; 12]; 3];
        for pin in [false, true] {
            let e = bcjr_decode(&t, &z, &z, MaxStar::Exact, pin).unwrap();
            assert!(e.iter().flatten().all(|&x| x.abs() < 1e-5), "{e:?}");
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn linear_correction_clamps() {
        let ms = MaxStar::LINEAR;
        assert_eq!(ms.apply(1.0, 1.0), 1.0 + 0.6931);
        assert_eq!(ms.apply(10.0, 0.0), 10.0);
        assert!((MaxStar::Exact.apply(0.0, 0.0) - 2f32.ln()).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let t = Trellis::new(&GeneratorSpec::g457()).unwrap();
        let ok = vec![vec![0.0f32; 4]; 3];
        let short = vec![vec![0.0f32; 4], vec![0.0; 3], vec![0.0; 4]];
        assert!(bcjr_decode(&t, &short, &short, MaxStar::Exact, true).is_err());
        let mut nan = ok.clone();
        nan[1][2] = f32::NAN;
        assert!(matches!(bcjr_decode(&t, &nan, &ok, MaxStar::Exact, true), Err(Error::NonFinite(2))));
    }

    #[test]
    fn noiseless_codeword_is_recovered() {
        let t = Trellis::new(&GeneratorSpec::g537()).unwrap();
        let u1 = [1u8, 0, 1, 1, 0, 0, 1, 0, 1, 1];
        let u2 = [0u8, 1, 1, 0, 0, 1, 0, 1, 1, 0];
        let (v, _) = t.encode(&[&u1[..], &u2[..]], 0).unwrap();
        let llr = |b: &[u8]| b.iter().map(|&x| if x == 0 { 50.0 } else { -50.0 }).collect::<Vec<f32>>();
        let obs = vec![llr(&u1), llr(&u2), llr(&v)];
        let mut dec = BcjrDecoder::new(&t, MaxStar::LINEAR).unwrap();
        let mut ext = vec![Vec::new(); 3];
        let mut app = vec![Vec::new(); 3];
        dec.decode(&obs, true, &mut ext, Some(&mut app)).unwrap();
        for (p, bits) in [&u1[..], &u2[..], &v[..]].iter().enumerate() {
            let hard: Vec<u8> = app[p].iter().map(|&l| u8::from(l < 0.0)).collect();
            assert_eq!(&hard[..], *bits);
        }
    }
}
