//! BPSK over AWGN and the binary erasure channel, applied to a coupled frame.
//!
//! Both produce per-piece observations indexed like `graph.pieces`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bcjr::KNOWN_LLR;
use crate::ensemble::{CoupledFrame, Observation, Rational};
use crate::error::{Error, Result};

/// `2 y / sigma^2` for BPSK with 0 -> +1, 1 -> -1.
pub fn channel_llr(y: f64, noise_variance: f64) -> Result<f64> {
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(Error::InvalidNoiseVariance(noise_variance));
    }
    Ok(2.0 * y / noise_variance)
}

/// Noise variance per real dimension for unit-energy BPSK at the given
/// `Eb/N0` and code rate.
pub fn ebn0_to_sigma2(ebn0_db: f64, rate: Rational) -> f64 {
    let r = *rate.numer() as f64 / *rate.denom() as f64;
    1.0 / (2.0 * r * 10f64.powf(ebn0_db / 10.0))
}

/// Channel LLRs of every piece after BPSK/AWGN transmission. Known pieces
/// get `+KNOWN_LLR`, untransmitted parity gets 0.
pub fn awgn_llrs(frame: &CoupledFrame, sigma2: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f32>>> {
    let scale = channel_llr(1.0, sigma2)?;
    let sigma = sigma2.sqrt();
    let g = &frame.graph;
    Ok(g.pieces
        .iter()
        .enumerate()
        .map(|(p, piece)| {
            (0..piece.len)
                .map(|i| {
                    if piece.observation == Observation::Known {
                        KNOWN_LLR
                    } else if frame.is_transmitted(p, i) {
                        let x = if frame.bits[p][i] == 0 { 1.0 } else { -1.0 };
                        let n: f64 = StandardNormal.sample(rng);
                        (scale * (x + sigma * n)) as f32
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

/// Which bits of every piece are known after the erasure channel. Known
/// pieces are always known; untransmitted parity never is.
pub fn bec_known(frame: &CoupledFrame, eps: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<bool>>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidProbability(eps));
    }
    let g = &frame.graph;
    Ok(g.pieces
        .iter()
        .enumerate()
        .map(|(p, piece)| {
            (0..piece.len)
                .map(|i| match piece.observation {
                    Observation::Known => true,
                    Observation::Channel => frame.is_transmitted(p, i) && rng.gen::<f64>() >= eps,
                })
                .collect()
        })
        .collect())
}

/// Independent generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llr_formula() {
        assert_eq!(channel_llr(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(channel_llr(1.0, 0.5).unwrap(), 4.0);
        assert!(channel_llr(1.0, 0.0).is_err());
        assert!(channel_llr(1.0, -2.0).is_err());
    }

    #[test]
    fn ebn0_conversion() {
        let s = ebn0_to_sigma2(1.0, Rational::new(1, 3));
        assert!((s - 1.0 / (2.0 / 3.0 * 10f64.powf(0.1))).abs() < 1e-12);
        assert!((s - 1.1915).abs() < 1e-3);
    }
}
