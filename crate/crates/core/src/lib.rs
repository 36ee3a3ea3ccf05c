//! Half spatially coupled turbo-like codes: component trellises, coupled
//! ensembles, erasure-channel density evolution and sliding-window decoding.

pub mod bcjr;
pub mod channel;
pub mod ensemble;
pub mod erasure;
pub mod error;
pub mod trellis;
pub mod window;

pub use bcjr::{bcjr_decode, BcjrDecoder, MaxStar};
pub use channel::{channel_llr, ebn0_to_sigma2};
pub use ensemble::{code_rate, encode_chain, ChainEncoder, CoupledFrame, CouplingGraph, EnsembleKind, EnsembleSpec, InterleaverSet, Rational};
pub use error::{Error, Result};
pub use trellis::{GeneratorSpec, Trellis};
pub use window::{
    first_window_stats, full_decode, window_decode, ChannelParams, DecodeReport, FirstWindowStats, StopRule, Sweep, TrialOutcome, TrialSetup,
    WindowConfig,
};
