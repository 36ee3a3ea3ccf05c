//! Binary erasure channel analysis: component transfer functions, density
//! evolution on coupling graphs and thresholds.

mod de;
mod subset;
mod threshold;
mod transfer;

pub use de::{de_run, de_step, ChannelErasure, DeRun, ErasureDe, ErasureState, Schedule};
pub use subset::{SubsetTables, MAX_SUBSET_STATES};
pub use threshold::{
    bisect, de_block_len, end_threshold, head_tail_thresholds, head_tail_thresholds_with, lambda_sweep_thresholds,
    punctured_parity_erasure, saturated_map_estimate, window_positions, ChainEnd, LambdaRow, MapEstimate,
    ThresholdConfig, ThresholdResult, UncoupledKind, SATURATION_LABEL,
};
pub use transfer::{erasure_transfer, TransferFn, TransferMode, TransferOutput, TransferQuery, MIN_MC_SAMPLES};
