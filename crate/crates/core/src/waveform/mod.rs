//! Drive-waveform synthesis for the CDD sequence: the four phase-continuous
//! segments (first sweep, first stage, second sweep, second stage), coil
//! transfer-function modelling, inverse pre-compensation and sample export.
//!
//! Frequencies are stored in Hz and enter the trigonometric forms as
//! 2*pi*f*t; the segment formulas otherwise follow the analytic waveform
//! definitions verbatim.

mod export;
mod segments;
mod transfer;

pub use export::{export_csv, export_raw_f32, read_csv, read_raw_f32};
pub use segments::{
    stitch, SampledWaveform, SegmentKind, SegmentSpec, StitchedProgram, TABLE_SWEEPS_MAGIC,
    TABLE_SWEEPS_RESONANT,
};
pub use transfer::{
    forward_filter_tones, precompensate, q_to_pole, tone_amplitude_phase, transfer_eval,
    CompensatedProgram, TransferFunctionModel, COIL_Q_D, COIL_Q_S,
};
