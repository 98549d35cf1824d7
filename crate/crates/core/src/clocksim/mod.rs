//! Clock-operation modelling: noise, spectroscopy observables, the
//! two-point Rabi servo and Allan statistics.
//!
//! Clock-timescale dynamics use dressed-basis effective frequencies (the
//! quasi-energy ladder plus the closed-form field responses) rather than
//! lab-frame integration; the noise model's validity requires its
//! Fourier content to stay well below the second-stage Rabi frequencies.

mod allan;
mod decay;
mod fit;
mod noise;
mod scan;
mod servo;

pub use allan::{default_taus, overlapping_allan, AllanPoint, AllanResult};
pub use decay::{fit_decay, rabi_flop_probability, DecayFit, DecayModel};
pub use fit::{levenberg_marquardt, LmOutcome};
pub use noise::{sample_noise, MainsHarmonic, NoiseModel, NoiseStream};
pub use scan::{per_ion_line_scan, rabi_line, IonScan, LineScanConfig, LineScanResult};
pub use servo::{
    quadratic_zeeman_offset, run_clock_servo, ClockIons, ClockRun, Readout, ServoConfig,
    QUADRATIC_ZEEMAN_HZ_PER_T2,
};
