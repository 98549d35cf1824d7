//! Numerical models for a multi-ion optical frequency reference operated
//! under two-stage (cascaded) continuous dynamical decoupling.
//!
//! The crate is organized around the experiment it models:
//!
//! * [`constants`] / [`spin`] — angular-momentum algebra and the bare,
//!   drive and quadrupole Hamiltonians of the S1/2 and D5/2 Zeeman
//!   manifolds (all energies kept in Hz, i.e. H/h).
//! * [`dressing`] — closed-form doubly-dressed-state analysis: ladder
//!   splittings, mixing angles, Zeeman/quadrupole suppression factors,
//!   magic and compensation detunings.
//! * [`dynamics`] — brute-force lab-frame propagation of the full
//!   time-dependent Hamiltonian, quasi-energy extraction and numeric
//!   sensitivity measurements; the oracle for the `dressing` analytics.
//! * [`crystal`] — linear Coulomb-crystal equilibria, per-ion axial
//!   field gradients and quadrupole-shift inhomogeneity.
//! * [`waveform`] — exact synthesis of the four-segment drive program,
//!   phase-continuous stitching, coil transfer-function modelling and
//!   inverse pre-compensation.
//! * [`clocksim`] — noise models, spectroscopy observables, a two-point
//!   Rabi clock servo and overlapping Allan statistics.

pub mod clocksim;
pub mod constants;
pub mod crystal;
pub mod dressing;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod spin;
pub mod waveform;

pub use constants::PhysicalConstants;
pub use dressing::{CddParameterSet, DriveStage, MixingAngles, TargetTransition};
pub use error::CoreError;
pub use spin::{ManifoldLabel, SpinManifold, SpinOperators, StaticField};
