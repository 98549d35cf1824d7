//! Brute-force time-domain propagation of the full lab-frame
//! Hamiltonian, quasi-energy extraction, adiabatic-preparation
//! simulation and numeric sensitivity measurements: the oracle the
//! closed-form dressed-state analytics are tested against.

mod model;
mod observables;
mod propagator;
mod quasi;

pub use model::{
    joint_index, AssembledHamiltonian, BlockId, DriveSource, HamiltonianModel, LaserProbe,
};
pub use observables::{
    dressed_scan_lines, magnetic_sensitivity_numeric, numeric_magic_search, propagate,
    simulate_adiabatic_preparation, simulate_rabi_scan, MagicSearchResult, PreparationResult,
    ScanPoint, ScanResult, ScanTier, SensitivityFit, StateVector, LAB_FRAME_PROBE_LIMIT_S,
};
pub use propagator::{evolve_state, period_propagator, Frame, Method, PropagationConfig, Stepper};
pub use quasi::{
    quasi_energies, quasi_energies_manifold, DressedFrame, ManifoldSpectrum, QuasiEnergyOptions,
    QuasiEnergySpectrum, QuasiLevel,
};
