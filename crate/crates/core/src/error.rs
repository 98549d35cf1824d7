use thiserror::Error;

/// Errors surfaced by the numerical modules.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid spin: 2J = {twice_j} is not a non-negative integer representation")]
    InvalidSpin { twice_j: i64 },

    #[error("manifold {0} has no quadrupole moment in this model; expected the D manifold")]
    NoQuadrupole(crate::spin::ManifoldLabel),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "time step {dt:.3e} s violates dt <= 1/(50 f_max) with f_max = {f_max:.6e} Hz \
         (limit {limit:.3e} s)"
    )]
    StepSize { dt: f64, f_max: f64, limit: f64 },

    #[error("mixing angle undefined: |Delta| = {delta:.6e} Hz exceeds omega_bar = {omega_bar:.6e} Hz")]
    MixingAngleRange { delta: f64, omega_bar: f64 },

    #[error("not compensable with these parameters: no sign change of the sensitivity in [{lo} Hz, {hi} Hz]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("root search degenerate: {0}")]
    DegenerateSearch(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("degenerate fit abscissae: {0}")]
    DegenerateFit(String),

    #[error("fit did not converge: {0}")]
    FitFailure(String),

    #[error("transfer function evaluated at a pole (f = {0} Hz)")]
    TransferAtPole(f64),

    #[error("coil cannot drive this tone: |1/H({f_hz} Hz)| = {factor:.1} exceeds 100")]
    UncompensatableTone { f_hz: f64, factor: f64 },

    #[error("incompatible waveform segments: {0}")]
    BadSegmentOrder(String),

    #[error("servo unlocked at cycle {cycle}: error signal saturated")]
    ServoUnlock { cycle: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
