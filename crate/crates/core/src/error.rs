use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(&'static str),
    #[error("density matrix has imaginary diagonal residue {residue:e}")]
    NonHermitianDensity { residue: f64 },
    #[error("energy {energy} lies outside the open band (-{half_width}, {half_width})")]
    OutsideBand { energy: f64, half_width: f64 },
    #[error("energy {energy} is on the branch cut of the lattice Green function")]
    OnBranchCut { energy: f64 },
    #[error("truncation length {length} does not exceed the largest support index {max_support}")]
    TruncationTooShort { length: usize, max_support: usize },
    #[error("S(E) is singular at E = {energy} (condition number {condition:e})")]
    SingularS { energy: f64, condition: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("propagator amplitude does not decay like t^(-3/2) (growth factor {growth})")]
    NonDecayingPropagator { growth: f64 },
    #[error("reservoirs differ; the occupation fixed point requires equal temperatures and chemical potentials")]
    NotEquilibrium,
    #[error("Picard window too large: contraction ratio {ratio}")]
    WindowTooLarge { ratio: f64 },
    #[error("observable `{observable}` has not reached a plateau (relative drift {drift:e})")]
    NoPlateau { observable: &'static str, drift: f64 },
}

/// Non-fatal conditions surfaced alongside results.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Warning {
    #[error("lambda = {lambda} is not below lambda0 = {lambda0}; convergence is not guaranteed")]
    LambdaAboveThreshold { lambda: f64, lambda0: f64 },
    #[error("t_end = {t_end} exceeds the recurrence horizon {horizon} of the truncated leads")]
    RecurrenceHorizon { t_end: f64, horizon: f64 },
    #[error("iteration oscillated; switched to mixing {mixing}")]
    MixingFallback { mixing: f64 },
}
