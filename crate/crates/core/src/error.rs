use alloc::string::String;

/// Errors raised by the simulation, calibration and training routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("spike at {time} ms lies outside [0, {duration}] ms")]
    SpikeOutOfRange { time: f64, duration: f64 },
    #[error("sample_dt {sample_dt} ms is not an integer multiple of the simulation step {sim_dt} ms")]
    ResolutionMismatch { sample_dt: f64, sim_dt: f64 },
    #[error("rate {rate} Hz cannot be represented at dt = {dt} ms (rate*dt >= 1)")]
    RateTooHigh { rate: f64, dt: f64 },
    #[error("infeasible ensemble target (m = {m} nA, s = {s} nA): {reason}")]
    InfeasibleEnsemble { m: f64, s: f64, reason: String },
    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error_estimate}, {intervals} intervals")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error_estimate: f64,
        intervals: usize,
    },
    #[error("degenerate calibration data: {0}")]
    DegenerateSamples(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported layer: {0}")]
    Unsupported(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("{0}")]
    Missing(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
