use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A_ij - conj(A_ji)| = {asymmetry:e}")]
    NonHermitianInput { asymmetry: f64 },
    #[error("tridiagonal QL iteration did not converge for eigenvalue {index}")]
    NoConvergence { index: usize },
    #[error("matrix dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("norm drift {drift:e} in one step exceeds tolerance; reduce dt")]
    StepTooLarge { drift: f64 },
    #[error("system size {0} must be even")]
    OddSize(usize),
    #[error("system size {size} outside the supported range {min}..={max}")]
    SizeCap { size: usize, min: usize, max: usize },
    #[error("saturation value diverges at the critical point h = 1")]
    AtCriticalPoint,
    #[error("ground state is degenerate (gap {gap:e})")]
    DegenerateGroundState { gap: f64 },
    #[error("survival base 1 - (dt/tau0)^2 chi/2 = {base} is negative")]
    BaseNegative { base: f64 },
    #[error("target fidelity {target} not reached for tau0 in [{lower}, {upper}]")]
    NotBracketed { target: f64, lower: f64, upper: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples must have positive sizes and values (offending L = {size}, value = {value})")]
    NonPositive { size: f64, value: f64 },
    #[error("finite-difference estimate not converged: {coarse} vs {fine}")]
    NotConverged { coarse: f64, fine: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
