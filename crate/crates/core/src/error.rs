use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("qubit {0} appears more than once among targets and controls")]
    DuplicateQubit(usize),

    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("register of {n_qubits} qubits exceeds the densification cap of {cap}")]
    RegisterTooLarge { n_qubits: usize, cap: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("stability violated: r_h = {r_h} must lie in (0, {limit}] for d = {dims}")]
    Unstable { r_h: f64, dims: usize, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported boundary treatment: {0}")]
    Unsupported(String),

    #[error("spectral norm {norm:.6} exceeds 1; pre-scale the matrix")]
    SpectralNorm { norm: f64 },

    #[error("orthonormal completion failed after {attempts} attempts")]
    CompletionFailed { attempts: usize },

    #[error("numerical blow-up at step {step}: |phi| = {value:.3e}")]
    NumericalAbort { step: usize, value: f64 },
}
