//! Statevector simulation of the weight-generating ansatz and the hybrid
//! angle-encoded circuit, with three gradient routes: the reversible adjoint
//! sweep, the parameter-shift rule, and (in tests) finite differences.

mod ansatz;
mod qcml;
mod sample;
mod state;

pub use ansatz::QtAnsatz;
pub use qcml::{QcmlCircuit, QcmlGradients};
pub use sample::sample_counts;
pub use state::{basis_bits, bits_to_index, ProbabilityVector, StateVector, MAX_QUBITS};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("qubit count {num_qubits} outside supported range 1..={max}", max = MAX_QUBITS)]
    QubitCount { num_qubits: usize },

    #[error("qubit index {qubit} out of range for {num_qubits} qubits")]
    QubitIndex { qubit: usize, num_qubits: usize },

    #[error("control and target are the same qubit {qubit}")]
    SameQubit { qubit: usize },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid ansatz: {detail}")]
    InvalidAnsatz { detail: String },

    #[error("invalid distribution: {detail}")]
    InvalidDistribution { detail: String },
}
