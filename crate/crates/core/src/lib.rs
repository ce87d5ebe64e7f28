//! Clifford-twirl characterization of spatially correlated errors.
//!
//! The crate simulates a small qubit register exactly (dense density
//! matrices), twirls a channel with single-qubit Clifford pools, measures
//! fidelity decay rates on qubit subsets and combines them into collective
//! Pauli-error coefficients. Every estimate can be checked against the exact
//! χ-matrix diagonal of the channel.
//!
//! Qubits are indexed from 0 in the library, with qubit 0 the leftmost tensor
//! factor (most significant bit of a basis index). Text formats use 1-based
//! labels.

pub mod clifford;
pub mod error;
pub mod experiment;
pub mod nmr;
pub mod pauli;
pub mod protocol;
pub mod state;

pub use clifford::{CliffordElement, CliffordPool, PoolChoice, PoolKind, SymplecticSet};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, GateSpec, Mode, Report};
pub use pauli::{ChiDiagonal, CollectiveCoefficients, Pauli, PauliString};
pub use protocol::{GammaEstimate, SamplePlan};
pub use state::{DensityMatrix, Mat, QuantumChannel, QubitSet, UnitaryMatrix, C64};
