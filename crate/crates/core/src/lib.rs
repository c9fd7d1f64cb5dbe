//! Construction kit, symmetry verifier and exact simulator for layered
//! symmetric quantum circuits over the threshold-type gate set.
//!
//! The crate provides:
//!
//! - a layered circuit IR with structured wire labels, threshold/equality
//!   gates and arbitrary single-qubit gates ([`circuit`], [`labels`]);
//! - automorphism witnesses and their verification or search ([`symmetry`]);
//! - exact dense and branch-sparse simulation ([`sim`]);
//! - symmetry-preserving passes: concatenation, inversion, controlled
//!   circuits and select operations ([`transforms`]);
//! - amplitude amplification, phase estimation and linear combination of
//!   unitaries as symmetric subroutines ([`subroutines`]);
//! - Dicke/symmetric-subspace/phase-state preparation ([`stateprep`]);
//! - decomposition and synthesis of permutation- and partition-symmetric
//!   unitaries and equivariant QNN layers ([`synth`]);
//! - classical threshold DAGs, layered reversible circuits and the
//!   conversions between them ([`classical`]);
//! - the row/column-symmetric XOR-SAT pipeline ([`xorsat`]);
//! - a versioned text format for circuits, states and instances ([`format`]).
//!
//! The numeric kernel is generic over the real scalar type; the aliases
//! below fix the `f64` instantiation used by the builders and the CLI.

pub mod accept;
pub mod circuit;
pub mod classical;
pub mod error;
pub mod format;
pub mod labels;
pub mod linalg;
pub mod scalar;
pub mod sim;
pub mod stateprep;
pub mod subroutines;
pub mod symmetry;
pub mod synth;
pub mod transforms;
pub mod xorsat;

pub use circuit::{Circuit, Gate, Layer, Metrics, Role, SingleGate};
pub use error::{Error, Result};
pub use labels::{GroupSpec, Label, LabelPermutation};
pub use symmetry::{SearchOutcome, SymmetryReport, SymmetryWitness, Verdict};

/// Real scalar used by the concrete aliases.
pub type Real = f64;
/// Complex scalar over [`Real`].
pub type Cpx = num_complex::Complex<Real>;
/// Dense state vector over [`Real`].
pub type DenseState = sim::DenseStateOf<Real>;
/// Branch-sparse state over [`Real`].
pub type SparseState = sim::SparseStateOf<Real>;
/// Complex matrix over [`Real`].
pub type Mat = linalg::CMat<Real>;
