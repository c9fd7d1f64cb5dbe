use crate::labels::Label;
use thiserror::Error;

/// Errors produced by circuit construction, verification and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown wire: {0}")]
    UnknownWire(Label),
    #[error("duplicate wire label: {0}")]
    DuplicateWire(Label),
    #[error("gates do not commute: {0} vs {1}")]
    NonCommuting(String, String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("permutation is not defined on {0}")]
    PermutationDomain(Label),
    #[error("permutation is not a bijection (two inputs map to {0})")]
    NotBijective(Label),
    #[error("group spec error: {0}")]
    Group(String),
    #[error("symmetry error: {0}")]
    Symmetry(String),
    #[error("wire count {0} exceeds simulator cap {1}")]
    WireCap(usize, usize),
    #[error("branch count exceeds sparse cap {0}")]
    BranchCap(usize),
    #[error("input state is not normalised (norm {0})")]
    NotNormalised(f64),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
