use thiserror::Error;

/// Errors surfaced by the simulator.
///
/// Prover misbehaviour is reported through [`Error::ProverViolation`] and
/// [`Error::ProverAbort`]; callers that estimate acceptance rates treat both
/// as a rejected session.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("codomain size {k} is not a power of two (required by the GF(2)-affine family)")]
    InvalidK { k: u64 },
    #[error("codomain size {k} is too large for a {ell}-bit domain under the affine mod-p family")]
    CodomainTooLarge { k: u64, ell: u32 },
    #[error("domain bit-length {ell} exceeds the cap of {cap} bits")]
    DomainTooLarge { ell: u32, cap: u32 },
    #[error("round {j} is out of range for a {rounds}-round scheme")]
    RoundOutOfRange { j: usize, rounds: usize },
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("operation requires a nonempty support state")]
    EmptyState,
    #[error("cannot measure the zero vector")]
    ZeroQubit,
    #[error("prover violated the protocol: {0}")]
    ProverViolation(String),
    #[error("prover aborted")]
    ProverAbort,
    #[error("prover answered differently to an identical replayed prefix")]
    ProverNondeterminism,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed session record: {0}")]
    MalformedRecord(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
