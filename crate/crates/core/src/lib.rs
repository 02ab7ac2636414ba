//! Exact homological certificates for split extensions of a finitely
//! generated group by a free group.
//!
//! Given `G = H ⋊ F_k` described by explicit automorphism data, this crate
//! decides whether the first Betti number of `G` exceeds `k` (here called
//! *excessive homology*), searches finite-index subgroups for the virtual
//! version of that condition, and emits replayable certificates of
//! incoherence and algebraic fibering.
//!
//! The crate is organised around exact combinatorial group theory:
//!
//! * [`words`] — reduced words in finitely generated free groups,
//! * [`stallings`] — folded subgroup graphs (membership, index, bases,
//!   rewriting, intersections),
//! * [`endos`] — endomorphisms and certified automorphisms of free groups,
//! * [`zmat`] — exact integer linear algebra (Smith normal form, cokernels,
//!   annihilators),
//! * [`fpgroups`] — finite presentations, semidirect products, low-index
//!   subgroup enumeration, Reidemeister–Schreier rewriting,
//! * [`criteria`] — the homological decision layer and certificate
//!   construction,
//! * [`search`] — orbit/stabilizer and low-index searches for finite-index
//!   subgroups with excessive homology,
//! * [`io`] — the line-oriented text formats for groups, presentations and
//!   certificates.

pub mod criteria;
pub mod endos;
pub mod fpgroups;
pub mod io;
pub mod search;
pub mod stallings;
pub mod words;
pub mod zmat;

// TODO: restore full re-exports as modules land
pub use words::{Letter, Word};
pub use zmat::{AbelianGroupShape, IntMatrix};

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("generator index {index} out of range (rank {rank})")]
    GeneratorOutOfRange { index: usize, rank: usize },
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },
    #[error("images do not generate the free group")]
    NotSurjective,
    #[error("word is not an element of the subgroup")]
    NotInSubgroup,
    #[error("subgroup is not preserved by the map")]
    NotPreserved,
    #[error("the given words are not a basis of the subgroup")]
    NotABasis,
    #[error("operation requires a word-level fiber, got abelianized-only data")]
    AbelianizedOnlyFiber,
    #[error("character has zero fiber part")]
    ZeroFiberPart,
    #[error("extension does not have excessive homology")]
    NotExcessive,
    #[error("criterion requires base rank >= 2, got {0}")]
    BaseRankTooSmall(usize),
    #[error("orbit size cap {0} exceeded")]
    OrbitCapExceeded(usize),
    #[error("fiber does not have first cohomology of free rank one")]
    NotRankOne,
    #[error("action does not act by a sign on the rank-one free part")]
    InvalidRankOneAction,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(&'static str),
    #[error("coset table does not belong to this presentation")]
    TableMismatch,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("certificate is not replayable: {0}")]
    Replay(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Error {
        Error::Parse { line, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
