//! Twisted cohomology, Reidemeister torsion and the Goldman volume form for
//! `SL(2, C)` representations of closed and bordered surface groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`lie`]: the Lie algebra `sl(2, C)`, its Killing form and the adjoint action.
//! * [`words`]: free-group words, surface presentations and Fox calculus.
//! * [`numlin`]: dense complex linear algebra (rank, sections, determinants, Pfaffians).
//! * [`reps`]: sampling and validating good representations.
//! * [`cochain`]: twisted cochain complexes and their cohomology.
//! * [`torsion`]: torsion of based complexes and of exact sequences.
//! * [`symplectic`]: the cup-product symplectic form and its Pfaffian volume.
//! * [`mv`]: Mayer–Vietoris gluing and the connected-sum volume verifier.

pub mod cochain;
pub mod error;
pub mod lie;
pub mod mv;
pub mod numlin;
pub mod reps;
pub mod rng;
pub mod serde_complex;
pub mod symplectic;
pub mod tol;
pub mod torsion;
pub mod words;

pub use cochain::{CohomologyData, TwistedComplex};
pub use error::{Error, Result};
pub use lie::{LieVec, Sl2Matrix};
pub use numlin::{CMatrix, RankData};
pub use reps::{GoodnessReport, Representation};
pub use symplectic::{CrossedHom, SymplecticGram};
pub use torsion::{BasedSequence, TorsionValue};
pub use words::{GroupRingElement, GroupWord, Letter, Presentation};
pub use mv::{Decomposition, DecompositionKind, GluingReport, MainReport, MvSequence};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
