//! Two-dimensional Wold decomposition toolkit.
//!
//! The crate has four layers:
//!
//! * [`halfplane`] — exact integer/rational geometry of lattice half-planes:
//!   membership, the induced total order, corner sequences and slope
//!   recovery, the unimodular rotation onto the bottom half-plane, and
//!   irrational-slope window certification.
//! * [`diagram`] — staircase diagrams (upper sets of the lattice),
//!   translation equivalence and periodicity detection.
//! * [`operators`] — finite truncated matrix models of pairs of commuting
//!   isometries: block bidiagonal models, diagram shifts, generalized
//!   powers, and the wandering-subspace split machinery.
//! * [`field`] — covariance-domain prediction for weak-stationary random
//!   fields: innovations, moving-average recovery, remote-past energy and
//!   the three-part classification.

pub mod diagram;
pub mod field;
pub mod halfplane;
mod linalg;
pub mod operators;

pub use halfplane::{HalfPlane, LatticePoint, LatticeVector, Variant};
pub use linalg::{CMat, CVec};
