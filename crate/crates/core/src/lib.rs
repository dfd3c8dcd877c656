//! Matching two correlated Gaussian point clouds from pairwise data.
//!
//! Given `Y = Π*X + σZ`, the crate recovers `π*` from the clouds themselves
//! (linear assignment), from their Gram matrices (dot-product model) or from
//! their squared-distance matrices (distance model). It provides the
//! estimators, the closed-form quantities used to analyse them, and a seeded
//! sweep harness for overlap-versus-noise experiments.

pub mod assignment;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod par;
pub mod permutation;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{Matrix, OrthogonalMatrix};
pub use models::{Instance, ModelKind, Observation};
pub use permutation::{overlap, CycleType, Permutation};
