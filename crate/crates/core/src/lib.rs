//! Jet-space calculus for Kundt metrics: the shape-preserving pseudogroup,
//! its prolonged action, curvature in jet variables and a catalog of
//! differential invariants.

pub mod appendix;
pub mod catalog;
pub mod curvature;
pub mod error;
pub mod exec;
pub mod jets;
pub mod pseudogroup;
pub mod signature;

pub use error::{KundtError, Result};
pub use jets::{BaseVar, EqKind, EquationSystem, Field, JetVar, MultiIndex, Setting};
