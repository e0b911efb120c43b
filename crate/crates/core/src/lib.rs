//! Convergence domains of an iterative learning controller wrapped around a
//! first-order sampled plant, computed three independent ways:
//!
//! * frequency domain: `sup_θ |T(e^{iθ})|` ([`zdomain`]),
//! * lifted matrices: `ρ(M)` and `σ_max(M)²` ([`lifted`]),
//! * direct iteration of the learning recursion ([`iterdomain`]),
//!
//! plus the closed-form region boundaries, all cross-checked over `(A, B)`
//! grids by [`sweep`].

pub mod error;
pub mod iterdomain;
pub mod learning;
pub mod lifted;
pub mod parallel;
pub mod plant;
pub mod sweep;
pub mod zdomain;

pub use error::{IlcError, Result};
pub use learning::{LearningFunction, LearningKind, Tap};
pub use plant::{ABPoint, PlantParams};
