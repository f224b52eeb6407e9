//! Polygonal forms, their quadratic shadows, and the local-global questions
//! around them: p-adic representation, anisotropy, exhaustive global search,
//! and explicit families of locally but not globally represented integers.

pub mod arith;
pub mod cli;
pub mod construct;
pub mod error;
pub mod global;
pub mod locrep;
pub mod padic;
pub mod polygonal;

pub use error::{Error, Result};
pub use polygonal::{DiagonalQuadraticForm, MGonalForm, ShiftKind, ShiftedTarget};
