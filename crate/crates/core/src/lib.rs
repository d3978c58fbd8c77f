//! Attribution mechanisms that pay training-data providers through
//! semivalues of a quotient game over evidence-backed clusters, together with
//! the attack simulator and the diagnostics used to measure how much a
//! provider gains by splitting or duplicating its data.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evidence;
pub mod game;
pub mod learner;
pub mod market;
pub mod names;
pub mod quotient;
pub mod rng;
pub mod scalar;
pub mod semivalue;
pub mod theta;

pub use error::{Error, Result};
pub use scalar::{Rational, Scalar};

/// Semivalue result over `f64`.
pub type SemivalueResultF64 = semivalue::SemivalueResult<f64>;
/// Semivalue result over exact rationals.
pub type SemivalueResultExact = semivalue::SemivalueResult<Rational>;
/// Tabulated game over `f64`.
pub type TableGameF64 = game::TableGame<f64>;
/// Tabulated game over `f32`.
pub type TableGameF32 = game::TableGame<f32>;
/// Tabulated game over exact rationals.
pub type TableGameExact = game::TableGame<Rational>;
