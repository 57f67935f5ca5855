//! Finite-horizon symbolic dynamics on subshifts of finite type.
//!
//! The crate builds points and families of points by gluing words with
//! connectors, and measures what was built: empirical measures, separated
//! counts, Lyapunov exponents, distributional-chaos statistics. Ergodic
//! optimization and pressure for locally constant potentials live in
//! [`ergopt`].

#![forbid(unsafe_code)]

pub mod analysis;
pub mod chaos;
pub mod cocycle;
pub mod ergopt;
pub mod gluing;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod measures;
pub mod par;
pub mod rng;
pub mod shift;
pub mod tour;

pub use error::{Error, Result};
pub use measures::{EmpiricalMeasure, MarkovMeasure, MeasurePath};
pub use shift::{SftSpace, SymbolStream, Word};
