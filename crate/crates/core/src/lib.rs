//! Linear-combination-of-unitaries time marching for the heat equation,
//! executed on a dense state-vector simulator and checked against a classical
//! finite-difference reference.

pub mod blockenc;
pub mod boundaries;
pub mod error;
pub mod lcu;
pub mod march;
pub mod operators;
pub mod sparse;
pub mod statevector;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
