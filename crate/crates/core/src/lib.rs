//! Numerical laboratory for log-convex sequences, regularly varying quotients
//! and nonzero proximate orders.

pub mod assoc;
pub mod bigindex;
pub mod commands;
pub mod construct;
pub mod envelope;
pub mod error;
pub mod numeric;
pub mod props;
pub mod proxord;
pub mod regvar;
pub mod report;
pub mod riesz;
pub mod seqcore;
pub mod solve;
pub mod suite;

pub use bigindex::BigIndex;
pub use error::{Error, Result};
