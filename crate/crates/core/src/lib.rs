//! Cosymplectic and mechanical presymplectic mechanics: Reeb and evolution
//! fields, momentum maps for abelian actions, and reduction at a regular
//! level by a slice.

pub mod cut;
pub mod error;
pub mod expr;
pub mod fields;
pub mod integrate;
pub mod jet;
pub mod linalg;
pub mod pipeline;
pub mod reduction;
pub mod scenario;
pub mod structure;
pub mod symmetry;

pub use error::{Error, Result};
