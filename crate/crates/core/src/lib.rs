//! Total-spin (spinor) quantum error correction on `N`-qubit registers.
//!
//! Logical information lives in the maximal-spin subspace `s = N/2`. Errors
//! push population into lower-spin sectors, which a collective `S^2`
//! measurement detects and a sector-wise unitary undoes.

pub mod analysis;
pub mod basis;
pub mod cache;
pub mod channels;
pub mod cli;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod ops;
pub mod qec;
pub mod states;

pub use basis::{CollectiveOps, Sector, SectorLabel, SpinBasis};
pub use error::{Error, Result};
pub use ops::Axis;
