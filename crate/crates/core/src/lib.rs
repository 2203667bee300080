//! Information transfer between states and subspaces of linear stochastic
//! systems, computed from a known model or estimated from snapshot data, and
//! applied to stability studies of a small power network.

pub mod error;
pub mod estimation;
pub mod infotransfer;
pub mod io;
pub mod linalg;
pub mod powermodels;
pub mod sysmodel;

pub use error::{Error, Result};
