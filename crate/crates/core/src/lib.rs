//! Distributed sum-rate maximization for multi-cell wideband downlinks
//! assisted by beyond-diagonal reconfigurable surfaces.
//!
//! Each BS owns a precoder per user and subcarrier, one surface with
//! varactor-tuned elements and a switch network that permutes the elements.
//! [`solver::run`] alternates parallel per-BS surrogate solves with
//! interference pricing until the network sum rate settles.

pub mod assignment;
pub mod capacitance;
pub mod channels;
pub mod circuit;
pub mod error;
pub mod harness;
pub mod instances;
pub mod network;
pub mod precoding;
pub mod rates;
pub mod selection;
pub mod solver;
pub mod switch;

pub use error::{Error, Result};
pub use network::Network;
pub use rates::{Iterate, LinkState};
pub use selection::Selection;
