//! File formats, parallel drivers and the command-line interface around `nsp-core`.

pub mod cli;
pub mod error;
pub mod idx;
pub mod output;
pub mod parallel;
pub mod weights;

pub use error::{Error, Result};
