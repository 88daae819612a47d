//! Std companion of `tokenqoe-core`: the rating service, file formats and
//! the `tokenqoe` command-line tool.

pub mod cli;
pub mod clock;
pub mod error;
pub mod files;
pub mod service;
pub mod store;

pub use error::{Error, Result};
