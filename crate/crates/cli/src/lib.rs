//! Command line and HTTP service for the explanation engine.

pub mod acceptance;
pub mod commands;
pub mod error;
pub mod pipeline;
pub mod server;
pub mod store;

pub use error::{exit, CliError};
