//! `polinfer` command line and HTTP/JSON service.

pub mod commands;
pub mod output;
pub mod server;

pub use commands::{execute, Cli, Command};
