//! HTTP service and command-line front end for katriage.

pub mod api;
pub mod cli;
pub mod config;

pub use api::{router, AppState};
pub use config::Settings;
