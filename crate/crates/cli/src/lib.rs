//! Command line and HTTP front ends for the workflow core.

pub mod app;
pub mod cli;
pub mod config;
pub mod http;

pub use app::App;
pub use config::Config;
pub use http::ApiError;
