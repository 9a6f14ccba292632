//! HTTP API and command-line front end for the knowledge canvas store.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod service;

pub use api::{router, AppState};
pub use error::{ApiError, ErrorBody};
pub use service::{Service, Viewer};
