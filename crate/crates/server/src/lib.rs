//! HTTP session service and operator CLI over the `dccflow` library.

pub mod api;
pub mod cli;
pub mod error;
pub mod service;
