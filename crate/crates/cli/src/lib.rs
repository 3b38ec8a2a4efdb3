//! Command-line front end and HTTP session service.

pub mod commands;
pub mod server;
pub mod svg;
