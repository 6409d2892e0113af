//! Command-line front end and live session gateway.

pub mod commands;
pub mod outbox;
pub mod server;
pub mod session;
pub mod wire;
