//! Operator front end for commitment-gated groups: an HTTP server over the
//! service, and the provisioning, simulation, analysis and export commands.

pub mod commands;
pub mod server;
