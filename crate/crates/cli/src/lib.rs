//! Command-line tools and the REST service for the tutoring engine.

pub mod commands;
pub mod dialogue;
pub mod packs;
pub mod server;
