//! HTTP gateway and command-line verbs over the `symwrap` library.

pub mod cli;
pub mod config;
pub mod hub;
pub mod server;

pub use config::{ConfigError, GatewayConfig};
pub use hub::{ApiEvent, Hub};
pub use server::{router, ServeError, Server};
