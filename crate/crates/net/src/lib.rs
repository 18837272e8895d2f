//! Networked deployment of the restaurant-information platform: the HTTP
//! surface of each node, a typed client, the scenario harness and the demo
//! topology.

pub mod client;
pub mod config;
pub mod demo;
pub mod envelope;
pub mod extract;
pub mod nodes;
pub mod scenario;

pub use client::NodeClient;
pub use config::{NodeConfig, Role};
pub use envelope::{Envelope, ErrorCode};
pub use nodes::{serve, RunningNode, ServeError};
