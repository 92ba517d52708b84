//! Wire-level pieces of the audit toolkit: the HTTP completion client and
//! the mock inference server. Both speak the contract defined in
//! `benchaudit_core::client`.

pub mod http_client;
pub mod server;

pub use http_client::HttpCompletionClient;
pub use server::{serve_blocking, MockServer, ServeError, ServeOptions};
