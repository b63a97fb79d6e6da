//! Live session service over HTTP with a server-sent event stream.

pub mod api;
pub mod error;
pub mod store;

pub use api::{router, spawn_evictor, AppState, ServiceConfig};
pub use error::{ApiError, ErrorBody};
pub use store::{EventKind, SessionEvent};
