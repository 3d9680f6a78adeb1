//! Verification sessions: creation, brushing, editing with incremental
//! re-verification, on-disk persistence and the HTTP API over them.

pub mod api;
mod backends;
mod error;
mod manager;
mod session;
mod store;

pub use backends::{BackendSpec, Backends, DEFAULT_BACKEND};
pub use error::ServiceError;
pub use manager::{BrushSuggestion, SessionManager, MAX_SAMPLES, MIN_SAMPLES};
pub use session::{BrushRecord, EditRecord, PendingBrush, SessionState, VerificationSession};
pub use store::SessionStore;
