//! Running models against a cursor-grounding dataset.
//!
//! [`harness`] drives the multi-turn loop against any [`Backend`]. Two kinds
//! ship here: [`mock`] oracles for tests and [`http`] for OpenAI-compatible
//! chat endpoints. [`report`] prints the results tables.

pub mod backend;
pub mod chat;
pub mod error;
pub mod harness;
pub mod http;
pub mod mock;
pub mod report;

pub use backend::{Backend, BackendIdentity, CompletionRequest};
pub use chat::{ChatTurn, Role};
pub use error::{BackendError, EvalError};
pub use harness::{evaluate, load_samples, mock_targets, run_sample, EvalOutcome, HarnessConfig, LoadedSample};
pub use http::{HttpBackend, HttpBackendConfig};
pub use mock::{MockBackend, MockKind, MockOracleConfig};
pub use report::{format_table, RunSummary};
