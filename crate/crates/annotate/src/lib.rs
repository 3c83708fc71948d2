//! Ranking rubric, a durable annotation store and the HTTP service in front
//! of it.

pub mod rubric;
pub mod server;
pub mod store;

pub use rubric::{effective_score, lint_source, Severity, SourceFlag, RANKING_SCALE};
pub use server::{router, serve, AppState, ServerHandle};
pub use store::{
    AnnotationRecord, AnnotationStore, FieldError, Progress, StoreError, Submission, SubmitError, Submitted, LOG_FILE,
};
