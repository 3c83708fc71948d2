//! HTTP front end of the annotation store. JSON bodies everywhere except
//! `/api/export` (dataset lines) and `/rubric` (HTML).

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qeforge_core::corpus::write_dataset;
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::rubric::{rubric_html, Severity};
use crate::store::{AnnotationStore, FieldError, Submission, SubmitError};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<AnnotationStore>,
    /// Annotator whose judgment wins on export when several scored a segment.
    pub primary: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/segments/next", get(next_segment))
        .route("/api/segments/{id}/annotation", post(submit))
        .route("/api/progress", get(progress))
        .route("/api/export", get(export))
        .route("/rubric", get(rubric))
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own runtime thread.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free one) and starts serving.
    pub fn spawn(addr: SocketAddr, state: AppState) -> std::io::Result<ServerHandle> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = rt.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            rt.block_on(serve(listener, state, async {
                let _ = stopped.await;
            }))
        });
        Ok(ServerHandle {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    /// Stops accepting, finishes in-flight requests and joins the thread.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

fn field_errors(errors: Vec<FieldError>) -> Response {
    (StatusCode::UNPROCESSABLE_ENTITY, Json(json!({ "errors": errors }))).into_response()
}

async fn next_segment(State(st): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(annotator) = q.get("annotator").filter(|a| !a.trim().is_empty()) else {
        return field_errors(vec![FieldError::new("annotator", "query parameter is required")]);
    };
    match st.store.next_segment(annotator) {
        Some(seg) => Json(json!({
            "segment_id": seg.id.as_str(),
            "source": seg.source,
            "target": seg.target,
        }))
        .into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

/// Reads `{annotator, score, severities[], comment?}`, collecting every field
/// error rather than stopping at the first.
pub fn parse_submission(body: &[u8]) -> Result<Submission, Vec<FieldError>> {
    let value: Value =
        serde_json::from_slice(body).map_err(|e| vec![FieldError::new("body", format!("not valid JSON: {e}"))])?;
    let Some(obj) = value.as_object() else {
        return Err(vec![FieldError::new("body", "expected a JSON object")]);
    };
    let mut errors = Vec::new();
    let annotator = match obj.get("annotator") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            errors.push(FieldError::new("annotator", "must be a string"));
            String::new()
        }
        None => {
            errors.push(FieldError::new("annotator", "is required"));
            String::new()
        }
    };
    let score = match obj.get("score") {
        Some(v) => match v.as_u64() {
            Some(n) if (1..=5).contains(&n) => n as u8,
            _ => {
                errors.push(FieldError::new(
                    "score",
                    format!("must be an integer from 1 to 5, got {v}"),
                ));
                0
            }
        },
        None => {
            errors.push(FieldError::new("score", "is required"));
            0
        }
    };
    let mut severities = Vec::new();
    match obj.get("severities") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                match item.as_str().map(str::parse::<Severity>) {
                    Some(Ok(s)) => severities.push(s),
                    Some(Err(msg)) => errors.push(FieldError::new(&format!("severities[{i}]"), msg)),
                    None => errors.push(FieldError::new(&format!("severities[{i}]"), "must be a string")),
                }
            }
        }
        Some(_) => errors.push(FieldError::new("severities", "must be an array")),
    }
    let comment = match obj.get("comment") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(FieldError::new("comment", "must be a string"));
            None
        }
    };
    let request_id = match obj.get("request_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            errors.push(FieldError::new("request_id", "must be a string"));
            None
        }
    };
    let sub = Submission {
        annotator,
        score,
        severities,
        comment,
        request_id,
    };
    if errors.is_empty() {
        sub.validate()?;
        Ok(sub)
    } else {
        Err(errors)
    }
}

async fn submit(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> Response {
    if st.store.segment(&id).is_none() {
        return (
            StatusCode::NOT_FOUND,
            Json(json!({ "error": format!("unknown segment {id}") })),
        )
            .into_response();
    }
    let sub = match parse_submission(&body) {
        Ok(s) => s,
        Err(errors) => return field_errors(errors),
    };
    let store = st.store.clone();
    let outcome = tokio::task::spawn_blocking(move || store.submit(&id, sub)).await;
    match outcome {
        Ok(Ok(done)) => (
            if done.replayed {
                StatusCode::OK
            } else {
                StatusCode::CREATED
            },
            Json(json!({ "sequence_number": done.record.sequence_number })),
        )
            .into_response(),
        Ok(Err(SubmitError::Validation(errors))) => field_errors(errors),
        Ok(Err(SubmitError::UnknownSegment(id))) => (
            StatusCode::NOT_FOUND,
            Json(json!({ "error": format!("unknown segment {id}") })),
        )
            .into_response(),
        Ok(Err(e @ SubmitError::Store(_))) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({ "error": e.to_string() })),
        )
            .into_response(),
        Err(e) => (
            StatusCode::INTERNAL_SERVER_ERROR,
            Json(json!({ "error": e.to_string() })),
        )
            .into_response(),
    }
}

async fn progress(State(st): State<AppState>) -> Response {
    Json(st.store.progress()).into_response()
}

async fn export(State(st): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Response {
    let primary = q.get("primary").or(st.primary.as_ref()).map(String::as_str);
    let ranked = st.store.export_ranked(primary);
    let mut buf = Vec::new();
    if let Err(e) = write_dataset(&mut buf, &ranked) {
        return (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response();
    }
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], buf).into_response()
}

async fn rubric() -> Html<String> {
    Html(rubric_html())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_body() {
        let s = parse_submission(br#"{"annotator":"dana","score":3,"severities":["major","minor"],"comment":"x"}"#)
            .unwrap();
        assert_eq!(s.score, 3);
        assert_eq!(s.severities, vec![Severity::Major, Severity::Minor]);
        assert_eq!(s.comment.as_deref(), Some("x"));
    }

    #[test]
    fn collects_every_field_error() {
        let errs = parse_submission(br#"{"score":6,"severities":["fatal",3],"comment":7}"#).unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(
            fields,
            ["annotator", "score", "severities[0]", "severities[1]", "comment"]
        );
    }

    #[test]
    fn rejects_non_json_and_fractional_scores() {
        assert_eq!(parse_submission(b"score=3").unwrap_err()[0].field, "body");
        assert_eq!(
            parse_submission(br#"{"annotator":"a","score":2.5}"#).unwrap_err()[0].field,
            "score"
        );
        assert_eq!(
            parse_submission(br#"{"annotator":" ","score":2}"#).unwrap_err()[0].field,
            "annotator"
        );
    }
}
