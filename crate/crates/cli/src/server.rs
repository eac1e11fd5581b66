//! JSON-over-HTTP service: load an instance, solve it, ask queries.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use exmip_core::iis::IisAlgorithm;
use exmip_core::problems::{load_problem, Family, LoadError, Problem};
use exmip_core::query::{Explanation, Query, QueryError};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::CliError;
use crate::pipeline;
use crate::store::{Session, SessionStatus, Store};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_EXPLAIN_CAP: Duration = Duration::from_secs(120);
pub const DEFAULT_MAX_BODY: usize = 4 << 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Solves and explanations allowed to run at once.
    pub workers: usize,
    pub max_body: usize,
    /// Upper bound on any explanation, whatever the request asks for.
    pub explain_cap: Duration,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            workers: std::thread::available_parallelism().map_or(2, |n| n.get()),
            max_body: DEFAULT_MAX_BODY,
            explain_cap: DEFAULT_EXPLAIN_CAP,
        }
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<Store>,
    workers: Arc<Semaphore>,
    explain_cap: Duration,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details: Value::Null,
        }
    }

    fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    fn not_found(what: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown {what}"),
        )
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Value::Object(details) = self.details {
            error.as_object_mut().expect("object").extend(details);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

fn query_error(e: &QueryError) -> ApiError {
    let code = match e {
        QueryError::UnknownEntity(_) => "unknown_entity",
        QueryError::TimeOutOfWindow { .. } => "time_out_of_window",
        QueryError::DummyActivity(_) => "dummy_activity",
        QueryError::WrongFamily { .. } => "wrong_family",
        QueryError::InvalidGroup(_) => "invalid_group",
        QueryError::Model(_) => "invalid_query",
    };
    ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string())
}

fn load_error(e: &LoadError) -> ApiError {
    let details = match e {
        LoadError::Psplib(p) => json!({ "line": p.line, "section": p.section }),
        LoadError::Cats(c) => json!({ "line": c.line }),
        _ => Value::Null,
    };
    ApiError::new(StatusCode::BAD_REQUEST, "parse_error", e.to_string()).with(details)
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Query(q) => query_error(&q),
            CliError::QueryJson(j) => {
                ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", j.to_string())
            }
            CliError::Load(l) => load_error(&l),
            CliError::Timeout => {
                ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", "time limit reached")
            }
            CliError::NoOptimum(what) => ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "no_optimum",
                format!("main problem {what}"),
            ),
            e => ApiError::internal(e),
        }
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes, empty: T) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(empty);
    }
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))
}

fn seconds(limit: Option<f64>) -> Result<Option<Duration>, ApiError> {
    limit
        .map(|s| {
            Duration::try_from_secs_f64(s).map_err(|_| {
                ApiError::new(
                    StatusCode::BAD_REQUEST,
                    "invalid_request",
                    "time_limit must be a nonnegative number",
                )
            })
        })
        .transpose()
}

fn session(store: &Store, id: &str) -> Result<Session, ApiError> {
    store
        .get(id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::not_found("session"))
}

fn problem_of(store: &Store, s: &Session) -> Result<(Problem, String), ApiError> {
    let payload = store.payload(&s.instance).map_err(ApiError::internal)?;
    let problem = load_problem(s.family, &payload).map_err(|e| load_error(&e))?;
    Ok((problem, payload))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewInstance {
    family: String,
    payload: String,
}

async fn create_instance(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: NewInstance = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))?;
    let family: Family = req
        .family
        .parse()
        .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "unknown_family", e))?;
    let problem = load_problem(family, &req.payload).map_err(|e| load_error(&e))?;
    let s = st
        .store
        .create(family, &req.payload)
        .map_err(ApiError::internal)?;
    let body = json!({
        "id": s.id,
        "family": s.family,
        "status": s.status,
        "variables": problem.model().num_vars(),
        "constraints": problem.model().constraints.len(),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Session>, ApiError> {
    Ok(Json(session(&st.store, &id)?))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolveRequest {
    time_limit: Option<f64>,
}

async fn solve_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: SolveRequest = parse_body(&body, SolveRequest::default())?;
    let limit = seconds(req.time_limit)?;
    let mut s = session(&st.store, &id)?;
    let lock = st.store.lock(&id);
    let _guard = lock.try_lock_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            "busy",
            "the session is already solving or explaining",
        )
    })?;
    let (problem, _) = problem_of(&st.store, &s)?;
    s.status = SessionStatus::Solving;
    st.store.put(&s).map_err(ApiError::internal)?;

    let _permit = st
        .workers
        .clone()
        .acquire_owned()
        .await
        .map_err(ApiError::internal)?;
    let result = tokio::task::spawn_blocking(move || pipeline::solve(&problem, limit))
        .await
        .map_err(ApiError::internal)?;
    match result {
        Ok(solved) => {
            let body = json!({
                "f_star": solved.f_star,
                "solution": solved.solution,
                "nodes": solved.nodes,
                "seconds": solved.seconds,
            });
            s.status = SessionStatus::Solved;
            s.solved = Some(solved);
            s.error = None;
            st.store.put(&s).map_err(ApiError::internal)?;
            Ok(Json(body))
        }
        Err(e) => {
            s.status = SessionStatus::Failed;
            s.error = Some(e.to_string());
            st.store.put(&s).map_err(ApiError::internal)?;
            Err(e.into())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplainRequest {
    query: Value,
    algorithm: Option<String>,
    time_limit: Option<f64>,
}

async fn explain_session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let req: ExplainRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))?;
    let query: Query = serde_json::from_value(req.query)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.to_string()))?;
    let algorithm: IisAlgorithm = match &req.algorithm {
        Some(a) => a
            .parse()
            .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e))?,
        None => IisAlgorithm::Deletion,
    };
    let limit = seconds(req.time_limit)?.map_or(st.explain_cap, |l| l.min(st.explain_cap));

    let s = session(&st.store, &id)?;
    let lock = st.store.lock(&id);
    let _guard = lock.lock_owned().await;
    let s = session(&st.store, &s.id)?;
    let Some(solved) = s.solved.clone() else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_solved",
            "solve the session before asking queries",
        ));
    };
    let (problem, payload) = problem_of(&st.store, &s)?;

    let _permit = st
        .workers
        .clone()
        .acquire_owned()
        .await
        .map_err(ApiError::internal)?;
    let work = tokio::task::spawn_blocking(move || {
        pipeline::explain(
            &problem,
            &payload,
            solved.f_star,
            &query,
            algorithm,
            Some(limit),
        )
    });
    let artifact = match tokio::time::timeout(limit + Duration::from_secs(1), work).await {
        Err(_) => return Err(CliError::Timeout.into()),
        Ok(joined) => joined.map_err(ApiError::internal)??,
    };
    let entry = st
        .store
        .append(&s.id, &artifact)
        .map_err(ApiError::internal)?;
    let stats = match &artifact.explanation {
        Explanation::Reasons { iis, .. } => json!({
            "size": iis.len(),
            "oracle_calls": iis.stats.oracle_calls,
            "seconds": iis.stats.wall_time.as_secs_f64(),
        }),
        Explanation::AlternateOptimum { .. } => Value::Null,
    };
    Ok(Json(json!({
        "outcome": artifact.outcome,
        "algorithm": artifact.algorithm,
        "f_star": artifact.f_star,
        "explanation": artifact.explanation,
        "iis_stats": stats,
        "artifact": entry.artifact,
        "index": entry.index,
    })))
}

async fn history(
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let entries = st
        .store
        .history(&id)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::not_found("session"))?;
    Ok(Json(serde_json::to_value(entries).expect("json")))
}

async fn artifact(
    State(st): State<AppState>,
    Path(hash): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let a = st
        .store
        .artifact(&hash)
        .map_err(ApiError::internal)?
        .ok_or_else(|| ApiError::not_found("artifact"))?;
    Ok(Json(serde_json::to_value(a).expect("json")))
}

pub fn router(config: &ServiceConfig) -> std::io::Result<Router> {
    let state = AppState {
        store: Arc::new(Store::open(&config.data_dir)?),
        workers: Arc::new(Semaphore::new(config.workers.max(1))),
        explain_cap: config.explain_cap,
    };
    Ok(Router::new()
        .route("/instances", post(create_instance))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/solve", post(solve_session))
        .route("/sessions/{id}/explain", post(explain_session))
        .route("/sessions/{id}/history", get(history))
        .route("/artifacts/{hash}", get(artifact))
        .layer(DefaultBodyLimit::max(config.max_body))
        .with_state(state))
}

pub async fn serve(config: ServiceConfig, port: u16) -> std::io::Result<()> {
    let app = router(&config)?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!(
        "listening on {}, data in {}",
        listener.local_addr()?,
        config.data_dir.display()
    );
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
