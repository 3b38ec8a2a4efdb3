//! JSON-over-HTTP session service for the elicitation front end.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lifeyears_core::elicitation::{
    aggregate, start_quality_session_with, start_sigma_session_with, Answer, Estimate,
    EstimateSummary, SessionState, SessionStatus, TradeOffQuestion, DEFAULT_SESSION_TOL,
};
use lifeyears_core::{ElicitationError, HealthStateId};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub respondent: Option<String>,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub session: SessionState,
}

impl SessionRecord {
    fn estimate(&self) -> Option<Estimate> {
        self.session.estimate().ok()
    }
}

/// What every successful session request returns.
#[derive(Debug, Serialize)]
pub struct Envelope {
    pub id: String,
    pub record: SessionRecord,
    pub estimate: Option<Estimate>,
    pub question: Option<TradeOffQuestion>,
}

impl Envelope {
    fn of(record: &SessionRecord) -> Self {
        Self {
            id: record.id.clone(),
            record: record.clone(),
            estimate: record.estimate(),
            question: record.session.next_question().ok(),
        }
    }
}

type Shared = Arc<Mutex<SessionRecord>>;

#[derive(Default)]
pub struct Store {
    sessions: RwLock<HashMap<String, Shared>>,
    snapshot: Option<PathBuf>,
    snapshot_lock: Mutex<()>,
}

impl Store {
    pub fn new(snapshot: Option<PathBuf>) -> std::io::Result<Self> {
        let mut sessions = HashMap::new();
        if let Some(path) = &snapshot {
            if path.exists() {
                let text = std::fs::read_to_string(path)?;
                let records: Vec<SessionRecord> = serde_json::from_str(&text)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                for r in records {
                    sessions.insert(r.id.clone(), Arc::new(Mutex::new(r)));
                }
            }
        }
        Ok(Self {
            sessions: RwLock::new(sessions),
            snapshot,
            snapshot_lock: Mutex::new(()),
        })
    }

    fn get(&self, id: &str) -> Option<Shared> {
        self.sessions.read().unwrap().get(id).cloned()
    }

    fn all(&self) -> Vec<SessionRecord> {
        let handles: Vec<Shared> = self.sessions.read().unwrap().values().cloned().collect();
        let mut records: Vec<SessionRecord> =
            handles.iter().map(|h| h.lock().unwrap().clone()).collect();
        records.sort_by(|a, b| (a.created_ms, &a.id).cmp(&(b.created_ms, &b.id)));
        records
    }

    /// Writes every record to the snapshot file through a temporary file and rename.
    fn persist(&self) -> Result<(), ApiError> {
        let Some(path) = &self.snapshot else {
            return Ok(());
        };
        let _guard = self.snapshot_lock.lock().unwrap();
        let mut records = self.all();
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let text = serde_json::to_string_pretty(&records).expect("records serialize");
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| {
                ApiError::new(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    "snapshot_failed",
                    e.to_string(),
                )
            })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no session `{id}`"),
        )
    }
}

impl From<ElicitationError> for ApiError {
    fn from(e: ElicitationError) -> Self {
        let (status, code) = match &e {
            ElicitationError::SessionFinished => (StatusCode::CONFLICT, "session_finished"),
            ElicitationError::NotConverged => (StatusCode::CONFLICT, "not_converged"),
            ElicitationError::BadBracket { .. } => {
                (StatusCode::UNPROCESSABLE_ENTITY, "bad_bracket")
            }
            ElicitationError::InvalidQ(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_q"),
            ElicitationError::InvalidTolerance => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_tolerance")
            }
            _ => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": self.code, "message": self.message})),
        )
            .into_response()
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(e.to_string()))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn label(s: &str) -> Result<HealthStateId, ApiError> {
    HealthStateId::new(s).map_err(|e| ApiError::invalid(e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum CreateRequest {
    Quality {
        state: String,
        bracket: [f64; 2],
        tol: Option<f64>,
        full_health: Option<String>,
        respondent: Option<String>,
    },
    Sigma {
        q_a: f64,
        bracket: [f64; 2],
        state: Option<String>,
        tol: Option<f64>,
        full_health: Option<String>,
        respondent: Option<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerRequest {
    answer: Answer,
    /// Position of the question being answered; repeats of an applied answer are no-ops.
    index: Option<usize>,
    /// Value the answer refers to, when not the current question's.
    value: Option<f64>,
}

async fn create(
    State(store): State<Arc<Store>>,
    body: Bytes,
) -> Result<(StatusCode, Json<Envelope>), ApiError> {
    let req: CreateRequest = parse(&body)?;
    let (session, respondent) = match req {
        CreateRequest::Quality {
            state,
            bracket,
            tol,
            full_health,
            respondent,
        } => (
            start_quality_session_with(
                label(&state)?,
                label(full_health.as_deref().unwrap_or("a*"))?,
                bracket[0],
                bracket[1],
                tol.unwrap_or(DEFAULT_SESSION_TOL),
            )?,
            respondent,
        ),
        CreateRequest::Sigma {
            q_a,
            bracket,
            state,
            tol,
            full_health,
            respondent,
        } => (
            start_sigma_session_with(
                q_a,
                label(state.as_deref().unwrap_or("a"))?,
                label(full_health.as_deref().unwrap_or("a*"))?,
                bracket[0],
                bracket[1],
                tol.unwrap_or(DEFAULT_SESSION_TOL),
            )?,
            respondent,
        ),
    };
    let now = now_ms();
    let record = SessionRecord {
        id: format!("{:032x}", rand::random::<u128>()),
        respondent,
        created_ms: now,
        updated_ms: now,
        session,
    };
    let envelope = Envelope::of(&record);
    store
        .sessions
        .write()
        .unwrap()
        .insert(record.id.clone(), Arc::new(Mutex::new(record)));
    store.persist()?;
    Ok((StatusCode::CREATED, Json(envelope)))
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    id: String,
    kind: &'static str,
    state: HealthStateId,
    status: &'static str,
    questions_answered: usize,
    estimate: Option<f64>,
    respondent: Option<String>,
}

#[derive(Debug, Serialize)]
struct AggregateRow {
    kind: &'static str,
    state: HealthStateId,
    summary: EstimateSummary,
}

async fn list(State(store): State<Arc<Store>>) -> Json<serde_json::Value> {
    let records = store.all();
    let mut groups: BTreeMap<(&'static str, HealthStateId), Vec<f64>> = BTreeMap::new();
    let rows: Vec<SummaryRow> = records
        .iter()
        .map(|r| {
            let s = &r.session;
            let estimate = r.estimate().map(|e| e.value);
            if let Some(v) = estimate {
                groups
                    .entry((s.kind.name(), s.kind.state().clone()))
                    .or_default()
                    .push(v);
            }
            SummaryRow {
                id: r.id.clone(),
                kind: s.kind.name(),
                state: s.kind.state().clone(),
                status: match s.status {
                    SessionStatus::Active => "active",
                    SessionStatus::Converged { .. } => "converged",
                    SessionStatus::Inconsistent { .. } => "inconsistent",
                },
                questions_answered: s.history.len(),
                estimate,
                respondent: r.respondent.clone(),
            }
        })
        .collect();
    let aggregates: Vec<AggregateRow> = groups
        .into_iter()
        .map(|((kind, state), values)| AggregateRow {
            kind,
            state,
            summary: aggregate(&values).expect("groups are nonempty"),
        })
        .collect();
    Json(json!({"sessions": rows, "aggregates": aggregates}))
}

async fn show(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Json<Envelope>, ApiError> {
    let handle = store.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let record = handle.lock().unwrap();
    Ok(Json(Envelope::of(&record)))
}

async fn question(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Json<TradeOffQuestion>, ApiError> {
    let handle = store.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let record = handle.lock().unwrap();
    Ok(Json(record.session.next_question()?))
}

async fn answer(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Envelope>, ApiError> {
    let handle = store.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let req: AnswerRequest = parse(&body)?;
    let envelope = {
        let mut record = handle.lock().unwrap();
        let answered = record.session.history.len();
        if let Some(index) = req.index {
            if index < answered {
                let prior = &record.session.history[index];
                let same_value = req.value.is_none_or(|v| v == prior.value);
                if prior.answer == req.answer && same_value {
                    return Ok(Json(Envelope::of(&record)));
                }
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "answer_conflict",
                    format!(
                        "question {index} was already answered with {:?}",
                        prior.answer
                    ),
                ));
            }
            if index > answered {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "index_ahead",
                    format!("question {index} has not been asked; {answered} answered so far"),
                ));
            }
        }
        match req.value {
            Some(v) => record.session.submit_answer_at(v, req.answer)?,
            None => record.session.submit_answer(req.answer)?,
        }
        record.updated_ms = now_ms();
        Envelope::of(&record)
    };
    store.persist()?;
    Ok(Json(envelope))
}

async fn estimate(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
) -> Result<Json<Estimate>, ApiError> {
    let handle = store.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let record = handle.lock().unwrap();
    Ok(Json(record.session.estimate()?))
}

/// The service's routes; `cors` is the allowed browser origin, if any.
pub fn router(store: Arc<Store>, cors: Option<&str>) -> Result<Router, String> {
    let mut app = Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/question", get(question))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/estimate", get(estimate))
        .with_state(store);
    if let Some(origin) = cors {
        let origin: HeaderValue = origin
            .parse()
            .map_err(|_| format!("invalid CORS origin `{origin}`"))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

pub async fn serve(
    port: u16,
    host: &str,
    snapshot: Option<PathBuf>,
    cors: Option<&str>,
) -> Result<(), String> {
    let store = Arc::new(Store::new(snapshot).map_err(|e| format!("loading snapshot: {e}"))?);
    let app = router(store, cors)?;
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| format!("binding {host}:{port}: {e}"))?;
    eprintln!(
        "listening on http://{}",
        listener.local_addr().map_err(|e| e.to_string())?
    );
    axum::serve(listener, app).await.map_err(|e| e.to_string())
}
