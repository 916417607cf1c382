//! HTTP/JSON API over one immutable loaded model.
//!
//! Every response carries the model hash in an `x-model-hash` header and,
//! for JSON bodies, a `model_hash` field. Inference runs on the blocking
//! pool; run persistence goes through a single writer lock.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use polinfer::document::{parse_json, FieldError, LoadedModel, ScenarioDocument, ScenarioError};
use polinfer::runs::{evaluate, Evaluation, EvaluationError, RunRecord, RunStore};
use polinfer::temporal::{slice_marginals, slice_sensitivity, unroll};
use polinfer::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const MODEL_HASH_HEADER: &str = "x-model-hash";
/// Deepest slice `/sensitivity` will unroll to.
pub const MAX_SENSITIVITY_SLICE: usize = 20;

pub struct AppState {
    pub model: LoadedModel,
    store: RunStore,
    writer: Mutex<()>,
    slice_one: BTreeMap<String, Vec<f64>>,
}

impl AppState {
    pub fn new(model: LoadedModel, runs: &Path) -> anyhow::Result<Arc<Self>> {
        let names: Vec<&str> = model.document.variables.iter().map(|v| v.name.as_str()).collect();
        let slice_one = slice_marginals(&unroll(&model.dbn, 1)?, &names)?
            .remove(0)
            .into_iter()
            .map(|m| (m.variable, m.distribution))
            .collect();
        Ok(Arc::new(Self {
            store: RunStore::open(runs)?,
            model,
            writer: Mutex::new(()),
            slice_one,
        }))
    }

    fn hash(&self) -> &str {
        &self.model.hash
    }

    fn error(&self, status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            message: message.into(),
            fields: Vec::new(),
            model_hash: self.hash().to_string(),
        }
    }

    fn field_error(&self, status: StatusCode, fields: Vec<FieldError>) -> ApiError {
        let message = fields
            .iter()
            .map(|f| format!("{}: {}", f.field, f.message))
            .collect::<Vec<_>>()
            .join("; ");
        ApiError {
            fields,
            ..self.error(status, message)
        }
    }

    /// Parse a JSON body, turning the failing path into a field error.
    fn parse_body<T: serde::de::DeserializeOwned>(&self, body: &[u8]) -> Result<T, ApiError> {
        let text = std::str::from_utf8(body).map_err(|_| self.error(StatusCode::BAD_REQUEST, "body is not UTF-8"))?;
        parse_json(text).map_err(|e| match e {
            Error::Document { path, message } => {
                let field = path.strip_prefix("$.").unwrap_or(&path).to_string();
                self.field_error(StatusCode::BAD_REQUEST, vec![FieldError { field, message }])
            }
            other => self.error(StatusCode::BAD_REQUEST, other.to_string()),
        })
    }

    fn evaluation_error(&self, e: EvaluationError) -> ApiError {
        match e {
            EvaluationError::Scenario(ScenarioError::Malformed(f)) => self.field_error(StatusCode::BAD_REQUEST, f),
            EvaluationError::Scenario(ScenarioError::Infeasible(f)) => {
                self.field_error(StatusCode::UNPROCESSABLE_ENTITY, f)
            }
            EvaluationError::Engine(e) => self.engine_error(e),
        }
    }

    fn engine_error(&self, e: Error) -> ApiError {
        let status = match e {
            Error::UnknownVariable(_) | Error::UnknownState { .. } => StatusCode::NOT_FOUND,
            Error::InvalidQuery(_) => StatusCode::BAD_REQUEST,
            Error::InvalidIntervention { .. }
            | Error::ConflictingInterventions { .. }
            | Error::WindowOutOfRange { .. }
            | Error::InvalidUtility(_)
            | Error::MissingMarginal(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        self.error(status, e.to_string())
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub fields: Vec<FieldError>,
    pub model_hash: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": self.message,
            "fields": self.fields,
            "model_hash": self.model_hash,
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

fn with_hash<T: Serialize>(state: &AppState, body: T) -> ApiResult {
    let mut v =
        serde_json::to_value(body).map_err(|e| state.error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    if let Value::Object(map) = &mut v {
        map.insert("model_hash".into(), Value::from(state.hash()));
    }
    Ok(Json(v))
}

async fn blocking<T: Send + 'static>(
    state: &Arc<AppState>,
    f: impl FnOnce(&AppState) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    let s = Arc::clone(state);
    tokio::task::spawn_blocking(move || f(&s))
        .await
        .map_err(|e| state.error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/model", get(model))
        .route("/nodes/{name}", get(node))
        .route("/scenarios/evaluate", post(evaluate_scenario))
        .route("/sensitivity", get(sensitivity))
        .route("/runs", get(list_runs).post(create_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/replay", post(replay_run))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(Arc::clone(&state), stamp_hash))
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("serving model {} on http://{}", state.hash(), listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn stamp_hash(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let mut res = next.run(req).await;
    if let Ok(v) = HeaderValue::from_str(state.hash()) {
        res.headers_mut().insert(MODEL_HASH_HEADER, v);
    }
    res
}

async fn not_found(State(state): State<Arc<AppState>>) -> ApiError {
    state.error(StatusCode::NOT_FOUND, "no such endpoint")
}

#[derive(Serialize)]
struct NodeSummary<'a> {
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    states: &'a [String],
    parents: Vec<&'a str>,
    lagged_parents: Vec<&'a str>,
    /// `prior` for roots (distribution replacement allowed), else `fix`.
    intervention: &'static str,
    marginal: &'a [f64],
}

fn summary<'a>(state: &'a AppState, id: usize) -> NodeSummary<'a> {
    let dbn = &state.model.dbn;
    let decl = &state.model.document.variables[id];
    let names =
        |ids: Vec<usize>| -> Vec<&'a str> { ids.into_iter().map(|p| dbn.initial().variable(p).name()).collect() };
    let t = dbn.transition_cpt(id);
    NodeSummary {
        name: &decl.name,
        label: decl.label.as_deref(),
        states: &decl.states,
        parents: names(dbn.initial().parents(id).to_vec()),
        lagged_parents: names(t.parents.iter().filter(|p| p.lag == 1).map(|p| p.variable).collect()),
        intervention: if dbn.is_root(id) { "prior" } else { "fix" },
        marginal: state.slice_one.get(&decl.name).map(Vec::as_slice).unwrap_or(&[]),
    }
}

async fn model(State(state): State<Arc<AppState>>) -> ApiResult {
    let doc = &state.model.document;
    let nodes: Vec<NodeSummary> = (0..state.model.dbn.len()).map(|i| summary(&state, i)).collect();
    with_hash(
        &state,
        json!({
            "name": doc.name,
            "description": doc.description,
            "nodes": nodes,
            "edges": doc.edges,
            "utility": doc.utility,
            "provenance": doc.metadata.provenance,
        }),
    )
}

async fn node(State(state): State<Arc<AppState>>, UrlPath(name): UrlPath<String>) -> ApiResult {
    let id = state
        .model
        .dbn
        .id(&name)
        .map_err(|_| state.error(StatusCode::NOT_FOUND, format!("unknown node `{name}`")))?;
    let doc = &state.model.document;
    let cpt = doc.cpts.iter().find(|c| c.variable == name);
    let transition = doc.transition.iter().find(|c| c.variable == name);
    let mut body = serde_json::to_value(summary(&state, id)).unwrap_or_default();
    body["cpt"] = json!(cpt);
    body["transition"] = json!(transition);
    body["provenance"] = json!(doc.metadata.provenance.get(&name));
    with_hash(&state, body)
}

#[derive(Serialize)]
struct ContributionSlice {
    slice: usize,
    values: Vec<f64>,
    total: f64,
}

#[derive(Serialize)]
struct Contributions<'a> {
    labels: &'a [String],
    slices: Vec<ContributionSlice>,
}

#[derive(Serialize)]
struct EvaluationBody<'a> {
    run_id: String,
    #[serde(flatten)]
    evaluation: &'a Evaluation,
    contributions: Contributions<'a>,
}

fn evaluation_body(state: &AppState, e: &Evaluation) -> ApiResult {
    let run_id = RunRecord::id_for(&e.model_hash, &e.scenario).map_err(|err| state.engine_error(err))?;
    let contributions = Contributions {
        labels: &e.timeline.targets,
        slices: e
            .timeline
            .records
            .iter()
            .map(|r| ContributionSlice {
                slice: r.slice,
                values: r.contributions.clone(),
                total: r.contributions.iter().sum(),
            })
            .collect(),
    };
    with_hash(
        state,
        EvaluationBody {
            run_id,
            evaluation: e,
            contributions,
        },
    )
}

async fn evaluate_scenario(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let doc: ScenarioDocument = state.parse_body(&body)?;
    blocking(&state, move |s| {
        let e = evaluate(&s.model, &doc).map_err(|e| s.evaluation_error(e))?;
        evaluation_body(s, &e)
    })
    .await
}

async fn sensitivity(State(state): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> ApiResult {
    let mut fields = Vec::new();
    let mut number = |key: &str, default: Option<usize>| -> Option<usize> {
        match q.get(key) {
            None => default,
            Some(v) => v
                .parse()
                .map_err(|_| {
                    fields.push(FieldError {
                        field: key.into(),
                        message: format!("`{v}` is not a non-negative integer"),
                    })
                })
                .ok(),
        }
    };
    let slice = number("slice", Some(2));
    let top = number("top", None);
    let target = q.get("target").cloned();
    if target.is_none() {
        fields.push(FieldError {
            field: "target".into(),
            message: "required".into(),
        });
    }
    if let Some(s) = slice {
        if !(1..=MAX_SENSITIVITY_SLICE).contains(&s) {
            fields.push(FieldError {
                field: "slice".into(),
                message: format!("must be within 1..={MAX_SENSITIVITY_SLICE}"),
            });
        }
    }
    if !fields.is_empty() {
        return Err(state.field_error(StatusCode::BAD_REQUEST, fields));
    }
    let (target, slice) = (target.unwrap_or_default(), slice.unwrap_or(2));
    if state.model.dbn.id(&target).is_err() {
        return Err(state.error(StatusCode::NOT_FOUND, format!("unknown node `{target}`")));
    }
    blocking(&state, move |s| {
        let report = slice_sensitivity(&s.model.dbn, &target, slice, top.unwrap_or(usize::MAX))
            .map_err(|e| s.engine_error(e))?;
        with_hash(
            s,
            json!({ "target": report.target, "slice": slice, "rows": report.rows }),
        )
    })
    .await
}

async fn list_runs(State(state): State<Arc<AppState>>) -> ApiResult {
    blocking(&state, |s| {
        let runs = s.store.list().map_err(|e| s.engine_error(e))?;
        with_hash(s, json!({ "runs": runs }))
    })
    .await
}

fn load_run(s: &AppState, id: &str) -> ApiResult<RunRecord> {
    s.store
        .get(id)
        .map_err(|e| s.engine_error(e))?
        .ok_or_else(|| s.error(StatusCode::NOT_FOUND, format!("unknown run `{id}`")))
}

async fn get_run(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    blocking(&state, move |s| {
        let record = load_run(s, &id)?;
        Ok(Json(serde_json::to_value(record).unwrap_or_default()))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunRequest {
    scenario: ScenarioDocument,
    /// Hash the client expects the server to hold.
    #[serde(default)]
    model_hash: Option<String>,
}

async fn create_run(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: RunRequest = state.parse_body(&body)?;
    if let Some(h) = &req.model_hash {
        if h != state.hash() {
            return Err(state.error(
                StatusCode::CONFLICT,
                format!("request was built for model {h}, server holds {}", state.hash()),
            ));
        }
    }
    blocking(&state, move |s| {
        let e = evaluate(&s.model, &req.scenario).map_err(|e| s.evaluation_error(e))?;
        let record = RunRecord::from_evaluation(e).map_err(|e| s.engine_error(e))?;
        let _guard = s.writer.lock().unwrap_or_else(|p| p.into_inner());
        let existed = s.store.get(&record.id).map_err(|e| s.engine_error(e))?.is_some();
        let stored = s.store.append(&record).map_err(|e| s.engine_error(e))?;
        let status = if existed { StatusCode::OK } else { StatusCode::CREATED };
        Ok((status, Json(serde_json::to_value(stored).unwrap_or_default())))
    })
    .await
}

/// Re-evaluate a stored run against the loaded model.
async fn replay_run(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    blocking(&state, move |s| {
        let record = load_run(s, &id)?;
        if record.model_hash != s.hash() {
            return Err(s.error(
                StatusCode::CONFLICT,
                format!(
                    "run `{id}` was made with model {}, server holds {}",
                    record.model_hash,
                    s.hash()
                ),
            ));
        }
        let e = evaluate(&s.model, &record.scenario).map_err(|e| s.evaluation_error(e))?;
        let reproduced = e.timeline == record.timeline && e.marginals == record.marginals;
        with_hash(
            s,
            json!({ "run_id": record.id, "reproduced": reproduced, "timeline": e.timeline }),
        )
    })
    .await
}
