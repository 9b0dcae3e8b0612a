//! HTTP front end.
//!
//! Handlers never touch the orchestrator for reads: after each committed
//! mutation the writer publishes an immutable [`ReadModel`] through a watch
//! channel and GET requests are served from the latest one. Mutations are
//! run on the blocking pool under the writer lock, one at a time.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use s3_core::classifier::RuleTable;
use s3_core::composer::NfDescriptor;
use s3_core::config::ServiceConfig;
use s3_core::emulator::{build_network, run_scenario, verify_isolation, IsolationVerdict, MetricsReport, Scenario};
use s3_core::pool::{ResourcePool, UtilizationReport};
use s3_core::slice::{ApiOperation, SliceInstance, TenantControl};

use crate::error::{ApiError, ErrorBody, Stage};
use crate::notify::{Notification, Notifier, Subscription};
use crate::orchestrator::{describe, stitch_tables, Orchestrator, Outcome, SliceEvent, StitchTable};
use crate::requests::{NssiRequest, QosDelta, SliceSummary, StandaloneRequest};

pub const TENANT_HEADER: &str = "x-tenant";

/// Immutable view served to readers.
#[derive(Debug, Clone)]
pub struct ReadModel {
    pub slices: Vec<SliceInstance>,
    pub pool: ResourcePool,
    pub rules: RuleTable,
    pub catalog: Vec<NfDescriptor>,
    pub events: Vec<SliceEvent>,
}

impl ReadModel {
    fn of(o: &Orchestrator) -> Self {
        ReadModel {
            slices: o.slices().to_vec(),
            pool: o.pool().clone(),
            rules: o.rules().clone(),
            catalog: o.catalog().to_vec(),
            events: o.events().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioJob {
    pub scenario_id: u64,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<BTreeMap<String, IsolationVerdict>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct AppState {
    config: ServiceConfig,
    writer: Arc<Mutex<Orchestrator>>,
    reads: watch::Receiver<Arc<ReadModel>>,
    publish: watch::Sender<Arc<ReadModel>>,
    notifier: Arc<Notifier>,
    scenarios: Mutex<BTreeMap<u64, ScenarioJob>>,
    next_scenario: AtomicU64,
}

impl AppState {
    pub fn new(orchestrator: Orchestrator) -> Arc<Self> {
        let (publish, reads) = watch::channel(Arc::new(ReadModel::of(&orchestrator)));
        Arc::new(AppState {
            config: orchestrator.config().clone(),
            writer: Arc::new(Mutex::new(orchestrator)),
            reads,
            publish,
            notifier: Arc::new(Notifier::new()),
            scenarios: Mutex::new(BTreeMap::new()),
            next_scenario: AtomicU64::new(1),
        })
    }

    /// Shared handle to the writer, e.g. for a final checkpoint.
    pub fn writer(&self) -> Arc<Mutex<Orchestrator>> {
        self.writer.clone()
    }

    pub fn notifier(&self) -> &Notifier {
        &self.notifier
    }

    fn read(&self) -> Arc<ReadModel> {
        self.reads.borrow().clone()
    }

    fn caller(&self, headers: &HeaderMap, op: ApiOperation) -> Result<TenantControl, ApiError> {
        let name = headers
            .get(TENANT_HEADER)
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| ApiError::forbidden("missing X-Tenant header"))?;
        let level = *self
            .config
            .tenants
            .get(name)
            .ok_or_else(|| ApiError::forbidden(format!("unknown tenant {name}")))?;
        Orchestrator::authorize(level, op)?;
        Ok(level)
    }

    /// Runs one mutation on the writer and publishes what it committed.
    async fn mutate<T, F>(self: &Arc<Self>, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Orchestrator) -> Result<T, ApiError> + Send + 'static,
    {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut o = state.writer.lock().unwrap_or_else(|p| p.into_inner());
            let seen = o.events().len();
            let result = f(&mut o);
            // Failed requests can still commit a Failed record and events.
            let fresh = &o.events()[seen..];
            state.notifier.publish_events(fresh);
            state.publish.send_replace(Arc::new(ReadModel::of(&o)));
            result
        })
        .await
        .map_err(|e| ApiError::internal(format!("writer task failed: {e}"), Stage::Request))?
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("MALFORMED_REQUEST", e.to_string(), Stage::Request))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/nssi", post(allocate_nssi))
        .route("/nssi/{id}", patch(modify).delete(deallocate))
        .route("/slices", post(create_slice).get(list_slices))
        .route("/slices/{id}", get(get_slice).patch(modify).delete(deallocate))
        .route("/pool", get(get_pool))
        .route("/rules", get(get_rules))
        .route("/catalog", get(get_catalog).put(put_catalog))
        .route("/events", get(get_events))
        .route("/scenario", post(submit_scenario))
        .route("/scenario/{id}", get(get_scenario))
        .route("/subscriptions", post(subscribe).get(list_subscriptions))
        .with_state(state)
}

fn created(outcome: Outcome, state: &AppState) -> Response {
    (StatusCode::CREATED, Json(describe(&outcome.slice, &state.config.topology))).into_response()
}

async fn allocate_nssi(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let caller = s.caller(&headers, ApiOperation::Create)?;
    let req: NssiRequest = parse(&body)?;
    let outcome = s.mutate(move |o| o.allocate_nssi(caller, req)).await?;
    Ok(created(outcome, &s))
}

async fn create_slice(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let caller = s.caller(&headers, ApiOperation::Create)?;
    let req: StandaloneRequest = parse(&body)?;
    let outcome = s.mutate(move |o| o.create_slice(caller, req)).await?;
    Ok(created(outcome, &s))
}

async fn modify(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let caller = s.caller(&headers, ApiOperation::Modify)?;
    let delta: QosDelta = parse(&body)?;
    let outcome = s.mutate(move |o| o.modify(caller, &id, &delta)).await?;
    Ok(Json(describe(&outcome.slice, &s.config.topology)).into_response())
}

async fn deallocate(State(s): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    let caller = s.caller(&headers, ApiOperation::Delete)?;
    let outcome = s.mutate(move |o| o.deallocate(caller, &id)).await?;
    Ok(Json(describe(&outcome.slice, &s.config.topology)).into_response())
}

async fn list_slices(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<Vec<SliceSummary>>, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    Ok(Json(s.read().slices.iter().map(SliceSummary::from).collect()))
}

async fn get_slice(State(s): State<Arc<AppState>>, Path(id): Path<String>, headers: HeaderMap) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    let read = s.read();
    let slice = read
        .slices
        .iter()
        .find(|x| x.slice_id() == id)
        .ok_or_else(|| ApiError::not_found(format!("slice {id}")))?;
    Ok(Json(describe(slice, &s.config.topology)).into_response())
}

#[derive(Serialize)]
struct PoolResponse {
    pool: ResourcePool,
    utilization: UtilizationReport,
}

async fn get_pool(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::PoolInspect)?;
    let read = s.read();
    Ok(Json(PoolResponse {
        utilization: read.pool.utilization(),
        pool: read.pool.clone(),
    })
    .into_response())
}

#[derive(Serialize)]
struct RulesResponse {
    ingress: RuleTable,
    stitch_points: Vec<StitchTable>,
}

async fn get_rules(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    let read = s.read();
    Ok(Json(RulesResponse {
        stitch_points: stitch_tables(&read.slices, &read.rules, &s.config.topology),
        ingress: read.rules.clone(),
    })
    .into_response())
}

async fn get_catalog(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    Ok(Json(s.read().catalog.clone()).into_response())
}

async fn put_catalog(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let caller = s.caller(&headers, ApiOperation::CatalogEdit)?;
    let catalog: Vec<NfDescriptor> = parse(&body)?;
    s.mutate(move |o| o.set_catalog(caller, catalog)).await?;
    Ok(Json(s.read().catalog.clone()).into_response())
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
}

async fn get_events(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<EventsQuery>,
) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    let read = s.read();
    let events: Vec<&SliceEvent> = read.events.iter().filter(|e| e.timestamp > q.since).collect();
    Ok(Json(events).into_response())
}

#[derive(Serialize)]
struct Accepted {
    scenario_id: u64,
}

async fn submit_scenario(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::ScenarioRun)?;
    let scenario: Scenario = parse(&body)?;
    scenario
        .validate()
        .map_err(|e| ApiError::bad_request("INVALID_SCENARIO", e.to_string(), Stage::Validate))?;
    let read = s.read();
    let mapper = s.config.mapper();
    let net = build_network(&read.slices, &read.pool, &read.rules, &mapper, &s.config.emulator)
        .map_err(|e| ApiError::internal(e.to_string(), Stage::Request))?;
    let id = s.next_scenario.fetch_add(1, Ordering::Relaxed);
    s.scenarios.lock().unwrap().insert(
        id,
        ScenarioJob {
            scenario_id: id,
            status: JobStatus::Running,
            report: None,
            verdicts: None,
            passed: None,
            error: None,
        },
    );
    let state = s.clone();
    let slices = read.slices.clone();
    let tol = s.config.tolerances.isolation;
    tokio::task::spawn_blocking(move || {
        let job = match run_scenario(&net, &scenario) {
            Ok(report) => {
                let verdicts = verify_isolation(&report, &slices, tol);
                let passed = verdicts.values().all(|v| v.passed);
                state.notifier.publish([Notification::ScenarioCompleted { scenario_id: id, passed }]);
                ScenarioJob {
                    scenario_id: id,
                    status: JobStatus::Done,
                    report: Some(report),
                    verdicts: Some(verdicts),
                    passed: Some(passed),
                    error: None,
                }
            }
            Err(e) => {
                state.notifier.publish([Notification::ScenarioFailed {
                    scenario_id: id,
                    reason: e.to_string(),
                }]);
                ScenarioJob {
                    scenario_id: id,
                    status: JobStatus::Failed,
                    report: None,
                    verdicts: None,
                    passed: None,
                    error: Some(e.to_string()),
                }
            }
        };
        state.scenarios.lock().unwrap().insert(id, job);
    });
    Ok((StatusCode::ACCEPTED, Json(Accepted { scenario_id: id })).into_response())
}

async fn get_scenario(State(s): State<Arc<AppState>>, Path(id): Path<u64>, headers: HeaderMap) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::ScenarioRun)?;
    let job = s
        .scenarios
        .lock()
        .unwrap()
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("scenario {id}")))?;
    Ok(Json(job).into_response())
}

#[derive(Deserialize)]
struct SubscribeRequest {
    callback_url: String,
}

async fn subscribe(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    let req: SubscribeRequest = parse(&body)?;
    if !(req.callback_url.starts_with("http://") || req.callback_url.starts_with("https://")) {
        return Err(ApiError::bad_request("INVALID_CALLBACK", "callback_url must be an http(s) URL", Stage::Validate));
    }
    let sub: Subscription = s.notifier.subscribe(req.callback_url);
    Ok((StatusCode::CREATED, Json(sub)).into_response())
}

async fn list_subscriptions(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    s.caller(&headers, ApiOperation::Status)?;
    Ok(Json(s.notifier.subscriptions()).into_response())
}

/// Error body helper for clients and tests.
pub fn error_body(status: u16, body: &[u8]) -> Option<ApiError> {
    serde_json::from_slice::<ErrorBody>(body).ok().map(|body| ApiError { status, body })
}
