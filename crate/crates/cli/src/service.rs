//! JSON-over-HTTP front end: region info, route lookup and asynchronous scenario jobs.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use haulcharge_core::data::{RegionData, ScenarioSettings};
use haulcharge_core::network::k_fastest_routes;
use haulcharge_core::scenario::RunOptions;
use haulcharge_core::ScenarioResult;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::run_to_dir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub status: JobStatus,
    /// Seconds since the Unix epoch.
    pub submitted_at: u64,
    pub result_path: Option<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Default)]
pub struct JobStore {
    jobs: HashMap<String, (JobRecord, Option<Arc<ScenarioResult>>)>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

static JOB_COUNTER: AtomicU64 = AtomicU64::new(0);

impl JobStore {
    /// Registers a new queued job.
    pub fn create(&mut self) -> JobRecord {
        let n = JOB_COUNTER.fetch_add(1, Ordering::Relaxed) + 1;
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
        let record = JobRecord {
            job_id: format!("{nanos:x}-{n}"),
            status: JobStatus::Queued,
            submitted_at: unix_now(),
            result_path: None,
            error: None,
        };
        self.jobs.insert(record.job_id.clone(), (record.clone(), None));
        record
    }

    pub fn get(&self, id: &str) -> Option<&JobRecord> {
        self.jobs.get(id).map(|(r, _)| r)
    }

    pub fn result(&self, id: &str) -> Option<Arc<ScenarioResult>> {
        self.jobs.get(id).and_then(|(_, r)| r.clone())
    }

    pub fn set_running(&mut self, id: &str) {
        if let Some((r, _)) = self.jobs.get_mut(id) {
            r.status = JobStatus::Running;
        }
    }

    pub fn complete(&mut self, id: &str, result_path: PathBuf, result: ScenarioResult) {
        if let Some((r, slot)) = self.jobs.get_mut(id) {
            r.status = JobStatus::Done;
            r.result_path = Some(result_path);
            *slot = Some(Arc::new(result));
        }
    }

    pub fn fail(&mut self, id: &str, error: String) {
        if let Some((r, _)) = self.jobs.get_mut(id) {
            r.status = JobStatus::Failed;
            r.error = Some(error);
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    region: Arc<RegionData>,
    jobs: Arc<Mutex<JobStore>>,
    slots: Arc<Semaphore>,
    out_dir: Arc<PathBuf>,
}

impl AppState {
    /// `workers` scenario jobs run at once; results go under `out_dir/<job_id>/`.
    pub fn new(region: RegionData, out_dir: PathBuf, workers: usize) -> Self {
        Self {
            region: Arc::new(region),
            jobs: Arc::new(Mutex::new(JobStore::default())),
            slots: Arc::new(Semaphore::new(workers.max(1))),
            out_dir: Arc::new(out_dir),
        }
    }

    pub fn jobs(&self) -> MutexGuard<'_, JobStore> {
        // a panic while holding the lock leaves plain data behind; keep serving it
        self.jobs.lock().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct RegionInfo {
    pub name: String,
    pub cities: Vec<String>,
    pub counties: Vec<String>,
    pub utilities: Vec<String>,
}

async fn region_info(State(state): State<AppState>) -> Json<RegionInfo> {
    let g = &state.region.graph;
    Json(RegionInfo {
        name: state.region.name().to_string(),
        cities: g.city_index().keys().cloned().collect(),
        counties: g.counties().into_iter().map(str::to_string).collect(),
        utilities: g.utilities().into_iter().map(str::to_string).collect(),
    })
}

async fn routes(
    State(state): State<AppState>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    if let Some(k) = query.keys().find(|k| *k != "origin" && *k != "destination") {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, format!("unknown query parameter `{k}`")));
    }
    let param = |name: &str| {
        query
            .get(name)
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("missing query parameter `{name}`")))
    };
    let (origin, destination) = (param("origin")?, param("destination")?);
    let graph = &state.region.graph;
    for city in [origin, destination] {
        if !graph.city_index().contains_key(city) {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown city `{city}`")));
        }
    }
    let s = &state.region.config.scenario;
    let found = k_fastest_routes(graph, origin, destination, s.k_routes, s.spacing_km)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))?;
    Ok(Json(found).into_response())
}

/// Body of `POST /api/scenario`. Omitted numbers fall back to the region config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRequest {
    pub cities: Vec<String>,
    pub bev_fraction: Option<f64>,
    pub k_routes: Option<usize>,
    pub spacing_km: Option<f64>,
    pub sweep_steps: Option<usize>,
}

pub const MAX_K_ROUTES: usize = 10;
pub const MAX_SWEEP_STEPS: usize = 1001;

impl ScenarioRequest {
    fn settings(&self, region: &RegionData) -> ApiResult<ScenarioSettings> {
        let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, m);
        let known = region.graph.city_index();
        if let Some(c) = self.cities.iter().find(|c| !known.contains_key(*c)) {
            return Err(bad(format!("unknown city `{c}`")));
        }
        let distinct: BTreeSet<&String> = self.cities.iter().collect();
        if distinct.len() < 2 {
            return Err(bad("select at least two distinct cities".into()));
        }
        let mut s = region.config.scenario.clone();
        s.cities = Some(distinct.into_iter().cloned().collect());
        if let Some(f) = self.bev_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(bad(format!("bev_fraction {f} outside [0, 1]")));
            }
            s.bev_fraction = f;
        }
        if let Some(k) = self.k_routes {
            if !(1..=MAX_K_ROUTES).contains(&k) {
                return Err(bad(format!("k_routes {k} outside 1..={MAX_K_ROUTES}")));
            }
            s.k_routes = k;
        }
        if let Some(d) = self.spacing_km {
            if !(d > 0.0 && d.is_finite()) {
                return Err(bad(format!("spacing_km {d} must be positive")));
            }
            s.spacing_km = d;
        }
        if let Some(n) = self.sweep_steps {
            if !(2..=MAX_SWEEP_STEPS).contains(&n) {
                return Err(bad(format!("sweep_steps {n} outside 2..={MAX_SWEEP_STEPS}")));
            }
            s.sweep_steps = n;
        }
        Ok(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: String,
}

async fn submit(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<JobCreated>)> {
    let req: ScenarioRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed scenario request: {e}")))?;
    let settings = req.settings(&state.region)?;
    let id = state.jobs().create().job_id;

    let worker = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let _permit = worker.slots.clone().acquire_owned().await;
        worker.jobs().set_running(&job_id);
        let dir = worker.out_dir.join(&job_id);
        let region = worker.region.clone();
        let outcome =
            tokio::task::spawn_blocking(move || run_to_dir(&region, &settings, RunOptions::default(), &dir)).await;
        let mut jobs = worker.jobs();
        match outcome {
            Ok(Ok((result, path))) => jobs.complete(&job_id, path, result),
            Ok(Err(e)) => jobs.fail(&job_id, format!("{e:#}")),
            Err(e) => jobs.fail(&job_id, format!("scenario worker stopped: {e}")),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job_id: id })))
}

fn unknown_job(id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("unknown job `{id}`"))
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<JobRecord>> {
    state.jobs().get(&id).cloned().map(Json).ok_or_else(|| unknown_job(&id))
}

async fn result(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let jobs = state.jobs();
    let record = jobs.get(&id).ok_or_else(|| unknown_job(&id))?;
    match record.status {
        JobStatus::Queued | JobStatus::Running => Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("job `{id}` is {}", if record.status == JobStatus::Queued { "queued" } else { "running" }),
        )),
        JobStatus::Failed => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            record.error.clone().unwrap_or_default(),
        )),
        JobStatus::Done => {
            let r = jobs.result(&id).ok_or_else(|| unknown_job(&id))?;
            Ok(Json(&*r).into_response())
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/region", get(region_info))
        .route("/api/routes", get(routes))
        .route("/api/scenario", post(submit))
        .route("/api/jobs/{id}", get(job))
        .route("/api/results/{id}", get(result))
        .with_state(state)
}
