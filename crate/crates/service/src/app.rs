//! Shared service state and HTTP routes.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use foodprompt::evaluation::{arm_metrics, MetricsReport, DEFAULT_MAX_MINUTES, DEFAULT_MIN_KCAL};
use foodprompt::persistence::FoodListEntry;
use foodprompt::{Arm, CoOccurrenceModel, DeviceClass, FoodCode, RawRecall, RuleSet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::policy::{ArmAssigner, ArmPolicy};
use crate::search::{search_foods, MAX_SEARCH_RESULTS};
use crate::session::{AcceptOutcome, GeneratedPrompts, ImmediatePrompts, Session};
use crate::store::LogStore;

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(24 * 60 * 60);

/// Immutable data shared by all handlers. Reloading swaps the whole value.
#[derive(Debug, Default)]
pub struct Snapshot {
    pub model: Option<CoOccurrenceModel>,
    pub rules: Option<RuleSet>,
    pub foods: Vec<FoodListEntry>,
}

impl Snapshot {
    fn serves(&self, arm: Arm) -> bool {
        match arm {
            Arm::Handcoded => self.rules.is_some(),
            Arm::Generated => self.model.is_some(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub arm_policy: ArmPolicy,
    pub seed: u64,
    pub log_dir: PathBuf,
    pub session_ttl: Duration,
}

type SessionHandle = Arc<Mutex<Session>>;

#[derive(Debug)]
pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    sessions: Mutex<HashMap<String, SessionHandle>>,
    assigner: Mutex<ArmAssigner>,
    next_session: Mutex<u64>,
    store: LogStore,
    session_ttl: Duration,
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn session_number(id: &str) -> Option<u64> {
    id.strip_prefix('s')?.parse().ok()
}

fn storage(err: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(err.to_string())
}

fn lock<T>(mutex: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    mutex.lock().unwrap_or_else(|p| p.into_inner())
}

impl AppState {
    /// Opens the log directory. Session numbering continues after the
    /// highest id already present in the recall log.
    pub fn new(snapshot: Snapshot, config: &ServiceConfig) -> Result<Self, ServiceError> {
        let store = LogStore::open(&config.log_dir).map_err(storage)?;
        let last = store
            .read_recalls()
            .map_err(storage)?
            .iter()
            .filter_map(|r| session_number(&r.recall_id))
            .max()
            .unwrap_or(0);
        Ok(AppState {
            snapshot: RwLock::new(Arc::new(snapshot)),
            sessions: Mutex::new(HashMap::new()),
            assigner: Mutex::new(ArmAssigner::new(config.arm_policy, config.seed)),
            next_session: Mutex::new(last + 1),
            store,
            session_ttl: config.session_ttl,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Atomically replaces the model; in-flight requests keep the old one.
    pub fn swap_model(&self, model: CoOccurrenceModel) {
        let mut guard = self.snapshot.write().unwrap_or_else(|p| p.into_inner());
        let current = guard.clone();
        *guard = Arc::new(Snapshot {
            model: Some(model),
            rules: current.rules.clone(),
            foods: current.foods.clone(),
        });
    }

    pub fn store(&self) -> &LogStore {
        &self.store
    }

    /// Drops sessions idle for longer than the configured TTL.
    pub fn expire_idle(&self, now: Instant) -> usize {
        let mut sessions = lock(&self.sessions);
        let before = sessions.len();
        sessions.retain(|_, s| now.saturating_duration_since(lock(s).last_active()) <= self.session_ttl);
        before - sessions.len()
    }

    pub fn create_session(&self, respondent_id: Option<String>, device_class: DeviceClass) -> Result<(String, Arm), ServiceError> {
        self.expire_idle(Instant::now());
        let arm = lock(&self.assigner).next_arm();
        if !self.snapshot().serves(arm) {
            return Err(ServiceError::ArmUnavailable(arm));
        }
        let id = {
            let mut next = lock(&self.next_session);
            let id = format!("s{:06}", *next);
            *next += 1;
            id
        };
        let respondent = respondent_id.unwrap_or_else(|| format!("anon-{id}"));
        let session = Session::new(id.clone(), arm, respondent, device_class, now_secs());
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, arm))
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ServiceError> {
        let mut sessions = lock(&self.sessions);
        let handle = sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        let idle = Instant::now().saturating_duration_since(lock(&handle).last_active());
        if idle > self.session_ttl {
            sessions.remove(id);
            return Err(ServiceError::UnknownSession(id.to_string()));
        }
        Ok(handle)
    }

    /// Runs `op` with the session locked; one request per session at a time.
    fn with_session<T>(&self, id: &str, op: impl FnOnce(&mut Session) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let handle = self.session(id)?;
        let mut session = lock(&handle);
        op(&mut session)
    }

    pub fn add_meal(&self, id: &str, name: &str) -> Result<usize, ServiceError> {
        self.with_session(id, |s| s.add_meal(name))
    }

    pub fn add_food(&self, id: &str, meal: usize, food: FoodCode) -> Result<ImmediatePrompts, ServiceError> {
        let snapshot = self.snapshot();
        self.with_session(id, |s| s.add_food(snapshot.rules.as_ref(), meal, food))
    }

    pub fn finish_meal(&self, id: &str, meal: usize) -> Result<GeneratedPrompts, ServiceError> {
        let snapshot = self.snapshot();
        self.with_session(id, |s| s.finish_meal(snapshot.model.as_ref(), meal))
    }

    pub fn accept(&self, id: &str, event_id: &str, accepted: Vec<FoodCode>) -> Result<AcceptOutcome, ServiceError> {
        let snapshot = self.snapshot();
        self.with_session(id, |s| s.accept_prompts(snapshot.rules.as_ref(), event_id, accepted))
    }

    /// Closes the session and persists recall and events before returning.
    pub fn submit(&self, id: &str, duration_minutes: f64, energy_kcal: Option<f64>) -> Result<RawRecall, ServiceError> {
        let handle = self.session(id)?;
        let mut session = lock(&handle);
        let (recall, events) = session.prepare_submission(duration_minutes, energy_kcal, now_secs())?;
        self.store.append_submission(&recall, &events).map_err(storage)?;
        session.close();
        Ok(RawRecall::from(&recall))
    }

    pub fn metrics(&self) -> Result<MetricsReport, ServiceError> {
        let recalls = self.store.read_recalls().map_err(storage)?;
        let events = self.store.read_events().map_err(storage)?;
        Ok(arm_metrics(&recalls, &events, DEFAULT_MIN_KCAL, DEFAULT_MAX_MINUTES))
    }
}

fn parse_food(raw: &str) -> Result<FoodCode, ServiceError> {
    FoodCode::new(raw).map_err(|e| ServiceError::InvalidInput(e.to_string()))
}

#[derive(Debug, Deserialize, Default)]
struct CreateSessionBody {
    respondent_id: Option<String>,
    #[serde(default)]
    device_class: DeviceClass,
}

#[derive(Debug, Serialize)]
struct CreatedSession {
    session_id: String,
    arm: Arm,
}

#[derive(Debug, Deserialize, Default)]
struct AddMealBody {
    #[serde(default)]
    name: String,
}

#[derive(Debug, Deserialize)]
struct AddFoodBody {
    food: String,
}

#[derive(Debug, Deserialize)]
struct AcceptBody {
    #[serde(default)]
    accepted: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SubmitBody {
    duration_minutes: f64,
    energy_kcal: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
    limit: Option<usize>,
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ServiceError>;

async fn health(State(state): State<Shared>) -> Json<Value> {
    let snapshot = state.snapshot();
    Json(json!({
        "status": "ok",
        "model_loaded": snapshot.model.is_some(),
        "rules_loaded": snapshot.rules.is_some(),
        "foods": snapshot.foods.len(),
    }))
}

async fn create_session(State(state): State<Shared>, body: Option<Json<CreateSessionBody>>) -> ApiResult<CreatedSession> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let (session_id, arm) = state.create_session(body.respondent_id, body.device_class)?;
    Ok(Json(CreatedSession { session_id, arm }))
}

async fn add_meal(State(state): State<Shared>, Path(id): Path<String>, body: Option<Json<AddMealBody>>) -> ApiResult<Value> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let meal_index = state.add_meal(&id, &body.name)?;
    Ok(Json(json!({ "meal_index": meal_index })))
}

async fn add_food(
    State(state): State<Shared>,
    Path((id, meal)): Path<(String, usize)>,
    Json(body): Json<AddFoodBody>,
) -> ApiResult<ImmediatePrompts> {
    Ok(Json(state.add_food(&id, meal, parse_food(&body.food)?)?))
}

async fn finish_meal(State(state): State<Shared>, Path((id, meal)): Path<(String, usize)>) -> ApiResult<GeneratedPrompts> {
    Ok(Json(state.finish_meal(&id, meal)?))
}

async fn accept(
    State(state): State<Shared>,
    Path((id, event_id)): Path<(String, String)>,
    Json(body): Json<AcceptBody>,
) -> ApiResult<AcceptOutcome> {
    let accepted = body.accepted.iter().map(|f| parse_food(f)).collect::<Result<Vec<_>, _>>()?;
    Ok(Json(state.accept(&id, &event_id, accepted)?))
}

async fn submit(State(state): State<Shared>, Path(id): Path<String>, Json(body): Json<SubmitBody>) -> ApiResult<RawRecall> {
    let state = state.clone();
    let recall = tokio::task::spawn_blocking(move || state.submit(&id, body.duration_minutes, body.energy_kcal))
        .await
        .map_err(storage)??;
    Ok(Json(recall))
}

async fn search(State(state): State<Shared>, Query(query): Query<SearchQuery>) -> Json<Vec<FoodListEntry>> {
    let snapshot = state.snapshot();
    let limit = query.limit.unwrap_or(MAX_SEARCH_RESULTS);
    Json(search_foods(&snapshot.foods, &query.q, limit).into_iter().cloned().collect())
}

async fn metrics(State(state): State<Shared>) -> ApiResult<MetricsReport> {
    let state = state.clone();
    let report = tokio::task::spawn_blocking(move || state.metrics()).await.map_err(storage)??;
    Ok(Json(report))
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/meals", post(add_meal))
        .route("/sessions/{id}/meals/{meal}/foods", post(add_food))
        .route("/sessions/{id}/meals/{meal}/finish", post(finish_meal))
        .route("/sessions/{id}/events/{event}/accept", post(accept))
        .route("/sessions/{id}/submit", post(submit))
        .route("/foods", get(search))
        .route("/metrics", get(metrics))
        .with_state(state)
}
