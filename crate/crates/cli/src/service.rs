//! JSON-over-HTTP interface for the what-if front end.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use landscape_core::store::BaselineSummary;
use landscape_core::{Emulator, Error, POLICY_SPECS};
use serde::{Deserialize, Serialize};
use tower_http::cors::{Any, CorsLayer};

use crate::{
    load_baseline, policy_from_map, predict_report, run_search, SearchError, SearchRequest,
    DEFAULT_SAMPLE_CAP,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub model: Option<PathBuf>,
    /// Study directory (or saved summary JSON) simulated at the baseline policy.
    pub baseline: Option<PathBuf>,
    pub listen: String,
    pub sample_cap: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            model: None,
            baseline: None,
            listen: "127.0.0.1:8080".into(),
            sample_cap: DEFAULT_SAMPLE_CAP,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub emulator: Option<Arc<Emulator>>,
    pub baseline: Option<Arc<BaselineSummary>>,
    pub sample_cap: usize,
}

impl AppState {
    /// Loads whatever the config points at. A path that fails to load is
    /// logged and left empty so the affected routes answer 503.
    pub fn from_config(cfg: &ServiceConfig) -> Self {
        let emulator = cfg.model.as_ref().and_then(|p| match Emulator::load(p) {
            Ok(e) => Some(Arc::new(e)),
            Err(e) => {
                log::error!("model {}: {e}", p.display());
                None
            }
        });
        let baseline = cfg.baseline.as_ref().and_then(|p| match load_baseline(p) {
            Ok(b) => Some(Arc::new(b)),
            Err(e) => {
                log::error!("baseline {}: {e}", p.display());
                None
            }
        });
        Self {
            emulator,
            baseline,
            sample_cap: cfg.sample_cap,
        }
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any);
    Router::new()
        .route("/health", get(health))
        .route("/baseline", get(baseline))
        .route("/policies", get(policies))
        .route("/predict", post(predict))
        .route("/search", post(search))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(cfg: ServiceConfig) -> anyhow::Result<()> {
    let state = AppState::from_config(&cfg);
    let listener = tokio::net::TcpListener::bind(&cfg.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

fn unavailable(what: &str) -> Response {
    error(
        StatusCode::SERVICE_UNAVAILABLE,
        format!("no {what} is loaded"),
    )
}

fn core_error(e: Error) -> Response {
    match e {
        Error::Unfitted(what) => unavailable(&what),
        e @ (Error::PolicyOutOfRange { .. }
        | Error::InvalidConfig(_)
        | Error::KOutOfRange(_)
        | Error::Empty(_)
        | Error::DimensionMismatch { .. }
        | Error::Json(_)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        e => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| {
        error(
            StatusCode::BAD_REQUEST,
            format!("invalid request body: {e}"),
        )
    })
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    model_loaded: bool,
    baseline_loaded: bool,
}

async fn health(State(s): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok",
        model_loaded: s.emulator.is_some(),
        baseline_loaded: s.baseline.is_some(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BaselineResponse {
    pub replicates: usize,
    pub n_agents: usize,
    pub cumulative_infections: MeanSd,
    pub svi_variance: MeanSd,
    pub attack_rate_by_svi: Vec<landscape_core::store::SviAttack>,
}

async fn baseline(State(s): State<AppState>) -> Response {
    let Some(b) = s.baseline.as_deref() else {
        return unavailable("baseline");
    };
    Json(BaselineResponse {
        replicates: b.replicates,
        n_agents: b.n_agents,
        cumulative_infections: MeanSd {
            mean: b.infections_mean,
            sd: b.infections_sd,
        },
        svi_variance: MeanSd {
            mean: b.svi_variance_mean,
            sd: b.svi_variance_sd,
        },
        attack_rate_by_svi: b.attack_svi.clone(),
    })
    .into_response()
}

#[derive(Serialize)]
struct PolicyInfo {
    name: &'static str,
    description: &'static str,
    unit: &'static str,
    lower: f64,
    upper: f64,
    range: &'static str,
    integer: bool,
}

async fn policies() -> Response {
    let list: Vec<PolicyInfo> = POLICY_SPECS
        .iter()
        .map(|s| PolicyInfo {
            name: s.name,
            description: s.description,
            unit: s.unit,
            lower: s.lower,
            upper: s.upper,
            range: s.range,
            integer: s.integer,
        })
        .collect();
    Json(list).into_response()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    #[serde(default)]
    policy: BTreeMap<String, f64>,
}

async fn predict(State(s): State<AppState>, body: Bytes) -> Response {
    let Some(em) = s.emulator.clone() else {
        return unavailable("model");
    };
    let req: PredictRequest = match parse_json(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let pv = match policy_from_map(&req.policy) {
        Ok(p) => p,
        Err(e) => return core_error(e),
    };
    match predict_report(&em, &pv) {
        Ok(r) => Json(r).into_response(),
        Err(e) => core_error(e),
    }
}

async fn search(State(s): State<AppState>, body: Bytes) -> Response {
    let Some(em) = s.emulator.clone() else {
        return unavailable("model");
    };
    let req: SearchRequest = match parse_json(&body) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let baseline = s.baseline.clone();
    let cap = s.sample_cap;
    let out =
        tokio::task::spawn_blocking(move || run_search(&em, &req, baseline.as_deref(), cap)).await;
    match out {
        Ok(Ok((resp, _, _))) => Json(resp).into_response(),
        Ok(Err(SearchError::TooLarge { requested, cap })) => error(
            StatusCode::PAYLOAD_TOO_LARGE,
            SearchError::TooLarge { requested, cap }.to_string(),
        ),
        Ok(Err(SearchError::Invalid(e))) => core_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}
