//! HTTP review service over identification results.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/documents` | `[{doc_id, occurrences, identified, suppressed, words}]` |
//! | GET | `/documents/{id}/occurrences?offset=0&limit=100` | [`OccurrencePage`] |
//! | GET | `/occurrences/{doc}/{token}` | [`Explanation`](crate::nei::Explanation) |
//! | POST | `/decisions` | [`Decision`] → 201 with the appended directive line |
//! | POST | `/rerun` | [`Summary`] |
//!
//! Decisions are appended to the assistance document as `fix` directives
//! and take effect at the next rerun. The assistance document is the only
//! state that outlives the process.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::facts::CacheSet;
use crate::nei::{identify, load_directives, Directive, Document, NeiResult, Provenance, Settings};
use crate::project::{ProjectConfig, ProjectError, Workspace};

pub const DEFAULT_LIMIT: usize = 100;

/// Counts reported by `/rerun`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub documents: usize,
    pub occurrences: usize,
    pub identified: usize,
    pub suppressed: usize,
    pub directive_decisions: usize,
}

impl Summary {
    pub fn of(r: &NeiResult) -> Summary {
        Summary {
            documents: r.stats.documents,
            occurrences: r.stats.occurrences,
            identified: r.stats.identified,
            suppressed: r.stats.suppressed,
            directive_decisions: r.stats.directive_decisions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub words: usize,
    pub occurrences: usize,
    pub identified: usize,
    pub suppressed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceSummary {
    pub token_index: usize,
    pub surface: String,
    pub chosen: Option<String>,
    pub chosen_name: Option<String>,
    pub provenance: Provenance,
    pub suppressed: bool,
    pub anchor: bool,
    pub candidates: usize,
    /// Rank key of the chosen candidate.
    pub rank_key: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrencePage {
    pub doc_id: String,
    pub offset: usize,
    pub limit: usize,
    pub total: usize,
    pub items: Vec<OccurrenceSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Override,
    Suppress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub doc_id: String,
    pub token_index: usize,
    pub action: Action,
    /// Required for `override`; `accept` defaults to the current choice.
    #[serde(default)]
    pub entity_id: Option<String>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recorded {
    pub directive: String,
    pub timestamp: String,
}

/// Inputs for reruns: documents, caches and the assistance document path.
pub struct ReviewService {
    documents: Vec<Document>,
    cache: CacheSet,
    settings: Settings,
    assistance: PathBuf,
    result: RwLock<Arc<NeiResult>>,
    writer: tokio::sync::Mutex<()>,
    rerunning: AtomicBool,
}

/// Held while a rerun is in progress.
pub struct RerunGuard<'a>(&'a AtomicBool);

impl Drop for RerunGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl ReviewService {
    /// Runs identification once with the current assistance document.
    pub fn new(documents: Vec<Document>, cache: CacheSet, settings: Settings, assistance: PathBuf) -> Result<Self, ProjectError> {
        let result = run(&documents, &cache, &settings, &assistance)?;
        Ok(ReviewService {
            documents,
            cache,
            settings,
            assistance,
            result: RwLock::new(Arc::new(result)),
            writer: tokio::sync::Mutex::new(()),
            rerunning: AtomicBool::new(false),
        })
    }

    /// Builds the service from a project; decisions go to its assistance
    /// document, which is created next to the project file if missing.
    pub fn from_project(cfg: &ProjectConfig) -> Result<Self, ProjectError> {
        let ws = Workspace::load(cfg)?;
        let cache = crate::project::load_cache(cfg)?;
        let assistance = cfg.assistance.clone().unwrap_or_else(|| cfg.root.join("assistance.kb"));
        ReviewService::new(ws.documents(), cache, ws.settings, assistance)
    }

    pub fn result(&self) -> Arc<NeiResult> {
        self.result.read().expect("result lock").clone()
    }

    pub fn assistance_path(&self) -> &std::path::Path {
        &self.assistance
    }

    /// Marks a rerun as started, or returns `None` if one already is.
    pub fn begin_rerun(&self) -> Option<RerunGuard<'_>> {
        self.rerunning.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).ok().map(|_| RerunGuard(&self.rerunning))
    }

    /// Reloads the assistance document and swaps in a fresh result.
    pub fn rerun(&self) -> Result<Summary, ProjectError> {
        let result = run(&self.documents, &self.cache, &self.settings, &self.assistance)?;
        let summary = Summary::of(&result);
        *self.result.write().expect("result lock") = Arc::new(result);
        Ok(summary)
    }

    fn directive_for(&self, d: &Decision) -> Result<Directive, String> {
        let result = self.result();
        let doc = result.document(&d.doc_id).ok_or_else(|| format!("unknown document `{}`", d.doc_id))?;
        if d.token_index >= doc.word_count {
            return Err(format!("`{}` has {} words", d.doc_id, doc.word_count));
        }
        let entity_id = match d.action {
            Action::Suppress => None,
            Action::Override => Some(d.entity_id.clone().ok_or("override needs an entity_id")?),
            Action::Accept => Some(
                d.entity_id
                    .clone()
                    .or_else(|| doc.occurrence(d.token_index).and_then(|o| o.chosen.clone()))
                    .ok_or("nothing to accept at this position")?,
            ),
        };
        if let Some(id) = &entity_id {
            if !self.cache.contains_id(id) {
                return Err(format!("unknown entity `{id}`"));
            }
        }
        Ok(Directive::Fix { doc: d.doc_id.clone(), token: d.token_index, entity_id })
    }

    async fn record(&self, d: &Decision) -> Result<Recorded, ApiError> {
        let directive = self.directive_for(d).map_err(|m| ApiError(StatusCode::UNPROCESSABLE_ENTITY, m))?;
        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let action = match d.action {
            Action::Accept => "accept",
            Action::Override => "override",
            Action::Suppress => "suppress",
        };
        let note = d.note.as_deref().map(|n| format!(": {}", n.replace(['\n', '\r'], " "))).unwrap_or_default();
        let line = format!("{directive} % {action} {timestamp}{note}\n");
        let _guard = self.writer.lock().await;
        let path = self.assistance.clone();
        let write = line.clone();
        tokio::task::spawn_blocking(move || {
            let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
            f.write_all(write.as_bytes())
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(format!("{}: {e}", self.assistance.display())))?;
        Ok(Recorded { directive: directive.to_string(), timestamp })
    }
}

fn run(documents: &[Document], cache: &CacheSet, settings: &Settings, assistance: &std::path::Path) -> Result<NeiResult, ProjectError> {
    let directives = if assistance.exists() {
        load_directives(assistance)
            .map_err(|error| ProjectError::Directive { path: assistance.to_path_buf(), error })?
            .into_directives()
    } else {
        Vec::new()
    };
    Ok(identify(documents, cache, &directives, settings)?)
}

#[derive(Debug)]
struct ApiError(StatusCode, String);

impl ApiError {
    fn internal(m: String) -> Self {
        ApiError(StatusCode::INTERNAL_SERVER_ERROR, m)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/documents", get(documents))
        .route("/documents/{id}/occurrences", get(occurrences))
        .route("/occurrences/{doc}/{token}", get(explanation))
        .route("/decisions", post(decide))
        .route("/rerun", post(rerun))
        .layer(CorsLayer::permissive())
        .with_state(service)
}

/// Serves until the process is stopped.
pub async fn serve(service: Arc<ReviewService>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}

async fn documents(State(s): State<Arc<ReviewService>>) -> Json<Vec<DocumentSummary>> {
    let r = s.result();
    Json(
        r.documents
            .iter()
            .map(|d| DocumentSummary {
                doc_id: d.doc_id.clone(),
                words: d.word_count,
                occurrences: d.occurrences.len(),
                identified: d.identified(),
                suppressed: d.suppressed(),
            })
            .collect(),
    )
}

#[derive(Deserialize)]
struct PageParams {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn occurrences(
    State(s): State<Arc<ReviewService>>,
    Path(id): Path<String>,
    Query(p): Query<PageParams>,
) -> Result<Json<OccurrencePage>, ApiError> {
    let r = s.result();
    let doc = r.document(&id).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown document `{id}`")))?;
    let offset = p.offset.unwrap_or(0);
    let limit = p.limit.unwrap_or(DEFAULT_LIMIT);
    let items = doc
        .occurrences
        .iter()
        .skip(offset)
        .take(limit)
        .map(|o| {
            let c = o.chosen_candidate();
            OccurrenceSummary {
                token_index: o.occurrence.token_index,
                surface: o.occurrence.surface.clone(),
                chosen: o.chosen.clone(),
                chosen_name: c.map(|c| c.name.clone()),
                provenance: o.provenance,
                suppressed: o.suppressed,
                anchor: o.anchor,
                candidates: o.candidates.len(),
                rank_key: c.map(|c| c.rank_key.clone()),
            }
        })
        .collect();
    Ok(Json(OccurrencePage { doc_id: id, offset, limit, total: doc.occurrences.len(), items }))
}

async fn explanation(State(s): State<Arc<ReviewService>>, Path((doc, token)): Path<(String, usize)>) -> Response {
    match s.result().explain(&doc, token) {
        Ok(e) => Json(e).into_response(),
        Err(e) => ApiError(StatusCode::NOT_FOUND, e.to_string()).into_response(),
    }
}

async fn decide(State(s): State<Arc<ReviewService>>, Json(d): Json<Decision>) -> Result<(StatusCode, Json<Recorded>), ApiError> {
    if s.rerunning.load(Ordering::Acquire) {
        return Err(ApiError(StatusCode::CONFLICT, "a rerun is in progress".into()));
    }
    Ok((StatusCode::CREATED, Json(s.record(&d).await?)))
}

async fn rerun(State(s): State<Arc<ReviewService>>) -> Result<Json<Summary>, ApiError> {
    let service = s.clone();
    tokio::task::spawn_blocking(move || {
        let Some(_guard) = service.begin_rerun() else {
            return Err(ApiError(StatusCode::CONFLICT, "a rerun is already in progress".into()));
        };
        service.rerun().map(Json).map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
}
