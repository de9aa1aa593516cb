//! REST API under `/api/v1`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::Deserialize;
use serde_json::{json, Value};
use sitebench_core::csv_list::parse_site_csv;
use sitebench_core::report::check_details;
use sitebench_core::{
    aggregate_list_stats, normalize_url, Catalog, CheckGroup, Error as CoreError, RankingScheme, Site, SiteList,
    SiteRating,
};

use crate::orchestrator::Orchestrator;
use crate::store::{JobState, ListUpdate, StoreError, StoredList};
use crate::token;
use crate::views::{self, ExportDoc, EXPORT_FORMAT};

pub const DEFAULT_LIMIT: usize = 50;
pub const MAX_LIMIT: usize = 500;

#[derive(Clone)]
pub struct AppState {
    pub orch: Arc<Orchestrator>,
}

impl AppState {
    fn catalog(&self) -> &Catalog {
        &self.orch.scanner.catalog
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub retry_after: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            retry_after: None,
        }
    }

    fn bad_request(m: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, m)
    }

    fn not_found() -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not found")
    }

    fn forbidden() -> Self {
        ApiError::new(StatusCode::FORBIDDEN, "missing or invalid access token")
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!(error = %e, "store failure");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal storage error")
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::EmptyList => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            other => ApiError::bad_request(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut resp = (self.status, Json(json!({ "error": self.message }))).into_response();
        if let Some(secs) = self.retry_after {
            resp.headers_mut().insert(header::RETRY_AFTER, secs.into());
        }
        resp
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/lists", post(create_list).get(search_lists))
        .route("/api/v1/lists/{id}", get(get_list).put(update_list).delete(delete_list))
        .route("/api/v1/lists/{id}/ranking", get(list_ranking))
        .route("/api/v1/lists/{id}/stats", get(list_stats))
        .route("/api/v1/lists/{id}/scan", post(rescan_list))
        .route("/api/v1/sites/{id}/results", get(site_results))
        .route("/api/v1/runs/{id}", get(get_run))
        .route("/api/v1/export/lists/{file}", get(export_list))
        .route("/api/v1/import", post(import_list))
        .route("/api/v1/scan", post(scan_single))
        .route("/api/v1/checks", get(list_checks))
        .with_state(state)
}

// -- auth -------------------------------------------------------------------

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.trim().split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

fn authorized(headers: &HeaderMap, list: &StoredList) -> bool {
    bearer(headers).is_some_and(|t| token::verify(t, &list.token_hash))
}

fn require_token(headers: &HeaderMap, list: &StoredList) -> ApiResult<()> {
    authorized(headers, list).then_some(()).ok_or_else(ApiError::forbidden)
}

/// Public lists are readable by anyone; private ones need the token.
fn require_read(headers: &HeaderMap, list: &StoredList) -> ApiResult<()> {
    if list.private {
        require_token(headers, list)
    } else {
        Ok(())
    }
}

fn load_list(state: &AppState, id: &str) -> ApiResult<StoredList> {
    state.orch.store.list(id)?.ok_or_else(ApiError::not_found)
}

// -- list creation ----------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SiteInput {
    Url(String),
    Full {
        url: String,
        #[serde(default)]
        properties: BTreeMap<String, Option<String>>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct CreateList {
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    tags: BTreeSet<String>,
    sites: Vec<SiteInput>,
    #[serde(default)]
    property_schema: Option<Vec<String>>,
    #[serde(default)]
    private: bool,
    #[serde(default = "yes")]
    rescan: bool,
    #[serde(default)]
    honor_robots: bool,
}

/// Metadata for CSV uploads travels in the query string.
#[derive(Debug, Deserialize)]
struct CsvMeta {
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    description: String,
    #[serde(default)]
    tags: String,
    #[serde(default)]
    private: bool,
    #[serde(default = "yes")]
    rescan: bool,
    #[serde(default)]
    honor_robots: bool,
}

fn split_tags(s: &str) -> BTreeSet<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

fn parse_sites(inputs: Vec<SiteInput>, schema: Option<Vec<String>>) -> ApiResult<(Vec<String>, Vec<Site>)> {
    let mut sites = Vec::new();
    let mut seen_keys = Vec::new();
    for input in inputs {
        let (raw, properties) = match input {
            SiteInput::Url(u) => (u, BTreeMap::new()),
            SiteInput::Full { url, properties } => (url, properties),
        };
        for k in properties.keys() {
            if !seen_keys.contains(k) {
                seen_keys.push(k.clone());
            }
        }
        let mut site = Site::new(normalize_url(&raw)?);
        site.properties = properties;
        sites.push(site);
    }
    Ok((schema.unwrap_or(seen_keys), sites))
}

fn is_csv(headers: &HeaderMap) -> bool {
    headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"))
}

struct NewList {
    title: String,
    description: String,
    tags: BTreeSet<String>,
    schema: Vec<String>,
    sites: Vec<Site>,
    private: bool,
    rescan: bool,
    honor_robots: bool,
}

fn parse_create(headers: &HeaderMap, query: &BTreeMap<String, String>, body: &[u8]) -> ApiResult<NewList> {
    if is_csv(headers) {
        let meta: CsvMeta = serde_json::from_value(json!(query
            .iter()
            .map(|(k, v)| {
                let v = match k.as_str() {
                    "private" | "rescan" | "honor_robots" => json!(matches!(v.as_str(), "true" | "1" | "yes")),
                    _ => json!(v),
                };
                (k.clone(), v)
            })
            .collect::<serde_json::Map<_, _>>()))
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("CSV must be UTF-8"))?;
        let parsed = parse_site_csv(text)?;
        return Ok(NewList {
            title: meta.title.unwrap_or_else(|| "Untitled list".into()),
            description: meta.description,
            tags: split_tags(&meta.tags),
            schema: parsed.property_schema,
            sites: parsed.sites,
            private: meta.private,
            rescan: meta.rescan,
            honor_robots: meta.honor_robots,
        });
    }
    let req: CreateList = serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let (schema, sites) = parse_sites(req.sites, req.property_schema)?;
    Ok(NewList {
        title: req.title,
        description: req.description,
        tags: req.tags,
        schema,
        sites,
        private: req.private,
        rescan: req.rescan,
        honor_robots: req.honor_robots,
    })
}

fn store_new_list(state: &AppState, new: NewList) -> ApiResult<(StoredList, String)> {
    let (raw_token, hash) = token::generate();
    let mut list = SiteList {
        id: String::new(),
        title: new.title,
        description: new.description,
        tags: new.tags,
        sites: new.sites,
        property_schema: new.schema,
        access_token_hash: hash,
        private: new.private,
        rescan_enabled: new.rescan,
        honor_robots: new.honor_robots,
        created_at: Utc::now(),
    };
    list.validate()?;
    Ok((state.orch.store.insert_list(&list)?, raw_token))
}

async fn create_list(
    State(state): State<AppState>,
    Query(query): Query<BTreeMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let new = parse_create(&headers, &query, &body)?;
    let (list, raw_token) = store_new_list(&state, new)?;
    let mut jobs = Vec::new();
    for site in &list.sites {
        jobs.push(state.orch.enqueue_scan(site)?.job().id.clone());
    }
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "list_id": list.id,
            "token": raw_token,
            "site_ids": list.sites.iter().map(|s| &s.id).collect::<Vec<_>>(),
            "property_schema": list.property_schema,
            "jobs": jobs,
        })),
    ))
}

// -- browsing ---------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct SearchQuery {
    q: Option<String>,
    tag: Option<String>,
    limit: Option<usize>,
    offset: Option<usize>,
}

async fn search_lists(State(state): State<AppState>, Query(q): Query<SearchQuery>) -> ApiResult<Json<Value>> {
    let limit = q.limit.unwrap_or(DEFAULT_LIMIT).clamp(1, MAX_LIMIT);
    let offset = q.offset.unwrap_or(0);
    let (total, lists) = state
        .orch
        .store
        .search_lists(q.q.as_deref(), q.tag.as_deref(), limit, offset)?;
    let items: Vec<Value> = lists
        .iter()
        .map(|l| {
            json!({
                "id": l.id,
                "title": l.title,
                "description": l.description,
                "tags": l.tags,
                "site_count": l.sites.len(),
                "rescan_enabled": l.rescan_enabled,
                "created_at": l.created_at,
            })
        })
        .collect();
    Ok(Json(json!({ "total": total, "limit": limit, "offset": offset, "items": items })))
}

async fn get_list(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<StoredList>> {
    let list = load_list(&state, &id)?;
    require_read(&headers, &list)?;
    Ok(Json(list))
}

#[derive(Debug, Deserialize)]
struct UpdateBody {
    title: Option<String>,
    description: Option<String>,
    tags: Option<BTreeSet<String>>,
    private: Option<bool>,
    rescan: Option<bool>,
    honor_robots: Option<bool>,
    sites: Option<Vec<SiteInput>>,
    property_schema: Option<Vec<String>>,
}

async fn update_list(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<StoredList>> {
    let list = load_list(&state, &id)?;
    require_token(&headers, &list)?;
    let req: UpdateBody = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let sites = match req.sites {
        Some(inputs) => {
            let (schema, sites) = parse_sites(inputs, req.property_schema.or(Some(list.property_schema.clone())))?;
            let mut check = SiteList {
                id: id.clone(),
                title: String::new(),
                description: String::new(),
                tags: BTreeSet::new(),
                sites,
                property_schema: schema,
                access_token_hash: list.token_hash.clone(),
                private: false,
                rescan_enabled: false,
                honor_robots: false,
                created_at: list.created_at,
            };
            check.validate()?;
            Some((check.property_schema, check.sites))
        }
        None => None,
    };
    let update = ListUpdate {
        title: req.title,
        description: req.description,
        tags: req.tags,
        private: req.private,
        rescan_enabled: req.rescan,
        honor_robots: req.honor_robots,
        sites,
    };
    let (after, added) = state.orch.store.update_list(&id, update)?.ok_or_else(ApiError::not_found)?;
    for site in after.sites.iter().filter(|s| added.contains(&s.id)) {
        state.orch.enqueue_scan(site)?;
    }
    Ok(Json(after))
}

async fn delete_list(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<StatusCode> {
    let list = load_list(&state, &id)?;
    require_token(&headers, &list)?;
    state.orch.store.delete_list(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn rescan_list(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let list = load_list(&state, &id)?;
    require_token(&headers, &list)?;
    let mut jobs = Vec::new();
    for site in &list.sites {
        let e = state.orch.enqueue_scan(site)?;
        jobs.push(json!({ "job_id": e.job().id, "run_id": e.job().run_id, "state": e.job().state, "new": e.is_new() }));
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "jobs": jobs }))))
}

#[derive(Debug, Deserialize)]
struct RankingQuery {
    order: Option<String>,
}

fn scheme_from(order: Option<&str>) -> ApiResult<RankingScheme> {
    match order.filter(|o| !o.trim().is_empty()) {
        None => Ok(RankingScheme::default()),
        Some(o) => {
            let groups = o
                .split(',')
                .map(|g| g.parse::<CheckGroup>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(ApiError::bad_request)?;
            Ok(RankingScheme::new("custom", &groups)?)
        }
    }
}

async fn list_ranking(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RankingQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<views::Ranking>> {
    let scheme = scheme_from(q.order.as_deref())?;
    let list = load_list(&state, &id)?;
    require_read(&headers, &list)?;
    let o = &state.orch;
    Ok(Json(views::ranking(&o.store, state.catalog(), &o.blacklist, &list, &scheme)?))
}

async fn list_stats(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    let list = load_list(&state, &id)?;
    require_read(&headers, &list)?;
    let o = &state.orch;
    let ranking = views::ranking(&o.store, state.catalog(), &o.blacklist, &list, &RankingScheme::default())?;
    let ratings: Vec<SiteRating> = ranking
        .rows
        .iter()
        .filter_map(|r| {
            Some(SiteRating {
                site_ref: r.site_id.clone(),
                url: r.url.clone(),
                group_ratings: r.group_ratings.clone(),
                overall: r.overall?,
            })
        })
        .collect();
    let unscanned = ranking.rows.len() - ratings.len();
    Ok(Json(json!({ "stats": aggregate_list_stats(&ratings), "unscanned": unscanned })))
}

async fn site_results(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Json<sitebench_core::report::SiteResults>> {
    let o = &state.orch;
    let site = o.store.site(&id)?.ok_or_else(ApiError::not_found)?;
    if let Some(list_id) = &site.list_id {
        require_read(&headers, &load_list(&state, list_id)?)?;
    }
    Ok(Json(views::site_results(&o.store, state.catalog(), &o.blacklist, &site)?))
}

async fn get_run(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult<Json<Value>> {
    let run = state.orch.store.run(&id)?.ok_or_else(ApiError::not_found)?;
    if let Some(list_id) = &run.list_ref {
        require_read(&headers, &load_list(&state, list_id)?)?;
    }
    let checks = check_details(&run.check_results, state.catalog());
    Ok(Json(json!({ "run": run, "checks": checks })))
}

async fn list_checks(State(state): State<AppState>) -> Json<Value> {
    let entries: Vec<Value> = state
        .catalog()
        .entries()
        .iter()
        .map(|e| {
            json!({
                "check_id": e.check_id,
                "group": e.group,
                "critical": e.critical,
                "description": e.description,
                "documentation_key": e.documentation_key(),
            })
        })
        .collect();
    Json(json!({ "checks": entries }))
}

// -- open data --------------------------------------------------------------

async fn export_list(
    State(state): State<AppState>,
    Path(file): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let (id, ext) = file.rsplit_once('.').ok_or_else(ApiError::not_found)?;
    if ext != "json" && ext != "csv" {
        return Err(ApiError::not_found());
    }
    let list = load_list(&state, id)?;
    require_read(&headers, &list)?;
    let o = &state.orch;
    let doc = views::export_doc(&o.store, state.catalog(), &o.blacklist, &list)?;
    Ok(if ext == "json" {
        Json(doc).into_response()
    } else {
        ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], views::export_csv(&doc)).into_response()
    })
}

/// Recreates a list and its latest results from an export document.
async fn import_list(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let doc: ExportDoc = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    if doc.format != EXPORT_FORMAT {
        return Err(ApiError::bad_request(format!("unsupported format {:?}", doc.format)));
    }
    let mut sites = Vec::new();
    for s in &doc.sites {
        let mut site = Site::new(normalize_url(&s.url)?);
        site.final_url = s.final_url.clone();
        site.properties = s.properties.clone();
        sites.push(site);
    }
    let new = NewList {
        title: doc.list.title.clone(),
        description: doc.list.description.clone(),
        tags: doc.list.tags.clone(),
        schema: doc.list.property_schema.clone(),
        sites,
        private: doc.list.private,
        rescan: doc.list.rescan_enabled,
        honor_robots: doc.list.honor_robots,
    };
    let (list, raw_token) = store_new_list(&state, new)?;
    for (stored, exported) in list.sites.iter().zip(&doc.sites) {
        if let Some(run) = &exported.latest_run {
            let mut run = run.clone();
            run.id = uuid::Uuid::new_v4().simple().to_string();
            run.site_ref = stored.id.clone();
            run.list_ref = Some(list.id.clone());
            state.orch.store.put_run(&run)?;
        }
        if let Some(f) = &exported.final_url {
            state.orch.store.set_final_url(&stored.id, f)?;
        }
    }
    Ok((StatusCode::CREATED, Json(json!({ "list_id": list.id, "token": raw_token }))))
}

// -- single-site scans -----------------------------------------------------

#[derive(Debug, Deserialize)]
struct ScanBody {
    url: String,
}

async fn scan_single(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: ScanBody = serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let url = normalize_url(&req.url)?;
    let o = &state.orch;
    let now = o.clock.now();
    let host = url.host().to_string();
    let next = o.limiter.next_allowed(&host, now);
    if next.is_some() || o.store.host_has_active_job(&host)? {
        let wait = next.map(|t| (t - now).num_seconds().max(1) as u64).unwrap_or(1);
        return Err(ApiError {
            retry_after: Some(wait),
            ..ApiError::new(StatusCode::TOO_MANY_REQUESTS, format!("{host} was scanned recently; retry later"))
        });
    }
    let site = o.store.unlisted_site(&url)?;
    let enqueued = o.enqueue_scan(&site)?;
    let job = enqueued.job();
    let status = if job.state == JobState::Blacklisted {
        StatusCode::OK
    } else {
        StatusCode::ACCEPTED
    };
    Ok((
        status,
        Json(json!({ "run_id": job.run_id, "site_id": site.id, "job_id": job.id, "state": job.state })),
    ))
}
