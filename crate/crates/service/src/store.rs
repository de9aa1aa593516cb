//! Relational persistence for lists, sites, runs and the job queue.
//!
//! One SQLite connection behind a mutex; every multi-statement operation
//! runs in a transaction, so job claims are atomic across workers.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension, Row, Transaction};
use serde::{Deserialize, Serialize};
use sitebench_core::{RunStatus, ScanFacts, ScanRun, Site, SiteList, SiteUrl};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("database: {0}")]
    Sql(#[from] rusqlite::Error),
    #[error("corrupt row: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, StoreError>;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS lists (
    id TEXT PRIMARY KEY,
    title TEXT NOT NULL,
    description TEXT NOT NULL,
    tags TEXT NOT NULL,
    property_schema TEXT NOT NULL,
    token_hash TEXT NOT NULL,
    private INTEGER NOT NULL,
    rescan INTEGER NOT NULL,
    honor_robots INTEGER NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sites (
    id TEXT PRIMARY KEY,
    list_id TEXT REFERENCES lists(id) ON DELETE CASCADE,
    position INTEGER NOT NULL,
    url TEXT NOT NULL,
    final_url TEXT,
    properties TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS sites_by_list ON sites(list_id, position);
CREATE TABLE IF NOT EXISTS runs (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    id TEXT NOT NULL UNIQUE,
    site_id TEXT NOT NULL REFERENCES sites(id) ON DELETE CASCADE,
    list_id TEXT,
    started_at TEXT NOT NULL,
    finished_at TEXT,
    status TEXT NOT NULL,
    facts TEXT NOT NULL,
    results TEXT NOT NULL,
    note TEXT
);
CREATE INDEX IF NOT EXISTS runs_by_site ON runs(site_id, started_at);
CREATE TABLE IF NOT EXISTS jobs (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    id TEXT NOT NULL UNIQUE,
    site_id TEXT NOT NULL REFERENCES sites(id) ON DELETE CASCADE,
    list_id TEXT,
    run_id TEXT NOT NULL,
    url TEXT NOT NULL,
    host TEXT NOT NULL,
    enqueued_at TEXT NOT NULL,
    attempts INTEGER NOT NULL,
    state TEXT NOT NULL,
    claimed_at TEXT
);
CREATE INDEX IF NOT EXISTS jobs_by_state ON jobs(state, seq);
";

fn ts(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn parse_ts(s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| StoreError::Corrupt(format!("timestamp {s:?}: {e}")))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable value")
}

fn from_json<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| StoreError::Corrupt(e.to_string()))
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSite {
    pub id: String,
    pub list_id: Option<String>,
    pub url: SiteUrl,
    pub final_url: Option<String>,
    pub properties: BTreeMap<String, Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredList {
    pub id: String,
    pub title: String,
    pub description: String,
    pub tags: BTreeSet<String>,
    pub property_schema: Vec<String>,
    pub private: bool,
    pub rescan_enabled: bool,
    pub honor_robots: bool,
    pub created_at: DateTime<Utc>,
    #[serde(skip)]
    pub token_hash: String,
    pub sites: Vec<StoredSite>,
}

/// Fields a list owner may change. `None` leaves a field as is.
#[derive(Debug, Clone, Default)]
pub struct ListUpdate {
    pub title: Option<String>,
    pub description: Option<String>,
    pub tags: Option<BTreeSet<String>>,
    pub private: Option<bool>,
    pub rescan_enabled: Option<bool>,
    pub honor_robots: Option<bool>,
    /// Replacement schema and sites. Sites whose URL is kept retain their
    /// id and run history.
    pub sites: Option<(Vec<String>, Vec<Site>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Blacklisted,
}

impl JobState {
    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Running => "running",
            JobState::Done => "done",
            JobState::Failed => "failed",
            JobState::Blacklisted => "blacklisted",
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }
}

impl FromStr for JobState {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "queued" => JobState::Queued,
            "running" => JobState::Running,
            "done" => JobState::Done,
            "failed" => JobState::Failed,
            "blacklisted" => JobState::Blacklisted,
            other => return Err(StoreError::Corrupt(format!("job state {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanJob {
    pub id: String,
    pub site_id: String,
    pub list_id: Option<String>,
    /// The run this job fills in; it exists from enqueue time on.
    pub run_id: String,
    pub url: String,
    pub host: String,
    pub enqueued_at: DateTime<Utc>,
    pub attempts: u32,
    pub state: JobState,
    pub claimed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enqueued {
    New(ScanJob),
    /// An identical job was already queued or running.
    Existing(ScanJob),
}

impl Enqueued {
    pub fn job(&self) -> &ScanJob {
        match self {
            Enqueued::New(j) | Enqueued::Existing(j) => j,
        }
    }

    pub fn is_new(&self) -> bool {
        matches!(self, Enqueued::New(_))
    }
}

pub struct Store {
    conn: Mutex<Connection>,
}

const LIST_COLS: &str =
    "id, title, description, tags, property_schema, token_hash, private, rescan, honor_robots, created_at";
const SITE_COLS: &str = "id, list_id, url, final_url, properties";
const RUN_COLS: &str = "id, site_id, list_id, started_at, finished_at, status, facts, results, note";
const JOB_COLS: &str = "id, site_id, list_id, run_id, url, host, enqueued_at, attempts, state, claimed_at";

/// id, list_id, url, final_url, properties json
type SiteCols = (String, Option<String>, String, Option<String>, String);

fn site_row(r: &Row) -> rusqlite::Result<SiteCols> {
    Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?))
}

fn to_site(raw: (String, Option<String>, String, Option<String>, String)) -> Result<StoredSite> {
    let (id, list_id, url, final_url, props) = raw;
    Ok(StoredSite {
        id,
        list_id,
        url: url.parse().map_err(|e| StoreError::Corrupt(format!("{e}")))?,
        final_url,
        properties: from_json(&props)?,
    })
}

type RawRun = (
    String,
    String,
    Option<String>,
    String,
    Option<String>,
    String,
    String,
    String,
    Option<String>,
);

fn run_row(r: &Row) -> rusqlite::Result<RawRun> {
    Ok((
        r.get(0)?,
        r.get(1)?,
        r.get(2)?,
        r.get(3)?,
        r.get(4)?,
        r.get(5)?,
        r.get(6)?,
        r.get(7)?,
        r.get(8)?,
    ))
}

fn to_run(raw: RawRun) -> Result<ScanRun> {
    let (id, site_ref, list_ref, started, finished, status, facts, results, note) = raw;
    Ok(ScanRun {
        id,
        site_ref,
        list_ref,
        started_at: parse_ts(&started)?,
        finished_at: finished.as_deref().map(parse_ts).transpose()?,
        status: status.parse().map_err(StoreError::Corrupt)?,
        facts: from_json::<ScanFacts>(&facts)?,
        check_results: from_json(&results)?,
        note,
    })
}

type RawJob = (
    String,
    String,
    Option<String>,
    String,
    String,
    String,
    String,
    u32,
    String,
    Option<String>,
);

fn job_row(r: &Row) -> rusqlite::Result<RawJob> {
    Ok((
        r.get(0)?,
        r.get(1)?,
        r.get(2)?,
        r.get(3)?,
        r.get(4)?,
        r.get(5)?,
        r.get(6)?,
        r.get(7)?,
        r.get(8)?,
        r.get(9)?,
    ))
}

fn to_job(raw: RawJob) -> Result<ScanJob> {
    let (id, site_id, list_id, run_id, url, host, enqueued, attempts, state, claimed) = raw;
    Ok(ScanJob {
        id,
        site_id,
        list_id,
        run_id,
        url,
        host,
        enqueued_at: parse_ts(&enqueued)?,
        attempts,
        state: state.parse()?,
        claimed_at: claimed.as_deref().map(parse_ts).transpose()?,
    })
}

fn write_run(tx: &Connection, run: &ScanRun) -> Result<()> {
    tx.execute(
        "INSERT INTO runs (id, site_id, list_id, started_at, finished_at, status, facts, results, note)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)
         ON CONFLICT(id) DO UPDATE SET started_at = ?4, finished_at = ?5, status = ?6,
             facts = ?7, results = ?8, note = ?9",
        params![
            run.id,
            run.site_ref,
            run.list_ref,
            ts(run.started_at),
            run.finished_at.map(ts),
            run.status.as_str(),
            json(&run.facts),
            json(&run.check_results),
            run.note,
        ],
    )?;
    Ok(())
}

fn insert_sites(tx: &Transaction, list_id: &str, start: usize, sites: &[Site]) -> Result<()> {
    for (i, site) in sites.iter().enumerate() {
        tx.execute(
            "INSERT INTO sites (id, list_id, position, url, final_url, properties) VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                new_id(),
                list_id,
                (start + i) as i64,
                site.url.as_str(),
                site.final_url,
                json(&site.properties)
            ],
        )?;
    }
    Ok(())
}

impl Store {
    pub fn open(path: &str) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.execute_batch("PRAGMA foreign_keys = ON; PRAGMA journal_mode = WAL;")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn: Mutex::new(conn) })
    }

    pub fn in_memory() -> Result<Self> {
        Store::open(":memory:")
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    // -- lists ---------------------------------------------------------

    /// Persists a validated list under a fresh id.
    pub fn insert_list(&self, list: &SiteList) -> Result<StoredList> {
        let id = new_id();
        {
            let mut conn = self.conn();
            let tx = conn.transaction()?;
            tx.execute(
                &format!("INSERT INTO lists ({LIST_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)"),
                params![
                    id,
                    list.title,
                    list.description,
                    json(&list.tags),
                    json(&list.property_schema),
                    list.access_token_hash,
                    list.private,
                    list.rescan_enabled,
                    list.honor_robots,
                    ts(list.created_at),
                ],
            )?;
            insert_sites(&tx, &id, 0, &list.sites)?;
            tx.commit()?;
        }
        Ok(self.list(&id)?.expect("list just inserted"))
    }

    fn load_list(conn: &Connection, id: &str) -> Result<Option<StoredList>> {
        let row = conn
            .query_row(&format!("SELECT {LIST_COLS} FROM lists WHERE id = ?1"), [id], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, String>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                    r.get::<_, bool>(6)?,
                    r.get::<_, bool>(7)?,
                    r.get::<_, bool>(8)?,
                    r.get::<_, String>(9)?,
                ))
            })
            .optional()?;
        let Some((id, title, description, tags, schema, token_hash, private, rescan, honor, created)) = row else {
            return Ok(None);
        };
        let mut stmt = conn.prepare(&format!("SELECT {SITE_COLS} FROM sites WHERE list_id = ?1 ORDER BY position"))?;
        let sites = stmt
            .query_map([&id], site_row)?
            .map(|r| to_site(r?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(StoredList {
            id,
            title,
            description,
            tags: from_json(&tags)?,
            property_schema: from_json(&schema)?,
            private,
            rescan_enabled: rescan,
            honor_robots: honor,
            created_at: parse_ts(&created)?,
            token_hash,
            sites,
        }))
    }

    pub fn list(&self, id: &str) -> Result<Option<StoredList>> {
        Store::load_list(&self.conn(), id)
    }

    fn list_ids(conn: &Connection, public_only: bool) -> Result<Vec<String>> {
        let sql = if public_only {
            "SELECT id FROM lists WHERE private = 0 ORDER BY created_at, id"
        } else {
            "SELECT id FROM lists ORDER BY created_at, id"
        };
        let mut stmt = conn.prepare(sql)?;
        let ids = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<Vec<String>>>()?;
        Ok(ids)
    }

    /// Public lists matching a case-insensitive substring of title or
    /// description and an exact tag. Returns the total match count and the
    /// requested page.
    pub fn search_lists(
        &self,
        q: Option<&str>,
        tag: Option<&str>,
        limit: usize,
        offset: usize,
    ) -> Result<(usize, Vec<StoredList>)> {
        let conn = self.conn();
        let needle = q.map(str::to_lowercase).filter(|s| !s.is_empty());
        let mut hits = Vec::new();
        for id in Store::list_ids(&conn, true)? {
            let Some(list) = Store::load_list(&conn, &id)? else { continue };
            let text_ok = needle.as_ref().is_none_or(|n| {
                list.title.to_lowercase().contains(n) || list.description.to_lowercase().contains(n)
            });
            let tag_ok = tag.filter(|t| !t.is_empty()).is_none_or(|t| list.tags.contains(t));
            if text_ok && tag_ok {
                hits.push(list);
            }
        }
        let total = hits.len();
        Ok((total, hits.into_iter().skip(offset).take(limit).collect()))
    }

    pub fn all_lists(&self) -> Result<Vec<StoredList>> {
        let conn = self.conn();
        Store::list_ids(&conn, false)?
            .iter()
            .filter_map(|id| Store::load_list(&conn, id).transpose())
            .collect()
    }

    /// Applies `update`; returns the new list and the ids of sites that
    /// were added.
    pub fn update_list(&self, id: &str, update: ListUpdate) -> Result<Option<(StoredList, Vec<String>)>> {
        let mut conn = self.conn();
        let Some(before) = Store::load_list(&conn, id)? else {
            return Ok(None);
        };
        let tx = conn.transaction()?;
        let set = |col: &str, v: &dyn rusqlite::ToSql| -> Result<()> {
            tx.execute(&format!("UPDATE lists SET {col} = ?1 WHERE id = ?2"), params![v, id])?;
            Ok(())
        };
        if let Some(v) = &update.title {
            set("title", v)?;
        }
        if let Some(v) = &update.description {
            set("description", v)?;
        }
        if let Some(v) = &update.tags {
            set("tags", &json(v))?;
        }
        if let Some(v) = update.private {
            set("private", &v)?;
        }
        if let Some(v) = update.rescan_enabled {
            set("rescan", &v)?;
        }
        if let Some(v) = update.honor_robots {
            set("honor_robots", &v)?;
        }
        if let Some((schema, sites)) = &update.sites {
            set("property_schema", &json(schema))?;
            let keep: BTreeMap<&str, &Site> = sites.iter().map(|s| (s.url.as_str(), s)).collect();
            for old in &before.sites {
                if !keep.contains_key(old.url.as_str()) {
                    tx.execute("DELETE FROM sites WHERE id = ?1", [&old.id])?;
                }
            }
            let existing: BTreeMap<&str, &StoredSite> = before.sites.iter().map(|s| (s.url.as_str(), s)).collect();
            for (pos, site) in sites.iter().enumerate() {
                match existing.get(site.url.as_str()) {
                    Some(old) => {
                        tx.execute(
                            "UPDATE sites SET position = ?1, properties = ?2 WHERE id = ?3",
                            params![pos as i64, json(&site.properties), old.id],
                        )?;
                    }
                    None => insert_sites(&tx, id, pos, std::slice::from_ref(site))?,
                }
            }
        }
        tx.commit()?;
        let after = Store::load_list(&conn, id)?.expect("list still present");
        let old_ids: BTreeSet<&str> = before.sites.iter().map(|s| s.id.as_str()).collect();
        let added = after
            .sites
            .iter()
            .filter(|s| !old_ids.contains(s.id.as_str()))
            .map(|s| s.id.clone())
            .collect();
        Ok(Some((after, added)))
    }

    /// Removes the list with its sites, runs, jobs and token.
    pub fn delete_list(&self, id: &str) -> Result<bool> {
        Ok(self.conn().execute("DELETE FROM lists WHERE id = ?1", [id])? > 0)
    }

    // -- sites ---------------------------------------------------------

    pub fn site(&self, id: &str) -> Result<Option<StoredSite>> {
        let conn = self.conn();
        let raw = conn
            .query_row(&format!("SELECT {SITE_COLS} FROM sites WHERE id = ?1"), [id], site_row)
            .optional()?;
        raw.map(to_site).transpose()
    }

    /// The unlisted site for `url`, created on first use.
    pub fn unlisted_site(&self, url: &SiteUrl) -> Result<StoredSite> {
        let conn = self.conn();
        let existing = conn
            .query_row(
                &format!("SELECT {SITE_COLS} FROM sites WHERE list_id IS NULL AND url = ?1"),
                [url.as_str()],
                site_row,
            )
            .optional()?;
        if let Some(raw) = existing {
            return to_site(raw);
        }
        let id = new_id();
        conn.execute(
            "INSERT INTO sites (id, list_id, position, url, final_url, properties) VALUES (?1, NULL, 0, ?2, NULL, '{}')",
            params![id, url.as_str()],
        )?;
        Ok(StoredSite {
            id,
            list_id: None,
            url: url.clone(),
            final_url: None,
            properties: BTreeMap::new(),
        })
    }

    pub fn set_final_url(&self, site_id: &str, final_url: &str) -> Result<()> {
        self.conn()
            .execute("UPDATE sites SET final_url = ?1 WHERE id = ?2", params![final_url, site_id])?;
        Ok(())
    }

    // -- runs ----------------------------------------------------------

    /// Inserts a run, or updates the status and payload of an existing one.
    pub fn put_run(&self, run: &ScanRun) -> Result<()> {
        write_run(&self.conn(), run)
    }

    pub fn run(&self, id: &str) -> Result<Option<ScanRun>> {
        let conn = self.conn();
        let raw = conn
            .query_row(&format!("SELECT {RUN_COLS} FROM runs WHERE id = ?1"), [id], run_row)
            .optional()?;
        raw.map(to_run).transpose()
    }

    /// Every run of a site, oldest first.
    pub fn runs_for_site(&self, site_id: &str) -> Result<Vec<ScanRun>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(&format!("SELECT {RUN_COLS} FROM runs WHERE site_id = ?1 ORDER BY started_at, seq"))?;
        let rows = stmt.query_map([site_id], run_row)?;
        rows.map(|r| to_run(r?)).collect()
    }

    pub fn last_run_started(&self, site_id: &str) -> Result<Option<DateTime<Utc>>> {
        let conn = self.conn();
        let t: Option<String> = conn.query_row(
            "SELECT MAX(started_at) FROM runs WHERE site_id = ?1",
            [site_id],
            |r| r.get(0),
        )?;
        t.as_deref().map(parse_ts).transpose()
    }

    // -- jobs ----------------------------------------------------------

    /// Queues a scan of `site`, or returns the job already queued or
    /// running for it. A job created with `state = Blacklisted` is final
    /// and its run is recorded as blacklisted right away.
    pub fn enqueue(&self, site: &StoredSite, now: DateTime<Utc>, state: JobState, note: Option<&str>) -> Result<Enqueued> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let existing = tx
            .query_row(
                &format!(
                    "SELECT {JOB_COLS} FROM jobs WHERE site_id = ?1 AND state IN ('queued', 'running') ORDER BY seq LIMIT 1"
                ),
                [&site.id],
                job_row,
            )
            .optional()?;
        if let Some(raw) = existing {
            return Ok(Enqueued::Existing(to_job(raw)?));
        }
        let job = ScanJob {
            id: new_id(),
            site_id: site.id.clone(),
            list_id: site.list_id.clone(),
            run_id: new_id(),
            url: site.url.to_string(),
            host: site.url.host().to_string(),
            enqueued_at: now,
            attempts: 0,
            state,
            claimed_at: None,
        };
        let run_status = match state {
            JobState::Blacklisted => RunStatus::Blacklisted,
            _ => RunStatus::Queued,
        };
        write_run(
            &tx,
            &ScanRun {
                id: job.run_id.clone(),
                site_ref: site.id.clone(),
                list_ref: site.list_id.clone(),
                started_at: now,
                finished_at: (state == JobState::Blacklisted).then_some(now),
                status: run_status,
                facts: ScanFacts::default(),
                check_results: Vec::new(),
                note: note.map(str::to_string),
            },
        )?;
        tx.execute(
            &format!("INSERT INTO jobs ({JOB_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, 0, ?8, NULL)"),
            params![
                job.id,
                job.site_id,
                job.list_id,
                job.run_id,
                job.url,
                job.host,
                ts(now),
                state.as_str()
            ],
        )?;
        tx.commit()?;
        Ok(Enqueued::New(job))
    }

    pub fn job(&self, id: &str) -> Result<Option<ScanJob>> {
        let conn = self.conn();
        let raw = conn
            .query_row(&format!("SELECT {JOB_COLS} FROM jobs WHERE id = ?1"), [id], job_row)
            .optional()?;
        raw.map(to_job).transpose()
    }

    pub fn jobs_in_state(&self, state: JobState) -> Result<Vec<ScanJob>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(&format!("SELECT {JOB_COLS} FROM jobs WHERE state = ?1 ORDER BY seq"))?;
        let rows = stmt.query_map([state.as_str()], job_row)?;
        rows.map(|r| to_job(r?)).collect()
    }

    pub fn host_has_active_job(&self, host: &str) -> Result<bool> {
        let n: i64 = self.conn().query_row(
            "SELECT COUNT(*) FROM jobs WHERE host = ?1 AND state IN ('queued', 'running')",
            [host],
            |r| r.get(0),
        )?;
        Ok(n > 0)
    }

    /// Atomically moves the oldest queued job accepted by `admit` to
    /// running. `admit` is called under the store lock, so it can reserve
    /// a rate-limiter slot without racing other workers.
    pub fn claim(&self, now: DateTime<Utc>, mut admit: impl FnMut(&ScanJob) -> bool) -> Result<Option<ScanJob>> {
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let queued = {
            let mut stmt = tx.prepare(&format!("SELECT {JOB_COLS} FROM jobs WHERE state = 'queued' ORDER BY seq"))?;
            let rows = stmt.query_map([], job_row)?;
            rows.map(|r| to_job(r?)).collect::<Result<Vec<_>>>()?
        };
        let Some(mut job) = queued.into_iter().find(|j| admit(j)) else {
            return Ok(None);
        };
        job.state = JobState::Running;
        job.attempts += 1;
        job.claimed_at = Some(now);
        tx.execute(
            "UPDATE jobs SET state = 'running', attempts = ?1, claimed_at = ?2 WHERE id = ?3",
            params![job.attempts, ts(now), job.id],
        )?;
        tx.execute(
            "UPDATE runs SET status = 'running', started_at = ?1 WHERE id = ?2",
            params![ts(now), job.run_id],
        )?;
        tx.commit()?;
        Ok(Some(job))
    }

    pub fn set_job_state(&self, job_id: &str, state: JobState) -> Result<()> {
        self.conn()
            .execute("UPDATE jobs SET state = ?1 WHERE id = ?2", params![state.as_str(), job_id])?;
        Ok(())
    }

    /// After a failed attempt: back to the queue while attempts remain,
    /// otherwise failed for good. Returns the new state.
    pub fn retry_or_fail(&self, job_id: &str, max_attempts: u32) -> Result<JobState> {
        let conn = self.conn();
        let attempts: u32 = conn.query_row("SELECT attempts FROM jobs WHERE id = ?1", [job_id], |r| r.get(0))?;
        let state = if attempts < max_attempts {
            JobState::Queued
        } else {
            JobState::Failed
        };
        conn.execute("UPDATE jobs SET state = ?1 WHERE id = ?2", params![state.as_str(), job_id])?;
        Ok(state)
    }

    /// Requeues running jobs claimed before `cutoff` (their worker is
    /// presumed dead). Jobs out of attempts fail instead.
    pub fn requeue_stale(&self, cutoff: DateTime<Utc>, max_attempts: u32) -> Result<usize> {
        let conn = self.conn();
        let failed = conn.execute(
            "UPDATE jobs SET state = 'failed' WHERE state = 'running' AND claimed_at < ?1 AND attempts >= ?2",
            params![ts(cutoff), max_attempts],
        )?;
        let requeued = conn.execute(
            "UPDATE jobs SET state = 'queued' WHERE state = 'running' AND claimed_at < ?1",
            params![ts(cutoff)],
        )?;
        Ok(failed + requeued)
    }
}
