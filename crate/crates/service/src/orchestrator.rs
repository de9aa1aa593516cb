//! Job execution: rate limiting, the opt-out blacklist, robots.txt, the
//! worker pool and periodic rescans.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use sitebench_core::robots::{evaluate_robots, RobotsDecision};
use sitebench_core::{RunStatus, ScanRun, SiteUrl};
use sitebench_scanner::Scanner;
use tokio::sync::{watch, Semaphore};
use tracing::{info, warn};

use crate::config::Config;
use crate::store::{Enqueued, JobState, ScanJob, Store, StoreError, StoredSite};

/// Product token matched against robots.txt user-agent lines.
pub const ROBOTS_TOKEN: &str = "sitebench";

pub const ROBOTS_DENY_NOTE: &str = "disallowed by robots.txt";
pub const UNREACHABLE_NOTE: &str = "site unreachable";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        let mut t = self.0.lock().unwrap();
        *t += chrono::Duration::from_std(by).expect("duration in range");
    }

    pub fn set(&self, to: DateTime<Utc>) {
        *self.0.lock().unwrap() = to;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap()
    }
}

/// Minimum spacing between scan starts per host.
#[derive(Debug)]
pub struct RateLimiter {
    pub min_interval: Duration,
    last_start: Mutex<HashMap<String, DateTime<Utc>>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        RateLimiter {
            min_interval,
            last_start: Mutex::new(HashMap::new()),
        }
    }

    fn gap(&self) -> chrono::Duration {
        chrono::Duration::from_std(self.min_interval).expect("interval in range")
    }

    /// When `host` may next start a scan; `None` means now.
    pub fn next_allowed(&self, host: &str, now: DateTime<Utc>) -> Option<DateTime<Utc>> {
        let last = self.last_start.lock().unwrap();
        last.get(host).map(|t| *t + self.gap()).filter(|t| *t > now)
    }

    /// Records a start for `host` if its interval has elapsed.
    pub fn try_acquire(&self, host: &str, now: DateTime<Utc>) -> bool {
        let mut last = self.last_start.lock().unwrap();
        if last.get(host).is_some_and(|t| now < *t + self.gap()) {
            return false;
        }
        last.insert(host.to_string(), now);
        true
    }
}

/// Opt-out entries persisted as `entry<TAB>note` lines. An entry is either
/// a host (matching itself and its subdomains) or a URL prefix.
#[derive(Debug)]
pub struct Blacklist {
    path: Option<PathBuf>,
    entries: RwLock<BTreeMap<String, String>>,
}

impl Blacklist {
    pub fn in_memory() -> Self {
        Blacklist {
            path: None,
            entries: RwLock::new(BTreeMap::new()),
        }
    }

    /// Loads the file if it exists; later additions are written back.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut entries = BTreeMap::new();
        match fs::read_to_string(path) {
            Ok(text) => {
                for line in text.lines() {
                    let line = line.trim_end_matches('\r');
                    if line.trim().is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (entry, note) = line.split_once('\t').unwrap_or((line, ""));
                    entries.insert(Blacklist::normalize(entry), note.to_string());
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(Blacklist {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
        })
    }

    fn normalize(entry: &str) -> String {
        let entry = entry.trim();
        if entry.contains("://") {
            sitebench_core::normalize_url(entry)
                .map(|u| u.to_string())
                .unwrap_or_else(|_| entry.to_string())
        } else {
            entry.trim_end_matches('.').to_ascii_lowercase()
        }
    }

    /// Adds an entry; returns false when it was already present.
    pub fn add(&self, entry: &str, note: &str) -> std::io::Result<bool> {
        let key = Blacklist::normalize(entry);
        let mut entries = self.entries.write().unwrap();
        if entries.contains_key(&key) {
            return Ok(false);
        }
        entries.insert(key, note.replace(['\t', '\n'], " "));
        if let Some(path) = &self.path {
            let mut text = String::from("# host-or-url-prefix\tnote\n");
            for (e, n) in entries.iter() {
                text.push_str(&format!("{e}\t{n}\n"));
            }
            let tmp = path.with_extension("tmp");
            fs::File::create(&tmp)?.write_all(text.as_bytes())?;
            fs::rename(tmp, path)?;
        }
        Ok(true)
    }

    pub fn entries(&self) -> Vec<(String, String)> {
        self.entries.read().unwrap().iter().map(|(e, n)| (e.clone(), n.clone())).collect()
    }

    /// The note of the first entry covering `url`.
    pub fn lookup(&self, url: &SiteUrl) -> Option<String> {
        let host = url.host().trim_end_matches('.').to_ascii_lowercase();
        self.entries.read().unwrap().iter().find_map(|(entry, note)| {
            let hit = if entry.contains("://") {
                url.as_str().starts_with(entry.as_str())
            } else {
                host == *entry || host.ends_with(&format!(".{entry}"))
            };
            hit.then(|| note.clone())
        })
    }
}

#[derive(Debug, Clone)]
pub struct OrchestratorSettings {
    pub max_attempts: u32,
    pub rescan_interval: Duration,
    pub stale_job_after: Duration,
    pub poll_interval: Duration,
    pub worker_count: usize,
    pub global_concurrency: usize,
}

impl From<&Config> for OrchestratorSettings {
    fn from(c: &Config) -> Self {
        OrchestratorSettings {
            max_attempts: c.max_attempts,
            rescan_interval: c.rescan_interval,
            stale_job_after: c.stale_job_after,
            poll_interval: c.poll_interval,
            worker_count: c.worker_count,
            global_concurrency: c.global_concurrency,
        }
    }
}

impl Default for OrchestratorSettings {
    fn default() -> Self {
        OrchestratorSettings::from(&Config::default())
    }
}

pub struct Orchestrator {
    pub store: Arc<Store>,
    pub scanner: Arc<Scanner>,
    pub clock: Arc<dyn Clock>,
    pub limiter: Arc<RateLimiter>,
    pub blacklist: Arc<Blacklist>,
    pub settings: OrchestratorSettings,
}

impl Orchestrator {
    /// Queues a scan of `site`. Blacklisted sites get a final
    /// `blacklisted` job and no network contact.
    pub fn enqueue_scan(&self, site: &StoredSite) -> Result<Enqueued, StoreError> {
        let now = self.clock.now();
        match self.blacklist.lookup(&site.url) {
            Some(note) => {
                let note = if note.is_empty() {
                    "site operator opted out".to_string()
                } else {
                    note
                };
                self.store.enqueue(site, now, JobState::Blacklisted, Some(&note))
            }
            None => self.store.enqueue(site, now, JobState::Queued, None),
        }
    }

    /// `honor = false` allows without any request. Otherwise fetches
    /// `/robots.txt`; a missing or unreachable file allows.
    pub async fn check_robots(&self, site: &SiteUrl, honor: bool) -> RobotsDecision {
        if !honor {
            return RobotsDecision::Allow;
        }
        match self.scanner.fetch_robots(site).await {
            Some(text) => evaluate_robots(&text, ROBOTS_TOKEN),
            None => RobotsDecision::Allow,
        }
    }

    /// Claims the oldest queued job whose host is free under the rate
    /// limit.
    pub fn claim(&self) -> Result<Option<ScanJob>, StoreError> {
        let now = self.clock.now();
        self.store.claim(now, |job| self.limiter.try_acquire(&job.host, now))
    }

    fn honor_robots(&self, job: &ScanJob) -> Result<bool, StoreError> {
        Ok(match &job.list_id {
            Some(id) => self.store.list(id)?.is_some_and(|l| l.honor_robots),
            None => false,
        })
    }

    /// Runs a claimed job to completion and persists its run. Module
    /// failures end up inside the run; only store failures fail the job.
    pub async fn run_job(&self, job: &ScanJob) -> Result<ScanRun, StoreError> {
        let started_at = job.claimed_at.unwrap_or_else(|| self.clock.now());
        let mut run = ScanRun {
            id: job.run_id.clone(),
            site_ref: job.site_id.clone(),
            list_ref: job.list_id.clone(),
            started_at,
            finished_at: None,
            status: RunStatus::Running,
            facts: Default::default(),
            check_results: Vec::new(),
            note: None,
        };
        let outcome = self.execute(job, &mut run).await;
        match outcome {
            Ok(state) => {
                self.store.set_job_state(&job.id, state)?;
                Ok(run)
            }
            Err(e) => {
                warn!(job = %job.id, error = %e, "job failed");
                let state = self.store.retry_or_fail(&job.id, self.settings.max_attempts)?;
                run.status = if state == JobState::Failed {
                    RunStatus::Failed
                } else {
                    RunStatus::Queued
                };
                run.note = Some(format!("infrastructure error: {e}"));
                let _ = self.store.put_run(&run);
                Err(e)
            }
        }
    }

    async fn execute(&self, job: &ScanJob, run: &mut ScanRun) -> Result<JobState, StoreError> {
        let url: SiteUrl = job
            .url
            .parse()
            .map_err(|e| StoreError::Corrupt(format!("job url: {e}")))?;
        if self.check_robots(&url, self.honor_robots(job)?).await == RobotsDecision::Deny {
            run.status = RunStatus::Failed;
            run.finished_at = Some(self.clock.now());
            run.note = Some(ROBOTS_DENY_NOTE.into());
            self.store.put_run(run)?;
            return Ok(JobState::Failed);
        }
        let report = self.scanner.scan(&url).await;
        run.facts = report.facts;
        run.check_results = report.results;
        run.status = RunStatus::Done;
        run.finished_at = Some(self.clock.now());
        if !report.reachable {
            run.note = Some(UNREACHABLE_NOTE.into());
        }
        if let Some(c) = &run.facts.content {
            self.store.set_final_url(&job.site_id, &c.final_url)?;
        }
        self.store.put_run(run)?;
        Ok(JobState::Done)
    }

    /// Claims and runs jobs one at a time until none is runnable now.
    pub async fn run_pending(&self) -> Result<Vec<ScanRun>, StoreError> {
        let mut runs = Vec::new();
        while let Some(job) = self.claim()? {
            if let Ok(run) = self.run_job(&job).await {
                runs.push(run);
            }
        }
        Ok(runs)
    }

    /// Queues every site of every rescan-enabled list whose latest run
    /// started longer than the rescan interval ago (or never ran).
    pub fn schedule_rescans(&self) -> Result<Vec<ScanJob>, StoreError> {
        let now = self.clock.now();
        let interval = chrono::Duration::from_std(self.settings.rescan_interval).expect("interval in range");
        let mut jobs = Vec::new();
        for list in self.store.all_lists()? {
            if !list.rescan_enabled {
                continue;
            }
            for site in &list.sites {
                let due = self
                    .store
                    .last_run_started(&site.id)?
                    .is_none_or(|t| now - t > interval);
                if due {
                    if let Enqueued::New(job) = self.enqueue_scan(site)? {
                        jobs.push(job);
                    }
                }
            }
        }
        Ok(jobs)
    }

    pub fn requeue_stale(&self) -> Result<usize, StoreError> {
        let cutoff = self.clock.now() - chrono::Duration::from_std(self.settings.stale_job_after).expect("in range");
        self.store.requeue_stale(cutoff, self.settings.max_attempts)
    }

    /// Worker pool plus rescan scheduler; returns when `shutdown` flips to
    /// true.
    pub async fn run_workers(self: Arc<Self>, mut shutdown: watch::Receiver<bool>) {
        let permits = Arc::new(Semaphore::new(self.settings.global_concurrency));
        let mut handles = Vec::new();
        for worker in 0..self.settings.worker_count {
            let me = self.clone();
            let permits = permits.clone();
            let mut stop = shutdown.clone();
            handles.push(tokio::spawn(async move {
                loop {
                    if *stop.borrow() {
                        break;
                    }
                    let claimed = {
                        let Ok(_permit) = permits.acquire().await else { break };
                        match me.claim() {
                            Ok(Some(job)) => {
                                info!(worker, job = %job.id, host = %job.host, "scan start");
                                let _ = me.run_job(&job).await;
                                true
                            }
                            Ok(None) => false,
                            Err(e) => {
                                warn!(worker, error = %e, "claim failed");
                                false
                            }
                        }
                    };
                    if !claimed {
                        tokio::select! {
                            _ = tokio::time::sleep(me.settings.poll_interval) => {}
                            _ = stop.changed() => {}
                        }
                    }
                }
            }));
        }
        loop {
            if let Err(e) = self.requeue_stale() {
                warn!(error = %e, "stale job sweep failed");
            }
            match self.schedule_rescans() {
                Ok(jobs) if !jobs.is_empty() => info!(count = jobs.len(), "rescans queued"),
                Ok(_) => {}
                Err(e) => warn!(error = %e, "rescan scheduling failed"),
            }
            tokio::select! {
                _ = tokio::time::sleep(self.settings.poll_interval.max(Duration::from_secs(1)) * 30) => {}
                _ = shutdown.changed() => {}
            }
            if *shutdown.borrow() {
                break;
            }
        }
        for h in handles {
            let _ = h.await;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn url(s: &str) -> SiteUrl {
        s.parse().unwrap()
    }

    #[test]
    fn blacklist_matches_host_suffix_and_url_prefix() {
        let bl = Blacklist::in_memory();
        assert!(bl.add("Example.org", "asked").unwrap());
        assert!(!bl.add("example.org", "again").unwrap());
        bl.add("https://shop.test/private", "").unwrap();
        assert_eq!(bl.lookup(&url("https://www.example.org/x")).as_deref(), Some("asked"));
        assert_eq!(bl.lookup(&url("https://example.org")).as_deref(), Some("asked"));
        assert!(bl.lookup(&url("https://notexample.org")).is_none());
        assert!(bl.lookup(&url("https://shop.test/private/a")).is_some());
        assert!(bl.lookup(&url("https://shop.test/public")).is_none());
    }

    #[test]
    fn blacklist_persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bl.tsv");
        Blacklist::open(&path).unwrap().add("a.test", "note one").unwrap();
        let again = Blacklist::open(&path).unwrap();
        assert_eq!(again.entries(), vec![("a.test".to_string(), "note one".to_string())]);
    }

    #[test]
    fn limiter_spaces_starts() {
        let t0 = Utc::now();
        let rl = RateLimiter::new(Duration::from_secs(600));
        assert!(rl.try_acquire("a", t0));
        assert!(!rl.try_acquire("a", t0 + chrono::Duration::seconds(599)));
        assert!(rl.try_acquire("b", t0));
        assert!(rl.next_allowed("a", t0).is_some());
        assert!(rl.try_acquire("a", t0 + chrono::Duration::seconds(600)));
    }
}
