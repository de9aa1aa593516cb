//! Builds the scanner, store and orchestrator described by a [`Config`].

use std::path::Path;
use std::sync::Arc;

use sitebench_core::catalog::check_catalog;
use sitebench_core::filter::{parse_filter_list, BUNDLED_FILTER_LIST};
use sitebench_core::geo::GeoDb;
use sitebench_core::signatures::SignatureSet;
use sitebench_core::Catalog;
use sitebench_scanner::net::load_trust_store;
use sitebench_scanner::{Dialer, FetchLimits, Scanner, ScannerConfig, DEFAULT_USER_AGENT};
use thiserror::Error;

use crate::config::Config;
use crate::orchestrator::{Blacklist, Clock, Orchestrator, OrchestratorSettings, RateLimiter, SystemClock};
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{what} {path}: {message}")]
    File {
        what: &'static str,
        path: String,
        message: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

fn read(what: &'static str, path: &Path) -> Result<String, SetupError> {
    std::fs::read_to_string(path).map_err(|e| SetupError::File {
        what,
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn bad(what: &'static str, path: &Path, e: impl ToString) -> SetupError {
    SetupError::File {
        what,
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn load_catalog(config: &Config) -> Result<Catalog, SetupError> {
    let base = check_catalog();
    match &config.catalog {
        Some(p) => base.with_overrides(&read("catalog", p)?).map_err(|e| bad("catalog", p, e)),
        None => Ok(base),
    }
}

pub fn build_scanner(config: &Config) -> Result<Scanner, SetupError> {
    let mut dialer = Dialer::new();
    dialer.overrides_only = config.overrides_only;
    for o in &config.connect_overrides {
        dialer.add_override(&o.host, o.port, o.addr);
    }
    let trust = Path::new(&config.trust_store);
    let roots = load_trust_store(trust).map_err(|e| bad("trust store", trust, e))?;
    let filter_text = match &config.filter_list {
        Some(p) => read("filter list", p)?,
        None => BUNDLED_FILTER_LIST.to_string(),
    };
    let filters = parse_filter_list(&filter_text).filters;
    let scanner_config = ScannerConfig {
        limits: FetchLimits {
            timeout: config.http_timeout,
            ..FetchLimits::default()
        },
        probe_timeout: config.http_timeout,
        user_agent: config.user_agent.clone().unwrap_or_else(|| DEFAULT_USER_AGENT.to_string()),
        resolver: config.resolver,
        dns_timeout: config.dns_timeout,
        ..ScannerConfig::default()
    };
    let mut scanner = Scanner::new(scanner_config, dialer, roots, filters);
    if let Some(dir) = &config.signatures {
        scanner.signatures = Arc::new(SignatureSet::load_dir(dir).map_err(|e| bad("signatures", dir, e))?);
    }
    if let Some(p) = &config.geodb {
        scanner.geodb = Some(Arc::new(GeoDb::parse(&read("geodb", p)?).map_err(|e| bad("geodb", p, e))?));
    }
    scanner.catalog = Arc::new(load_catalog(config)?);
    Ok(scanner)
}

pub fn open_blacklist(config: &Config) -> Result<Blacklist, SetupError> {
    Blacklist::open(&config.blacklist).map_err(|e| bad("blacklist", &config.blacklist, e))
}

/// Everything `serve` needs, on the system clock.
pub fn build_orchestrator(config: &Config) -> Result<Orchestrator, SetupError> {
    with_store(config, Store::open(&config.database)?)
}

/// Same as [`build_orchestrator`] with a throwaway in-memory store, for
/// one-shot scans from the command line.
pub fn build_ephemeral_orchestrator(config: &Config) -> Result<Orchestrator, SetupError> {
    with_store(config, Store::in_memory()?)
}

fn with_store(config: &Config, store: Store) -> Result<Orchestrator, SetupError> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    Ok(Orchestrator {
        store: Arc::new(store),
        scanner: Arc::new(build_scanner(config)?),
        clock,
        limiter: Arc::new(RateLimiter::new(config.per_host_min_interval)),
        blacklist: Arc::new(open_blacklist(config)?),
        settings: OrchestratorSettings::from(config),
    })
}
