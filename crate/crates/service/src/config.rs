//! `key = value` configuration shared by `serve`, `scan` and the workers.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// A `host:port` the scanner should dial at a fixed address instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectOverride {
    pub host: String,
    pub port: u16,
    pub addr: SocketAddr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub listen: SocketAddr,
    /// SQLite file, or `:memory:`.
    pub database: String,
    pub worker_count: usize,
    pub global_concurrency: usize,
    pub per_host_min_interval: Duration,
    pub rescan_interval: Duration,
    pub max_attempts: u32,
    /// Running jobs older than this are assumed orphaned and requeued.
    pub stale_job_after: Duration,
    pub poll_interval: Duration,
    pub resolver: SocketAddr,
    pub dns_timeout: Duration,
    pub http_timeout: Duration,
    pub geodb: Option<PathBuf>,
    pub signatures: Option<PathBuf>,
    pub filter_list: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    /// PEM bundle path, or `webpki` for the bundled Mozilla roots.
    pub trust_store: String,
    pub blacklist: PathBuf,
    pub user_agent: Option<String>,
    pub connect_overrides: Vec<ConnectOverride>,
    /// Refuse to dial anything without an override (hermetic test setups).
    pub overrides_only: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            listen: ([127, 0, 0, 1], 8080).into(),
            database: "sitebench.db".into(),
            worker_count: 4,
            global_concurrency: 8,
            per_host_min_interval: Duration::from_secs(10 * 60),
            rescan_interval: Duration::from_secs(7 * 24 * 3600),
            max_attempts: 2,
            stale_job_after: Duration::from_secs(30 * 60),
            poll_interval: Duration::from_secs(2),
            resolver: ([127, 0, 0, 1], 53).into(),
            dns_timeout: Duration::from_secs(5),
            http_timeout: Duration::from_secs(10),
            geodb: None,
            signatures: None,
            filter_list: None,
            catalog: None,
            trust_store: "webpki".into(),
            blacklist: "blacklist.tsv".into(),
            user_agent: None,
            connect_overrides: Vec::new(),
            overrides_only: false,
        }
    }
}

fn parse_override(v: &str) -> Result<ConnectOverride, String> {
    let (target, addr) = v.split_once('=').ok_or("expected host:port=ip:port")?;
    let (host, port) = target.trim().rsplit_once(':').ok_or("expected host:port=ip:port")?;
    Ok(ConnectOverride {
        host: host.to_ascii_lowercase(),
        port: port.parse().map_err(|_| format!("bad port {port:?}"))?,
        addr: addr.trim().parse().map_err(|_| format!("bad address {addr:?}"))?,
    })
}

impl Config {
    /// Relative paths in `text` are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = Config::default();
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ConfigError::Line { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let dur = |v: &str| humantime::parse_duration(v).map_err(|e| err(format!("{key}: {e}")));
            let num = |v: &str| v.parse::<u64>().map_err(|_| err(format!("{key}: not a number: {v:?}")));
            let addr = |v: &str| v.parse::<SocketAddr>().map_err(|_| err(format!("{key}: bad address {v:?}")));
            match key {
                "listen" => c.listen = addr(value)?,
                "database" => {
                    c.database = if value == ":memory:" {
                        value.into()
                    } else {
                        path(value).to_string_lossy().into_owned()
                    }
                }
                "worker_count" => c.worker_count = num(value)?.max(1) as usize,
                "global_concurrency" => c.global_concurrency = num(value)?.max(1) as usize,
                "per_host_min_interval" => c.per_host_min_interval = dur(value)?,
                "rescan_interval" => c.rescan_interval = dur(value)?,
                "max_attempts" => c.max_attempts = num(value)?.max(1) as u32,
                "stale_job_after" => c.stale_job_after = dur(value)?,
                "poll_interval" => c.poll_interval = dur(value)?,
                "resolver" => c.resolver = addr(value)?,
                "dns_timeout" => c.dns_timeout = dur(value)?,
                "http_timeout" => c.http_timeout = dur(value)?,
                "geodb" => c.geodb = Some(path(value)),
                "signatures" => c.signatures = Some(path(value)),
                "filter_list" => c.filter_list = Some(path(value)),
                "catalog" => c.catalog = Some(path(value)),
                "trust_store" => {
                    c.trust_store = if value == "webpki" {
                        value.into()
                    } else {
                        path(value).to_string_lossy().into_owned()
                    }
                }
                "blacklist" => c.blacklist = path(value),
                "user_agent" => c.user_agent = Some(value.to_string()),
                "connect_override" => c.connect_overrides.push(parse_override(value).map_err(err)?),
                "overrides_only" => {
                    c.overrides_only = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        _ => return Err(err(format!("{key}: expected true or false"))),
                    }
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text, path.parent())
    }

    /// Settings in file syntax, for diagnostics.
    pub fn describe(&self) -> BTreeMap<&'static str, String> {
        let d = |v: Duration| humantime::format_duration(v).to_string();
        BTreeMap::from([
            ("listen", self.listen.to_string()),
            ("database", self.database.clone()),
            ("worker_count", self.worker_count.to_string()),
            ("per_host_min_interval", d(self.per_host_min_interval)),
            ("rescan_interval", d(self.rescan_interval)),
            ("resolver", self.resolver.to_string()),
            ("blacklist", self.blacklist.display().to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_durations_paths_and_overrides() {
        let text = "# comment\nper_host_min_interval = 90s\nrescan_interval = 3days\nblacklist = bl.tsv\n\
                    connect_override = a.test:443=127.0.0.1:9443\nconnect_override = a.test:80=127.0.0.1:9080\n";
        let c = Config::parse(text, Some(Path::new("/etc/sb"))).unwrap();
        assert_eq!(c.per_host_min_interval, Duration::from_secs(90));
        assert_eq!(c.rescan_interval, Duration::from_secs(3 * 86400));
        assert_eq!(c.blacklist, PathBuf::from("/etc/sb/bl.tsv"));
        assert_eq!(c.connect_overrides.len(), 2);
        assert_eq!(c.connect_overrides[0].port, 443);
        assert_eq!(c.worker_count, 4);
    }

    #[test]
    fn rejects_unknown_keys_with_line_numbers() {
        let e = Config::parse("\n\nfoo = 1", None).unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 3, .. }), "{e}");
        assert!(Config::parse("rescan_interval = soon", None).is_err());
    }
}
