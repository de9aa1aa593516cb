//! Web and mail TLS probes.

use std::net::IpAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use hyper::Method;
use rustls::{ClientConfig, RootCertStore};
use sitebench_core::facts::{unknown_protocols, MailTlsFacts, ProtocolMap, ProtocolState, TlsFacts, TlsVersion};
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt, BufReader};
use tokio::net::TcpStream;
use tokio_rustls::TlsConnector;
use url::Url;
use x509_parser::prelude::{FromDer, GeneralName, X509Certificate};
use x509_parser::time::ASN1Time;

use crate::error::ScanError;
use crate::http::{BodyPolicy, HttpClient};
use crate::net::{recording_config, server_name, CertRecord, Dialer};
use crate::tls_wire::{client_hello, parse_server_reply, record_len, ServerReply};

pub const HTTP_PORT: u16 = 80;
pub const HTTPS_PORT: u16 = 443;
pub const SMTP_PORT: u16 = 25;

#[derive(Debug, Clone)]
pub struct TlsProbeConfig {
    pub dialer: Dialer,
    pub roots: Arc<RootCertStore>,
    pub timeout: Duration,
    pub user_agent: String,
    /// Name announced in EHLO.
    pub helo_name: String,
}

/// Hostname and validity-window checks on a DER end-entity certificate.
pub fn inspect_certificate(der: &[u8], host: &str, now_unix: i64) -> (bool, bool) {
    let Ok((_, cert)) = X509Certificate::from_der(der) else {
        return (false, false);
    };
    let not_expired = ASN1Time::from_timestamp(now_unix)
        .map(|now| cert.validity().is_valid_at(now))
        .unwrap_or(false);
    let host = host.trim_start_matches('[').trim_end_matches(']').to_ascii_lowercase();
    let host_ip: Option<IpAddr> = host.parse().ok();
    let mut dns_names = Vec::new();
    let mut ips = Vec::new();
    if let Ok(Some(san)) = cert.subject_alternative_name() {
        for name in &san.value.general_names {
            match name {
                GeneralName::DNSName(n) => dns_names.push(n.to_ascii_lowercase()),
                GeneralName::IPAddress(b) => match b.len() {
                    4 => ips.push(IpAddr::from(<[u8; 4]>::try_from(*b).unwrap())),
                    16 => ips.push(IpAddr::from(<[u8; 16]>::try_from(*b).unwrap())),
                    _ => {}
                },
                _ => {}
            }
        }
    }
    let matched = match host_ip {
        Some(ip) => ips.contains(&ip),
        None if dns_names.is_empty() => cert
            .subject()
            .iter_common_name()
            .filter_map(|cn| cn.as_str().ok())
            .any(|cn| name_matches(&cn.to_ascii_lowercase(), &host)),
        None => dns_names.iter().any(|n| name_matches(n, &host)),
    };
    (matched, not_expired)
}

/// Exact match, or a leftmost-label wildcard covering exactly one label.
fn name_matches(pattern: &str, host: &str) -> bool {
    let pattern = pattern.trim_end_matches('.');
    let host = host.trim_end_matches('.');
    match pattern.strip_prefix("*.") {
        Some(rest) => host
            .split_once('.')
            .is_some_and(|(label, tail)| !label.is_empty() && tail == rest),
        None => pattern == host,
    }
}

fn now_unix() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

/// `max-age` directive of a Strict-Transport-Security value.
pub fn hsts_max_age(value: &str) -> Option<u64> {
    value.split(';').find_map(|d| {
        let (k, v) = d.split_once('=')?;
        k.trim()
            .eq_ignore_ascii_case("max-age")
            .then(|| v.trim().trim_matches('"').parse().ok())?
    })
}

/// Sends a hand-built ClientHello for `version` and classifies the first
/// reply record.
async fn raw_probe<S>(mut stream: S, version: TlsVersion, sni: &str) -> ProtocolState
where
    S: AsyncRead + AsyncWrite + Unpin,
{
    let hello = client_hello(version, Some(sni), rand::random());
    if stream.write_all(&hello).await.is_err() {
        return ProtocolState::Refused;
    }
    let mut buf = Vec::with_capacity(512);
    let mut chunk = [0u8; 512];
    loop {
        let n = match stream.read(&mut chunk).await {
            Ok(0) | Err(_) => return ProtocolState::Refused,
            Ok(n) => n,
        };
        buf.extend_from_slice(&chunk[..n]);
        match parse_server_reply(&buf) {
            ServerReply::Hello { version: v } if v == version.wire() => return ProtocolState::Offered,
            ServerReply::Incomplete if record_len(&buf).is_none_or(|l| l <= 1 << 15) => continue,
            _ => return ProtocolState::Refused,
        }
    }
}

async fn rustls_probe<S>(stream: S, host: &str, config: Arc<ClientConfig>) -> ProtocolState
where
    S: AsyncRead + AsyncWrite + Unpin,
{
    let Ok(name) = server_name(host) else {
        return ProtocolState::Unknown;
    };
    match TlsConnector::from(config).connect(name, stream).await {
        Ok(_) => ProtocolState::Offered,
        Err(_) => ProtocolState::Refused,
    }
}

fn tls13_config(roots: Arc<RootCertStore>) -> Result<Arc<ClientConfig>, ScanError> {
    recording_config(roots, &[&rustls::version::TLS13]).map(|(c, _)| c)
}

async fn probe_version<S>(stream: S, version: TlsVersion, host: &str, roots: &Arc<RootCertStore>) -> ProtocolState
where
    S: AsyncRead + AsyncWrite + Unpin,
{
    if version == TlsVersion::Tls13 {
        match tls13_config(roots.clone()) {
            Ok(config) => rustls_probe(stream, host, config).await,
            Err(_) => ProtocolState::Unknown,
        }
    } else {
        raw_probe(stream, version, host).await
    }
}

async fn within<T>(limit: Duration, fut: impl std::future::Future<Output = T>) -> Option<T> {
    tokio::time::timeout(limit, fut).await.ok()
}

fn cert_facts(record: &Mutex<CertRecord>, host: &str) -> (bool, bool, bool, Option<String>) {
    let rec = record.lock().expect("cert record").clone();
    let Some(der) = rec.end_entity else {
        return (false, false, false, None);
    };
    let (hostname_match, not_expired) = inspect_certificate(&der, host, now_unix());
    let (chain_ok, err) = match rec.verdict {
        Some(Ok(())) => (true, None),
        Some(Err(e)) => (false, Some(e)),
        None => (false, None),
    };
    (chain_ok && hostname_match && not_expired, hostname_match, not_expired, err)
}

/// Probes the web server on `host`: one connection per protocol version,
/// one plain-HTTP HEAD and one HTTPS GET.
pub async fn scan_web_tls(cfg: &TlsProbeConfig, host: &str) -> TlsFacts {
    let mut protocols = unknown_protocols();
    for v in TlsVersion::PROBE_ORDER {
        let state = within(cfg.timeout, async {
            match cfg.dialer.connect(host, HTTPS_PORT).await {
                Ok(tcp) => probe_version(tcp, v, host, &cfg.roots).await,
                Err(_) => ProtocolState::Unknown,
            }
        })
        .await
        .unwrap_or(ProtocolState::Unknown);
        protocols.insert(v, state);
    }

    let client = HttpClient::new(
        cfg.dialer.clone(),
        cfg.user_agent.clone(),
        cfg.timeout,
        crate::net::permissive_config(),
    );
    let https_redirect = match Url::parse(&format!("http://{host}/")) {
        Ok(plain) => match client.request(Method::HEAD, &plain, BodyPolicy::Truncate(0), None).await {
            Ok(resp) => resp.is_redirect() && resp.location(&plain).is_some_and(|u| u.scheme() == "https"),
            Err(_) => false,
        },
        Err(_) => false,
    };

    let mut facts = TlsFacts::unreachable();
    facts.https_redirect = https_redirect;
    let get = match (Url::parse(&format!("https://{host}/")), recording_config(cfg.roots.clone(), rustls::ALL_VERSIONS)) {
        (Ok(secure), Ok((config, record))) => {
            let resp = client
                .request(Method::GET, &secure, BodyPolicy::Truncate(64 * 1024), Some(config))
                .await;
            Some((resp, record))
        }
        _ => None,
    };
    let mut handshake_ok = false;
    if let Some((resp, record)) = get {
        let (valid, hostname_match, not_expired, err) = cert_facts(&record, host);
        facts.cert_valid = valid;
        facts.cert_hostname_match = hostname_match;
        facts.cert_not_expired = not_expired;
        facts.cert_error = err;
        match resp {
            Ok(resp) => {
                handshake_ok = true;
                if let Some(v) = resp.header("strict-transport-security") {
                    facts.hsts_present = true;
                    facts.hsts_max_age = hsts_max_age(v);
                }
            }
            // An HTTP-level failure still means the handshake completed.
            Err(e @ (ScanError::Http(_) | ScanError::BodyTooLarge(_))) => {
                handshake_ok = true;
                facts.cert_error.get_or_insert(e.to_string());
            }
            Err(e) => {
                facts.cert_error.get_or_insert(e.to_string());
            }
        }
    }
    facts.https_offered = handshake_ok || protocols.values().any(|s| *s == ProtocolState::Offered);
    facts.poodle_susceptible = protocols[&TlsVersion::Ssl3] == ProtocolState::Offered;
    facts.protocols = protocols;
    if !facts.https_offered {
        facts.cert_valid = false;
    }
    facts
}

/// Result of the plaintext part of an SMTP session.
pub struct SmtpPrelude {
    pub banner: String,
    pub starttls_offered: bool,
    /// Connection ready for a TLS handshake, when STARTTLS was accepted.
    pub upgraded: Option<TcpStream>,
}

async fn read_reply<R: AsyncBufReadExt + Unpin>(r: &mut R) -> Result<(u16, Vec<String>), ScanError> {
    let mut lines = Vec::new();
    loop {
        let mut line = String::new();
        let n = r
            .read_line(&mut line)
            .await
            .map_err(|e| ScanError::ConnectionFailed(e.to_string()))?;
        if n == 0 {
            return Err(ScanError::ConnectionFailed("connection closed during SMTP reply".into()));
        }
        let line = line.trim_end_matches(['\r', '\n']).to_string();
        let code: u16 = line
            .get(..3)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| ScanError::Http(format!("malformed SMTP reply {line:?}")))?;
        let more = line.as_bytes().get(3) == Some(&b'-');
        lines.push(line);
        if !more {
            return Ok((code, lines));
        }
        if lines.len() > 128 {
            return Err(ScanError::Http("SMTP reply too long".into()));
        }
    }
}

/// Greeting, EHLO and (when advertised) STARTTLS.
pub async fn smtp_prelude(cfg: &TlsProbeConfig, host: &str) -> Result<SmtpPrelude, ScanError> {
    let work = async {
        let tcp = cfg.dialer.connect(host, SMTP_PORT).await?;
        let mut conn = BufReader::new(tcp);
        let (code, greeting) = read_reply(&mut conn).await?;
        let banner = greeting.first().cloned().unwrap_or_default();
        if code != 220 {
            return Ok(SmtpPrelude {
                banner,
                starttls_offered: false,
                upgraded: None,
            });
        }
        let io = |e: std::io::Error| ScanError::ConnectionFailed(e.to_string());
        conn.get_mut()
            .write_all(format!("EHLO {}\r\n", cfg.helo_name).as_bytes())
            .await
            .map_err(io)?;
        let (code, ehlo) = read_reply(&mut conn).await?;
        let starttls_offered = code == 250
            && ehlo
                .iter()
                .any(|l| l.get(4..).is_some_and(|kw| kw.trim().eq_ignore_ascii_case("STARTTLS")));
        let mut upgraded = None;
        if starttls_offered {
            conn.get_mut().write_all(b"STARTTLS\r\n").await.map_err(io)?;
            let (code, _) = read_reply(&mut conn).await?;
            if code == 220 {
                upgraded = Some(conn.into_inner());
            }
        }
        Ok(SmtpPrelude {
            banner,
            starttls_offered,
            upgraded,
        })
    };
    within(cfg.timeout, work).await.unwrap_or(Err(ScanError::Timeout))
}

/// Probes the primary mail server: one session for the banner, STARTTLS
/// and certificate, then one session per protocol version.
pub async fn scan_mail_tls(cfg: &TlsProbeConfig, mx_host: Option<&str>) -> MailTlsFacts {
    let Some(mx) = mx_host else {
        return MailTlsFacts::no_mx();
    };
    let mut facts = MailTlsFacts::no_mx();
    facts.mx_host = Some(mx.to_string());
    let Ok(first) = smtp_prelude(cfg, mx).await else {
        return facts;
    };
    facts.banner = Some(first.banner).filter(|b| !b.is_empty());
    facts.starttls_offered = Some(first.starttls_offered);
    let Some(stream) = first.upgraded else {
        return facts;
    };

    if let Ok((config, record)) = recording_config(cfg.roots.clone(), rustls::ALL_VERSIONS) {
        if let Ok(name) = server_name(mx) {
            let _ = within(cfg.timeout, TlsConnector::from(config).connect(name, stream)).await;
            let rec_seen = record.lock().expect("cert record").verdict.is_some();
            if rec_seen {
                facts.cert_valid = Some(cert_facts(&record, mx).0);
            }
        }
    }

    let mut protocols: ProtocolMap = unknown_protocols();
    for v in TlsVersion::PROBE_ORDER {
        let state = match smtp_prelude(cfg, mx).await {
            Ok(SmtpPrelude { upgraded: Some(s), .. }) => within(cfg.timeout, probe_version(s, v, mx, &cfg.roots))
                .await
                .unwrap_or(ProtocolState::Unknown),
            _ => ProtocolState::Unknown,
        };
        protocols.insert(v, state);
    }
    facts.protocols = protocols;
    facts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_names() {
        assert!(name_matches("*.example.org", "www.example.org"));
        assert!(!name_matches("*.example.org", "example.org"));
        assert!(!name_matches("*.example.org", "a.b.example.org"));
        assert!(name_matches("example.org", "example.org."));
    }

    #[test]
    fn hsts_directive() {
        assert_eq!(hsts_max_age("max-age=31536000; includeSubDomains"), Some(31536000));
        assert_eq!(hsts_max_age("includeSubDomains; Max-Age=\"60\""), Some(60));
        assert_eq!(hsts_max_age("preload"), None);
        assert_eq!(hsts_max_age("max-age=soon"), None);
    }

    #[test]
    fn certificate_inspection() {
        let key = rcgen::KeyPair::generate().unwrap();
        let mut params = rcgen::CertificateParams::new(vec!["*.example.org".to_string()]).unwrap();
        params.not_before = rcgen::date_time_ymd(2020, 1, 1);
        params.not_after = rcgen::date_time_ymd(2030, 1, 1);
        let cert = params.self_signed(&key).unwrap();
        let der = cert.der().to_vec();
        let mid_2025 = 1_750_000_000;
        assert_eq!(inspect_certificate(&der, "www.example.org", mid_2025), (true, true));
        assert_eq!(inspect_certificate(&der, "example.org", mid_2025), (false, true));
        assert_eq!(inspect_certificate(&der, "www.example.org", 1_900_000_000), (true, false));
        assert_eq!(inspect_certificate(b"junk", "www.example.org", mid_2025), (false, false));
    }
}
