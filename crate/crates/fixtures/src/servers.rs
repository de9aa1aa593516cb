//! HTTP, TLS and SMTP fixture listeners.

use std::convert::Infallible;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use bytes::Bytes;
use http_body_util::Full;
use hyper::body::Incoming;
use hyper::service::service_fn;
use hyper::{Request, Response};
use hyper_util::rt::TokioIo;
use rustls::ServerConfig;
use sitebench_core::TlsVersion;
use sitebench_scanner::tls_wire::{self, parse_client_hello, record_len};
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio_rustls::server::TlsStream;
use tokio_rustls::TlsAcceptor;

use crate::pki::Leaf;
use crate::site::{Page, PlainHttp, SiteFixture, TlsProfile};

/// Traffic seen by one fixture host.
#[derive(Debug, Default)]
pub struct HostCounters {
    pub connections: AtomicUsize,
    pub requests: AtomicUsize,
    /// Request paths in arrival order.
    pub paths: Mutex<Vec<String>>,
}

impl HostCounters {
    pub fn connections(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn paths(&self) -> Vec<String> {
        self.paths.lock().expect("paths").clone()
    }

    pub fn reset(&self) {
        self.connections.store(0, Ordering::SeqCst);
        self.requests.store(0, Ordering::SeqCst);
        self.paths.lock().expect("paths").clear();
    }
}

/// Runtime TLS behaviour of one listener.
pub struct TlsEndpoint {
    profile: TlsProfile,
    acceptor: Option<TlsAcceptor>,
}

impl TlsEndpoint {
    pub fn new(profile: TlsProfile, leaf: Leaf) -> Self {
        let mut versions = Vec::new();
        if profile.offers(TlsVersion::Tls13) {
            versions.push(&rustls::version::TLS13);
        }
        if profile.offers(TlsVersion::Tls12) {
            versions.push(&rustls::version::TLS12);
        }
        let acceptor = (!versions.is_empty()).then(|| {
            let config = ServerConfig::builder_with_provider(Arc::new(rustls::crypto::ring::default_provider()))
                .with_protocol_versions(&versions)
                .expect("protocol versions")
                .with_no_client_auth()
                .with_single_cert(leaf.chain.clone(), leaf.key.clone_key())
                .expect("fixture certificate");
            TlsAcceptor::from(Arc::new(config))
        });
        TlsEndpoint { profile, acceptor }
    }

    /// Reads the ClientHello without consuming it. Hellos without the
    /// supported_versions extension get a synthetic ServerHello (or alert)
    /// so legacy versions can be emulated; everything else goes to rustls.
    pub async fn accept(&self, mut tcp: TcpStream) -> Option<TlsStream<TcpStream>> {
        let mut buf = vec![0u8; 4096];
        let hello = tokio::time::timeout(Duration::from_secs(5), async {
            loop {
                let n = tcp.peek(&mut buf).await.ok()?;
                if n == 0 {
                    return None;
                }
                if record_len(&buf[..n]).is_some_and(|l| l <= n) || n == buf.len() {
                    return parse_client_hello(&buf[..n]);
                }
                tokio::time::sleep(Duration::from_millis(2)).await;
            }
        })
        .await
        .ok()
        .flatten()?;

        if hello.supported_versions {
            return match &self.acceptor {
                Some(acceptor) => acceptor.accept(tcp).await.ok(),
                None => {
                    let _ = tcp.write_all(&tls_wire::alert(0x0303, tls_wire::ALERT_PROTOCOL_VERSION)).await;
                    None
                }
            };
        }
        let chosen = TlsVersion::PROBE_ORDER
            .iter()
            .filter(|v| **v != TlsVersion::Tls13 && self.profile.offers(**v))
            .find(|v| v.wire() <= hello.client_version);
        let reply = match chosen {
            Some(v) => tls_wire::server_hello(v.wire(), 0xc013),
            None => tls_wire::alert(hello.record_version, tls_wire::ALERT_PROTOCOL_VERSION),
        };
        // Drain the hello so closing does not reset the connection before
        // the reply is read.
        let mut sink = vec![0u8; record_len(&buf).unwrap_or(0).min(buf.len())];
        let _ = tcp.read_exact(&mut sink).await;
        let _ = tcp.write_all(&reply).await;
        let _ = tcp.shutdown().await;
        None
    }
}

fn respond(page: Page) -> Response<Full<Bytes>> {
    let mut builder = Response::builder().status(page.status);
    for (k, v) in &page.headers {
        builder = builder.header(k, v);
    }
    builder.body(Full::new(Bytes::from(page.body))).expect("fixture response")
}

async fn serve_http<S>(io: S, site: Arc<SiteFixture>, counters: Arc<HostCounters>, secure: bool)
where
    S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
{
    let service = service_fn(move |req: Request<Incoming>| {
        let site = site.clone();
        let counters = counters.clone();
        async move {
            counters.requests.fetch_add(1, Ordering::SeqCst);
            let path = req
                .uri()
                .path_and_query()
                .map(|p| p.as_str().to_string())
                .unwrap_or_else(|| "/".into());
            counters.paths.lock().expect("paths").push(path.clone());
            let page = if !secure && site.plain == PlainHttp::RedirectToHttps {
                Page::redirect(301, &format!("https://{}{path}", site.host))
            } else {
                site.lookup(req.uri().path())
            };
            Ok::<_, Infallible>(respond(page))
        }
    });
    let _ = hyper::server::conn::http1::Builder::new()
        .serve_connection(TokioIo::new(io), service)
        .await;
}

pub async fn run_plain_http(listener: TcpListener, site: Arc<SiteFixture>, counters: Arc<HostCounters>) {
    while let Ok((tcp, _)) = listener.accept().await {
        counters.connections.fetch_add(1, Ordering::SeqCst);
        tokio::spawn(serve_http(tcp, site.clone(), counters.clone(), false));
    }
}

pub async fn run_https(
    listener: TcpListener,
    site: Arc<SiteFixture>,
    endpoint: Arc<TlsEndpoint>,
    counters: Arc<HostCounters>,
) {
    while let Ok((tcp, _)) = listener.accept().await {
        counters.connections.fetch_add(1, Ordering::SeqCst);
        let (site, endpoint, counters) = (site.clone(), endpoint.clone(), counters.clone());
        tokio::spawn(async move {
            if let Some(tls) = endpoint.accept(tcp).await {
                serve_http(tls, site, counters, true).await;
            }
        });
    }
}

async fn smtp_session(tcp: TcpStream, greeting: String, host: String, starttls: bool, endpoint: Arc<TlsEndpoint>) {
    let mut conn = BufReader::new(tcp);
    if conn.get_mut().write_all(format!("{greeting}\r\n").as_bytes()).await.is_err() {
        return;
    }
    loop {
        let mut line = String::new();
        match tokio::time::timeout(Duration::from_secs(10), conn.read_line(&mut line)).await {
            Ok(Ok(n)) if n > 0 => {}
            _ => return,
        }
        let verb = line.split_whitespace().next().unwrap_or("").to_ascii_uppercase();
        let reply = match verb.as_str() {
            "EHLO" if starttls => format!("250-{host}\r\n250-PIPELINING\r\n250-8BITMIME\r\n250 STARTTLS\r\n"),
            "EHLO" => format!("250-{host}\r\n250-PIPELINING\r\n250 8BITMIME\r\n"),
            "HELO" => format!("250 {host}\r\n"),
            "STARTTLS" if starttls => {
                if conn.get_mut().write_all(b"220 2.0.0 Ready to start TLS\r\n").await.is_err() {
                    return;
                }
                if let Some(mut tls) = endpoint.accept(conn.into_inner()).await {
                    let mut sink = [0u8; 256];
                    let _ = tokio::time::timeout(Duration::from_secs(5), tls.read(&mut sink)).await;
                }
                return;
            }
            "QUIT" => {
                let _ = conn.get_mut().write_all(b"221 2.0.0 Bye\r\n").await;
                return;
            }
            _ => "502 5.5.2 Command not recognized\r\n".to_string(),
        };
        if conn.get_mut().write_all(reply.as_bytes()).await.is_err() {
            return;
        }
    }
}

pub async fn run_smtp(
    listener: TcpListener,
    greeting: String,
    host: String,
    starttls: bool,
    endpoint: Arc<TlsEndpoint>,
    counters: Arc<HostCounters>,
) {
    while let Ok((tcp, _)) = listener.accept().await {
        counters.connections.fetch_add(1, Ordering::SeqCst);
        tokio::spawn(smtp_session(tcp, greeting.clone(), host.clone(), starttls, endpoint.clone()));
    }
}
