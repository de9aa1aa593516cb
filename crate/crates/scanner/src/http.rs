//! Minimal HTTP/1.1 client: one request per connection, no pooling.

use std::sync::Arc;
use std::time::Duration;

use bytes::Bytes;
use http_body_util::{BodyExt, Empty};
use hyper::header::{CONNECTION, HOST, USER_AGENT};
use hyper::{Method, Request};
use hyper_util::rt::TokioIo;
use rustls::ClientConfig;
use tokio::io::{AsyncRead, AsyncWrite};
use tokio_rustls::TlsConnector;
use url::Url;

use crate::error::ScanError;
use crate::net::{server_name, Dialer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyPolicy {
    /// Fail with `BodyTooLarge` past the limit.
    Limit(usize),
    /// Keep the first bytes and drop the rest.
    Truncate(usize),
}

impl BodyPolicy {
    fn cap(self) -> usize {
        match self {
            BodyPolicy::Limit(n) | BodyPolicy::Truncate(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    /// Lowercased names, wire order.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn header_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.headers
            .iter()
            .filter(move |(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn is_redirect(&self) -> bool {
        matches!(self.status, 301 | 302 | 303 | 307 | 308)
    }

    /// Redirect target resolved against the request URL.
    pub fn location(&self, base: &Url) -> Option<Url> {
        let loc = self.header("location")?;
        let url = base.join(loc.trim()).ok()?;
        matches!(url.scheme(), "http" | "https").then_some(url)
    }
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    pub dialer: Dialer,
    pub user_agent: String,
    pub timeout: Duration,
    tls: Arc<ClientConfig>,
}

impl HttpClient {
    pub fn new(dialer: Dialer, user_agent: impl Into<String>, timeout: Duration, tls: Arc<ClientConfig>) -> Self {
        HttpClient {
            dialer,
            user_agent: user_agent.into(),
            timeout,
            tls,
        }
    }

    pub async fn get(&self, url: &Url, policy: BodyPolicy) -> Result<HttpResponse, ScanError> {
        self.request(Method::GET, url, policy, None).await
    }

    /// Sends one request. `tls` overrides the client's TLS configuration
    /// for https URLs.
    pub async fn request(
        &self,
        method: Method,
        url: &Url,
        policy: BodyPolicy,
        tls: Option<Arc<ClientConfig>>,
    ) -> Result<HttpResponse, ScanError> {
        let work = async {
            let host = url
                .host_str()
                .ok_or_else(|| ScanError::Http(format!("{url}: no host")))?;
            let port = url
                .port_or_known_default()
                .ok_or_else(|| ScanError::Http(format!("{url}: unsupported scheme")))?;
            let tcp = self.dialer.connect(host, port).await?;
            match url.scheme() {
                "https" => {
                    let config = tls.unwrap_or_else(|| self.tls.clone());
                    let stream = TlsConnector::from(config)
                        .connect(server_name(host)?, tcp)
                        .await
                        .map_err(|e| ScanError::Tls(e.to_string()))?;
                    self.exchange(stream, method, url, policy).await
                }
                "http" => self.exchange(tcp, method, url, policy).await,
                other => Err(ScanError::Http(format!("unsupported scheme {other}"))),
            }
        };
        tokio::time::timeout(self.timeout, work)
            .await
            .map_err(|_| ScanError::Timeout)?
    }

    async fn exchange<S>(&self, io: S, method: Method, url: &Url, policy: BodyPolicy) -> Result<HttpResponse, ScanError>
    where
        S: AsyncRead + AsyncWrite + Unpin + Send + 'static,
    {
        let (mut sender, conn) = hyper::client::conn::http1::handshake(TokioIo::new(io))
            .await
            .map_err(|e| ScanError::Http(e.to_string()))?;
        let driver = tokio::spawn(async move {
            let _ = conn.await;
        });

        let host_header = match url.port() {
            Some(p) => format!("{}:{p}", url.host_str().unwrap_or_default()),
            None => url.host_str().unwrap_or_default().to_string(),
        };
        let target = match url.query() {
            Some(q) => format!("{}?{q}", url.path()),
            None => url.path().to_string(),
        };
        let req = Request::builder()
            .method(method.clone())
            .uri(target)
            .header(HOST, host_header)
            .header(USER_AGENT, &self.user_agent)
            .header(CONNECTION, "close")
            .body(Empty::<Bytes>::new())
            .map_err(|e| ScanError::Http(e.to_string()))?;
        let resp = sender
            .send_request(req)
            .await
            .map_err(|e| ScanError::Http(e.to_string()))?;

        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect();
        let mut body = Vec::new();
        if method != Method::HEAD {
            let mut incoming = resp.into_body();
            while let Some(frame) = incoming.frame().await {
                let frame = frame.map_err(|e| ScanError::Http(e.to_string()))?;
                let Ok(data) = frame.into_data() else { continue };
                let room = policy.cap() - body.len();
                if data.len() > room {
                    match policy {
                        BodyPolicy::Limit(n) => {
                            driver.abort();
                            return Err(ScanError::BodyTooLarge(n));
                        }
                        BodyPolicy::Truncate(_) => {
                            body.extend_from_slice(&data[..room]);
                            break;
                        }
                    }
                }
                body.extend_from_slice(&data);
            }
        }
        driver.abort();
        Ok(HttpResponse { status, headers, body })
    }
}
