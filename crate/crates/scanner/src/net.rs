//! Connection plumbing shared by every probe: address overrides, timeouts
//! and TLS client configurations.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rustls::client::danger::{HandshakeSignatureValid, ServerCertVerified, ServerCertVerifier};
use rustls::client::WebPkiServerVerifier;
use rustls::crypto::CryptoProvider;
use rustls::pki_types::pem::PemObject;
use rustls::pki_types::{CertificateDer, ServerName, UnixTime};
use rustls::{ClientConfig, DigitallySignedStruct, RootCertStore, SignatureScheme, SupportedProtocolVersion};
use tokio::net::TcpStream;

use crate::error::ScanError;

pub fn provider() -> Arc<CryptoProvider> {
    Arc::new(rustls::crypto::ring::default_provider())
}

/// Resolves `(host, port)` to a socket, honoring configured overrides.
#[derive(Debug, Clone, Default)]
pub struct Dialer {
    overrides: HashMap<(String, u16), SocketAddr>,
    /// When set, hosts without an override are refused instead of being
    /// resolved. Test setups use this to keep every probe local.
    pub overrides_only: bool,
    pub connect_timeout: Option<Duration>,
}

impl Dialer {
    pub fn new() -> Self {
        Dialer::default()
    }

    pub fn with_override(mut self, host: &str, port: u16, addr: SocketAddr) -> Self {
        self.add_override(host, port, addr);
        self
    }

    pub fn add_override(&mut self, host: &str, port: u16, addr: SocketAddr) {
        self.overrides.insert((host.to_ascii_lowercase(), port), addr);
    }

    pub fn overrides(&self) -> impl Iterator<Item = (&(String, u16), &SocketAddr)> {
        self.overrides.iter()
    }

    pub async fn connect(&self, host: &str, port: u16) -> Result<TcpStream, ScanError> {
        let host = host.trim_start_matches('[').trim_end_matches(']').to_ascii_lowercase();
        let target = self.overrides.get(&(host.clone(), port)).copied();
        let fut = async {
            match target {
                Some(addr) => TcpStream::connect(addr).await,
                None if self.overrides_only => Err(std::io::Error::new(
                    std::io::ErrorKind::ConnectionRefused,
                    format!("no route configured for {host}:{port}"),
                )),
                None => TcpStream::connect((host.as_str(), port)).await,
            }
        };
        let stream = match self.connect_timeout {
            Some(t) => tokio::time::timeout(t, fut).await.map_err(|_| ScanError::Timeout)?,
            None => fut.await,
        };
        stream.map_err(|e| ScanError::ConnectionFailed(format!("{host}:{port}: {e}")))
    }
}

pub fn server_name(host: &str) -> Result<ServerName<'static>, ScanError> {
    let bare = host.trim_start_matches('[').trim_end_matches(']');
    ServerName::try_from(bare.to_string()).map_err(|e| ScanError::Tls(format!("{host}: {e}")))
}

/// Loads a PEM bundle of trust anchors. The literal `webpki` selects the
/// bundled Mozilla root set.
pub fn load_trust_store(path: &Path) -> Result<RootCertStore, ScanError> {
    if path.as_os_str() == "webpki" {
        return Ok(webpki_trust_store());
    }
    let mut store = RootCertStore::empty();
    let certs = CertificateDer::pem_file_iter(path)
        .map_err(|e| ScanError::Tls(format!("{}: {e}", path.display())))?;
    for cert in certs {
        let cert = cert.map_err(|e| ScanError::Tls(format!("{}: {e}", path.display())))?;
        store
            .add(cert)
            .map_err(|e| ScanError::Tls(format!("{}: {e}", path.display())))?;
    }
    if store.is_empty() {
        return Err(ScanError::Tls(format!("{}: no certificates", path.display())));
    }
    Ok(store)
}

pub fn webpki_trust_store() -> RootCertStore {
    RootCertStore {
        roots: webpki_roots::TLS_SERVER_ROOTS.to_vec(),
    }
}

/// Outcome of certificate verification for one handshake.
#[derive(Debug, Clone, Default)]
pub struct CertRecord {
    pub end_entity: Option<Vec<u8>>,
    /// `None` until the handshake reaches certificate verification.
    pub verdict: Option<Result<(), String>>,
}

/// Verifies against a trust store, records the verdict and lets the
/// handshake continue either way so the probe can still read headers.
#[derive(Debug)]
pub struct RecordingVerifier {
    inner: Arc<WebPkiServerVerifier>,
    record: Arc<Mutex<CertRecord>>,
    schemes: Vec<SignatureScheme>,
    provider: Arc<CryptoProvider>,
}

impl RecordingVerifier {
    pub fn new(roots: Arc<RootCertStore>) -> Result<(Self, Arc<Mutex<CertRecord>>), ScanError> {
        let provider = provider();
        let inner = WebPkiServerVerifier::builder_with_provider(roots, provider.clone())
            .build()
            .map_err(|e| ScanError::Tls(e.to_string()))?;
        let record = Arc::new(Mutex::new(CertRecord::default()));
        let schemes = provider.signature_verification_algorithms.supported_schemes();
        Ok((
            RecordingVerifier {
                inner,
                record: record.clone(),
                schemes,
                provider,
            },
            record,
        ))
    }
}

impl ServerCertVerifier for RecordingVerifier {
    fn verify_server_cert(
        &self,
        end_entity: &CertificateDer<'_>,
        intermediates: &[CertificateDer<'_>],
        server_name: &ServerName<'_>,
        ocsp_response: &[u8],
        now: UnixTime,
    ) -> Result<ServerCertVerified, rustls::Error> {
        let verdict = self
            .inner
            .verify_server_cert(end_entity, intermediates, server_name, ocsp_response, now)
            .map(|_| ())
            .map_err(|e| e.to_string());
        let mut rec = self.record.lock().expect("cert record");
        rec.end_entity = Some(end_entity.to_vec());
        rec.verdict = Some(verdict);
        Ok(ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
        rustls::crypto::verify_tls12_signature(message, cert, dss, &self.provider.signature_verification_algorithms)
    }

    fn verify_tls13_signature(
        &self,
        message: &[u8],
        cert: &CertificateDer<'_>,
        dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
        rustls::crypto::verify_tls13_signature(message, cert, dss, &self.provider.signature_verification_algorithms)
    }

    fn supported_verify_schemes(&self) -> Vec<SignatureScheme> {
        self.schemes.clone()
    }
}

/// Client config that records certificate verification instead of
/// enforcing it.
pub fn recording_config(
    roots: Arc<RootCertStore>,
    versions: &[&'static SupportedProtocolVersion],
) -> Result<(Arc<ClientConfig>, Arc<Mutex<CertRecord>>), ScanError> {
    let (verifier, record) = RecordingVerifier::new(roots)?;
    let config = ClientConfig::builder_with_provider(provider())
        .with_protocol_versions(versions)
        .map_err(|e| ScanError::Tls(e.to_string()))?
        .dangerous()
        .with_custom_certificate_verifier(Arc::new(verifier))
        .with_no_client_auth();
    Ok((Arc::new(config), record))
}

/// Client config for content fetching, which does not judge certificates.
pub fn permissive_config() -> Arc<ClientConfig> {
    let (config, _) = recording_config(Arc::new(webpki_trust_store()), rustls::ALL_VERSIONS)
        .expect("default protocol versions are valid");
    config
}
