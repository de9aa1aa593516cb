//! A throwaway certificate authority for fixture TLS servers.

use std::sync::Arc;

use rcgen::{
    date_time_ymd, BasicConstraints, CertificateParams, CertifiedIssuer, DnType, IsCa, KeyPair, KeyUsagePurpose,
};
use rustls::pki_types::{CertificateDer, PrivateKeyDer, PrivatePkcs8KeyDer};
use rustls::RootCertStore;

/// How a leaf certificate is (mis)issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertKind {
    Valid,
    Expired,
    /// Issued for another name.
    WrongHost,
    /// Self-signed, so it does not chain to the fixture root.
    Untrusted,
}

pub struct TestCa {
    issuer: CertifiedIssuer<'static, KeyPair>,
}

#[derive(Clone)]
pub struct Leaf {
    pub chain: Vec<CertificateDer<'static>>,
    pub key: Arc<PrivateKeyDer<'static>>,
}

impl TestCa {
    pub fn new() -> Self {
        let key = KeyPair::generate().expect("CA key");
        let mut params = CertificateParams::new(Vec::<String>::new()).expect("CA params");
        params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
        params.distinguished_name.push(DnType::CommonName, "sitebench fixture root");
        params.key_usages = vec![KeyUsagePurpose::KeyCertSign, KeyUsagePurpose::CrlSign];
        params.not_before = date_time_ymd(2020, 1, 1);
        params.not_after = date_time_ymd(2099, 1, 1);
        TestCa {
            issuer: CertifiedIssuer::self_signed(params, key).expect("CA certificate"),
        }
    }

    pub fn root_der(&self) -> CertificateDer<'static> {
        self.issuer.der().clone()
    }

    pub fn root_pem(&self) -> String {
        self.issuer.pem()
    }

    pub fn root_store(&self) -> RootCertStore {
        let mut store = RootCertStore::empty();
        store.add(self.root_der()).expect("fixture root");
        store
    }

    pub fn issue(&self, host: &str, kind: CertKind) -> Leaf {
        let key = KeyPair::generate().expect("leaf key");
        let name = match kind {
            CertKind::WrongHost => format!("other.{host}.invalid"),
            _ => host.to_string(),
        };
        let mut params = CertificateParams::new(vec![name.clone()]).expect("leaf params");
        params.distinguished_name.push(DnType::CommonName, name);
        (params.not_before, params.not_after) = match kind {
            CertKind::Expired => (date_time_ymd(2015, 1, 1), date_time_ymd(2016, 1, 1)),
            _ => (date_time_ymd(2020, 1, 1), date_time_ymd(2099, 1, 1)),
        };
        let cert = match kind {
            CertKind::Untrusted => params.self_signed(&key),
            _ => params.signed_by(&key, &self.issuer),
        }
        .expect("leaf certificate");
        Leaf {
            chain: vec![cert.der().clone()],
            key: Arc::new(PrivateKeyDer::Pkcs8(PrivatePkcs8KeyDer::from(key.serialize_der()))),
        }
    }
}

impl Default for TestCa {
    fn default() -> Self {
        TestCa::new()
    }
}
