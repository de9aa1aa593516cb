//! Hand-built TLS handshake records for protocol-version probing.
//!
//! rustls cannot speak SSLv3, TLS 1.0 or TLS 1.1, so those versions (and
//! TLS 1.2, for symmetry) are probed by sending a ClientHello and reading
//! only the first record of the reply. No handshake is completed.

use sitebench_core::TlsVersion;

pub const CONTENT_ALERT: u8 = 21;
pub const CONTENT_HANDSHAKE: u8 = 22;
pub const HANDSHAKE_CLIENT_HELLO: u8 = 1;
pub const HANDSHAKE_SERVER_HELLO: u8 = 2;
pub const ALERT_HANDSHAKE_FAILURE: u8 = 40;
pub const ALERT_PROTOCOL_VERSION: u8 = 70;

const EXT_SERVER_NAME: u16 = 0x0000;
const EXT_SUPPORTED_GROUPS: u16 = 0x000a;
const EXT_EC_POINT_FORMATS: u16 = 0x000b;
const EXT_SIGNATURE_ALGORITHMS: u16 = 0x000d;
const EXT_EXTENDED_MASTER_SECRET: u16 = 0x0017;
const EXT_SUPPORTED_VERSIONS: u16 = 0x002b;

const MODERN_SUITES: [u16; 13] = [
    0xc02b, 0xc02f, 0xc02c, 0xc030, 0xcca9, 0xcca8, 0xc013, 0xc014, 0x009c, 0x009d, 0x002f, 0x0035, 0x000a,
];
const LEGACY_SUITES: [u16; 7] = [0xc013, 0xc014, 0xc009, 0xc00a, 0x002f, 0x0035, 0x000a];
const SCSV_RENEGOTIATION: u16 = 0x00ff;

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn push_u24(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_be_bytes()[1..]);
}

fn extension(out: &mut Vec<u8>, kind: u16, body: &[u8]) {
    push_u16(out, kind);
    push_u16(out, body.len() as u16);
    out.extend_from_slice(body);
}

fn record(content: u8, version: u16, body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(body.len() + 5);
    out.push(content);
    push_u16(&mut out, version);
    push_u16(&mut out, body.len() as u16);
    out.extend_from_slice(body);
    out
}

fn is_dns_name(host: &str) -> bool {
    !host.is_empty() && host.parse::<std::net::IpAddr>().is_err() && !host.starts_with('[')
}

/// A ClientHello offering exactly `version`. TLS 1.3 needs the
/// supported_versions extension and is not built here.
pub fn client_hello(version: TlsVersion, sni: Option<&str>, random: [u8; 32]) -> Vec<u8> {
    assert!(version != TlsVersion::Tls13, "TLS 1.3 probes go through rustls");
    let mut hello = Vec::new();
    push_u16(&mut hello, version.wire());
    hello.extend_from_slice(&random);
    hello.push(0);
    let suites: &[u16] = if version == TlsVersion::Tls12 {
        &MODERN_SUITES
    } else {
        &LEGACY_SUITES
    };
    push_u16(&mut hello, ((suites.len() + 1) * 2) as u16);
    for s in suites.iter().chain([&SCSV_RENEGOTIATION]) {
        push_u16(&mut hello, *s);
    }
    hello.extend_from_slice(&[1, 0]);

    if version != TlsVersion::Ssl3 {
        let mut exts = Vec::new();
        if let Some(name) = sni.filter(|h| is_dns_name(h)) {
            let name = name.as_bytes();
            let mut body = Vec::new();
            push_u16(&mut body, (name.len() + 3) as u16);
            body.push(0);
            push_u16(&mut body, name.len() as u16);
            body.extend_from_slice(name);
            extension(&mut exts, EXT_SERVER_NAME, &body);
        }
        extension(&mut exts, EXT_SUPPORTED_GROUPS, &[0, 6, 0x00, 0x1d, 0x00, 0x17, 0x00, 0x18]);
        extension(&mut exts, EXT_EC_POINT_FORMATS, &[1, 0]);
        if version == TlsVersion::Tls12 {
            let algs: [u16; 10] = [0x0403, 0x0503, 0x0603, 0x0804, 0x0805, 0x0806, 0x0401, 0x0501, 0x0601, 0x0201];
            let mut body = Vec::new();
            push_u16(&mut body, (algs.len() * 2) as u16);
            for a in algs {
                push_u16(&mut body, a);
            }
            extension(&mut exts, EXT_SIGNATURE_ALGORITHMS, &body);
        }
        extension(&mut exts, EXT_EXTENDED_MASTER_SECRET, &[]);
        push_u16(&mut hello, exts.len() as u16);
        hello.extend_from_slice(&exts);
    }

    let mut handshake = vec![HANDSHAKE_CLIENT_HELLO];
    push_u24(&mut handshake, hello.len());
    handshake.extend_from_slice(&hello);
    let record_version = if version == TlsVersion::Ssl3 { 0x0300 } else { 0x0301 };
    record(CONTENT_HANDSHAKE, record_version, &handshake)
}

/// First record of a server's answer to a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerReply {
    Hello { version: u16 },
    Alert { level: u8, description: u8 },
    /// A record that is neither; treated as a refusal.
    Other,
    /// Fewer bytes than a complete record.
    Incomplete,
}

/// Total length of the record at the start of `buf`, once the header is in.
pub fn record_len(buf: &[u8]) -> Option<usize> {
    (buf.len() >= 5).then(|| 5 + u16::from_be_bytes([buf[3], buf[4]]) as usize)
}

pub fn parse_server_reply(buf: &[u8]) -> ServerReply {
    let Some(len) = record_len(buf) else {
        return ServerReply::Incomplete;
    };
    let body = &buf[5..];
    let need = match buf[0] {
        CONTENT_ALERT => 2,
        CONTENT_HANDSHAKE => 6,
        _ => return ServerReply::Other,
    };
    if body.len() < need {
        return if buf.len() < len {
            ServerReply::Incomplete
        } else {
            ServerReply::Other
        };
    }
    match buf[0] {
        CONTENT_ALERT => ServerReply::Alert {
            level: body[0],
            description: body[1],
        },
        _ if body[0] == HANDSHAKE_SERVER_HELLO => ServerReply::Hello {
            version: u16::from_be_bytes([body[4], body[5]]),
        },
        _ => ServerReply::Other,
    }
}

/// Fields of a ClientHello that a probe-aware server needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHelloInfo {
    pub record_version: u16,
    pub client_version: u16,
    pub supported_versions: bool,
    pub sni: Option<String>,
}

/// Parses a ClientHello contained in a single record.
pub fn parse_client_hello(buf: &[u8]) -> Option<ClientHelloInfo> {
    let len = record_len(buf)?;
    if buf[0] != CONTENT_HANDSHAKE || buf.len() < len {
        return None;
    }
    let record_version = u16::from_be_bytes([buf[1], buf[2]]);
    let mut r = Reader(&buf[5..len]);
    if r.u8()? != HANDSHAKE_CLIENT_HELLO {
        return None;
    }
    r.take(3)?;
    let client_version = r.u16()?;
    r.take(32)?;
    let sid = r.u8()? as usize;
    r.take(sid)?;
    let suites = r.u16()? as usize;
    r.take(suites)?;
    let comp = r.u8()? as usize;
    r.take(comp)?;
    let mut info = ClientHelloInfo {
        record_version,
        client_version,
        supported_versions: false,
        sni: None,
    };
    if r.0.is_empty() {
        return Some(info);
    }
    let ext_len = r.u16()? as usize;
    let mut exts = Reader(r.take(ext_len)?);
    while !exts.0.is_empty() {
        let kind = exts.u16()?;
        let n = exts.u16()? as usize;
        let body = exts.take(n)?;
        match kind {
            EXT_SUPPORTED_VERSIONS => info.supported_versions = true,
            EXT_SERVER_NAME => {
                let mut b = Reader(body);
                b.u16()?;
                if b.u8()? == 0 {
                    let n = b.u16()? as usize;
                    info.sni = Some(String::from_utf8_lossy(b.take(n)?).into_owned());
                }
            }
            _ => {}
        }
    }
    Some(info)
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.0.len() < n {
            return None;
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Some(head)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }
}

/// A bare ServerHello selecting `version`, for test servers that emulate
/// legacy protocol support.
pub fn server_hello(version: u16, cipher: u16) -> Vec<u8> {
    let mut hello = Vec::new();
    push_u16(&mut hello, version);
    hello.extend_from_slice(&[0x5a; 32]);
    hello.push(0);
    push_u16(&mut hello, cipher);
    hello.push(0);
    let mut handshake = vec![HANDSHAKE_SERVER_HELLO];
    push_u24(&mut handshake, hello.len());
    handshake.extend_from_slice(&hello);
    record(CONTENT_HANDSHAKE, version, &handshake)
}

pub fn alert(version: u16, description: u8) -> Vec<u8> {
    record(CONTENT_ALERT, version, &[2, description])
}
