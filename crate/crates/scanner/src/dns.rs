//! DNS lookups against a configured (ideally validating) resolver.

use std::net::{IpAddr, SocketAddr};
use std::time::Duration;

use hickory_proto::op::{Edns, Message, Query, ResponseCode};
use hickory_proto::rr::{Name, RData, RecordType};
use sitebench_core::dns::{parse_dmarc, parse_spf};
use sitebench_core::facts::{DnsFacts, DnssecSignal, MxRecord, ResolverStatus};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpStream, UdpSocket};

use crate::error::ScanError;

#[derive(Debug, Clone)]
pub struct Resolver {
    pub addr: SocketAddr,
    pub timeout: Duration,
}

/// One decoded answer.
#[derive(Debug, Clone, Default)]
pub struct Answer {
    pub rcode: Option<ResponseCode>,
    pub authentic_data: bool,
    pub has_rrsig: bool,
    pub records: Vec<RData>,
}

impl Answer {
    fn nxdomain(&self) -> bool {
        self.rcode == Some(ResponseCode::NXDomain)
    }
}

fn fqdn(name: &str) -> Result<Name, ScanError> {
    let mut n = name.trim_end_matches('.').to_string();
    n.push('.');
    Name::from_ascii(&n).map_err(|e| ScanError::Dns(format!("{name}: {e}")))
}

fn name_text(name: &Name) -> String {
    name.to_ascii().trim_end_matches('.').to_ascii_lowercase()
}

impl Resolver {
    pub fn new(addr: SocketAddr, timeout: Duration) -> Self {
        Resolver { addr, timeout }
    }

    fn build_query(name: &str, rtype: RecordType) -> Result<Message, ScanError> {
        let mut msg = Message::query();
        msg.metadata.recursion_desired = true;
        msg.metadata.authentic_data = true;
        msg.add_query(Query::query(fqdn(name)?, rtype));
        let mut edns = Edns::new();
        edns.set_dnssec_ok(true);
        edns.set_max_payload(1232);
        msg.set_edns(edns);
        Ok(msg)
    }

    pub async fn query(&self, name: &str, rtype: RecordType) -> Result<Answer, ScanError> {
        let msg = Self::build_query(name, rtype)?;
        let id = msg.metadata.id;
        let wire = msg.to_vec().map_err(|e| ScanError::Dns(e.to_string()))?;
        let reply = tokio::time::timeout(self.timeout, async {
            let reply = self.udp(&wire, id).await?;
            if reply.metadata.truncation {
                self.tcp(&wire, id).await
            } else {
                Ok(reply)
            }
        })
        .await
        .map_err(|_| ScanError::Timeout)??;

        let has_rrsig = reply
            .answers
            .iter()
            .any(|r| r.record_type() == RecordType::RRSIG);
        let records = reply
            .answers
            .iter()
            .filter(|r| r.record_type() == rtype)
            .map(|r| r.data.clone())
            .collect();
        Ok(Answer {
            rcode: Some(reply.metadata.response_code),
            authentic_data: reply.metadata.authentic_data,
            has_rrsig,
            records,
        })
    }

    async fn udp(&self, wire: &[u8], id: u16) -> Result<Message, ScanError> {
        let bind: SocketAddr = if self.addr.is_ipv4() {
            ([0, 0, 0, 0], 0).into()
        } else {
            ([0u16; 8], 0).into()
        };
        let io = |e: std::io::Error| ScanError::Dns(e.to_string());
        let sock = UdpSocket::bind(bind).await.map_err(io)?;
        sock.connect(self.addr).await.map_err(io)?;
        sock.send(wire).await.map_err(io)?;
        let mut buf = vec![0u8; 4096];
        loop {
            let n = sock.recv(&mut buf).await.map_err(io)?;
            match Message::from_vec(&buf[..n]) {
                Ok(m) if m.metadata.id == id => return Ok(m),
                _ => continue,
            }
        }
    }

    async fn tcp(&self, wire: &[u8], id: u16) -> Result<Message, ScanError> {
        let io = |e: std::io::Error| ScanError::Dns(e.to_string());
        let mut stream = TcpStream::connect(self.addr).await.map_err(io)?;
        let mut framed = (wire.len() as u16).to_be_bytes().to_vec();
        framed.extend_from_slice(wire);
        stream.write_all(&framed).await.map_err(io)?;
        let len = stream.read_u16().await.map_err(io)? as usize;
        let mut buf = vec![0u8; len];
        stream.read_exact(&mut buf).await.map_err(io)?;
        let msg = Message::from_vec(&buf).map_err(|e| ScanError::Dns(e.to_string()))?;
        if msg.metadata.id != id {
            return Err(ScanError::Dns("mismatched response id".into()));
        }
        Ok(msg)
    }

    /// A and AAAA addresses of `host`; lookup failures yield nothing.
    pub async fn addresses(&self, host: &str) -> Vec<IpAddr> {
        if let Ok(ip) = host.trim_start_matches('[').trim_end_matches(']').parse::<IpAddr>() {
            return vec![ip];
        }
        let mut out = Vec::new();
        for rtype in [RecordType::A, RecordType::AAAA] {
            if let Ok(ans) = self.query(host, rtype).await {
                out.extend(ans.records.iter().filter_map(address));
            }
        }
        out
    }
}

fn address(r: &RData) -> Option<IpAddr> {
    match r {
        RData::A(a) => Some(IpAddr::V4(a.0)),
        RData::AAAA(a) => Some(IpAddr::V6(a.0)),
        _ => None,
    }
}

fn txt_strings(ans: &Answer) -> Vec<String> {
    ans.records
        .iter()
        .filter_map(|r| match r {
            RData::TXT(txt) => Some(
                txt.txt_data
                    .iter()
                    .map(|s| String::from_utf8_lossy(s).into_owned())
                    .collect::<String>(),
            ),
            _ => None,
        })
        .collect()
}

/// Resolves the DNS facts for a site. Addresses are looked up on `host`;
/// mail, name server and policy records on its registrable `domain`.
pub async fn resolve_dns(resolver: &Resolver, host: &str, domain: &str) -> DnsFacts {
    match resolve_inner(resolver, host, domain).await {
        Ok(facts) => facts,
        Err(ScanError::Timeout) => DnsFacts::empty(ResolverStatus::Timeout),
        Err(_) => DnsFacts::empty(ResolverStatus::Timeout),
    }
}

async fn resolve_inner(resolver: &Resolver, host: &str, domain: &str) -> Result<DnsFacts, ScanError> {
    if let Ok(ip) = host.trim_start_matches('[').trim_end_matches(']').parse::<IpAddr>() {
        let mut facts = DnsFacts::empty(ResolverStatus::Ok);
        facts.a_records.push(ip);
        return Ok(facts);
    }
    let a = resolver.query(host, RecordType::A).await?;
    if a.nxdomain() {
        return Ok(DnsFacts::empty(ResolverStatus::NxDomain));
    }
    let aaaa = resolver.query(host, RecordType::AAAA).await?;
    let mx = resolver.query(domain, RecordType::MX).await?;
    let ns = resolver.query(domain, RecordType::NS).await?;
    let txt = resolver.query(domain, RecordType::TXT).await?;
    let dmarc = resolver.query(&format!("_dmarc.{domain}"), RecordType::TXT).await?;

    let mut facts = DnsFacts::empty(ResolverStatus::Ok);
    facts.a_records = a.records.iter().chain(&aaaa.records).filter_map(address).collect();
    let mut mx_records: Vec<MxRecord> = mx
        .records
        .iter()
        .filter_map(|r| match r {
            RData::MX(m) => Some(MxRecord {
                preference: m.preference,
                host: name_text(&m.exchange),
            }),
            _ => None,
        })
        // A null MX ("." at any preference) declares that the domain takes no mail.
        .filter(|m| !m.host.is_empty())
        .collect();
    mx_records.sort();
    facts.mx_records = mx_records;
    facts.ns_records = ns
        .records
        .iter()
        .filter_map(|r| match r {
            RData::NS(n) => Some(name_text(&n.0)),
            _ => None,
        })
        .collect();
    (facts.spf_record, facts.spf_policy) = parse_spf(&txt_strings(&txt));
    (facts.dmarc_record, facts.dmarc_policy) = parse_dmarc(&txt_strings(&dmarc));

    let answers = [&a, &aaaa, &mx, &ns, &txt, &dmarc];
    facts.dnssec_signal = if a.authentic_data {
        DnssecSignal::Validated
    } else if answers.iter().any(|x| x.has_rrsig) {
        DnssecSignal::SignedUnvalidated
    } else {
        DnssecSignal::Unsigned
    };
    Ok(facts)
}
