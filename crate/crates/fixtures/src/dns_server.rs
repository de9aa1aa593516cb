//! A tiny authoritative-and-recursive-looking DNS stub over UDP.

use std::collections::HashMap;
use std::net::IpAddr;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use hickory_proto::op::{Edns, Message, ResponseCode};
use hickory_proto::rr::rdata::{MX, NS, NULL, TXT};
use hickory_proto::rr::{Name, RData, Record, RecordType};
use tokio::net::UdpSocket;

use crate::site::SiteFixture;

#[derive(Debug, Clone, Default)]
struct NameData {
    records: Vec<RData>,
    validated: bool,
    signed: bool,
    silent: bool,
}

/// Records indexed by lowercase name without the trailing dot.
#[derive(Debug, Default)]
pub struct DnsZoneData {
    names: HashMap<String, NameData>,
    pub queries: AtomicUsize,
}

fn name(s: &str) -> Name {
    Name::from_str(&format!("{}.", s.trim_end_matches('.'))).expect("fixture DNS name")
}

fn addr_rdata(ip: IpAddr) -> RData {
    match ip {
        IpAddr::V4(v4) => RData::A(v4.into()),
        IpAddr::V6(v6) => RData::AAAA(v6.into()),
    }
}

impl DnsZoneData {
    pub fn from_sites(sites: &[SiteFixture]) -> Self {
        let mut data = DnsZoneData::default();
        for site in sites {
            let z = &site.zone;
            let mut add = |owner: &str, rdata: Option<RData>| {
                let entry = data.names.entry(owner.to_ascii_lowercase()).or_default();
                entry.validated |= z.validated;
                entry.signed |= z.signed;
                entry.silent |= z.silent;
                entry.records.extend(rdata);
            };
            add(&site.host, None);
            for ip in &z.addrs {
                add(&site.host, Some(addr_rdata(*ip)));
            }
            for (pref, host) in &z.mx {
                add(&site.host, Some(RData::MX(MX::new(*pref, name(host)))));
            }
            for (host, ip) in &z.ns {
                add(&site.host, Some(RData::NS(NS(name(host)))));
                add(host, Some(addr_rdata(*ip)));
            }
            for (host, ip) in &z.mx_addrs {
                add(host, Some(addr_rdata(*ip)));
            }
            for t in &z.txt {
                add(&site.host, Some(RData::TXT(TXT::new(vec![t.clone()]))));
            }
            let dmarc = format!("_dmarc.{}", site.host);
            add(&dmarc, None);
            for t in &z.dmarc {
                add(&dmarc, Some(RData::TXT(TXT::new(vec![t.clone()]))));
            }
        }
        data
    }

    /// Builds the reply to `req`, or `None` to stay silent.
    pub fn answer(&self, req: &Message) -> Option<Message> {
        let query = req.queries.first()?;
        let qname = query.name().to_ascii().trim_end_matches('.').to_ascii_lowercase();
        let entry = self.names.get(&qname);
        if entry.is_some_and(|e| e.silent) {
            return None;
        }
        let mut resp = Message::response(req.metadata.id, req.metadata.op_code);
        resp.metadata.recursion_desired = req.metadata.recursion_desired;
        resp.metadata.recursion_available = true;
        resp.add_query(query.clone());
        if req.edns.is_some() {
            resp.set_edns(Edns::new());
        }
        let Some(entry) = entry else {
            resp.metadata.response_code = ResponseCode::NXDomain;
            return Some(resp);
        };
        resp.metadata.authentic_data = entry.validated;
        let owner = query.name().clone();
        let mut any = false;
        for rdata in entry.records.iter().filter(|r| r.record_type() == query.query_type()) {
            resp.add_answer(Record::from_rdata(owner.clone(), 300, rdata.clone()));
            any = true;
        }
        if any && entry.signed {
            let rrsig = RData::Unknown {
                code: RecordType::RRSIG,
                rdata: NULL::with(vec![0; 18]),
            };
            resp.add_answer(Record::from_rdata(owner, 300, rrsig));
        }
        Some(resp)
    }
}

pub async fn run_dns(socket: UdpSocket, data: Arc<DnsZoneData>) {
    let mut buf = vec![0u8; 4096];
    while let Ok((n, peer)) = socket.recv_from(&mut buf).await {
        data.queries.fetch_add(1, Ordering::SeqCst);
        let Ok(req) = Message::from_vec(&buf[..n]) else { continue };
        if let Some(resp) = data.answer(&req) {
            if let Ok(bytes) = resp.to_vec() {
                let _ = socket.send_to(&bytes, peer).await;
            }
        }
    }
}
