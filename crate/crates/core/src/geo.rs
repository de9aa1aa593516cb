//! Country lookup over a CIDR table.
//!
//! The database is a text file with one `CIDR<TAB>CC` row per line. Lookups
//! use longest-prefix match, so a /24 override inside a /8 wins.

use std::collections::{BTreeSet, HashMap};
use std::net::IpAddr;

use ipnet::IpNet;

use crate::error::{Error, Result};
use crate::facts::{GeoFacts, GeoLocation, ServerRole};

#[derive(Debug, Clone, Default)]
pub struct GeoDb {
    rows: Vec<(IpNet, String)>,
    /// (is_v6, prefix_len) -> network address -> row index.
    index: HashMap<(bool, u8), HashMap<IpAddr, usize>>,
    /// Prefix lengths present per family, longest first.
    v4_lens: Vec<u8>,
    v6_lens: Vec<u8>,
}

impl GeoDb {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::GeoDb { line: i + 1, message };
            let (cidr, cc) = line
                .split_once('\t')
                .ok_or_else(|| err("expected CIDR<TAB>country".into()))?;
            let net: IpNet = cidr.trim().parse().map_err(|e| err(format!("{cidr}: {e}")))?;
            let cc = cc.trim();
            if cc.len() != 2 || !cc.bytes().all(|b| b.is_ascii_alphabetic()) {
                return Err(err(format!("bad country code {cc:?}")));
            }
            rows.push((net.trunc(), cc.to_ascii_uppercase()));
        }
        Ok(Self::from_rows(rows))
    }

    pub fn from_rows(rows: Vec<(IpNet, String)>) -> Self {
        let mut db = GeoDb::default();
        let (mut v4, mut v6) = (BTreeSet::new(), BTreeSet::new());
        for (i, (net, _)) in rows.iter().enumerate() {
            let v6_net = matches!(net, IpNet::V6(_));
            if v6_net { &mut v6 } else { &mut v4 }.insert(net.prefix_len());
            // First row wins for duplicate networks.
            db.index
                .entry((v6_net, net.prefix_len()))
                .or_default()
                .entry(net.network())
                .or_insert(i);
        }
        db.v4_lens = v4.into_iter().rev().collect();
        db.v6_lens = v6.into_iter().rev().collect();
        db.rows = rows;
        db
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(IpNet, String)] {
        &self.rows
    }

    pub fn lookup(&self, ip: IpAddr) -> Option<&str> {
        let v6 = ip.is_ipv6();
        let lens = if v6 { &self.v6_lens } else { &self.v4_lens };
        lens.iter().find_map(|&len| {
            let net = IpNet::new(ip, len).ok()?.trunc();
            self.index
                .get(&(v6, len))?
                .get(&net.network())
                .map(|&i| self.rows[i].1.as_str())
        })
    }
}

/// Maps each distinct (role, ip) to a country; first host seen for a
/// repeated pair is kept.
pub fn geolocate(ips: &[(ServerRole, String, IpAddr)], db: &GeoDb) -> GeoFacts {
    let mut seen = BTreeSet::new();
    let locations = ips
        .iter()
        .filter(|(role, _, ip)| seen.insert((*role, *ip)))
        .map(|(role, host, ip)| GeoLocation {
            role: *role,
            host: host.clone(),
            ip: *ip,
            country_code: db.lookup(*ip).map(str::to_string),
        })
        .collect();
    GeoFacts { locations }
}
