//! SPF and DMARC policy extraction from TXT record text.

use crate::facts::{DmarcPolicy, SpfPolicy};

fn has_version_tag(txt: &str, tag: &str) -> bool {
    let t = txt.trim_start();
    t.len() >= tag.len()
        && t[..tag.len()].eq_ignore_ascii_case(tag)
        && t[tag.len()..]
            .chars()
            .next()
            .is_none_or(|c| c.is_whitespace() || c == ';')
}

/// Picks the first `v=spf1` record and derives the policy from its `all`
/// mechanism. A record without `all` yields [`SpfPolicy::Neutral`], the
/// default result when no mechanism matches.
pub fn parse_spf<S: AsRef<str>>(txts: &[S]) -> (Option<String>, SpfPolicy) {
    let Some(record) = txts.iter().map(AsRef::as_ref).find(|t| has_version_tag(t, "v=spf1")) else {
        return (None, SpfPolicy::Absent);
    };
    let policy = record
        .split_whitespace()
        .skip(1)
        .find_map(|term| {
            let (qualifier, mech) = match term.chars().next() {
                Some(q @ ('+' | '-' | '~' | '?')) => (q, &term[1..]),
                _ => ('+', term),
            };
            mech.eq_ignore_ascii_case("all").then_some(match qualifier {
                '-' => SpfPolicy::HardFail,
                '~' => SpfPolicy::SoftFail,
                '?' => SpfPolicy::Neutral,
                _ => SpfPolicy::PassAll,
            })
        })
        .unwrap_or(SpfPolicy::Neutral);
    (Some(record.to_string()), policy)
}

/// Picks the first `v=DMARC1` record. A missing or unknown `p=` tag counts
/// as policy `none`.
pub fn parse_dmarc<S: AsRef<str>>(txts: &[S]) -> (Option<String>, DmarcPolicy) {
    let Some(record) = txts.iter().map(AsRef::as_ref).find(|t| has_version_tag(t, "v=DMARC1")) else {
        return (None, DmarcPolicy::Absent);
    };
    let policy = record
        .split(';')
        .filter_map(|tag| tag.split_once('='))
        .find(|(k, _)| k.trim() == "p")
        .map(|(_, v)| match v.trim().to_ascii_lowercase().as_str() {
            "reject" => DmarcPolicy::Reject,
            "quarantine" => DmarcPolicy::Quarantine,
            _ => DmarcPolicy::None,
        })
        .unwrap_or(DmarcPolicy::None);
    (Some(record.to_string()), policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spf_qualifiers() {
        let cases = [
            ("v=spf1 mx -all", SpfPolicy::HardFail),
            ("v=spf1 include:_spf.example ~all", SpfPolicy::SoftFail),
            ("v=spf1 ?all", SpfPolicy::Neutral),
            ("v=spf1 +all", SpfPolicy::PassAll),
            ("v=spf1 a all", SpfPolicy::PassAll),
            ("V=SPF1 MX -ALL", SpfPolicy::HardFail),
            ("v=spf1 mx", SpfPolicy::Neutral),
        ];
        for (txt, want) in cases {
            assert_eq!(parse_spf(&[txt]).1, want, "{txt}");
        }
    }

    #[test]
    fn spf_picks_first_spf_record() {
        let txts = ["google-site-verification=abc", "v=spf1 -all", "v=spf1 +all"];
        assert_eq!(parse_spf(&txts), (Some("v=spf1 -all".into()), SpfPolicy::HardFail));
        assert_eq!(parse_spf(&["v=spf10 -all"]).1, SpfPolicy::Absent);
        assert_eq!(parse_spf::<&str>(&[]).1, SpfPolicy::Absent);
    }

    #[test]
    fn dmarc_policies() {
        assert_eq!(parse_dmarc(&["v=DMARC1; p=reject; rua=mailto:a@b"]).1, DmarcPolicy::Reject);
        assert_eq!(parse_dmarc(&["v=DMARC1;p=quarantine"]).1, DmarcPolicy::Quarantine);
        assert_eq!(parse_dmarc(&["v=DMARC1; p=none"]).1, DmarcPolicy::None);
        assert_eq!(parse_dmarc(&["v=DMARC1; p=bogus"]).1, DmarcPolicy::None);
        assert_eq!(parse_dmarc(&["v=DMARC1"]).1, DmarcPolicy::None);
        assert_eq!(parse_dmarc(&["p=reject"]), (None, DmarcPolicy::Absent));
    }
}
