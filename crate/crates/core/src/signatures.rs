//! Data-driven signature tables.
//!
//! A signatures directory holds four UTF-8 files:
//!
//! | file               | columns                                                  |
//! |--------------------|----------------------------------------------------------|
//! | `fingerprints.tsv` | `signature_id`, regex                                    |
//! | `cdn.tsv`          | cdn name, host suffix or `header:<regex>`                |
//! | `libs.tsv`         | lib name, latest version, filename regex, [banner regex] |
//! | `public_suffix.dat`| one public suffix rule per line                          |
//!
//! Blank lines and lines starting with `#` are ignored. Missing files fall
//! back to the bundled starter tables.

use std::fs;
use std::path::Path;

use regex::Regex;

use crate::error::{Error, Result};
use crate::psl::{PublicSuffixList, BUNDLED_PUBLIC_SUFFIXES};

const BUNDLED_FINGERPRINTS: &str = include_str!("../data/signatures/fingerprints.tsv");
const BUNDLED_CDN: &str = include_str!("../data/signatures/cdn.tsv");
const BUNDLED_LIBS: &str = include_str!("../data/signatures/libs.tsv");

#[derive(Debug, Clone)]
pub struct FingerprintSignature {
    pub id: String,
    pub pattern: Regex,
}

#[derive(Debug, Clone)]
pub enum CdnMatcher {
    HostSuffix(String),
    /// Matched against `name: value` header lines with lowercase names.
    Header(Regex),
}

#[derive(Debug, Clone)]
pub struct CdnSignature {
    pub name: String,
    pub matcher: CdnMatcher,
}

impl CdnSignature {
    pub fn matches_host(&self, host: &str) -> bool {
        match &self.matcher {
            CdnMatcher::HostSuffix(suffix) => {
                host == suffix
                    || (host.len() > suffix.len()
                        && host.ends_with(suffix.as_str())
                        && host.as_bytes()[host.len() - suffix.len() - 1] == b'.')
            }
            CdnMatcher::Header(_) => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LibSignature {
    pub name: String,
    pub latest: String,
    pub filename: Regex,
    pub banner: Option<Regex>,
}

#[derive(Debug, Clone)]
pub struct SignatureSet {
    pub fingerprints: Vec<FingerprintSignature>,
    pub cdns: Vec<CdnSignature>,
    pub libs: Vec<LibSignature>,
    pub public_suffixes: PublicSuffixList,
}

impl Default for SignatureSet {
    fn default() -> Self {
        Self::bundled()
    }
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn regex(file: &'static str, line: usize, src: &str) -> Result<Regex> {
    Regex::new(src).map_err(|e| Error::Signature {
        file,
        line,
        message: e.to_string(),
    })
}

pub fn parse_fingerprints(text: &str) -> Result<Vec<FingerprintSignature>> {
    const FILE: &str = "fingerprints.tsv";
    rows(text)
        .map(|(line, cols)| {
            if cols.len() != 2 || cols[0].trim().is_empty() {
                return Err(Error::Signature {
                    file: FILE,
                    line,
                    message: "expected signature_id<TAB>regex".into(),
                });
            }
            Ok(FingerprintSignature {
                id: cols[0].trim().to_string(),
                pattern: regex(FILE, line, cols[1])?,
            })
        })
        .collect()
}

pub fn parse_cdns(text: &str) -> Result<Vec<CdnSignature>> {
    const FILE: &str = "cdn.tsv";
    rows(text)
        .map(|(line, cols)| {
            if cols.len() != 2 || cols[0].trim().is_empty() || cols[1].trim().is_empty() {
                return Err(Error::Signature {
                    file: FILE,
                    line,
                    message: "expected name<TAB>host-suffix-or-header:regex".into(),
                });
            }
            let spec = cols[1].trim();
            let matcher = match spec.strip_prefix("header:") {
                Some(re) => CdnMatcher::Header(regex(FILE, line, &format!("(?i){re}"))?),
                None => CdnMatcher::HostSuffix(spec.trim_start_matches('.').to_ascii_lowercase()),
            };
            Ok(CdnSignature {
                name: cols[0].trim().to_string(),
                matcher,
            })
        })
        .collect()
}

pub fn parse_libs(text: &str) -> Result<Vec<LibSignature>> {
    const FILE: &str = "libs.tsv";
    rows(text)
        .map(|(line, cols)| {
            if !(3..=4).contains(&cols.len()) {
                return Err(Error::Signature {
                    file: FILE,
                    line,
                    message: "expected name<TAB>latest<TAB>filename-regex[<TAB>banner-regex]".into(),
                });
            }
            let filename = regex(FILE, line, cols[2])?;
            if filename.captures_len() < 2 {
                return Err(Error::Signature {
                    file: FILE,
                    line,
                    message: "filename regex needs a capture group for the version".into(),
                });
            }
            let banner = match cols.get(3).map(|s| s.trim()).filter(|s| !s.is_empty()) {
                Some(src) => Some(regex(FILE, line, src)?),
                None => None,
            };
            Ok(LibSignature {
                name: cols[0].trim().to_string(),
                latest: cols[1].trim().to_string(),
                filename,
                banner,
            })
        })
        .collect()
}

impl SignatureSet {
    pub fn bundled() -> Self {
        SignatureSet {
            fingerprints: parse_fingerprints(BUNDLED_FINGERPRINTS).expect("bundled fingerprints"),
            cdns: parse_cdns(BUNDLED_CDN).expect("bundled cdn table"),
            libs: parse_libs(BUNDLED_LIBS).expect("bundled lib table"),
            public_suffixes: PublicSuffixList::parse(BUNDLED_PUBLIC_SUFFIXES),
        }
    }

    /// Loads a signatures directory, using the bundled table for any file
    /// that does not exist.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str, fallback: &'static str| -> Result<String> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(text) => Ok(text),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(fallback.to_string()),
                Err(e) => Err(Error::Signature {
                    file: "signatures",
                    line: 0,
                    message: format!("{}: {e}", path.display()),
                }),
            }
        };
        Ok(SignatureSet {
            fingerprints: parse_fingerprints(&read("fingerprints.tsv", BUNDLED_FINGERPRINTS)?)?,
            cdns: parse_cdns(&read("cdn.tsv", BUNDLED_CDN)?)?,
            libs: parse_libs(&read("libs.tsv", BUNDLED_LIBS)?)?,
            public_suffixes: PublicSuffixList::parse(&read("public_suffix.dat", BUNDLED_PUBLIC_SUFFIXES)?),
        })
    }
}
