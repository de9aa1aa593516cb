//! Tracker filter lists in the Adblock filter grammar.
//!
//! Only network rules are kept. Supported syntax:
//!
//! - `! comment` and `[Adblock Plus 2.0]` headers (skipped)
//! - element hiding rules containing `##`, `#@#`, `#?#` or `#$#` (skipped)
//! - `||host^` domain anchors, `|` start and end anchors
//! - `@@` exception prefix
//! - `*` wildcard and `^` separator placeholder
//! - `$options`, which are stripped; the rule is dropped when an option
//!   restricts it to first-party requests (`~third-party`, `first-party`,
//!   `1p`) or disables it (`badfilter`)
//!
//! Regex rules (`/.../`) and other dialect extensions are skipped and
//! counted, never fatal.
//!
//! Host characters compare case-insensitively, everything after the host
//! compares case-sensitively.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Token {
    Literal(String),
    Wildcard,
    Separator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anchor {
    None,
    /// `|` at the start of the pattern.
    Start,
    /// `||`: start of the host or after any dot inside it.
    Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    DomainAnchor,
    Plain,
    Exception,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRule {
    pub raw: String,
    pub kind: RuleKind,
    pub anchor: Anchor,
    pub end_anchor: bool,
    pub pattern_tokens: Vec<Token>,
    /// Option text after `$`, kept verbatim for round-tripping.
    pub options: Option<String>,
    pub source_line: usize,
    /// Lowercased longest literal, used to reject candidates cheaply.
    #[serde(skip)]
    needle: String,
}

impl FilterRule {
    pub fn is_exception(&self) -> bool {
        self.kind == RuleKind::Exception
    }

    /// Rebuilds the rule text from its parsed parts.
    pub fn to_rule_text(&self) -> String {
        let mut out = String::new();
        if self.is_exception() {
            out.push_str("@@");
        }
        match self.anchor {
            Anchor::None => {}
            Anchor::Start => out.push('|'),
            Anchor::Domain => out.push_str("||"),
        }
        for t in &self.pattern_tokens {
            match t {
                Token::Literal(s) => out.push_str(s),
                Token::Wildcard => out.push('*'),
                Token::Separator => out.push('^'),
            }
        }
        if self.end_anchor {
            out.push('|');
        }
        if let Some(opts) = &self.options {
            out.push('$');
            out.push_str(opts);
        }
        out
    }

    /// The host a `||host...` rule is pinned to, if the literal names a
    /// complete host (followed by a separator, a path, a port or the end
    /// anchor). Partial hosts such as `||ads` are not indexable.
    pub fn anchor_host(&self) -> Option<String> {
        if self.anchor != Anchor::Domain {
            return None;
        }
        let Some(Token::Literal(first)) = self.pattern_tokens.first() else {
            return None;
        };
        let host_len = first
            .bytes()
            .take_while(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'-' | b'_'))
            .count();
        if host_len == 0 {
            return None;
        }
        let host = &first[..host_len];
        if host.starts_with('.') || host.ends_with('.') {
            return None;
        }
        let complete = if host_len < first.len() {
            matches!(first.as_bytes()[host_len], b'/' | b':' | b'?')
        } else {
            match self.pattern_tokens.get(1) {
                Some(Token::Separator) => true,
                None => self.end_anchor,
                _ => false,
            }
        };
        complete.then(|| host.to_ascii_lowercase())
    }

    fn matches_text(&self, text: &[u8], host: Range<usize>) -> bool {
        let n = text.len();
        let mut cur = vec![false; n + 1];
        match self.anchor {
            Anchor::None => cur.iter_mut().for_each(|c| *c = true),
            Anchor::Start => cur[0] = true,
            Anchor::Domain => {
                if host.is_empty() {
                    return false;
                }
                cur[host.start] = true;
                for i in host.clone() {
                    if text[i] == b'.' && i + 1 < host.end {
                        cur[i + 1] = true;
                    }
                }
            }
        }
        for token in &self.pattern_tokens {
            let mut next = vec![false; n + 1];
            let mut any = false;
            match token {
                Token::Literal(lit) => {
                    let lit = lit.as_bytes();
                    for p in (0..=n).filter(|&p| cur[p]) {
                        if p + lit.len() <= n
                            && lit
                                .iter()
                                .enumerate()
                                .all(|(k, &c)| byte_eq(c, text[p + k], host.contains(&(p + k))))
                        {
                            next[p + lit.len()] = true;
                            any = true;
                        }
                    }
                }
                Token::Separator => {
                    for p in (0..=n).filter(|&p| cur[p]) {
                        if p == n {
                            next[n] = true;
                            any = true;
                        } else if is_separator(text[p]) {
                            next[p + 1] = true;
                            any = true;
                        }
                    }
                }
                Token::Wildcard => {
                    if let Some(first) = cur.iter().position(|&c| c) {
                        next[first..].iter_mut().for_each(|c| *c = true);
                        any = true;
                    }
                }
            }
            if !any {
                return false;
            }
            cur = next;
        }
        if self.end_anchor {
            cur[n]
        } else {
            cur.iter().any(|&c| c)
        }
    }
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

fn byte_eq(pattern: u8, text: u8, in_host: bool) -> bool {
    if in_host {
        pattern.eq_ignore_ascii_case(&text)
    } else {
        pattern == text
    }
}

/// `^` matches anything except letters, digits, `_`, `-`, `.` and `%`.
pub fn is_separator(b: u8) -> bool {
    !(b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b'%'))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSet {
    rules: Vec<FilterRule>,
    domain_index: HashMap<String, Vec<usize>>,
    unindexed: Vec<usize>,
}

/// Result of parsing a filter list: the rules plus how many non-blank
/// lines were skipped (comments, headers, cosmetic and unsupported rules).
#[derive(Debug, Clone, Default)]
pub struct ParsedFilterList {
    pub filters: FilterSet,
    pub skipped: usize,
}

const DROPPING_OPTIONS: [&str; 4] = ["~third-party", "first-party", "1p", "badfilter"];

enum LineOutcome {
    Blank,
    Skip,
    Rule(FilterRule),
}

fn parse_line(line: &str, source_line: usize) -> LineOutcome {
    let raw = line.trim();
    if raw.is_empty() {
        return LineOutcome::Blank;
    }
    if raw.starts_with('!') || (raw.starts_with('[') && raw.ends_with(']')) {
        return LineOutcome::Skip;
    }
    if ["##", "#@#", "#?#", "#$#"].iter().any(|m| raw.contains(m)) {
        return LineOutcome::Skip;
    }
    let (exception, body) = match raw.strip_prefix("@@") {
        Some(rest) => (true, rest),
        None => (false, raw),
    };
    let (pattern, options) = split_options(body);
    if let Some(opts) = options {
        if opts.is_empty() {
            return LineOutcome::Skip;
        }
        if opts
            .split(',')
            .any(|o| DROPPING_OPTIONS.contains(&o.trim()))
        {
            return LineOutcome::Skip;
        }
    }
    let (anchor, rest) = if let Some(r) = pattern.strip_prefix("||") {
        (Anchor::Domain, r)
    } else if let Some(r) = pattern.strip_prefix('|') {
        (Anchor::Start, r)
    } else {
        (Anchor::None, pattern)
    };
    let (end_anchor, rest) = match rest.strip_suffix('|') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    if rest.is_empty()
        || rest.contains('|')
        || rest.chars().any(char::is_whitespace)
        || (anchor == Anchor::None && rest.len() >= 2 && rest.starts_with('/') && rest.ends_with('/'))
    {
        return LineOutcome::Skip;
    }

    let mut tokens = Vec::new();
    let mut lit = String::new();
    for c in rest.chars() {
        match c {
            '*' | '^' => {
                if !lit.is_empty() {
                    tokens.push(Token::Literal(std::mem::take(&mut lit)));
                }
                tokens.push(if c == '*' { Token::Wildcard } else { Token::Separator });
            }
            other => lit.push(other),
        }
    }
    if !lit.is_empty() {
        tokens.push(Token::Literal(lit));
    }
    let needle = tokens
        .iter()
        .filter_map(|t| match t {
            Token::Literal(s) => Some(s),
            _ => None,
        })
        .max_by_key(|s| s.len())
        .map(|s| s.to_ascii_lowercase())
        .unwrap_or_default();

    let kind = if exception {
        RuleKind::Exception
    } else if anchor == Anchor::Domain {
        RuleKind::DomainAnchor
    } else {
        RuleKind::Plain
    };
    LineOutcome::Rule(FilterRule {
        raw: raw.to_string(),
        kind,
        anchor,
        end_anchor,
        pattern_tokens: tokens,
        options: options.map(str::to_string),
        source_line,
        needle,
    })
}

/// Splits `pattern$options` at the last `$` when what follows looks like
/// an option list.
fn split_options(body: &str) -> (&str, Option<&str>) {
    if let Some(idx) = body.rfind('$') {
        let opts = &body[idx + 1..];
        let option_like = opts
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"_~,=.|*-/:".contains(&b));
        if option_like {
            return (&body[..idx], Some(opts));
        }
    }
    (body, None)
}

/// Parses a multi-line filter list. Never fails.
pub fn parse_filter_list(text: &str) -> ParsedFilterList {
    let mut rules = Vec::new();
    let mut skipped = 0;
    for (idx, line) in text.lines().enumerate() {
        match parse_line(line, idx + 1) {
            LineOutcome::Blank => {}
            LineOutcome::Skip => skipped += 1,
            LineOutcome::Rule(rule) => rules.push(rule),
        }
    }
    ParsedFilterList {
        filters: FilterSet::from_rules(rules),
        skipped,
    }
}

impl FilterSet {
    pub fn from_rules(rules: Vec<FilterRule>) -> Self {
        let mut domain_index: HashMap<String, Vec<usize>> = HashMap::new();
        let mut unindexed = Vec::new();
        for (i, rule) in rules.iter().enumerate() {
            match rule.anchor_host() {
                Some(host) => domain_index.entry(host).or_default().push(i),
                None => unindexed.push(i),
            }
        }
        FilterSet {
            rules,
            domain_index,
            unindexed,
        }
    }

    pub fn rules(&self) -> &[FilterRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rule indices stored under `host` in the domain index.
    pub fn indexed_under(&self, host: &str) -> &[usize] {
        self.domain_index.get(host).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Parses `url` and tests it against the set.
    pub fn matches(&self, url: &str) -> Result<bool> {
        let parsed = Url::parse(url).map_err(|e| Error::MalformedUrl(format!("{url}: {e}")))?;
        Ok(self.matches_url(&parsed))
    }

    /// True iff a blocking rule matches and no exception rule does.
    pub fn matches_url(&self, url: &Url) -> bool {
        let host = url.host_str().unwrap_or_default().to_ascii_lowercase();
        let mut candidates: Vec<usize> = self.unindexed.clone();
        let mut suffix = host.as_str();
        loop {
            if let Some(ids) = self.domain_index.get(suffix) {
                candidates.extend_from_slice(ids);
            }
            match suffix.find('.') {
                Some(dot) => suffix = &suffix[dot + 1..],
                None => break,
            }
        }
        self.evaluate(url, candidates.into_iter())
    }

    /// Same decision as [`matches_url`](Self::matches_url) without the
    /// domain index.
    pub fn matches_linear(&self, url: &Url) -> bool {
        self.evaluate(url, 0..self.rules.len())
    }

    fn evaluate(&self, url: &Url, candidates: impl Iterator<Item = usize>) -> bool {
        let text = url.as_str();
        let lower = text.to_ascii_lowercase();
        let host = host_range(url);
        let mut blocked = false;
        for i in candidates {
            let rule = &self.rules[i];
            if (blocked && !rule.is_exception()) || !lower.contains(&rule.needle) {
                continue;
            }
            if rule.matches_text(text.as_bytes(), host.clone()) {
                if rule.is_exception() {
                    return false;
                }
                blocked = true;
            }
        }
        blocked
    }
}

fn host_range(url: &Url) -> Range<usize> {
    use url::Position;
    let start = url[..Position::BeforeHost].len();
    let end = url[..Position::AfterHost].len();
    start..end
}

/// Hosts whose request URL matched the filter set, deduplicated and sorted.
pub fn classify_hosts<'a>(fs: &FilterSet, request_urls: impl IntoIterator<Item = &'a Url>) -> BTreeSet<String> {
    request_urls
        .into_iter()
        .filter(|u| fs.matches_url(u))
        .filter_map(|u| u.host_str().map(str::to_ascii_lowercase))
        .collect()
}

/// Small default tracker list used when no list is configured.
pub const BUNDLED_FILTER_LIST: &str = include_str!("../data/trackers.txt");
