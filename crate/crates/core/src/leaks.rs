//! Well-known leak paths and the content signatures that confirm them.

use crate::facts::LeakFinding;

/// Maximum body bytes read per leak probe.
pub const LEAK_BODY_LIMIT: usize = 64 * 1024;

/// Probed paths with the check each one feeds, in probe order.
pub const LEAK_PATHS: [(&str, &str); 7] = [
    ("/server-status/", "leak_server_status"),
    ("/server-info/", "leak_server_info"),
    ("/test.php", "leak_test_php"),
    ("/phpinfo.php", "leak_phpinfo_php"),
    ("/.git/HEAD", "leak_git"),
    ("/.svn/entries", "leak_svn"),
    ("/core", "leak_core"),
];

pub fn check_for_path(path: &str) -> Option<&'static str> {
    LEAK_PATHS.iter().find(|(p, _)| *p == path).map(|(_, c)| *c)
}

fn contains(body: &[u8], needle: &str) -> bool {
    body.windows(needle.len()).any(|w| w == needle.as_bytes())
}

fn svn_entries(body: &[u8]) -> bool {
    let text = String::from_utf8_lossy(body);
    let first = text.lines().next().unwrap_or("").trim();
    // Pre-1.7 working copies: a format number on the first line, or the
    // XML format of SVN 1.3 and older.
    (!first.is_empty() && first.len() <= 3 && first.bytes().all(|b| b.is_ascii_digit())
        && text.lines().nth(1).is_some())
        || text.trim_start().starts_with("<?xml") && text.contains("<wc-entries")
}

/// Returns the matched signature name when `body` looks like the leaked
/// resource expected at `path`.
pub fn match_signature(path: &str, body: &[u8]) -> Option<&'static str> {
    match path {
        "/server-status/" => contains(body, "Apache Server Status").then_some("Apache Server Status"),
        "/server-info/" => {
            contains(body, "Apache Server Information").then_some("Apache Server Information")
        }
        "/test.php" | "/phpinfo.php" => {
            if contains(body, "phpinfo()") {
                Some("phpinfo()")
            } else if contains(body, "PHP Version") {
                Some("PHP Version")
            } else {
                None
            }
        }
        "/.git/HEAD" => {
            let start = body.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(body.len());
            body[start..].starts_with(b"ref: refs/").then_some("ref: refs/")
        }
        "/.svn/entries" => svn_entries(body).then_some("svn entries"),
        "/core" => {
            if body.starts_with(b"\x7fELF") {
                Some("ELF")
            } else if body.starts_with(&[0xcf, 0xfa, 0xed, 0xfe]) || body.starts_with(&[0xce, 0xfa, 0xed, 0xfe]) {
                Some("Mach-O")
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Builds a finding from a probe response. A 2xx status alone never
/// counts as a detection.
pub fn classify_probe(path: &str, status: u16, body: &[u8]) -> LeakFinding {
    let body = &body[..body.len().min(LEAK_BODY_LIMIT)];
    let signature = if (200..300).contains(&status) {
        match_signature(path, body)
    } else {
        None
    };
    LeakFinding {
        path: path.to_string(),
        detected: signature.is_some(),
        signature: signature.map(str::to_string),
        http_status: status,
    }
}

/// Finding for a probe that never got a response.
pub fn failed_probe(path: &str) -> LeakFinding {
    LeakFinding {
        path: path.to_string(),
        detected: false,
        signature: None,
        http_status: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_alone_is_not_enough() {
        assert!(!classify_probe("/test.php", 200, b"").detected);
        assert!(!classify_probe("/server-status/", 403, b"Apache Server Status").detected);
        assert!(classify_probe("/server-status/", 200, b"<h1>Apache Server Status for x</h1>").detected);
    }

    #[test]
    fn path_specific_signatures() {
        assert_eq!(match_signature("/.git/HEAD", b"ref: refs/heads/main\n"), Some("ref: refs/"));
        assert_eq!(match_signature("/.git/HEAD", b"<html>ref: refs/</html>"), None);
        assert_eq!(match_signature("/.svn/entries", b"10\n\ndir\n0\n"), Some("svn entries"));
        assert_eq!(match_signature("/.svn/entries", b"<html>not found</html>"), None);
        assert_eq!(match_signature("/core", b"\x7fELF\x02\x01\x01"), Some("ELF"));
        assert_eq!(match_signature("/core", b"<html>"), None);
        assert_eq!(match_signature("/phpinfo.php", b"<title>phpinfo()</title>"), Some("phpinfo()"));
        assert_eq!(match_signature("/test.php", b"PHP Version 7.4.3"), Some("PHP Version"));
    }

    #[test]
    fn every_path_maps_to_a_check() {
        for (path, check) in LEAK_PATHS {
            assert_eq!(check_for_path(path), Some(check));
        }
    }
}
