use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScanError {
    #[error("timed out")]
    Timeout,
    #[error("more than {0} redirects")]
    TooManyRedirects(usize),
    #[error("connection failed: {0}")]
    ConnectionFailed(String),
    #[error("response body larger than {0} bytes")]
    BodyTooLarge(usize),
    #[error("TLS: {0}")]
    Tls(String),
    #[error("HTTP: {0}")]
    Http(String),
    #[error("DNS: {0}")]
    Dns(String),
}

impl ScanError {
    pub fn kind(&self) -> &'static str {
        match self {
            ScanError::Timeout => "timeout",
            ScanError::TooManyRedirects(_) => "too_many_redirects",
            ScanError::ConnectionFailed(_) => "connection_failed",
            ScanError::BodyTooLarge(_) => "body_too_large",
            ScanError::Tls(_) => "tls",
            ScanError::Http(_) => "http",
            ScanError::Dns(_) => "dns",
        }
    }

    /// True for failures that mean the host could not be reached at all.
    pub fn is_unreachable(&self) -> bool {
        matches!(self, ScanError::Timeout | ScanError::ConnectionFailed(_))
    }
}
