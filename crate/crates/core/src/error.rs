use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed URL: {0}")]
    MalformedUrl(String),

    #[error("duplicate site in list: {0}")]
    DuplicateSite(String),

    #[error("site list must contain at least one site")]
    EmptyList,

    #[error("site list has no access token hash")]
    MissingTokenHash,

    #[error("group order must name each check group exactly once: {0}")]
    InvalidGroupOrder(String),

    #[error("rating requested for an empty check group")]
    EmptyGroup,

    #[error("catalog config line {line}: {message}")]
    CatalogConfig { line: usize, message: String },

    #[error("signature file {file} line {line}: {message}")]
    Signature {
        file: &'static str,
        line: usize,
        message: String,
    },

    #[error("geo database line {line}: {message}")]
    GeoDb { line: usize, message: String },

    #[error("CSV: {0}")]
    Csv(String),
}
