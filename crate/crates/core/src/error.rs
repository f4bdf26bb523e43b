//! Error types for the core crate, one enum per concern.

use chrono::NaiveDate;
use thiserror::Error;

/// Construction/validation failures for domain values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid country code: {0:?}")]
    InvalidCountryCode(String),
    #[error("invalid ASN: {0}")]
    InvalidAsn(u32),
    #[error("invalid adequacy status: {0:?}")]
    InvalidAdequacyStatus(String),
    #[error("invalid date: {0:?}")]
    InvalidDate(String),
    #[error("{country}: effective_from {from} must precede effective_until {until}")]
    InvalidDateRange {
        country: String,
        from: NaiveDate,
        until: NaiveDate,
    },
    #[error("coordinates out of range: lat {lat}, lon {lon}")]
    InvalidCoordinates { lat: f64, lon: f64 },
    #[error("geo record invariant violated: {0}")]
    GeoRecordInvariant(&'static str),
    #[error("invalid region: {0:?}")]
    InvalidRegion(String),
    #[error("invalid domain name: {0:?}")]
    InvalidDomain(String),
    #[error("ledger csv: {0}")]
    LedgerCsv(String),
}

/// Geodesic and latency-threshold failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeodesyError {
    #[error("round-trip time must be positive, got {0}")]
    NonPositiveRtt(f64),
    #[error("no latency threshold mapping for destination country {0}")]
    UnmappedDestination(String),
    #[error("threshold config: {0}")]
    Config(String),
}

/// Statistical computation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("zero total for country {0}")]
    ZeroTotal(String),
    #[error("empty input")]
    EmptyInput,
    #[error("anova needs at least two groups with n > k observations")]
    NotEnoughGroups,
}

/// First/third-party labeling failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("domain not present in the resolution fixture: {0}")]
    UnresolvedDomain(String),
    #[error("empty domain")]
    EmptyDomain,
}

/// Validation-experiment scoring failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("truth map is empty")]
    EmptyTruth,
    #[error("no ground truth for ip {0}")]
    MissingTruth(std::net::IpAddr),
}

/// Failures while orchestrating a full audit run.
#[derive(Debug, Error)]
pub enum AuditError {
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geodesy(#[from] GeodesyError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("config: {0}")]
    Config(String),
}

impl AuditError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }
}
