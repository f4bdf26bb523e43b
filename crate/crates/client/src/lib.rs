//! Adapter for the measurement platform and the proxy service: builds
//! requests, polls results, and writes the ingest file formats. The replay
//! transport makes the whole toolkit runnable with zero network access.

#![forbid(unsafe_code)]

mod proxy;
mod transport;

pub use proxy::{build_proxy_url, Passphrase, ProxyHandle};
pub use transport::{
    create_measurement, fetch_all, fetch_results, HttpBackend, HttpResponse, LiveTransport,
    ReplayTransport, ReqwestBackend, RetryPolicy, Transport,
};

use locaudit_core::model::{Ascp, CountryCode};
use thiserror::Error;

/// Client-side failures.
#[derive(Debug, Error)]
pub enum ClientError {
    #[error("probe list must be non-empty")]
    EmptyProbes,
    #[error("packets must be >= 1, got {0}")]
    InvalidPackets(u32),
    #[error("invalid port: {0}")]
    InvalidPort(u32),
    #[error("quota exceeded: {0}")]
    QuotaExceeded(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("measurement not found: {0}")]
    NotFound(String),
    #[error("results not ready for {id}; retry after {retry_after_ms} ms")]
    Incomplete { id: String, retry_after_ms: u64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Measurement protocol; the campaigns are ICMP traceroutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Icmp,
}

/// A platform probe selected for a measurement.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ProbeRef {
    pub id: String,
    pub asn: u32,
    pub country: CountryCode,
}

/// One traceroute campaign request.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MeasurementSpec {
    pub targets: Vec<String>,
    pub probes: Vec<ProbeRef>,
    pub packets: u32,
    pub timeout_ms: u32,
    pub protocol: Protocol,
}

impl MeasurementSpec {
    /// Spec with the campaign defaults: 3 packets per traceroute, 4000 ms
    /// timeout, ICMP.
    pub fn new(targets: Vec<String>, probes: Vec<ProbeRef>) -> Result<Self, ClientError> {
        Self::with_options(targets, probes, 3, 4000)
    }

    pub fn with_options(
        targets: Vec<String>,
        probes: Vec<ProbeRef>,
        packets: u32,
        timeout_ms: u32,
    ) -> Result<Self, ClientError> {
        if probes.is_empty() {
            return Err(ClientError::EmptyProbes);
        }
        if packets < 1 {
            return Err(ClientError::InvalidPackets(packets));
        }
        Ok(MeasurementSpec {
            targets,
            probes,
            packets,
            timeout_ms,
            protocol: Protocol::Icmp,
        })
    }
}

/// Connection state of an available probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStatus {
    Connected,
    Disconnected,
    Abandoned,
}

/// A probe as listed by the platform archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeInfo {
    pub id: String,
    pub ascp: Ascp,
    pub status: ProbeStatus,
}

/// Picks measurement probes: connected ones only, at most `per_country`
/// probes in each target country, preserving archive order.
pub fn select_probes(available: &[ProbeInfo], per_country: usize) -> Vec<ProbeRef> {
    let mut taken: std::collections::HashMap<CountryCode, usize> = std::collections::HashMap::new();
    available
        .iter()
        .filter(|p| p.status == ProbeStatus::Connected)
        .filter(|p| {
            let n = taken.entry(p.ascp.country).or_insert(0);
            if *n < per_country {
                *n += 1;
                true
            } else {
                false
            }
        })
        .map(|p| ProbeRef {
            id: p.id.clone(),
            asn: p.ascp.asn,
            country: p.ascp.country,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use locaudit_core::model::CountryCode;

    fn probe(id: &str, asn: u32, cc: &str, status: ProbeStatus) -> ProbeInfo {
        ProbeInfo {
            id: id.into(),
            ascp: Ascp::new(asn, CountryCode::parse(cc).unwrap()).unwrap(),
            status,
        }
    }

    #[test]
    fn spec_defaults_and_preconditions() {
        let probes = vec![ProbeRef {
            id: "p1".into(),
            asn: 3320,
            country: CountryCode::parse("DE").unwrap(),
        }];
        let spec = MeasurementSpec::new(vec!["cdn.example.net".into()], probes).unwrap();
        assert_eq!(spec.packets, 3);
        assert_eq!(spec.timeout_ms, 4000);
        assert!(matches!(
            MeasurementSpec::new(vec!["t".into()], vec![]),
            Err(ClientError::EmptyProbes)
        ));
    }

    #[test]
    fn probe_selection_caps_per_country_and_drops_inactive() {
        let available = vec![
            probe("p1", 1, "DE", ProbeStatus::Connected),
            probe("p2", 2, "DE", ProbeStatus::Connected),
            probe("p3", 3, "DE", ProbeStatus::Disconnected),
            probe("p4", 4, "DE", ProbeStatus::Connected),
            probe("p5", 5, "DE", ProbeStatus::Connected),
            probe("p6", 6, "FR", ProbeStatus::Connected),
            probe("p7", 7, "FR", ProbeStatus::Abandoned),
        ];
        let selected = select_probes(&available, 3);
        let ids: Vec<&str> = selected.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["p1", "p2", "p4", "p6"]);
    }
}
