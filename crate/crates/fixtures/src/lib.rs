//! Deterministic generators for the bundled fixture sets: the audit bundle
//! whose funnel reproduces the published stage counts, the two validation
//! testbeds, and the literal statistics tables.
//!
//! Everything here is a pure function of constants; regenerating a bundle
//! produces byte-identical files.

#![forbid(unsafe_code)]

pub mod paper;
pub mod stats_tables;
pub mod validation;

use std::net::{IpAddr, Ipv4Addr};

use chrono::{TimeZone, Utc};
use locaudit_core::ingest::{Hop, HopReply, Stage, TraceTarget, TracerouteRecord};
use locaudit_core::model::{Ascp, CountryCode, GeoPoint};

/// Degrees of latitude per kilometre on the mean-radius sphere.
pub const DEG_PER_KM: f64 = 1.0 / 111.194926644559;

pub(crate) fn cc(code: &str) -> CountryCode {
    CountryCode::parse(code).expect("fixture country codes are valid")
}

pub(crate) fn ascp(asn: u32, country: &str) -> Ascp {
    Ascp::new(asn, cc(country)).expect("fixture ascps are valid")
}

/// Fixture address plan: one /16-style block per role, indexed.
pub(crate) fn ip(block: u8, idx: usize) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(
        198,
        block,
        (idx / 250) as u8,
        (idx % 250 + 1) as u8,
    ))
}

/// Hop-level shape of a generated traceroute.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TraceShape {
    /// First and last hop both timed; effective latency = last - first.
    Diff { first_ms: f64, last_ms: f64 },
    /// First hop untimed; effective latency = last hop.
    LastOnly { last_ms: f64 },
    /// Contradictory timing: excluded at the source stage, kept on the
    /// last hop at the destination stage.
    FirstExceedsLast { first_ms: f64, last_ms: f64 },
    /// Final hop answers from a router that is not the destination.
    UnresponsiveLast,
    /// The probe produced no hops at all.
    EmptyHops,
}

pub(crate) fn build_trace(
    msm_id: String,
    source: Ascp,
    target: &str,
    dst_ip: IpAddr,
    probe: Option<GeoPoint>,
    stage: Stage,
    seq: i64,
    shape: TraceShape,
) -> TracerouteRecord {
    let first_reply = |ms: f64| Hop {
        index: 1,
        replies: vec![HopReply {
            from_ip: Some("10.0.0.1".parse().unwrap()),
            rtt_ms: Some(ms),
        }],
    };
    let last_reply = |ms: f64| Hop {
        index: 8,
        replies: vec![HopReply {
            from_ip: Some(dst_ip),
            rtt_ms: Some(ms),
        }],
    };
    let hops = match shape {
        TraceShape::Diff { first_ms, last_ms } => vec![first_reply(first_ms), last_reply(last_ms)],
        TraceShape::LastOnly { last_ms } => vec![
            Hop {
                index: 1,
                replies: vec![],
            },
            last_reply(last_ms),
        ],
        TraceShape::FirstExceedsLast { first_ms, last_ms } => {
            vec![first_reply(first_ms), last_reply(last_ms)]
        }
        TraceShape::UnresponsiveLast => vec![
            first_reply(2.0),
            Hop {
                index: 8,
                replies: vec![HopReply {
                    from_ip: Some("10.9.9.9".parse().unwrap()),
                    rtt_ms: Some(50.0),
                }],
            },
        ],
        TraceShape::EmptyHops => vec![],
    };
    TracerouteRecord {
        measurement_id: msm_id,
        source,
        probe_point: probe,
        target: TraceTarget::parse(target).expect("fixture targets parse"),
        dst_ip,
        hops,
        stage_tag: stage,
        timestamp: Utc
            .timestamp_opt(1_660_521_600 + seq, 0)
            .single()
            .expect("fixture timestamps are valid"),
    }
}

/// Writes a file, creating parent directories as needed.
pub(crate) fn write(dir: &std::path::Path, name: &str, contents: &str) -> std::io::Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)
}
