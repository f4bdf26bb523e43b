//! Single effective latency per traceroute, with the stage-specific
//! exclusion rules for the source- and destination-based campaigns.

use crate::ingest::{Hop, Stage, TracerouteRecord};

/// Which hop arithmetic produced the effective latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Last-hop RTT minus first-hop RTT, discounting last-mile delay.
    DiffFirstLast,
    /// Last-hop RTT alone, used when the first hop never answered.
    LastHopOnly,
}

/// Raw extraction verdict, before any stage policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionVerdict {
    Usable,
    ExcludedUnresponsive,
    ExcludedFirstExceedsLast,
}

/// Per-traceroute latency evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyExtraction {
    pub first_hop_rtt_ms: Option<f64>,
    pub last_hop_rtt_ms: Option<f64>,
    pub effective_ms: Option<f64>,
    pub basis: Option<Basis>,
    pub verdict: ExtractionVerdict,
}

// Per-hop aggregate: minimum RTT over replies that identify their sender.
// The minimum suppresses queueing noise and is order-free over replies.
fn hop_min_rtt(hop: &Hop, required_from: Option<std::net::IpAddr>) -> Option<f64> {
    hop.replies
        .iter()
        .filter(|r| match (r.from_ip, required_from) {
            (Some(from), Some(want)) => from == want,
            (Some(_), None) => true,
            (None, _) => false,
        })
        .filter_map(|r| r.rtt_ms)
        .fold(None, |acc: Option<f64>, rtt| {
            Some(acc.map_or(rtt, |a| a.min(rtt)))
        })
}

/// Stage-agnostic extraction. The last hop must answer from the destination
/// address itself: a trace that dies at an intermediate router counts as
/// unresponsive so we never geolocate the wrong device.
pub fn extract(tr: &TracerouteRecord) -> LatencyExtraction {
    let first_hop_rtt_ms = tr
        .hops
        .iter()
        .find(|h| h.index == 1)
        .and_then(|h| hop_min_rtt(h, None));
    let last_hop_rtt_ms = tr
        .hops
        .iter()
        .rev()
        .find_map(|h| hop_min_rtt(h, Some(tr.dst_ip)));

    let Some(last) = last_hop_rtt_ms else {
        return LatencyExtraction {
            first_hop_rtt_ms,
            last_hop_rtt_ms: None,
            effective_ms: None,
            basis: None,
            verdict: ExtractionVerdict::ExcludedUnresponsive,
        };
    };
    match first_hop_rtt_ms {
        Some(first) if first > last => LatencyExtraction {
            first_hop_rtt_ms,
            last_hop_rtt_ms,
            effective_ms: None,
            basis: None,
            verdict: ExtractionVerdict::ExcludedFirstExceedsLast,
        },
        Some(first) => LatencyExtraction {
            first_hop_rtt_ms,
            last_hop_rtt_ms,
            effective_ms: Some(last - first),
            basis: Some(Basis::DiffFirstLast),
            verdict: ExtractionVerdict::Usable,
        },
        None => LatencyExtraction {
            first_hop_rtt_ms: None,
            last_hop_rtt_ms,
            effective_ms: Some(last),
            basis: Some(Basis::LastHopOnly),
            verdict: ExtractionVerdict::Usable,
        },
    }
}

/// Why a stage dropped a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcludeReason {
    Unresponsive,
    FirstExceedsLast,
}

/// Stage policy outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyDecision {
    Use { effective_ms: f64, basis: Basis },
    Exclude(ExcludeReason),
}

/// Applies the per-stage exclusion rules. The source stage drops both
/// unresponsive traces and first-exceeds-last contradictions; the
/// destination stage keeps the latter on last-hop latency, because by then
/// several independent pieces of evidence already back the inference.
pub fn stage_policy(x: &LatencyExtraction, stage: Stage) -> PolicyDecision {
    match (x.verdict, stage) {
        (ExtractionVerdict::ExcludedUnresponsive, _) => {
            PolicyDecision::Exclude(ExcludeReason::Unresponsive)
        }
        (ExtractionVerdict::ExcludedFirstExceedsLast, Stage::SourceBased) => {
            PolicyDecision::Exclude(ExcludeReason::FirstExceedsLast)
        }
        (ExtractionVerdict::ExcludedFirstExceedsLast, Stage::DestinationBased) => {
            PolicyDecision::Use {
                effective_ms: x
                    .last_hop_rtt_ms
                    .expect("first-exceeds-last always preserves the last hop"),
                basis: Basis::LastHopOnly,
            }
        }
        (ExtractionVerdict::Usable, _) => PolicyDecision::Use {
            effective_ms: x.effective_ms.expect("usable extraction has a latency"),
            basis: x.basis.expect("usable extraction has a basis"),
        },
    }
}
