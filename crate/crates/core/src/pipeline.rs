//! Stage orchestration: geolocation partition, source- and destination-based
//! filtering, rDNS filtering, the final sample, and the validation scorer.
//!
//! Every stage consumes the candidate map and returns survivors plus the
//! eliminated candidates, so funnel conservation is structural: nothing is
//! ever silently dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::IpAddr;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{GeodesyError, ValidationError};
use crate::geodesy::{
    haversine_km, sol_feasible, source_latency_gate, GateVerdict, LatencyThresholdConfig,
    SolConfig, SolVerdict,
};
use crate::ingest::{CrawlLog, RdnsRecord, Stage, TracerouteRecord};
use crate::latency::{extract, stage_policy, PolicyDecision};
use crate::model::{
    is_adequate, Adequacy, AdequacyLedger, Ascp, CountryCode, DomainName, GeoRecord, Granularity,
};
use crate::rdns::{extract_geohint, rdns_stage, GeohintDb, RdnsVerdict};

/// One audit-trail entry on a candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageEvent {
    pub stage: &'static str,
    pub verdict: String,
    pub evidence: String,
}

/// A server IP flowing through the pipeline, accumulating stage verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerCandidate {
    pub ip: IpAddr,
    pub hostname: Option<DomainName>,
    pub ascp_sources: BTreeSet<Ascp>,
    pub initial_sites: BTreeSet<DomainName>,
    pub inferred_country: Option<CountryCode>,
    pub stage_trace: Vec<StageEvent>,
}

impl ServerCandidate {
    pub fn new(ip: IpAddr) -> Self {
        ServerCandidate {
            ip,
            hostname: None,
            ascp_sources: BTreeSet::new(),
            initial_sites: BTreeSet::new(),
            inferred_country: None,
            stage_trace: Vec::new(),
        }
    }

    fn record(&mut self, stage: &'static str, verdict: impl Into<String>, evidence: impl Into<String>) {
        self.stage_trace.push(StageEvent {
            stage,
            verdict: verdict.into(),
            evidence: evidence.into(),
        });
    }
}

/// Groups source traceroutes by destination IP into the initial candidate set.
pub fn candidates_from_traces(traces: &[TracerouteRecord]) -> BTreeMap<IpAddr, ServerCandidate> {
    let mut candidates: BTreeMap<IpAddr, ServerCandidate> = BTreeMap::new();
    for tr in traces {
        let cand = candidates
            .entry(tr.dst_ip)
            .or_insert_with(|| ServerCandidate::new(tr.dst_ip));
        cand.ascp_sources.insert(tr.source);
    }
    candidates
}

/// Outcome of the geolocation partition.
#[derive(Debug)]
pub struct GeodbStage {
    pub kept: BTreeMap<IpAddr, ServerCandidate>,
    pub adequate: Vec<ServerCandidate>,
    pub unknown: Vec<ServerCandidate>,
}

impl GeodbStage {
    pub fn input(&self) -> u64 {
        (self.kept.len() + self.adequate.len() + self.unknown.len()) as u64
    }
}

/// Keeps candidates whose geolocated country is non-adequate at the audit
/// date. Adequate candidates and candidates without a country-level
/// inference are set aside with their verdicts recorded, not failed.
pub fn stage_geodb(
    candidates: BTreeMap<IpAddr, ServerCandidate>,
    geodb: &HashMap<IpAddr, GeoRecord>,
    ledger: &AdequacyLedger,
    date: NaiveDate,
) -> GeodbStage {
    let mut kept = BTreeMap::new();
    let mut adequate = Vec::new();
    let mut unknown = Vec::new();
    for (ip, mut cand) in candidates {
        match geodb.get(&ip).and_then(|rec| rec.country) {
            Some(country) => match is_adequate(country, ledger, date) {
                Adequacy::NonAdequate => {
                    cand.inferred_country = Some(country);
                    cand.record("geodb", "kept", format!("non-adequate {country}"));
                    kept.insert(ip, cand);
                }
                Adequacy::Adequate => {
                    cand.record("geodb", "set-aside", format!("adequate {country}"));
                    adequate.push(cand);
                }
            },
            None => {
                cand.record("geodb", "set-aside", "unknown country");
                unknown.push(cand);
            }
        }
    }
    GeodbStage {
        kept,
        adequate,
        unknown,
    }
}

/// Per-trace verdict in the source stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTraceVerdict {
    /// Unresponsive last hop or first-hop latency above the last hop.
    ExcludedPolicy,
    /// Usable latency below the destination's gate.
    BelowGate,
    Passed,
}

/// Source-stage result: per-trace verdicts over the joined traces, funnel
/// counts, and the candidate split.
#[derive(Debug)]
pub struct SourceStage {
    /// (index into the input trace slice, verdict, effective latency if usable)
    pub verdicts: Vec<(usize, SourceTraceVerdict, Option<f64>)>,
    pub input: u64,
    pub excluded_policy: u64,
    pub below_gate: u64,
    pub passed: u64,
    pub survivors: BTreeMap<IpAddr, ServerCandidate>,
    pub eliminated: Vec<ServerCandidate>,
}

/// Runs latency extraction, the source-stage policy, and the regional
/// latency gate over every traceroute that targets a kept candidate. A
/// candidate survives when at least one of its traceroutes passes the gate.
pub fn stage_source(
    traces: &[TracerouteRecord],
    candidates: BTreeMap<IpAddr, ServerCandidate>,
    thresholds: &LatencyThresholdConfig,
) -> Result<SourceStage, GeodesyError> {
    let mut candidates = candidates;
    let mut verdicts = Vec::new();
    let mut excluded_policy = 0u64;
    let mut below_gate = 0u64;
    let mut passed = 0u64;
    let mut passing_ips: BTreeSet<IpAddr> = BTreeSet::new();

    for (idx, tr) in traces.iter().enumerate() {
        let Some(cand) = candidates.get(&tr.dst_ip) else {
            continue; // not a kept candidate: partitioned out before this stage
        };
        let dest_country = cand
            .inferred_country
            .expect("kept candidates always carry a country");
        let extraction = extract(tr);
        let verdict = match stage_policy(&extraction, Stage::SourceBased) {
            PolicyDecision::Exclude(_) => {
                excluded_policy += 1;
                (idx, SourceTraceVerdict::ExcludedPolicy, None)
            }
            PolicyDecision::Use { effective_ms, .. } => {
                match source_latency_gate(effective_ms, dest_country, thresholds)? {
                    GateVerdict::Candidate => {
                        passed += 1;
                        passing_ips.insert(tr.dst_ip);
                        (idx, SourceTraceVerdict::Passed, Some(effective_ms))
                    }
                    GateVerdict::ExcludedTooClose => {
                        below_gate += 1;
                        (idx, SourceTraceVerdict::BelowGate, Some(effective_ms))
                    }
                }
            }
        };
        verdicts.push(verdict);
    }

    let mut survivors = BTreeMap::new();
    let mut eliminated = Vec::new();
    for (ip, mut cand) in candidates.split_off(&ip_zero()) {
        if passing_ips.contains(&ip) {
            cand.record("source", "kept", "at least one traceroute passed the gate");
            survivors.insert(ip, cand);
        } else {
            cand.record("source", "excluded", "no traceroute passed the gate");
            eliminated.push(cand);
        }
    }

    Ok(SourceStage {
        input: verdicts.len() as u64,
        excluded_policy,
        below_gate,
        passed,
        verdicts,
        survivors,
        eliminated,
    })
}

fn ip_zero() -> IpAddr {
    IpAddr::V4(std::net::Ipv4Addr::UNSPECIFIED)
}

/// Per-measurement verdict in the destination stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DestTraceVerdict {
    ExcludedUnresponsive,
    /// Either endpoint lacks city-level coordinates.
    ExcludedGranularity,
    SolDiscarded,
    Passed,
}

/// Destination-stage result.
#[derive(Debug)]
pub struct DestStage {
    pub verdicts: Vec<(usize, DestTraceVerdict, Option<f64>)>,
    pub input: u64,
    pub excluded_unresponsive: u64,
    pub excluded_granularity: u64,
    pub sol_discarded: u64,
    pub passed: u64,
    pub survivors: BTreeMap<IpAddr, ServerCandidate>,
    /// Candidates with no destination measurement at all: set aside, they
    /// cannot be confirmed and never reach the final sample.
    pub not_measured: Vec<ServerCandidate>,
    pub eliminated: Vec<ServerCandidate>,
}

/// Applies the destination-stage latency policy, the granularity
/// requirement, and the speed-of-light constraint per measurement. A
/// candidate survives when at least one of its measurements passes.
pub fn stage_destination(
    traces: &[TracerouteRecord],
    candidates: BTreeMap<IpAddr, ServerCandidate>,
    geodb: &HashMap<IpAddr, GeoRecord>,
    sol: &SolConfig,
) -> DestStage {
    let mut candidates = candidates;
    let mut verdicts = Vec::new();
    let mut excluded_unresponsive = 0u64;
    let mut excluded_granularity = 0u64;
    let mut sol_discarded = 0u64;
    let mut passed = 0u64;
    let mut passing_ips: BTreeSet<IpAddr> = BTreeSet::new();
    let mut measured_ips: BTreeSet<IpAddr> = BTreeSet::new();

    for (idx, tr) in traces.iter().enumerate() {
        if !candidates.contains_key(&tr.dst_ip) {
            continue;
        }
        measured_ips.insert(tr.dst_ip);
        let extraction = extract(tr);
        let effective_ms = match stage_policy(&extraction, Stage::DestinationBased) {
            PolicyDecision::Exclude(_) => {
                excluded_unresponsive += 1;
                verdicts.push((idx, DestTraceVerdict::ExcludedUnresponsive, None));
                continue;
            }
            PolicyDecision::Use { effective_ms, .. } => effective_ms,
        };
        let server_point = geodb
            .get(&tr.dst_ip)
            .filter(|rec| rec.granularity == Granularity::City)
            .and_then(|rec| rec.point);
        let (Some(probe), Some(server)) = (tr.probe_point, server_point) else {
            excluded_granularity += 1;
            verdicts.push((idx, DestTraceVerdict::ExcludedGranularity, Some(effective_ms)));
            continue;
        };
        let distance_km = haversine_km(probe, server);
        // A zero or negative effective latency cannot bound the distance;
        // treat it as infeasible rather than erroring the batch.
        let feasible = if effective_ms > 0.0 {
            sol_feasible(distance_km, effective_ms, sol).expect("positive rtt checked")
        } else {
            SolVerdict::Infeasible
        };
        match feasible {
            SolVerdict::Infeasible => {
                sol_discarded += 1;
                verdicts.push((idx, DestTraceVerdict::SolDiscarded, Some(effective_ms)));
            }
            SolVerdict::Feasible => {
                passed += 1;
                passing_ips.insert(tr.dst_ip);
                verdicts.push((idx, DestTraceVerdict::Passed, Some(effective_ms)));
            }
        }
    }

    let mut survivors = BTreeMap::new();
    let mut not_measured = Vec::new();
    let mut eliminated = Vec::new();
    for (ip, mut cand) in candidates.split_off(&ip_zero()) {
        if passing_ips.contains(&ip) {
            cand.record("destination", "kept", "at least one feasible measurement");
            survivors.insert(ip, cand);
        } else if measured_ips.contains(&ip) {
            cand.record("destination", "excluded", "no measurement passed");
            eliminated.push(cand);
        } else {
            cand.record("destination", "set-aside", "not measured");
            not_measured.push(cand);
        }
    }

    DestStage {
        input: verdicts.len() as u64,
        excluded_unresponsive,
        excluded_granularity,
        sol_discarded,
        passed,
        verdicts,
        survivors,
        not_measured,
        eliminated,
    }
}

/// rDNS-stage result. Counts are per surviving destination measurement;
/// candidate survival is any kept measurement and no adequate hint.
#[derive(Debug)]
pub struct RdnsStage {
    pub input: u64,
    pub confirms: u64,
    pub reassigns: u64,
    pub indicates_adequate: u64,
    pub no_hostname: u64,
    pub no_geohint: u64,
    pub passed: u64,
    /// (dest-trace index, verdict) per measurement, in input order.
    pub verdicts: Vec<(usize, RdnsVerdict)>,
    pub survivors: BTreeMap<IpAddr, ServerCandidate>,
    pub eliminated: Vec<ServerCandidate>,
}

/// Inspects the rDNS hostname of each surviving measurement's last hop.
/// Adequate hints exclude the candidate; hints naming a different
/// non-adequate country reassign its inferred country.
pub fn stage_rdns(
    dest_passed: &[(usize, IpAddr)],
    candidates: BTreeMap<IpAddr, ServerCandidate>,
    rdns: &HashMap<IpAddr, RdnsRecord>,
    geohints: &GeohintDb,
    ledger: &AdequacyLedger,
    date: NaiveDate,
) -> RdnsStage {
    let mut candidates = candidates;
    let mut verdicts = Vec::new();
    let mut confirms = 0u64;
    let mut reassigns = 0u64;
    let mut indicates_adequate = 0u64;
    let mut no_hostname = 0u64;
    let mut no_geohint = 0u64;
    let mut adequate_ips: BTreeSet<IpAddr> = BTreeSet::new();
    let mut kept_ips: BTreeSet<IpAddr> = BTreeSet::new();
    let mut reassigned_to: BTreeMap<IpAddr, BTreeSet<CountryCode>> = BTreeMap::new();
    let mut hostnames: BTreeMap<IpAddr, DomainName> = BTreeMap::new();

    for &(idx, ip) in dest_passed {
        let Some(cand) = candidates.get(&ip) else {
            continue;
        };
        let candidate_country = cand
            .inferred_country
            .expect("candidates past the geodb stage carry a country");
        let hostname = rdns.get(&ip).and_then(|rec| rec.hostname.as_ref());
        if let Some(h) = hostname {
            hostnames.entry(ip).or_insert_with(|| h.clone());
        }
        let hint = extract_geohint(hostname, geohints);
        let verdict = rdns_stage(candidate_country, hint, ledger, date);
        match verdict {
            RdnsVerdict::ConfirmsCountry => {
                confirms += 1;
                kept_ips.insert(ip);
            }
            RdnsVerdict::ReassignsTo(cc) => {
                reassigns += 1;
                kept_ips.insert(ip);
                reassigned_to.entry(ip).or_default().insert(cc);
            }
            RdnsVerdict::IndicatesAdequate(_) => {
                indicates_adequate += 1;
                adequate_ips.insert(ip);
            }
            RdnsVerdict::NoHostname => {
                no_hostname += 1;
                kept_ips.insert(ip);
            }
            RdnsVerdict::NoGeohint => {
                no_geohint += 1;
                kept_ips.insert(ip);
            }
        }
        verdicts.push((idx, verdict));
    }

    let mut survivors = BTreeMap::new();
    let mut eliminated = Vec::new();
    for (ip, mut cand) in candidates.split_off(&ip_zero()) {
        if let Some(h) = hostnames.get(&ip) {
            cand.hostname = Some(h.clone());
        }
        if adequate_ips.contains(&ip) {
            cand.record("rdns", "excluded", "hostname indicates an adequate country");
            eliminated.push(cand);
        } else if kept_ips.contains(&ip) {
            if let Some(targets) = reassigned_to.get(&ip) {
                // Deterministic choice when hostnames disagree; in practice
                // one IP has one hostname and so one reassignment target.
                let cc = *targets.iter().next().expect("non-empty reassignment set");
                cand.record("rdns", "reassigned", cc.to_string());
                cand.inferred_country = Some(cc);
            } else {
                cand.record("rdns", "kept", "confirmed or no contrary evidence");
            }
            survivors.insert(ip, cand);
        } else {
            cand.record("rdns", "excluded", "no surviving measurement");
            eliminated.push(cand);
        }
    }

    RdnsStage {
        input: verdicts.len() as u64,
        confirms,
        reassigns,
        indicates_adequate,
        no_hostname,
        no_geohint,
        passed: confirms + reassigns + no_hostname + no_geohint,
        verdicts,
        survivors,
        eliminated,
    }
}

/// One occurrence of an initial site in one ASCP contacting one surviving
/// server IP.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Instance {
    pub initial_site: DomainName,
    pub ascp: Ascp,
    pub server_ip: IpAddr,
}

/// The final non-adequate sample.
#[derive(Debug)]
pub struct FinalSample {
    pub unique_ips: u64,
    pub instances: Vec<Instance>,
}

/// Joins crawls to survivors through the per-ASCP DNS resolution implied by
/// the source traceroutes (target hostname to destination IP), enumerating
/// every distinct (site, ascp, ip) triple. Output is sorted by
/// (site, asn, country, ip).
pub fn final_sample(
    survivors: &BTreeMap<IpAddr, ServerCandidate>,
    crawls: &[CrawlLog],
    source_traces: &[TracerouteRecord],
) -> FinalSample {
    let mut resolution: HashMap<(Ascp, &str), BTreeSet<IpAddr>> = HashMap::new();
    for tr in source_traces {
        if let Some(domain) = tr.target.as_domain() {
            if survivors.contains_key(&tr.dst_ip) {
                resolution
                    .entry((tr.source, domain.as_str()))
                    .or_default()
                    .insert(tr.dst_ip);
            }
        }
    }
    let mut set: BTreeSet<Instance> = BTreeSet::new();
    for crawl in crawls {
        for domain in &crawl.dns_requests {
            if let Some(ips) = resolution.get(&(crawl.ascp, domain.as_str())) {
                for &ip in ips {
                    set.insert(Instance {
                        initial_site: crawl.initial_domain.clone(),
                        ascp: crawl.ascp,
                        server_ip: ip,
                    });
                }
            }
        }
    }
    let instances: Vec<Instance> = set.into_iter().collect();
    FinalSample {
        unique_ips: instances
            .iter()
            .map(|i| i.server_ip)
            .collect::<BTreeSet<_>>()
            .len() as u64,
        instances,
    }
}

/// Confusion-matrix metrics for a validation run. Rates are `None` when
/// their denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub precision: Option<f64>,
}

/// Scores the pipeline against ground truth. A DSCP is positive when the
/// full pipeline labeled its IP non-adequate; everything discarded or
/// adequate-labeled is negative.
pub fn run_validation(
    truth: &BTreeMap<IpAddr, CountryCode>,
    final_non_adequate: &BTreeSet<IpAddr>,
    ledger: &AdequacyLedger,
    date: NaiveDate,
) -> Result<ValidationMetrics, ValidationError> {
    if truth.is_empty() {
        return Err(ValidationError::EmptyTruth);
    }
    for ip in final_non_adequate {
        if !truth.contains_key(ip) {
            return Err(ValidationError::MissingTruth(*ip));
        }
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (ip, country) in truth {
        let positive = final_non_adequate.contains(ip);
        let truly_non_adequate = is_adequate(*country, ledger, date) == Adequacy::NonAdequate;
        match (positive, truly_non_adequate) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    Ok(ValidationMetrics {
        tp,
        fp,
        tn,
        fn_,
        tpr: ratio(tp, tp + fn_),
        fnr: ratio(fn_, tp + fn_),
        precision: ratio(tp, tp + fp),
    })
}
