//! Full audit orchestration: runs the Fig-1 stage sequence over ingested
//! inputs and assembles every quantitative report deterministically.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::net::IpAddr;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::AuditError;
use crate::geodesy::{LatencyThresholdConfig, SolConfig};
use crate::ingest::{AsMap, Cookie, CrawlLog, OrgMap, RdnsRecord, TracerouteRecord};
use crate::labeling::{
    bundled_cookie_rules, is_google_domain, label_party, label_tracker, CookieIdRule,
    IdentifierHeuristic, PartyLabel, TrackerDb,
};
use crate::model::{
    AdequacyLedger, Ascp, CountryCode, DomainName, GeoRecord, Region,
};
use crate::pipeline::{
    candidates_from_traces, final_sample, run_validation, stage_destination, stage_geodb,
    stage_rdns, stage_source, DestTraceVerdict, Instance, SourceTraceVerdict, ValidationMetrics,
};
use crate::rdns::GeohintDb;
use crate::stats::{
    cookie_summary, country_rates_lenient, flow_matrix, latency_cdf, one_way_anova, AnovaResult,
    CookieIdStats, CountryRateRow, RateInputs,
};

/// Everything a pipeline run needs, already parsed.
pub struct AuditInputs {
    pub source_traces: Vec<TracerouteRecord>,
    pub dest_traces: Vec<TracerouteRecord>,
    pub crawls: Vec<CrawlLog>,
    pub geodb: HashMap<IpAddr, GeoRecord>,
    pub rdns: HashMap<IpAddr, RdnsRecord>,
    pub asmap: AsMap,
    pub orgmap: OrgMap,
    pub trackers: TrackerDb,
    pub cookie_rules: Vec<CookieIdRule>,
    pub geohints: GeohintDb,
    pub regions: HashMap<CountryCode, Region>,
    pub categories: HashMap<DomainName, String>,
    pub google_extra: Vec<DomainName>,
    pub ledger: AdequacyLedger,
    pub thresholds: LatencyThresholdConfig,
    pub sol: SolConfig,
    pub audit_date: NaiveDate,
}

impl AuditInputs {
    /// Inputs with every configurable table at its bundled default.
    pub fn with_defaults(audit_date: NaiveDate) -> Self {
        AuditInputs {
            source_traces: Vec::new(),
            dest_traces: Vec::new(),
            crawls: Vec::new(),
            geodb: HashMap::new(),
            rdns: HashMap::new(),
            asmap: AsMap::default(),
            orgmap: OrgMap::new(),
            trackers: TrackerDb::default(),
            cookie_rules: bundled_cookie_rules(),
            geohints: GeohintDb::bundled(),
            regions: crate::model::bundled_region_map(),
            categories: HashMap::new(),
            google_extra: Vec::new(),
            ledger: AdequacyLedger::bundled(),
            thresholds: LatencyThresholdConfig::bundled(),
            sol: SolConfig::default(),
            audit_date,
        }
    }
}

/// Funnel counts for every stage, Table-1 shaped plus the geolocation
/// partition and the final sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FunnelReport {
    pub geodb_candidates: u64,
    pub geodb_kept: u64,
    pub geodb_adequate: u64,
    pub geodb_unknown: u64,

    pub source_input: u64,
    pub source_excluded_policy: u64,
    pub source_below_gate: u64,
    pub source_passed: u64,
    pub source_unique_ips: u64,

    pub dest_input: u64,
    pub dest_excluded_unresponsive: u64,
    pub dest_excluded_granularity: u64,
    pub dest_sol_discarded: u64,
    pub dest_passed: u64,
    pub dest_unique_ips: u64,
    pub dest_not_measured: u64,

    pub rdns_input: u64,
    pub rdns_no_hostname: u64,
    pub rdns_no_geohint: u64,
    pub rdns_confirms: u64,
    pub rdns_reassigns: u64,
    pub rdns_indicates_adequate: u64,
    pub rdns_passed: u64,

    pub final_unique_ips: u64,
    pub final_instances: u64,
}

impl FunnelReport {
    /// Exact integer conservation at every stage.
    pub fn conservation_ok(&self) -> bool {
        self.geodb_candidates == self.geodb_kept + self.geodb_adequate + self.geodb_unknown
            && self.source_input
                == self.source_excluded_policy + self.source_below_gate + self.source_passed
            && self.dest_input
                == self.dest_excluded_unresponsive
                    + self.dest_excluded_granularity
                    + self.dest_sol_discarded
                    + self.dest_passed
            && self.rdns_input == self.rdns_passed + self.rdns_indicates_adequate
            && self.rdns_passed
                == self.rdns_no_hostname
                    + self.rdns_no_geohint
                    + self.rdns_confirms
                    + self.rdns_reassigns
    }
}

/// Aggregate cookie findings over the final instances.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CookieOverview {
    pub instances_total: u64,
    pub instances_with_cookies: u64,
    pub identifier_cookies: u64,
    pub identifier_sites: u64,
}

/// A first-party-labeled tracker hit needing manual ownership review.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReviewItem {
    pub initial_site: DomainName,
    pub domain: DomainName,
    pub reason: String,
}

/// Two-series empirical CDF: every measured candidate latency, and the
/// subset confirmed non-adequate by the full pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CdfSeries {
    pub candidates: Vec<(f64, f64)>,
    pub confirmed: Vec<(f64, f64)>,
}

/// Everything an audit run produces.
#[derive(Debug)]
pub struct AuditReport {
    pub funnel: FunnelReport,
    /// Final non-adequate servers with their inferred countries.
    pub final_ips: BTreeMap<IpAddr, CountryCode>,
    pub rates: Vec<CountryRateRow>,
    pub flows: BTreeMap<(CountryCode, CountryCode), u64>,
    /// Keyed by rate column; `None` when the grouped test is undefined
    /// (fewer than two populated regions).
    pub anova: BTreeMap<String, Option<AnovaResult>>,
    pub cookie_stats: BTreeMap<String, CookieIdStats>,
    pub cookie_overview: CookieOverview,
    pub categories: BTreeMap<String, u64>,
    pub cdf_source: CdfSeries,
    pub cdf_dest: CdfSeries,
    pub instances: Vec<Instance>,
    pub review_queue: Vec<ReviewItem>,
    pub google_excluded_sites: u64,
}

fn cdf_or_empty(values: &[f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        Vec::new()
    } else {
        latency_cdf(values).expect("non-empty latency series")
    }
}

/// Runs the full stage sequence and every report.
pub fn run_audit(inputs: &AuditInputs) -> Result<AuditReport, AuditError> {
    // Google-owned initial targets are excluded from the crawl set up front;
    // Google domains loaded as third parties by other sites remain visible.
    let crawls: Vec<&CrawlLog> = inputs
        .crawls
        .iter()
        .filter(|c| !is_google_domain(&c.initial_domain, &inputs.google_extra))
        .collect();
    let google_excluded_sites = (inputs.crawls.len() - crawls.len()) as u64;

    let candidates = candidates_from_traces(&inputs.source_traces);
    let geodb_stage = stage_geodb(
        candidates,
        &inputs.geodb,
        &inputs.ledger,
        inputs.audit_date,
    );
    let mut funnel = FunnelReport {
        geodb_candidates: geodb_stage.input(),
        geodb_kept: geodb_stage.kept.len() as u64,
        geodb_adequate: geodb_stage.adequate.len() as u64,
        geodb_unknown: geodb_stage.unknown.len() as u64,
        ..Default::default()
    };

    let source = stage_source(&inputs.source_traces, geodb_stage.kept, &inputs.thresholds)?;
    funnel.source_input = source.input;
    funnel.source_excluded_policy = source.excluded_policy;
    funnel.source_below_gate = source.below_gate;
    funnel.source_passed = source.passed;
    funnel.source_unique_ips = source.survivors.len() as u64;

    let dest = stage_destination(
        &inputs.dest_traces,
        source.survivors,
        &inputs.geodb,
        &inputs.sol,
    );
    funnel.dest_input = dest.input;
    funnel.dest_excluded_unresponsive = dest.excluded_unresponsive;
    funnel.dest_excluded_granularity = dest.excluded_granularity;
    funnel.dest_sol_discarded = dest.sol_discarded;
    funnel.dest_passed = dest.passed;
    funnel.dest_unique_ips = dest.survivors.len() as u64;
    funnel.dest_not_measured = dest.not_measured.len() as u64;

    let dest_passed: Vec<(usize, IpAddr)> = dest
        .verdicts
        .iter()
        .filter(|(_, v, _)| *v == DestTraceVerdict::Passed)
        .map(|(idx, _, _)| (*idx, inputs.dest_traces[*idx].dst_ip))
        .collect();
    let rdns = stage_rdns(
        &dest_passed,
        dest.survivors,
        &inputs.rdns,
        &inputs.geohints,
        &inputs.ledger,
        inputs.audit_date,
    );
    funnel.rdns_input = rdns.input;
    funnel.rdns_no_hostname = rdns.no_hostname;
    funnel.rdns_no_geohint = rdns.no_geohint;
    funnel.rdns_confirms = rdns.confirms;
    funnel.rdns_reassigns = rdns.reassigns;
    funnel.rdns_indicates_adequate = rdns.indicates_adequate;
    funnel.rdns_passed = rdns.passed;

    let owned_crawls: Vec<CrawlLog> = crawls.iter().map(|c| (*c).clone()).collect();
    let sample = final_sample(&rdns.survivors, &owned_crawls, &inputs.source_traces);
    funnel.final_unique_ips = sample.unique_ips;
    funnel.final_instances = sample.instances.len() as u64;

    let final_ips: BTreeSet<IpAddr> = rdns.survivors.keys().copied().collect();
    let final_country: BTreeMap<IpAddr, CountryCode> = rdns
        .survivors
        .iter()
        .filter_map(|(ip, c)| c.inferred_country.map(|cc| (*ip, cc)))
        .collect();

    // Per-country rate inputs from the joined source traces.
    let mut per_country: BTreeMap<CountryCode, RateInputs> = BTreeMap::new();
    let mut country_ips: BTreeMap<CountryCode, BTreeSet<IpAddr>> = BTreeMap::new();
    let mut country_final_ips: BTreeMap<CountryCode, BTreeSet<IpAddr>> = BTreeMap::new();
    let mut country_tracker_ips: BTreeMap<CountryCode, BTreeSet<IpAddr>> = BTreeMap::new();
    let mut country_final_tracker_ips: BTreeMap<CountryCode, BTreeSet<IpAddr>> = BTreeMap::new();
    let mut flows_input: Vec<(CountryCode, CountryCode)> = Vec::new();
    let mut src_candidates_latencies: Vec<f64> = Vec::new();
    let mut src_confirmed_latencies: Vec<f64> = Vec::new();

    for (idx, verdict, effective) in &source.verdicts {
        let tr = &inputs.source_traces[*idx];
        let src_country = tr.source.country;
        let entry = per_country.entry(src_country).or_default();
        entry.traceroutes_total += 1;
        country_ips.entry(src_country).or_default().insert(tr.dst_ip);
        let is_tracker = tr
            .target
            .as_domain()
            .map(|d| label_tracker(d, &inputs.trackers).is_some())
            .unwrap_or(false);
        if is_tracker {
            country_tracker_ips
                .entry(src_country)
                .or_default()
                .insert(tr.dst_ip);
        }
        if let Some(eff) = effective {
            src_candidates_latencies.push(*eff);
            if final_ips.contains(&tr.dst_ip) {
                src_confirmed_latencies.push(*eff);
            }
        }
        if *verdict == SourceTraceVerdict::Passed {
            if let Some(&dest_country) = final_country.get(&tr.dst_ip) {
                entry.traceroutes_non_adequate += 1;
                flows_input.push((src_country, dest_country));
            }
        }
        if final_ips.contains(&tr.dst_ip) {
            country_final_ips
                .entry(src_country)
                .or_default()
                .insert(tr.dst_ip);
            if is_tracker {
                country_final_tracker_ips
                    .entry(src_country)
                    .or_default()
                    .insert(tr.dst_ip);
            }
        }
    }
    for (country, entry) in per_country.iter_mut() {
        entry.ips_total = country_ips.get(country).map_or(0, |s| s.len() as u64);
        entry.ips_non_adequate = country_final_ips.get(country).map_or(0, |s| s.len() as u64);
        entry.tracker_ips_total = country_tracker_ips
            .get(country)
            .map_or(0, |s| s.len() as u64);
        entry.tracker_ips_non_adequate = country_final_tracker_ips
            .get(country)
            .map_or(0, |s| s.len() as u64);
    }
    // Zero denominators (no tracker evidence at all, or no traces from a
    // country) are tolerated here; the strict variant is for direct use.
    let rates = country_rates_lenient(&per_country);

    let flows = flow_matrix(flows_input);

    // Regional ANOVA over the rate columns.
    let mut anova = BTreeMap::new();
    for (name, col) in [
        ("pct_traceroutes", 0usize),
        ("pct_ips", 1),
        ("pct_tracker_ips", 2),
    ] {
        let mut groups: BTreeMap<Region, Vec<f64>> = BTreeMap::new();
        for row in &rates {
            if let Some(region) = inputs.regions.get(&row.country) {
                let v = match col {
                    0 => row.pct_traceroutes,
                    1 => row.pct_ips,
                    _ => row.pct_tracker_ips,
                };
                groups.entry(*region).or_default().push(v);
            }
        }
        anova.insert(name.to_string(), one_way_anova(&groups).ok());
    }

    // Instance-level cookie analysis.
    let instance_pairs: BTreeSet<(&DomainName, Ascp)> = sample
        .instances
        .iter()
        .map(|i| (&i.initial_site, i.ascp))
        .collect();
    let mut instance_cookies: Vec<Cookie> = Vec::new();
    let mut pairs_with_cookies: BTreeSet<(&DomainName, Ascp)> = BTreeSet::new();
    let heuristic = IdentifierHeuristic::default();
    let mut identifier_cookies = 0u64;
    let mut identifier_sites: BTreeSet<&DomainName> = BTreeSet::new();
    for crawl in &crawls {
        let key = (&crawl.initial_domain, crawl.ascp);
        if !instance_pairs.contains(&key) {
            continue;
        }
        if crawl.cookies.iter().any(|c| !c.value.is_empty()) {
            pairs_with_cookies.insert(key);
        }
        for cookie in &crawl.cookies {
            let rule_hit = crate::labeling::classify_cookie(cookie, &inputs.cookie_rules).is_some();
            if rule_hit || heuristic.is_identifier(&cookie.value) {
                identifier_cookies += 1;
                identifier_sites.insert(&crawl.initial_domain);
            }
            instance_cookies.push(cookie.clone());
        }
    }
    let cookie_stats = cookie_summary(&instance_cookies, &inputs.cookie_rules);
    let cookie_overview = CookieOverview {
        instances_total: sample.instances.len() as u64,
        instances_with_cookies: pairs_with_cookies.len() as u64,
        identifier_cookies,
        identifier_sites: identifier_sites.len() as u64,
    };

    // Sites loading a non-adequate tracker, categorized.
    let mut resolution: HashMap<(Ascp, &str), BTreeSet<IpAddr>> = HashMap::new();
    for tr in &inputs.source_traces {
        if let Some(domain) = tr.target.as_domain() {
            resolution
                .entry((tr.source, domain.as_str()))
                .or_default()
                .insert(tr.dst_ip);
        }
    }
    let mut tracker_sites: BTreeSet<DomainName> = BTreeSet::new();
    let mut review_queue: BTreeSet<ReviewItem> = BTreeSet::new();
    for crawl in &crawls {
        if !instance_pairs.contains(&(&crawl.initial_domain, crawl.ascp)) {
            continue;
        }
        for domain in &crawl.dns_requests {
            let Some(label) = label_tracker(domain, &inputs.trackers) else {
                continue;
            };
            let hits_survivor = resolution
                .get(&(crawl.ascp, domain.as_str()))
                .map(|ips| ips.iter().any(|ip| final_ips.contains(ip)))
                .unwrap_or(false);
            if !hits_survivor {
                continue;
            }
            tracker_sites.insert(crawl.initial_domain.clone());
            // Ownership-ambiguous hits go to the review queue: a tracker that
            // our AS/org heuristics would call a first party of the site.
            let site_ip = resolution
                .get(&(crawl.ascp, crawl.initial_domain.as_str()))
                .and_then(|ips| ips.iter().next().copied());
            let tracker_ip = resolution
                .get(&(crawl.ascp, domain.as_str()))
                .and_then(|ips| ips.iter().next().copied());
            if let (Some(site_ip), Some(tracker_ip)) = (site_ip, tracker_ip) {
                let mut res: HashMap<DomainName, IpAddr> = HashMap::new();
                res.insert(crawl.initial_domain.clone(), site_ip);
                res.insert(domain.clone(), tracker_ip);
                if let Ok(PartyLabel::FirstParty(reason)) = label_party(
                    &crawl.initial_domain,
                    domain,
                    &res,
                    &inputs.asmap,
                    &inputs.orgmap,
                ) {
                    review_queue.insert(ReviewItem {
                        initial_site: crawl.initial_domain.clone(),
                        domain: domain.clone(),
                        reason: format!("{} tracker labeled first-party ({reason:?})", label.tier.as_str()),
                    });
                }
            }
        }
    }
    let categories = crate::stats::category_counts(&tracker_sites, &inputs.categories);

    // Destination-side CDF series.
    let mut dest_candidates_latencies = Vec::new();
    let mut dest_confirmed_latencies = Vec::new();
    for (idx, _, effective) in &dest.verdicts {
        if let Some(eff) = effective {
            dest_candidates_latencies.push(*eff);
            if final_ips.contains(&inputs.dest_traces[*idx].dst_ip) {
                dest_confirmed_latencies.push(*eff);
            }
        }
    }

    Ok(AuditReport {
        funnel,
        final_ips: final_country,
        rates,
        flows,
        anova,
        cookie_stats,
        cookie_overview,
        categories,
        cdf_source: CdfSeries {
            candidates: cdf_or_empty(&src_candidates_latencies),
            confirmed: cdf_or_empty(&src_confirmed_latencies),
        },
        cdf_dest: CdfSeries {
            candidates: cdf_or_empty(&dest_candidates_latencies),
            confirmed: cdf_or_empty(&dest_confirmed_latencies),
        },
        instances: sample.instances,
        review_queue: review_queue.into_iter().collect(),
        google_excluded_sites,
    })
}

/// Per-group and overall validation scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub overall: ValidationMetrics,
    pub groups: BTreeMap<String, ValidationMetrics>,
}

/// Runs the full pipeline and scores the final non-adequate set against
/// ground truth. The truth map may partition DSCPs into named groups
/// (for example one per testbed); each group is scored separately on top of
/// the overall metrics.
pub fn run_validation_audit(
    inputs: &AuditInputs,
    truth: &BTreeMap<IpAddr, (CountryCode, String)>,
) -> Result<(FunnelReport, ValidationReport), AuditError> {
    let report = run_audit(inputs)?;
    let final_ips: BTreeSet<IpAddr> = report.final_ips.keys().copied().collect();

    let overall_truth: BTreeMap<IpAddr, CountryCode> =
        truth.iter().map(|(ip, (cc, _))| (*ip, *cc)).collect();
    let overall = run_validation(&overall_truth, &final_ips, &inputs.ledger, inputs.audit_date)?;

    let mut group_names: BTreeSet<&String> = truth.values().map(|(_, g)| g).collect();
    group_names.retain(|g| !g.is_empty());
    let mut groups = BTreeMap::new();
    for name in group_names {
        let group_truth: BTreeMap<IpAddr, CountryCode> = truth
            .iter()
            .filter(|(_, (_, g))| g == name)
            .map(|(ip, (cc, _))| (*ip, *cc))
            .collect();
        let group_ips: BTreeSet<IpAddr> = final_ips
            .iter()
            .filter(|ip| group_truth.contains_key(*ip))
            .copied()
            .collect();
        let metrics =
            run_validation(&group_truth, &group_ips, &inputs.ledger, inputs.audit_date)?;
        groups.insert(name.clone(), metrics);
    }

    Ok((report.funnel, ValidationReport { overall, groups }))
}
