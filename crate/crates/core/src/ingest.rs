//! Parsers for every recorded input artifact: traceroute and crawl JSON-lines,
//! geolocation/rDNS/AS-mapping CSVs, and tracker lists.
//!
//! Parsers never abort a batch: each malformed line yields one [`ParseError`]
//! and well-formed lines keep flowing, so records_in = records_ok + records_failed.

use std::collections::HashMap;
use std::net::IpAddr;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::labeling::{TrackerDb, TrackerTier};
use crate::model::{Ascp, CountryCode, DomainName, GeoPoint, GeoRecord, Granularity};

/// Which measurement campaign a traceroute belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    #[serde(rename = "source")]
    SourceBased,
    #[serde(rename = "destination")]
    DestinationBased,
}

/// One reply within a hop; timeouts carry neither address nor time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopReply {
    #[serde(rename = "from", skip_serializing_if = "Option::is_none")]
    pub from_ip: Option<IpAddr>,
    #[serde(rename = "rtt", skip_serializing_if = "Option::is_none")]
    pub rtt_ms: Option<f64>,
}

/// One hop of a traceroute with its reply set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    #[serde(rename = "hop")]
    pub index: u32,
    pub replies: Vec<HopReply>,
}

/// Target of a traceroute: a hostname in the source campaign, an IP in the
/// destination campaign.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceTarget {
    Domain(DomainName),
    Ip(IpAddr),
}

impl TraceTarget {
    pub fn parse(s: &str) -> Result<Self, String> {
        if let Ok(ip) = s.parse::<IpAddr>() {
            return Ok(TraceTarget::Ip(ip));
        }
        DomainName::parse(s)
            .map(TraceTarget::Domain)
            .map_err(|e| e.to_string())
    }

    pub fn as_domain(&self) -> Option<&DomainName> {
        match self {
            TraceTarget::Domain(d) => Some(d),
            TraceTarget::Ip(_) => None,
        }
    }

    pub fn to_field(&self) -> String {
        match self {
            TraceTarget::Domain(d) => d.to_string(),
            TraceTarget::Ip(ip) => ip.to_string(),
        }
    }
}

/// Hop-by-hop RTT evidence between a vantage and a server IP.
#[derive(Debug, Clone, PartialEq)]
pub struct TracerouteRecord {
    pub measurement_id: String,
    pub source: Ascp,
    pub probe_point: Option<GeoPoint>,
    pub target: TraceTarget,
    pub dst_ip: IpAddr,
    pub hops: Vec<Hop>,
    pub stage_tag: Stage,
    pub timestamp: DateTime<Utc>,
}

/// Wire schema for one traceroute line.
#[derive(Debug, Serialize, Deserialize)]
struct RawTraceroute {
    msm_id: String,
    src_asn: u32,
    src_country: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_lat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe_lon: Option<f64>,
    target: String,
    dst_ip: IpAddr,
    stage: Stage,
    timestamp: DateTime<Utc>,
    hops: Vec<Hop>,
}

/// A parse failure pinned to its input line. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

fn traceroute_from_raw(raw: RawTraceroute, expected: Stage) -> Result<TracerouteRecord, String> {
    if raw.stage != expected {
        return Err(format!(
            "stage mismatch: expected {:?}, got {:?}",
            expected, raw.stage
        ));
    }
    let country = CountryCode::parse(&raw.src_country).map_err(|e| e.to_string())?;
    let source = Ascp::new(raw.src_asn, country).map_err(|e| e.to_string())?;
    let probe_point = match (raw.probe_lat, raw.probe_lon) {
        (Some(lat), Some(lon)) => Some(GeoPoint::new(lat, lon).map_err(|e| e.to_string())?),
        (None, None) => None,
        _ => return Err("probe_lat and probe_lon must be given together".into()),
    };
    let target = TraceTarget::parse(&raw.target)?;
    let mut prev = 0u32;
    for hop in &raw.hops {
        if hop.index == 0 {
            return Err("hop index must be >= 1".into());
        }
        if hop.index <= prev {
            return Err("hops must be ordered by ascending index".into());
        }
        prev = hop.index;
        for r in &hop.replies {
            if let Some(rtt) = r.rtt_ms {
                if !(rtt > 0.0) {
                    return Err(format!("rtt must be positive, got {rtt}"));
                }
            }
        }
    }
    Ok(TracerouteRecord {
        measurement_id: raw.msm_id,
        source,
        probe_point,
        target,
        dst_ip: raw.dst_ip,
        hops: raw.hops,
        stage_tag: raw.stage,
        timestamp: raw.timestamp,
    })
}

/// Serializes a record back to its exact wire line (round-trips through
/// [`parse_traceroutes`] to the identical value).
pub fn traceroute_to_json_line(rec: &TracerouteRecord) -> String {
    let raw = RawTraceroute {
        msm_id: rec.measurement_id.clone(),
        src_asn: rec.source.asn,
        src_country: rec.source.country.to_string(),
        probe_lat: rec.probe_point.map(|p| p.lat),
        probe_lon: rec.probe_point.map(|p| p.lon),
        target: rec.target.to_field(),
        dst_ip: rec.dst_ip,
        stage: rec.stage_tag,
        timestamp: rec.timestamp,
        hops: rec.hops.clone(),
    };
    serde_json::to_string(&raw).expect("traceroute serializes")
}

/// Parses traceroute JSON-lines tagged with the expected campaign stage.
/// Blank lines are skipped; every other line yields exactly one record or
/// one error, in input order.
pub fn parse_traceroutes(input: &str, stage: Stage) -> (Vec<TracerouteRecord>, Vec<ParseError>) {
    parse_jsonl(input, |line| {
        serde_json::from_str::<RawTraceroute>(line)
            .map_err(|e| e.to_string())
            .and_then(|raw| traceroute_from_raw(raw, stage))
    })
}

fn parse_jsonl<T: Send>(
    input: &str,
    per_line: impl Fn(&str) -> Result<T, String> + Sync,
) -> (Vec<T>, Vec<ParseError>) {
    let lines: Vec<(usize, &str)> = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    // Lines parse independently; collect() restores input order.
    let parsed: Vec<Result<T, ParseError>> = lines
        .par_iter()
        .map(|(idx, line)| {
            per_line(line).map_err(|reason| ParseError {
                line: idx + 1,
                reason,
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for item in parsed {
        match item {
            Ok(r) => records.push(r),
            Err(e) => errors.push(e),
        }
    }
    (records, errors)
}

/// Whether a crawl attempt got a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchStatus {
    Ok,
    Failed,
}

/// A cookie as recorded by the crawler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cookie {
    pub name: String,
    pub value: String,
    pub site: DomainName,
}

/// One browser crawl from one vantage: the initial site, the DNS requests it
/// triggered, and the cookies stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CrawlLog {
    pub ascp: Ascp,
    pub initial_url: String,
    pub initial_domain: DomainName,
    pub dns_requests: Vec<DomainName>,
    pub cookies: Vec<Cookie>,
    pub fetch_status: FetchStatus,
    pub attempt_ladder_index: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCookie {
    name: String,
    value: String,
    site: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCrawl {
    asn: u32,
    country: String,
    initial_url: String,
    status: FetchStatus,
    attempt: u8,
    dns: Vec<String>,
    #[serde(default)]
    cookies: Vec<RawCookie>,
}

/// Host part of a crawl URL with any leading `www.` stripped: the identity
/// used for sites throughout the reports.
pub fn initial_domain_of_url(url: &str) -> Result<DomainName, String> {
    let rest = url
        .split_once("://")
        .map(|(_, r)| r)
        .ok_or_else(|| format!("url without scheme: {url:?}"))?;
    let host = rest.split(['/', '?', '#']).next().unwrap_or("");
    let host = host.split('@').next_back().unwrap_or("");
    let host = host.split(':').next().unwrap_or("");
    let host = host.strip_prefix("www.").unwrap_or(host);
    DomainName::parse(host).map_err(|e| e.to_string())
}

fn crawl_from_raw(raw: RawCrawl) -> Result<CrawlLog, String> {
    let country = CountryCode::parse(&raw.country).map_err(|e| e.to_string())?;
    let ascp = Ascp::new(raw.asn, country).map_err(|e| e.to_string())?;
    if !(1..=4).contains(&raw.attempt) {
        return Err(format!("attempt must be in 1..=4, got {}", raw.attempt));
    }
    let initial_domain = initial_domain_of_url(&raw.initial_url)?;
    let dns_requests = raw
        .dns
        .iter()
        .map(|d| DomainName::parse(d).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if raw.status == FetchStatus::Ok {
        let with_www = format!("www.{initial_domain}");
        let present = dns_requests
            .iter()
            .any(|d| d == &initial_domain || d.as_str() == with_www);
        if !present {
            return Err(format!(
                "ok crawl must list its initial domain {initial_domain} in dns"
            ));
        }
    }
    let cookies = raw
        .cookies
        .into_iter()
        .map(|c| {
            if c.name.is_empty() {
                return Err("cookie name must be non-empty".to_string());
            }
            Ok(Cookie {
                name: c.name,
                value: c.value,
                site: DomainName::parse(&c.site).map_err(|e| e.to_string())?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(CrawlLog {
        ascp,
        initial_url: raw.initial_url,
        initial_domain,
        dns_requests,
        cookies,
        fetch_status: raw.status,
        attempt_ladder_index: raw.attempt,
    })
}

/// Serializes a crawl back to its wire line.
pub fn crawl_to_json_line(rec: &CrawlLog) -> String {
    let raw = RawCrawl {
        asn: rec.ascp.asn,
        country: rec.ascp.country.to_string(),
        initial_url: rec.initial_url.clone(),
        status: rec.fetch_status,
        attempt: rec.attempt_ladder_index,
        dns: rec.dns_requests.iter().map(|d| d.to_string()).collect(),
        cookies: rec
            .cookies
            .iter()
            .map(|c| RawCookie {
                name: c.name.clone(),
                value: c.value.clone(),
                site: c.site.to_string(),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("crawl serializes")
}

/// Parses crawl JSON-lines with per-line error isolation.
pub fn parse_crawls(input: &str) -> (Vec<CrawlLog>, Vec<ParseError>) {
    parse_jsonl(input, |line| {
        serde_json::from_str::<RawCrawl>(line)
            .map_err(|e| e.to_string())
            .and_then(crawl_from_raw)
    })
}

/// Parses the geolocation CSV (`ip,country,lat,lon,granularity`) into a map.
/// Duplicate IPs resolve last-wins, with a warning record per overwrite.
pub fn parse_geodb(input: &str) -> (HashMap<IpAddr, GeoRecord>, Vec<ParseError>) {
    let mut map = HashMap::new();
    let mut errors = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(input.as_bytes());
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(ParseError {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match geodb_row(&row) {
            Ok(rec) => {
                if map.insert(rec.ip, rec.clone()).is_some() {
                    errors.push(ParseError {
                        line,
                        reason: format!("duplicate ip {} (last row wins)", rec.ip),
                    });
                }
            }
            Err(reason) => errors.push(ParseError { line, reason }),
        }
    }
    (map, errors)
}

fn geodb_row(row: &csv::StringRecord) -> Result<GeoRecord, String> {
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let ip: IpAddr = field(0)
        .parse()
        .map_err(|_| format!("invalid ip {:?}", field(0)))?;
    let country = if field(1).is_empty() {
        None
    } else {
        Some(CountryCode::parse(field(1)).map_err(|e| e.to_string())?)
    };
    let point = match (field(2), field(3)) {
        ("", "") => None,
        (lat, lon) => {
            let lat: f64 = lat.parse().map_err(|_| format!("invalid lat {lat:?}"))?;
            let lon: f64 = lon.parse().map_err(|_| format!("invalid lon {lon:?}"))?;
            Some(GeoPoint::new(lat, lon).map_err(|e| e.to_string())?)
        }
    };
    let granularity = match field(4) {
        "city" => Granularity::City,
        "country" => Granularity::Country,
        "none" => Granularity::None,
        other => return Err(format!("invalid granularity {other:?}")),
    };
    let rec = GeoRecord {
        ip,
        country,
        point,
        granularity,
    };
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

/// rDNS lookup result for one IP; hostname is absent when the lookup failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RdnsRecord {
    pub ip: IpAddr,
    pub hostname: Option<DomainName>,
}

/// Parses `ip,hostname` CSV where an empty hostname means a failed lookup.
pub fn parse_rdns(input: &str) -> (HashMap<IpAddr, RdnsRecord>, Vec<ParseError>) {
    let mut map = HashMap::new();
    let mut errors = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(input.as_bytes());
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let Ok(row) = row else {
            errors.push(ParseError {
                line,
                reason: "malformed csv row".into(),
            });
            continue;
        };
        let ip: IpAddr = match row.get(0).unwrap_or("").trim().parse() {
            Ok(ip) => ip,
            Err(_) => {
                errors.push(ParseError {
                    line,
                    reason: format!("invalid ip {:?}", row.get(0).unwrap_or("")),
                });
                continue;
            }
        };
        let host_raw = row.get(1).unwrap_or("").trim();
        let hostname = if host_raw.is_empty() {
            None
        } else {
            match DomainName::parse(host_raw) {
                Ok(d) => Some(d),
                Err(e) => {
                    errors.push(ParseError {
                        line,
                        reason: e.to_string(),
                    });
                    continue;
                }
            }
        };
        map.insert(ip, RdnsRecord { ip, hostname });
    }
    (map, errors)
}

/// Longest-prefix IP-to-ASN map.
#[derive(Debug, Clone, Default)]
pub struct AsMap {
    // Keyed by (v6, prefix_len, masked address); lookup walks lengths
    // longest-first so the most specific prefix always wins.
    entries: HashMap<(bool, u8, u128), u32>,
    lens_v4: Vec<u8>,
    lens_v6: Vec<u8>,
}

fn ip_bits(ip: IpAddr) -> (bool, u128, u8) {
    match ip {
        IpAddr::V4(v4) => (false, u32::from(v4) as u128, 32),
        IpAddr::V6(v6) => (true, u128::from(v6), 128),
    }
}

fn mask_bits(bits: u128, total: u8, len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        bits >> (total - len) << (total - len)
    }
}

impl AsMap {
    pub fn insert_prefix(&mut self, prefix: &str, asn: u32) -> Result<(), String> {
        let (addr, len) = match prefix.split_once('/') {
            Some((a, l)) => {
                let addr: IpAddr = a.parse().map_err(|_| format!("invalid prefix {prefix:?}"))?;
                let len: u8 = l.parse().map_err(|_| format!("invalid prefix {prefix:?}"))?;
                (addr, Some(len))
            }
            None => {
                let addr: IpAddr = prefix
                    .parse()
                    .map_err(|_| format!("invalid prefix {prefix:?}"))?;
                (addr, None)
            }
        };
        let (v6, bits, total) = ip_bits(addr);
        let len = len.unwrap_or(total);
        if len > total {
            return Err(format!("prefix length {len} too long in {prefix:?}"));
        }
        self.entries.insert((v6, len, mask_bits(bits, total, len)), asn);
        let lens = if v6 { &mut self.lens_v6 } else { &mut self.lens_v4 };
        if !lens.contains(&len) {
            lens.push(len);
            lens.sort_unstable_by(|a, b| b.cmp(a));
        }
        Ok(())
    }

    /// Most specific matching ASN for an address, if any.
    pub fn lookup(&self, ip: IpAddr) -> Option<u32> {
        let (v6, bits, total) = ip_bits(ip);
        let lens = if v6 { &self.lens_v6 } else { &self.lens_v4 };
        for &len in lens {
            if let Some(&asn) = self.entries.get(&(v6, len, mask_bits(bits, total, len))) {
                return Some(asn);
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses `prefix,asn` CSV into a longest-prefix map.
pub fn parse_asmap(input: &str) -> (AsMap, Vec<ParseError>) {
    let mut map = AsMap::default();
    let mut errors = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(input.as_bytes());
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let Ok(row) = row else {
            errors.push(ParseError {
                line,
                reason: "malformed csv row".into(),
            });
            continue;
        };
        let prefix = row.get(0).unwrap_or("").trim();
        let asn = match row.get(1).unwrap_or("").trim().parse::<u32>() {
            Ok(a) if a >= 1 => a,
            _ => {
                errors.push(ParseError {
                    line,
                    reason: format!("invalid asn {:?}", row.get(1).unwrap_or("")),
                });
                continue;
            }
        };
        if let Err(reason) = map.insert_prefix(prefix, asn) {
            errors.push(ParseError { line, reason });
        }
    }
    (map, errors)
}

/// ASN-to-organization map.
pub type OrgMap = HashMap<u32, String>;

/// Parses `asn,org` CSV.
pub fn parse_as2org(input: &str) -> (OrgMap, Vec<ParseError>) {
    let mut map = OrgMap::new();
    let mut errors = Vec::new();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(input.as_bytes());
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let Ok(row) = row else {
            errors.push(ParseError {
                line,
                reason: "malformed csv row".into(),
            });
            continue;
        };
        match row.get(0).unwrap_or("").trim().parse::<u32>() {
            Ok(asn) => {
                map.insert(asn, row.get(1).unwrap_or("").trim().to_string());
            }
            Err(_) => errors.push(ParseError {
                line,
                reason: format!("invalid asn {:?}", row.get(0).unwrap_or("")),
            }),
        }
    }
    (map, errors)
}

/// Builds the three-tier tracker database from an EasyList-style file, a
/// hosts file, and a manually curated list. A tier that fails to parse is
/// fatal for that tier only; pass `None` to skip a tier entirely.
pub fn parse_tracker_lists(
    easylist: Option<&str>,
    hosts: Option<&str>,
    manual: Option<&str>,
) -> TrackerDb {
    let mut db = TrackerDb::default();
    if let Some(text) = easylist {
        db.load_tier(TrackerTier::EasyList, TrackerDb::parse_easylist(text));
    }
    if let Some(text) = hosts {
        db.load_tier(TrackerTier::HostsList, TrackerDb::parse_hosts(text));
    }
    if let Some(text) = manual {
        db.load_tier(TrackerTier::Manual, TrackerDb::parse_manual(text));
    }
    db
}
