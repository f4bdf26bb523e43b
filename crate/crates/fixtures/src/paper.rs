//! The audit fixture bundle. Running `audit` over it reproduces the funnel
//! (9905, 158, 8488, 1259/598) -> (598, 76, 89, 433) -> (433, 45+83, 37, 396),
//! a final sample of 247 unique IPs in 1233 instances, and the cookie
//! identifier counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use locaudit_core::defaults;
use locaudit_core::geodesy::LatencyThresholdConfig;
use locaudit_core::ingest::{traceroute_to_json_line, Stage};
use locaudit_core::model::{Ascp, GeoPoint};

use crate::{ascp, build_trace, cc, ip, write, TraceShape, DEG_PER_KM};

/// Source countries in published-table order, two vantage ASNs each.
pub const SOURCE_COUNTRIES: [&str; 19] = [
    "RO", "FI", "IT", "GR", "SK", "PL", "CZ", "ES", "HR", "HU", "AT", "DE", "PT", "IE", "BG",
    "FR", "SE", "DK", "BE",
];

/// Funnel and report values the bundle is constructed to produce.
pub mod expected {
    pub const GEODB_CANDIDATES: u64 = 2158;
    pub const GEODB_KEPT: u64 = 2098;
    pub const GEODB_ADEQUATE: u64 = 50;
    pub const GEODB_UNKNOWN: u64 = 10;

    pub const SOURCE_INPUT: u64 = 9905;
    pub const SOURCE_EXCLUDED: u64 = 158;
    pub const SOURCE_BELOW_GATE: u64 = 8488;
    pub const SOURCE_PASSED: u64 = 1259;
    pub const SOURCE_UNIQUE_IPS: u64 = 598;

    pub const DEST_INPUT: u64 = 598;
    pub const DEST_UNRESPONSIVE_OR_GRANULARITY: u64 = 76;
    pub const DEST_SOL_DISCARDED: u64 = 89;
    pub const DEST_PASSED: u64 = 433;

    pub const RDNS_INPUT: u64 = 433;
    pub const RDNS_NO_HOSTNAME: u64 = 45;
    pub const RDNS_NO_GEOHINT: u64 = 83;
    pub const RDNS_CONFIRMS: u64 = 255;
    pub const RDNS_REASSIGNS: u64 = 13;
    pub const RDNS_INDICATES_ADEQUATE: u64 = 37;
    pub const RDNS_PASSED: u64 = 396;

    pub const FINAL_UNIQUE_IPS: u64 = 247;
    pub const FINAL_INSTANCES: u64 = 1233;

    pub const GOOGLE_EXCLUDED_SITES: u64 = 3;
    pub const INSTANCES_WITH_COOKIES: u64 = 800;
    pub const TRACKER_SITES: u64 = 239;
    pub const NEWS_SITES: u64 = 120;

    /// (identifier, cookie_count, website_count)
    pub const COOKIE_COUNTS: [(&str, u64, u64); 4] = [
        ("_ga", 480, 146),
        ("_gid", 443, 135),
        ("__gfp_64b", 234, 84),
        ("_fbp", 223, 63),
    ];
}

const POOL: usize = 598; // IPs with at least one gate-passing trace
const FINAL: usize = 247; // IPs surviving every stage
const DEST_COVERED: usize = 449; // IPs with a destination measurement

fn ascps() -> Vec<Ascp> {
    let mut out = Vec::new();
    for (i, country) in SOURCE_COUNTRIES.iter().enumerate() {
        out.push(ascp(64600 + 2 * i as u32, country));
        out.push(ascp(64601 + 2 * i as u32, country));
    }
    out
}

// Non-adequate destination countries for the miscellaneous classes.
const NA_CYCLE: [&str; 10] = ["US", "TR", "RU", "IN", "MX", "BR", "AE", "AU", "HK", "SG"];
const EXTRA_CYCLE: [&str; 14] = [
    "US", "TR", "RU", "IN", "MX", "BR", "AE", "AU", "HK", "SG", "TH", "MY", "PK", "CN",
];
const US_IATA: [&str; 11] = [
    "iad", "ord", "jfk", "lax", "sea", "dfw", "atl", "mia", "sfo", "phx", "sjc",
];
const ADEQUATE_IATA: [&str; 6] = ["fra", "zrh", "nrt", "yyz", "lhr", "ams"];

/// rDNS verdict class of a final-sample IP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RdnsClass {
    NoHostname,
    NoGeohint,
    Reassign,
    ConfirmUs,
    ConfirmOther,
}

// Survivor indices [0,149) carry two destination measurements, [149,247)
// one; the class ranges below make the per-measurement verdict counts come
// out to 45/83/13/206+49.
fn rdns_class(idx: usize) -> RdnsClass {
    match idx {
        0..=19 | 149..=153 => RdnsClass::NoHostname,
        20..=49 | 154..=176 => RdnsClass::NoGeohint,
        50..=54 | 177..=179 => RdnsClass::Reassign,
        55..=124 | 180..=245 => RdnsClass::ConfirmUs,
        125..=148 | 246 => RdnsClass::ConfirmOther,
        _ => unreachable!("rdns class is only defined for final-sample indices"),
    }
}

fn confirm_other_country(idx: usize) -> &'static str {
    match idx {
        125..=134 => "TR",
        135..=142 => "RU",
        143..=145 => "IN",
        146..=147 => "HK",
        148 => "SG",
        246 => "MX",
        _ => unreachable!(),
    }
}

fn pool_country(idx: usize) -> &'static str {
    if idx < FINAL {
        match rdns_class(idx) {
            RdnsClass::NoHostname => ["US", "TR", "RU", "IN", "SG"][idx % 5],
            RdnsClass::NoGeohint => ["US", "TR", "RU", "HK", "AE", "BR", "AU"][idx % 7],
            RdnsClass::Reassign | RdnsClass::ConfirmUs => "US",
            RdnsClass::ConfirmOther => confirm_other_country(idx),
        }
    } else if idx < 284 {
        "US" // destination measurements whose hostnames point at adequate infrastructure
    } else {
        NA_CYCLE[idx % 10]
    }
}

fn ip_dashes(idx: usize) -> String {
    ip(18, idx).to_string().replace('.', "-")
}

// Hostname served by the rDNS fixture for a covered destination IP;
// `None` models a failed lookup.
fn pool_hostname(idx: usize) -> Option<String> {
    if idx < FINAL {
        match rdns_class(idx) {
            RdnsClass::NoHostname => None,
            RdnsClass::NoGeohint => Some(format!("host-{idx}.generic-hosting.test")),
            RdnsClass::Reassign => Some(format!("svo-{}.access.fixture-isp.test", ip_dashes(idx))),
            RdnsClass::ConfirmUs => Some(format!(
                "{}-{}.access.fixture-isp.test",
                US_IATA[idx % US_IATA.len()],
                ip_dashes(idx)
            )),
            RdnsClass::ConfirmOther => {
                let code = match confirm_other_country(idx) {
                    "TR" => "ist",
                    "RU" => "dme",
                    "IN" => "bom",
                    "HK" => "hkg",
                    "SG" => "sin",
                    "MX" => "mex",
                    _ => unreachable!(),
                };
                Some(format!("{code}-{}.access.fixture-isp.test", ip_dashes(idx)))
            }
        }
    } else if idx < 278 {
        Some(format!(
            "ec2-{}.ca-central-1.compute.amazonaws.com",
            ip_dashes(idx)
        ))
    } else if idx < 284 {
        Some(format!(
            "{}-{}.access.fixture-isp.test",
            ADEQUATE_IATA[idx - 278],
            ip_dashes(idx)
        ))
    } else {
        Some(format!("edge-{idx}.generic-hosting.test"))
    }
}

fn is_tracker_ip(idx: usize) -> bool {
    idx < 3 || (63..178).contains(&idx)
}

fn pool_domain(idx: usize) -> String {
    if is_tracker_ip(idx) {
        format!("trk{idx}.fixture-ads.test")
    } else {
        format!("cdn{idx}.fixture-edge.test")
    }
}

// Every pool IP has gate-passing traces: three for the first 63, two after.
fn passing_links(idx: usize) -> usize {
    if idx < 63 {
        3
    } else {
        2
    }
}

fn server_point(idx: usize) -> GeoPoint {
    GeoPoint::new(
        -20.0 + (idx % 100) as f64 * 0.7,
        -120.0 + (idx % 240) as f64,
    )
    .expect("fixture coordinates are in range")
}

fn probe_point_at_km(server: GeoPoint, km: f64) -> GeoPoint {
    GeoPoint::new(server.lat + km * DEG_PER_KM, server.lon).expect("offset stays in range")
}

struct SiteEntry {
    domain: String,
    vantage: Ascp,
    dns_domain: String,
    tracker: bool,
}

/// Writes the complete bundle into `dir`.
pub fn write_bundle(dir: &Path) -> std::io::Result<()> {
    let ascps = ascps();
    let thresholds = LatencyThresholdConfig::bundled();
    let gate = |country: &str| -> f64 {
        0.9 * thresholds
            .average_ms(cc(country))
            .expect("fixture destination countries are mapped")
    };

    let mut source_lines = String::new();
    let mut seq: i64 = 0;
    let push_source = |rec: &locaudit_core::ingest::TracerouteRecord, out: &mut String| {
        out.push_str(&traceroute_to_json_line(rec));
        out.push('\n');
    };

    // Gate-passing traces: 63 x 3 + 535 x 2 = 1259 over the 598-IP pool.
    // The first 51 use last-hop-only latency (untimed first hop).
    let mut passing_seq = 0usize;
    let mut link_vantage: Vec<Vec<Ascp>> = Vec::with_capacity(POOL);
    for idx in 0..POOL {
        let mut vantages = Vec::new();
        for k in 0..passing_links(idx) {
            let vantage = ascps[(idx * 3 + k) % ascps.len()];
            vantages.push(vantage);
            let eff = gate(pool_country(idx)) + 2.0 + ((idx + k) % 37) as f64 * 0.8;
            let shape = if passing_seq < 51 {
                TraceShape::LastOnly { last_ms: eff }
            } else {
                TraceShape::Diff {
                    first_ms: 2.0,
                    last_ms: 2.0 + eff,
                }
            };
            let rec = build_trace(
                format!("src-{seq:05}"),
                vantage,
                &pool_domain(idx),
                ip(18, idx),
                None,
                Stage::SourceBased,
                seq,
                shape,
            );
            push_source(&rec, &mut source_lines);
            seq += 1;
            passing_seq += 1;
        }
        link_vantage.push(vantages);
    }
    assert_eq!(passing_seq, 1259);

    // Instance plan: one fresh site per (ip, vantage) link, plus 676 extra
    // sites spread over the non-tracker links, totalling 1233.
    let mut sites: Vec<SiteEntry> = Vec::new();
    let mut site_seq = 0usize;
    let new_site = |idx: usize, vantage: Ascp, site_seq: &mut usize| -> SiteEntry {
        let entry = SiteEntry {
            domain: format!(
                "site{:04}.fixture-{}.test",
                *site_seq,
                vantage.country.as_str().to_ascii_lowercase()
            ),
            vantage,
            dns_domain: pool_domain(idx),
            tracker: is_tracker_ip(idx),
        };
        *site_seq += 1;
        entry
    };
    let mut non_tracker_links: Vec<(usize, Ascp)> = Vec::new();
    for (idx, vantages) in link_vantage.iter().enumerate().take(FINAL) {
        for vantage in vantages {
            sites.push(new_site(idx, *vantage, &mut site_seq));
            if !is_tracker_ip(idx) {
                non_tracker_links.push((idx, *vantage));
            }
        }
    }
    assert_eq!(sites.len(), 557);
    assert_eq!(non_tracker_links.len(), 318);
    for e in 0..676 {
        let (idx, vantage) = non_tracker_links[e % non_tracker_links.len()];
        sites.push(new_site(idx, vantage, &mut site_seq));
    }
    assert_eq!(sites.len(), 1233);

    // Below-gate traces: 400 last-hop-only + 8088 diff-based, all toward a
    // separate 1500-IP pool, with effective latencies under every regional
    // gate. Two of the diff-based ones target initial-site hostnames so the
    // review queue has material.
    let extra_pool = 1500usize;
    // Every fifth extra server is reached through a tracker-listed domain,
    // so per-country tracker denominators include non-surviving IPs.
    let extra_domain = |j: usize| {
        if j % 5 == 0 {
            format!("xtrk{j}.fixture-ads.test")
        } else {
            format!("ext{j}.fixture-edge.test")
        }
    };
    let mut ext_by_vantage: BTreeMap<Ascp, Vec<String>> = BTreeMap::new();
    let below_eff = |j: usize| 4.0 + (j % 7) as f64;
    for j in 0..400usize {
        let vantage = ascps[j % ascps.len()];
        let target = extra_domain(j % extra_pool);
        ext_by_vantage.entry(vantage).or_default().push(target.clone());
        let rec = build_trace(
            format!("src-{seq:05}"),
            vantage,
            &target,
            ip(19, j % extra_pool),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::LastOnly { last_ms: below_eff(j) },
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    // Review-queue traces resolve two tracker-hosting initial sites into the
    // same origin AS as their trackers.
    let review_targets = [
        (sites[0].domain.clone(), sites[0].vantage, 0usize),
        (sites[189].domain.clone(), sites[189].vantage, 1usize),
    ];
    debug_assert!(sites[0].tracker && sites[189].tracker);
    for (target, vantage, j) in &review_targets {
        let rec = build_trace(
            format!("src-{seq:05}"),
            *vantage,
            target,
            ip(19, *j),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 2.0 + below_eff(*j),
            },
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    for j in 0..8086usize {
        let vantage = ascps[(j + 7) % ascps.len()];
        let target = extra_domain(j % extra_pool);
        ext_by_vantage.entry(vantage).or_default().push(target.clone());
        let rec = build_trace(
            format!("src-{seq:05}"),
            vantage,
            &target,
            ip(19, j % extra_pool),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 2.0 + below_eff(j),
            },
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    // Policy-excluded traces: 130 first-exceeds-last, 28 unresponsive.
    for j in 0..130usize {
        let rec = build_trace(
            format!("src-{seq:05}"),
            ascps[(j + 3) % ascps.len()],
            &extra_domain(j % extra_pool),
            ip(19, j % extra_pool),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::FirstExceedsLast {
                first_ms: 90.0,
                last_ms: 80.0,
            },
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    for j in 0..28usize {
        let rec = build_trace(
            format!("src-{seq:05}"),
            ascps[(j + 11) % ascps.len()],
            &extra_domain(j % extra_pool),
            ip(19, j % extra_pool),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::UnresponsiveLast,
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    // Traces toward adequate-country and unlocatable servers: partitioned
    // out before the source stage, so they do not count toward its input.
    let adequate_countries = ["CA", "JP", "CH", "GB", "NO"];
    for j in 0..200usize {
        let target = format!("adq{}.fixture-adequate.test", j % 50);
        let vantage = ascps[j % ascps.len()];
        ext_by_vantage.entry(vantage).or_default().push(target.clone());
        let rec = build_trace(
            format!("src-{seq:05}"),
            vantage,
            &target,
            ip(22, j % 50),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 42.0,
            },
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    for j in 0..30usize {
        let target = format!("unk{}.fixture-edge.test", j % 10);
        let vantage = ascps[(j + 5) % ascps.len()];
        ext_by_vantage.entry(vantage).or_default().push(target.clone());
        let rec = build_trace(
            format!("src-{seq:05}"),
            vantage,
            &target,
            ip(23, j % 10),
            None,
            Stage::SourceBased,
            seq,
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 42.0,
            },
        );
        push_source(&rec, &mut source_lines);
        seq += 1;
    }
    assert_eq!(seq, 9905 + 230);

    // Destination measurements: 598 records over the first 449 pool IPs.
    let mut dest_lines = String::new();
    let mut dest_seq: i64 = 0;
    let mut kept_counter = 0usize; // orders the 433 surviving measurements into bases
    let kept_shape = |kept_counter: &mut usize| -> TraceShape {
        let shape = if *kept_counter < 296 {
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 42.0,
            }
        } else if *kept_counter < 426 {
            TraceShape::FirstExceedsLast {
                first_ms: 90.0,
                last_ms: 80.0,
            }
        } else {
            TraceShape::LastOnly { last_ms: 60.0 }
        };
        *kept_counter += 1;
        shape
    };
    let push_dest = |idx: usize,
                         record_no: usize,
                         shape: TraceShape,
                         probe: Option<GeoPoint>,
                         dest_seq: &mut i64,
                         out: &mut String| {
        let vantage = Ascp::new(
            ascps[(idx * 5 + record_no * 7 + 1) % ascps.len()].asn,
            cc(pool_country(idx)),
        )
        .expect("fixture ascps are valid");
        let rec = build_trace(
            format!("dst-{:04}", *dest_seq),
            vantage,
            &ip(18, idx).to_string(),
            ip(18, idx),
            probe,
            Stage::DestinationBased,
            20_000 + *dest_seq,
            shape,
        );
        out.push_str(&traceroute_to_json_line(&rec));
        out.push('\n');
        *dest_seq += 1;
    };
    for idx in 0..FINAL {
        let records = if idx < 149 { 2 } else { 1 };
        for r in 0..records {
            let shape = kept_shape(&mut kept_counter);
            let probe = Some(probe_point_at_km(server_point(idx), 500.0));
            push_dest(idx, r, shape, probe, &mut dest_seq, &mut dest_lines);
        }
    }
    for idx in FINAL..284 {
        // Adequate-hint measurements still pass latency and feasibility.
        let shape = kept_shape(&mut kept_counter);
        let probe = Some(probe_point_at_km(server_point(idx), 500.0));
        push_dest(idx, 0, shape, probe, &mut dest_seq, &mut dest_lines);
    }
    assert_eq!(kept_counter, 433);
    for idx in 284..373 {
        // Implied speed 2 * 500 km / 2 ms = 500 km/ms: discarded.
        let probe = Some(probe_point_at_km(server_point(idx), 500.0));
        push_dest(
            idx,
            0,
            TraceShape::Diff {
                first_ms: 0.5,
                last_ms: 2.5,
            },
            probe,
            &mut dest_seq,
            &mut dest_lines,
        );
    }
    for idx in 373..385 {
        let probe = Some(probe_point_at_km(server_point(idx), 500.0));
        push_dest(idx, 0, TraceShape::UnresponsiveLast, probe, &mut dest_seq, &mut dest_lines);
    }
    for idx in 385..392 {
        let probe = Some(probe_point_at_km(server_point(idx), 500.0));
        push_dest(idx, 0, TraceShape::EmptyHops, probe, &mut dest_seq, &mut dest_lines);
    }
    for idx in 392..432 {
        // Server side lacks city-level coordinates.
        let probe = Some(probe_point_at_km(server_point(idx), 500.0));
        push_dest(
            idx,
            0,
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 42.0,
            },
            probe,
            &mut dest_seq,
            &mut dest_lines,
        );
    }
    for idx in 432..DEST_COVERED {
        // Probe location unknown.
        push_dest(
            idx,
            0,
            TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 42.0,
            },
            None,
            &mut dest_seq,
            &mut dest_lines,
        );
    }
    assert_eq!(dest_seq, 598);

    // Geolocation database.
    let mut geodb = String::from("ip,country,lat,lon,granularity\n");
    for idx in 0..POOL {
        let country = pool_country(idx);
        if (392..432).contains(&idx) {
            let _ = writeln!(geodb, "{},{country},,,country", ip(18, idx));
        } else {
            let p = server_point(idx);
            let _ = writeln!(geodb, "{},{country},{},{},city", ip(18, idx), p.lat, p.lon);
        }
    }
    for j in 0..extra_pool {
        let country = EXTRA_CYCLE[j % EXTRA_CYCLE.len()];
        if j % 2 == 0 {
            let p = server_point(j);
            let _ = writeln!(geodb, "{},{country},{},{},city", ip(19, j), p.lat, p.lon);
        } else {
            let _ = writeln!(geodb, "{},{country},,,country", ip(19, j));
        }
    }
    for j in 0..50usize {
        let country = adequate_countries[j % adequate_countries.len()];
        let p = server_point(j);
        let _ = writeln!(geodb, "{},{country},{},{},city", ip(22, j), p.lat, p.lon);
    }
    for j in 0..10usize {
        let _ = writeln!(geodb, "{},,,,none", ip(23, j));
    }

    // rDNS records for every destination-covered IP.
    let mut rdns = String::from("ip,hostname\n");
    for idx in 0..DEST_COVERED {
        let _ = writeln!(rdns, "{},{}", ip(18, idx), pool_hostname(idx).unwrap_or_default());
    }

    // Tracker tiers: the tracker-IP hostnames split 80/30/8 across the
    // cascade, manual keeping its five shipped defaults on top.
    let tracker_ips: Vec<usize> = (0..POOL).filter(|i| is_tracker_ip(*i)).collect();
    assert_eq!(tracker_ips.len(), 118);
    let mut easylist = String::from("! fixture tracker rules\n");
    let mut hosts = String::from("# fixture hosts\n");
    let mut manual = String::from(defaults::MANUAL_TRACKERS);
    for (pos, idx) in tracker_ips.iter().enumerate() {
        let domain = pool_domain(*idx);
        if pos < 80 {
            let _ = writeln!(easylist, "||{domain}^");
        } else if pos < 110 {
            let _ = writeln!(hosts, "0.0.0.0 {domain}");
        } else {
            let _ = writeln!(manual, "{domain} fixture");
        }
    }
    for j in (0..extra_pool).step_by(5) {
        let _ = writeln!(easylist, "||xtrk{j}.fixture-ads.test^");
    }
    // Non-domain rules that the parser must ignore.
    easylist.push_str("example.org##.ad-banner\n@@||allowlisted.example^\n/banners/*\n");

    // Crawls: one per instance site, then per-vantage filler crawls, a few
    // Google-owned initial targets, and a few failed fetches.
    let mut crawl_lines = String::new();
    let mut cookie_value_seq = 0usize;
    for (s, site) in sites.iter().enumerate() {
        let mut cookies = Vec::new();
        let add = |name: &str, value: String, cookies: &mut Vec<(String, String)>| {
            cookies.push((name.to_string(), value));
        };
        if s < 146 {
            let n = if s < 42 { 4 } else { 3 };
            for _ in 0..n {
                add("_ga", format!("GA1.2.{cookie_value_seq}"), &mut cookies);
                cookie_value_seq += 1;
            }
        }
        if s < 135 {
            let n = if s < 38 { 4 } else { 3 };
            for _ in 0..n {
                add("_gid", format!("GA1.2.{cookie_value_seq}"), &mut cookies);
                cookie_value_seq += 1;
            }
        }
        if s < 84 {
            let n = if s < 66 { 3 } else { 2 };
            for _ in 0..n {
                add("__gfp_64b", format!("gfp.{cookie_value_seq}"), &mut cookies);
                cookie_value_seq += 1;
            }
        }
        if s < 63 {
            let n = if s < 34 { 4 } else { 3 };
            for _ in 0..n {
                add("_fbp", format!("fb.1.{cookie_value_seq}"), &mut cookies);
                cookie_value_seq += 1;
            }
        }
        if s < 5 {
            add("_pbjs_userid_consent_data", format!("consent{s}"), &mut cookies);
        } else if s < 10 {
            add("OptanonConsent", format!("optanon{s}"), &mut cookies);
        }
        if (10..20).contains(&s) {
            // High-entropy value for the identifier heuristic.
            let mut v = String::new();
            let mut x = (s as u64 + 3) * 2654435761;
            for _ in 0..24 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let _ = write!(v, "{:x}", (x >> 60) & 0xf);
            }
            add("xid", v, &mut cookies);
        }
        if (146..800).contains(&s) {
            add("sessionid", format!("s{s}"), &mut cookies);
        }
        let cookie_json: Vec<String> = cookies
            .iter()
            .map(|(name, value)| {
                format!(r#"{{"name":"{name}","value":"{value}","site":"{}"}}"#, site.domain)
            })
            .collect();
        let _ = writeln!(
            crawl_lines,
            r#"{{"asn":{},"country":"{}","initial_url":"https://www.{}","status":"ok","attempt":{},"dns":["{}","{}"],"cookies":[{}]}}"#,
            site.vantage.asn,
            site.vantage.country,
            site.domain,
            s % 4 + 1,
            site.domain,
            site.dns_domain,
            cookie_json.join(",")
        );
    }
    for (v, (vantage, domains)) in ext_by_vantage.iter().enumerate() {
        let filler = format!("filler{v}.fixture-{}.test", vantage.country.as_str().to_ascii_lowercase());
        let mut dns: Vec<String> = vec![filler.clone()];
        let mut seen = std::collections::BTreeSet::new();
        for d in domains {
            if seen.insert(d.clone()) && seen.len() <= 50 {
                dns.push(d.clone());
            }
        }
        let cookies = if v < 3 {
            format!(
                r#"[{{"name":"sessionid","value":"filler{v}","site":"{filler}"}},{{"name":"_ga","value":"GA1.9.filler{v}","site":"{filler}"}}]"#
            )
        } else {
            "[]".to_string()
        };
        let _ = writeln!(
            crawl_lines,
            r#"{{"asn":{},"country":"{}","initial_url":"https://{filler}","status":"ok","attempt":1,"dns":[{}],"cookies":{}}}"#,
            vantage.asn,
            vantage.country,
            dns.iter().map(|d| format!("\"{d}\"")).collect::<Vec<_>>().join(","),
            cookies
        );
    }
    for (j, google) in ["google.de", "google.bg", "youtube.com"].iter().enumerate() {
        let vantage = ascps[j];
        let _ = writeln!(
            crawl_lines,
            r#"{{"asn":{},"country":"{}","initial_url":"https://www.{google}","status":"ok","attempt":1,"dns":["{google}"],"cookies":[]}}"#,
            vantage.asn, vantage.country
        );
    }
    for j in 0..5usize {
        let vantage = ascps[(j * 5) % ascps.len()];
        let _ = writeln!(
            crawl_lines,
            r#"{{"asn":{},"country":"{}","initial_url":"https://failed{j}.fixture-dead.test","status":"failed","attempt":4,"dns":[],"cookies":[]}}"#,
            vantage.asn, vantage.country
        );
    }

    // AS mapping: the two review-queue site IPs share an origin AS with
    // their trackers' server blocks.
    let asmap = "prefix,asn\n198.18.0.0/24,65001\n198.19.0.0/24,65001\n";
    let as2org = "asn,org\n65001,FIXTURE-NET\n";

    // Categories for the tracker-loading sites: first 120 news, then the
    // other named categories; the last 7 stay unmapped on purpose.
    let tracker_sites: Vec<&SiteEntry> = sites.iter().filter(|s| s.tracker).collect();
    assert_eq!(tracker_sites.len(), 239);
    let mut categories = String::from("site,category\n");
    let buckets: [(usize, &str); 8] = [
        (120, "News & Media Publishers"),
        (25, "Arts & Entertainment"),
        (22, "Computers Electronics and Technology"),
        (20, "Ecommerce & Shopping"),
        (15, "Sports"),
        (12, "Games"),
        (10, "Finance"),
        (8, "Travel & Tourism"),
    ];
    let mut pos = 0usize;
    for (count, name) in buckets {
        for _ in 0..count {
            let _ = writeln!(categories, "{},{name}", tracker_sites[pos].domain);
            pos += 1;
        }
    }
    assert_eq!(tracker_sites.len() - pos, 7);

    let manifest = r#"audit_date = "2022-08-15"
output_dir = "out"

[inputs]
crawls = "crawls.jsonl"
source_traceroutes = "traceroutes_source.jsonl"
dest_traceroutes = "traceroutes_dest.jsonl"
geodb = "geodb.csv"
rdns = "rdns.csv"
asmap = "asmap.csv"
as2org = "as2org.csv"
easylist = "trackers_easylist.txt"
hosts_trackers = "trackers_hosts.txt"
manual_trackers = "trackers_manual.txt"
cookie_rules = "cookie_rules.csv"
geohints_dir = "geohints"
regions = "regions.csv"
categories = "categories.csv"
ledger = "ledger.csv"
thresholds = "thresholds.toml"
"#;

    write(dir, "traceroutes_source.jsonl", &source_lines)?;
    write(dir, "traceroutes_dest.jsonl", &dest_lines)?;
    write(dir, "crawls.jsonl", &crawl_lines)?;
    write(dir, "geodb.csv", &geodb)?;
    write(dir, "rdns.csv", &rdns)?;
    write(dir, "asmap.csv", asmap)?;
    write(dir, "as2org.csv", as2org)?;
    write(dir, "trackers_easylist.txt", &easylist)?;
    write(dir, "trackers_hosts.txt", &hosts)?;
    write(dir, "trackers_manual.txt", &manual)?;
    write(dir, "categories.csv", &categories)?;
    write(dir, "regions.csv", defaults::UN_REGIONS_CSV)?;
    write(dir, "ledger.csv", defaults::ADEQUACY_LEDGER_CSV)?;
    write(dir, "thresholds.toml", defaults::THRESHOLDS_TOML)?;
    write(dir, "cookie_rules.csv", defaults::COOKIE_RULES_CSV)?;
    write(dir, "geohints/iata.csv", defaults::GEOHINTS_IATA_CSV)?;
    write(dir, "geohints/cloud_regions.csv", defaults::GEOHINTS_CLOUD_REGIONS_CSV)?;
    write(dir, "geohints/country_tokens.csv", defaults::GEOHINTS_COUNTRY_TOKENS_CSV)?;
    write(dir, "geohints/overrides.csv", defaults::GEOHINTS_OVERRIDES_CSV)?;
    write(dir, "manifest.toml", manifest)?;
    Ok(())
}
