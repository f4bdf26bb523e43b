//! Validation fixture bundles: 200 servers with known non-adequate ground
//! truth, 1000 cloud servers with known adequate ground truth, and the two
//! combined. Scoring the pipeline against them yields TP=170, FN=30,
//! tpr=0.85 on the first, FP=0 with TN=1000 on the second, and an overall
//! precision of exactly 1.0.

use std::fmt::Write as _;
use std::path::Path;

use locaudit_core::defaults;
use locaudit_core::ingest::{traceroute_to_json_line, Stage};
use locaudit_core::model::GeoPoint;

use crate::{ascp, build_trace, ip, write, TraceShape, DEG_PER_KM};

const VALIDATION_COUNTRIES: [(&str, u32); 5] = [
    ("FR", 64700),
    ("PL", 64701),
    ("DE", 64702),
    ("IE", 64703),
    ("ES", 64704),
];

/// Expected scores, used by the acceptance suite.
pub mod expected {
    pub const US_TP: u64 = 170;
    pub const US_FN: u64 = 30;
    pub const US_TPR: f64 = 0.85;
    pub const AWS_FP: u64 = 0;
    pub const AWS_TN: u64 = 1000;
    pub const COMBINED_PRECISION: f64 = 1.0;
}

#[derive(Default)]
struct BundleData {
    source: String,
    dest: String,
    geodb: String,
    rdns: String,
    truth: String,
}

fn location(idx: usize) -> GeoPoint {
    if idx % 2 == 0 {
        GeoPoint::new(40.0, -75.0).unwrap()
    } else {
        GeoPoint::new(41.0, -90.0).unwrap()
    }
}

fn probe_for(idx: usize) -> GeoPoint {
    let p = location(idx);
    GeoPoint::new(p.lat + 500.0 * DEG_PER_KM, p.lon).unwrap()
}

// 200 DSCPs, 40 per source country, all physically in the US. Three lack
// country-level geolocation; five are unresponsive; twenty sit below the
// 90% latency gate; two fail the speed-of-light check; 99 of the survivors
// have no rDNS hostname and the rest confirm the US (three of them name a
// different city, which is irrelevant at country granularity).
fn us_testbed() -> BundleData {
    let mut b = BundleData::default();
    b.geodb.push_str("ip,country,lat,lon,granularity\n");
    b.rdns.push_str("ip,hostname\n");
    b.truth.push_str("ip,country,group\n");
    let mut seq = 0i64;
    for idx in 0..200usize {
        let addr = ip(20, idx);
        let (country, asn) = VALIDATION_COUNTRIES[idx / 40];
        let vantage = ascp(asn, country);
        let _ = writeln!(b.truth, "{addr},US,us_testbed");
        if idx < 3 {
            let _ = writeln!(b.geodb, "{addr},,,,none");
        } else {
            let p = location(idx);
            let _ = writeln!(b.geodb, "{addr},US,{},{},city", p.lat, p.lon);
        }
        let shape = match idx {
            3..=7 => TraceShape::UnresponsiveLast,
            8..=27 => TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 42.0, // 40 ms effective: below the 58.5 ms US gate
            },
            _ => TraceShape::Diff {
                first_ms: 2.0,
                last_ms: 72.0, // 70 ms effective: candidate
            },
        };
        let rec = build_trace(
            format!("vus-s{idx:03}"),
            vantage,
            &format!("vtgt{idx}.us-testbed.test"),
            addr,
            None,
            Stage::SourceBased,
            40_000 + seq,
            shape,
        );
        b.source.push_str(&traceroute_to_json_line(&rec));
        b.source.push('\n');
        seq += 1;
        if idx >= 28 {
            let (_, asn) = VALIDATION_COUNTRIES[idx / 40];
            let shape = if idx < 30 {
                TraceShape::Diff {
                    first_ms: 0.5,
                    last_ms: 2.5, // 500 km in 2 ms: infeasible
                }
            } else {
                TraceShape::Diff {
                    first_ms: 2.0,
                    last_ms: 42.0,
                }
            };
            let rec = build_trace(
                format!("vus-d{idx:03}"),
                ascp(asn, "US"),
                &addr.to_string(),
                addr,
                Some(probe_for(idx)),
                Stage::DestinationBased,
                41_000 + seq,
                shape,
            );
            b.dest.push_str(&traceroute_to_json_line(&rec));
            b.dest.push('\n');
        }
        if idx >= 30 {
            let hostname = match idx {
                30..=128 => String::new(),
                129 => format!("sea-{}.access.fixture-isp.test", addr.to_string().replace('.', "-")),
                130 => format!("ord-{}.access.fixture-isp.test", addr.to_string().replace('.', "-")),
                131 => format!("mia-{}.access.fixture-isp.test", addr.to_string().replace('.', "-")),
                _ => format!(
                    "{}-{}.access.fixture-isp.test",
                    ["iad", "jfk"][idx % 2],
                    addr.to_string().replace('.', "-")
                ),
            };
            let _ = writeln!(b.rdns, "{addr},{hostname}");
        }
    }
    b
}

// 1000 DSCPs advertised by a cloud provider in the EU, all with adequate
// ground truth. Geolocation has no country for 36 and wrongly places 270
// outside the EU; the stages discard all 270, so no false positives remain.
fn aws_eu() -> BundleData {
    let mut b = BundleData::default();
    b.geodb.push_str("ip,country,lat,lon,granularity\n");
    b.rdns.push_str("ip,hostname\n");
    b.truth.push_str("ip,country,group\n");
    let eu = ["DE", "FR", "IE", "ES", "PL"];
    let mut seq = 0i64;
    for idx in 0..1000usize {
        let addr = ip(21, idx);
        let truth_country = eu[idx / 200];
        let _ = writeln!(b.truth, "{addr},{truth_country},aws");
        if idx < 36 {
            let _ = writeln!(b.geodb, "{addr},,,,none");
        } else if idx == 36 {
            let p = location(idx);
            let _ = writeln!(b.geodb, "{addr},PK,{},{},city", p.lat, p.lon);
        } else if idx < 306 {
            let p = location(idx);
            let _ = writeln!(b.geodb, "{addr},US,{},{},city", p.lat, p.lon);
        } else {
            let p = location(idx);
            let _ = writeln!(b.geodb, "{addr},{},{},{},city", eu[idx % 5], p.lat, p.lon);
        }
        if (36..306).contains(&idx) {
            let (country, asn) = VALIDATION_COUNTRIES[idx % 5];
            let shape = match idx {
                36..=235 => TraceShape::UnresponsiveLast,
                236..=295 => TraceShape::Diff {
                    first_ms: 2.0,
                    last_ms: 42.0,
                },
                _ => TraceShape::Diff {
                    first_ms: 2.0,
                    last_ms: 72.0,
                },
            };
            let rec = build_trace(
                format!("vaws-s{idx:04}"),
                ascp(asn, country),
                &format!("aws{idx}.eu-hitlist.test"),
                addr,
                None,
                Stage::SourceBased,
                50_000 + seq,
                shape,
            );
            b.source.push_str(&traceroute_to_json_line(&rec));
            b.source.push('\n');
            seq += 1;
        }
        if (296..306).contains(&idx) {
            let (_, asn) = VALIDATION_COUNTRIES[idx % 5];
            let dest_country = "US"; // every gate-passing DSCP was geolocated to the US
            let shape = if idx < 302 {
                TraceShape::UnresponsiveLast
            } else {
                TraceShape::Diff {
                    first_ms: 0.5,
                    last_ms: 2.5,
                }
            };
            let rec = build_trace(
                format!("vaws-d{idx:04}"),
                ascp(asn, dest_country),
                &addr.to_string(),
                addr,
                Some(probe_for(idx)),
                Stage::DestinationBased,
                51_000 + seq,
                shape,
            );
            b.dest.push_str(&traceroute_to_json_line(&rec));
            b.dest.push('\n');
        }
    }
    b
}

fn write_bundle_files(dir: &Path, data: &BundleData) -> std::io::Result<()> {
    let manifest = r#"audit_date = "2022-08-15"
output_dir = "out"

[inputs]
crawls = "crawls.jsonl"
source_traceroutes = "traceroutes_source.jsonl"
dest_traceroutes = "traceroutes_dest.jsonl"
geodb = "geodb.csv"
rdns = "rdns.csv"
truth = "truth.csv"
ledger = "ledger.csv"
thresholds = "thresholds.toml"
"#;
    write(dir, "traceroutes_source.jsonl", &data.source)?;
    write(dir, "traceroutes_dest.jsonl", &data.dest)?;
    write(dir, "crawls.jsonl", "")?;
    write(dir, "geodb.csv", &data.geodb)?;
    write(dir, "rdns.csv", &data.rdns)?;
    write(dir, "truth.csv", &data.truth)?;
    write(dir, "ledger.csv", defaults::ADEQUACY_LEDGER_CSV)?;
    write(dir, "thresholds.toml", defaults::THRESHOLDS_TOML)?;
    write(dir, "manifest.toml", manifest)?;
    Ok(())
}

/// Writes the US-testbed bundle.
pub fn write_us_testbed(dir: &Path) -> std::io::Result<()> {
    write_bundle_files(dir, &us_testbed())
}

/// Writes the adequate-cloud bundle.
pub fn write_aws(dir: &Path) -> std::io::Result<()> {
    write_bundle_files(dir, &aws_eu())
}

/// Writes both testbeds as a single bundle; the overall metrics combine
/// 170 true positives with zero false positives.
pub fn write_combined(dir: &Path) -> std::io::Result<()> {
    let us = us_testbed();
    let aws = aws_eu();
    let strip_header = |s: &str| s.splitn(2, '\n').nth(1).unwrap_or("").to_string();
    let combined = BundleData {
        source: format!("{}{}", us.source, aws.source),
        dest: format!("{}{}", us.dest, aws.dest),
        geodb: format!("{}{}", us.geodb, strip_header(&aws.geodb)),
        rdns: format!("{}{}", us.rdns, strip_header(&aws.rdns)),
        truth: format!("{}{}", us.truth, strip_header(&aws.truth)),
    };
    write_bundle_files(dir, &combined)
}
