//! Acceptance suite: every criterion runs at its stated tolerance and
//! prints one pass line (visible with `--nocapture`). A failed assertion is
//! the fail line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use locaudit_core::geodesy::{haversine_km, implied_speed, sol_feasible, SolConfig, SolVerdict};
use locaudit_core::model::{CountryCode, GeoPoint, Region};
use locaudit_core::stats::{flow_matrix, one_way_anova, top_k_coverage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn locaudit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_locaudit"))
}

fn gen_paper_bundle(dir: &Path) -> PathBuf {
    locaudit_fixtures::paper::write_bundle(dir).expect("bundle generation");
    dir.join("manifest.toml")
}

fn parse_funnel(path: &Path) -> BTreeMap<String, Vec<u64>> {
    let text = std::fs::read_to_string(path).expect("funnel.csv exists");
    let mut rows = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut fields = line.split(',');
        let stage = fields.next().unwrap().to_string();
        let values: Vec<u64> = fields.filter_map(|f| f.parse().ok()).collect();
        rows.insert(stage, values);
    }
    rows
}

/// Criterion 1: the bundled fixture set reproduces the published funnel
/// exactly, in under 10 seconds.
#[test]
fn criterion_1_funnel_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_paper_bundle(dir.path());
    let start = Instant::now();
    let status = locaudit()
        .args(["--manifest", manifest.to_str().unwrap(), "audit"])
        .status()
        .expect("audit runs");
    let elapsed = start.elapsed();
    assert!(status.success(), "audit exited with {status}");
    assert!(elapsed.as_secs_f64() < 10.0, "audit took {elapsed:?}");

    let funnel = parse_funnel(&dir.path().join("out/funnel.csv"));
    assert_eq!(funnel["source"], vec![9905, 158, 8488, 1259, 598]);
    assert_eq!(funnel["destination"][..4], [598, 76, 89, 433]);
    assert_eq!(funnel["rdns"], vec![433, 128, 37, 396, 247]);
    assert_eq!(funnel["rdns_no_hostname"][0], 45);
    assert_eq!(funnel["rdns_no_geohint"][0], 83);
    assert_eq!(funnel["rdns_indicates_adequate"][0], 37);
    assert_eq!(funnel["final_unique_ips"][0], 247);
    assert_eq!(funnel["final_instances"][0], 1233);
    println!(
        "PASS criterion 1: funnel (9905,158,8488,1259/598) -> (598,76,89,433) -> (433,45+83,37,396), final 247 IPs / 1233 instances, {:.2}s",
        elapsed.as_secs_f64()
    );
}

fn run_validate(manifest: &Path) -> serde_json::Value {
    let out = locaudit()
        .args(["--manifest", manifest.to_str().unwrap(), "validate"])
        .output()
        .expect("validate runs");
    assert!(out.status.success(), "validate exited with {}", out.status);
    serde_json::from_slice(&out.stdout).expect("metrics json on stdout")
}

/// Criterion 2: validation metrics on the two testbeds, in under 5 seconds.
#[test]
fn criterion_2_validation_metrics() {
    let dir = tempfile::tempdir().unwrap();
    locaudit_fixtures::validation::write_us_testbed(&dir.path().join("us")).unwrap();
    locaudit_fixtures::validation::write_aws(&dir.path().join("aws")).unwrap();
    locaudit_fixtures::validation::write_combined(&dir.path().join("combined")).unwrap();

    let start = Instant::now();
    let us = run_validate(&dir.path().join("us/manifest.toml"));
    assert_eq!(us["overall"]["tp"], 170);
    assert_eq!(us["overall"]["fn"], 30);
    assert_eq!(us["overall"]["tpr"], 0.85);

    let aws = run_validate(&dir.path().join("aws/manifest.toml"));
    assert_eq!(aws["overall"]["fp"], 0);
    assert_eq!(aws["overall"]["tn"], 1000);
    assert!(aws["overall"]["precision"].is_null(), "no positives: precision undefined");

    // Precision 1.0 is the paper's cross-experiment figure: 170 true
    // positives against zero false positives.
    let combined = run_validate(&dir.path().join("combined/manifest.toml"));
    assert_eq!(combined["overall"]["tp"], 170);
    assert_eq!(combined["overall"]["fp"], 0);
    assert_eq!(combined["overall"]["tn"], 1000);
    assert_eq!(combined["overall"]["precision"], 1.0);
    assert_eq!(combined["groups"]["us_testbed"]["tpr"], 0.85);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "validate took {elapsed:?}");
    println!(
        "PASS criterion 2: TP=170 FN=30 tpr=0.85; FP=0 TN=1000; precision=1.0, {:.2}s",
        elapsed.as_secs_f64()
    );
}

// Brute-force F statistic straight from the definition sums; kept
// independent of the library's sum-of-squares route.
fn brute_force_f(groups: &BTreeMap<Region, Vec<f64>>) -> f64 {
    let n: usize = groups.values().map(|g| g.len()).sum();
    let k = groups.len();
    let grand_mean: f64 = groups.values().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for values in groups.values() {
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        ssb += values.len() as f64 * (mean - grand_mean).powi(2);
        for v in values {
            ssw += (v - mean).powi(2);
        }
    }
    (ssb / (k - 1) as f64) / (ssw / (n - k) as f64)
}

/// Criterion 3: ANOVA p-values from the published rate table, plus
/// brute-force agreement of F on 100 random instances to 1e-10 relative.
#[test]
fn criterion_3_anova() {
    let dir = tempfile::tempdir().unwrap();
    locaudit_fixtures::stats_tables::write_tables(dir.path()).unwrap();
    let out = locaudit()
        .arg("anova")
        .arg(dir.path().join("rates_table.csv"))
        .arg(dir.path().join("regions.csv"))
        .output()
        .expect("anova runs");
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let tracker_p = json["pct_tracker_ips"]["p_value"].as_f64().unwrap();
    let server_p = json["pct_ips"]["p_value"].as_f64().unwrap();
    assert!(
        (0.005..=0.03).contains(&tracker_p),
        "tracker p = {tracker_p}"
    );
    assert!((0.15..=0.40).contains(&server_p), "server p = {server_p}");

    let mut rng = ChaCha8Rng::seed_from_u64(0x4e0a);
    let regions = [Region::Northern, Region::Southern, Region::Eastern, Region::Western];
    for _ in 0..100 {
        let k = rng.gen_range(2..=4);
        let mut groups: BTreeMap<Region, Vec<f64>> = BTreeMap::new();
        for region in regions.iter().take(k) {
            let size = rng.gen_range(5..30);
            groups.insert(*region, (0..size).map(|_| rng.gen_range(0.0..10.0)).collect());
        }
        let got = one_way_anova(&groups).unwrap().f_stat;
        let want = brute_force_f(&groups);
        let rel = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        assert!(rel < 1e-10, "relative error {rel}");
    }
    println!(
        "PASS criterion 3: tracker p = {tracker_p:.4} in [0.005, 0.03], server p = {server_p:.4} in [0.15, 0.40]; F matches brute force to 1e-10 on 100 instances"
    );
}

/// Criterion 4: published-table aggregates.
#[test]
fn criterion_4_aggregates() {
    let rates = locaudit_fixtures::stats_tables::RATE_TABLE;
    let ips_mean: f64 = rates.iter().map(|(_, _, ips, _)| ips).sum::<f64>() / rates.len() as f64;
    let tracker_mean: f64 =
        rates.iter().map(|(_, _, _, trk)| trk).sum::<f64>() / rates.len() as f64;
    assert!((ips_mean - 2.3).abs() <= 0.05, "ips mean {ips_mean}");
    assert!((tracker_mean - 1.4).abs() <= 0.05, "tracker mean {tracker_mean}");

    let csv = locaudit_fixtures::stats_tables::flows_csv();
    let flows: Vec<(CountryCode, CountryCode)> = csv
        .lines()
        .skip(1)
        .map(|line| {
            let (src, dst) = line.split_once(',').unwrap();
            (CountryCode::parse(src).unwrap(), CountryCode::parse(dst).unwrap())
        })
        .collect();
    let total = flows.len() as u64;
    let matrix = flow_matrix(flows);
    assert_eq!(matrix.values().sum::<u64>(), total, "flow conservation");
    assert_eq!(matrix[&(CountryCode::parse("RO").unwrap(), CountryCode::parse("TR").unwrap())], 308);
    let (top, coverage) = top_k_coverage(&matrix, 10);
    assert_eq!(top.len(), 10);
    assert!((coverage - 97.7).abs() <= 0.05, "coverage {coverage}");
    println!(
        "PASS criterion 4: ips mean {ips_mean:.3} = 2.3 +/- 0.05, tracker mean {tracker_mean:.3} = 1.4 +/- 0.05, top-10 coverage {coverage:.3}% = 97.7 +/- 0.05"
    );
}

// An independent great-circle formula (spherical Vincenty via atan2),
// numerically stable at all separations.
fn oracle_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, l1) = (a.lat.to_radians(), a.lon.to_radians());
    let (p2, l2) = (b.lat.to_radians(), b.lon.to_radians());
    let dl = l2 - l1;
    let y = ((p2.cos() * dl.sin()).powi(2)
        + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2))
    .sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    locaudit_core::geodesy::EARTH_RADIUS_KM * y.atan2(x)
}

/// Criterion 5: geodesy properties on random inputs.
#[test]
fn criterion_5_geodesy_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e0d);
    for _ in 0..1000 {
        let a = GeoPoint::new(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0)).unwrap();
        let b = GeoPoint::new(rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..=180.0)).unwrap();
        let d_ab = haversine_km(a, b);
        let d_ba = haversine_km(b, a);
        assert_eq!(d_ab.to_bits(), d_ba.to_bits(), "symmetry must be exact");
        assert!(d_ab <= 20015.1, "distance {d_ab}");
        assert!(d_ab >= 0.0);
        let oracle = oracle_distance_km(a, b);
        let rel = (d_ab - oracle).abs() / oracle.max(1e-12);
        assert!(rel < 1e-9, "distance {d_ab} vs oracle {oracle}: rel {rel}");
    }

    // Monotonicity: at fixed distance, increasing the RTT never flips
    // Feasible back to Infeasible.
    let cfg = SolConfig::default();
    for _ in 0..10_000 {
        let d = rng.gen_range(0.0..20000.0);
        let rtt = rng.gen_range(0.001..500.0);
        let more_rtt = rtt + rng.gen_range(0.0..500.0);
        let v1 = sol_feasible(d, rtt, &cfg).unwrap();
        let v2 = sol_feasible(d, more_rtt, &cfg).unwrap();
        assert!(
            !(v1 == SolVerdict::Feasible && v2 == SolVerdict::Infeasible),
            "monotonicity violated at d={d} rtt={rtt}->{more_rtt}"
        );
        assert!(implied_speed(d, more_rtt).unwrap() <= implied_speed(d, rtt).unwrap());
    }
    println!("PASS criterion 5: 1000 random pairs symmetric/bounded/oracle-matched to 1e-9; speed-of-light monotone on 10000 pairs");
}

/// Criterion 6: funnel conservation on a randomized 10,000-candidate
/// fixture, the stage-policy subset contract, and byte-identical reruns.
#[test]
fn criterion_6_filter_semantics() {
    use locaudit_core::audit::{run_audit, AuditInputs};
    use locaudit_core::ingest::{Hop, HopReply, Stage, TraceTarget, TracerouteRecord};
    use locaudit_core::latency::{stage_policy, Basis, ExtractionVerdict, LatencyExtraction, PolicyDecision};
    use locaudit_core::model::{GeoRecord, Granularity};

    let mut rng = ChaCha8Rng::seed_from_u64(0xf11e);
    let countries = ["US", "RU", "TR", "IN", "DE", "CA"];
    let mut inputs =
        AuditInputs::with_defaults(chrono::NaiveDate::from_ymd_opt(2022, 8, 15).unwrap());
    let vantage = locaudit_core::model::Ascp::new(64900, CountryCode::parse("DE").unwrap()).unwrap();
    for i in 0..10_000usize {
        let ip: std::net::IpAddr =
            format!("10.{}.{}.{}", i / 65536, (i / 256) % 256, i % 256).parse().unwrap();
        // Geolocation: known/unknown, adequate/non-adequate, city/country.
        match rng.gen_range(0..10) {
            0 => {}
            1 => {
                inputs.geodb.insert(ip, GeoRecord { ip, country: None, point: None, granularity: Granularity::None });
            }
            _ => {
                let country = CountryCode::parse(countries[rng.gen_range(0..countries.len())]).unwrap();
                let city = rng.gen_bool(0.7);
                inputs.geodb.insert(ip, GeoRecord {
                    ip,
                    country: Some(country),
                    point: city.then(|| GeoPoint::new(rng.gen_range(-60.0..60.0), rng.gen_range(-120.0..120.0)).unwrap()),
                    granularity: if city { Granularity::City } else { Granularity::Country },
                });
            }
        }
        let mk_trace = |rng: &mut ChaCha8Rng, stage: Stage, n: usize| {
            let mut hops = Vec::new();
            if rng.gen_bool(0.9) {
                hops.push(Hop { index: 1, replies: vec![HopReply { from_ip: Some("10.255.0.1".parse().unwrap()), rtt_ms: Some(rng.gen_range(0.5..100.0)) }] });
            } else {
                hops.push(Hop { index: 1, replies: vec![] });
            }
            if rng.gen_bool(0.9) {
                let from = if rng.gen_bool(0.9) { ip } else { "10.255.0.2".parse().unwrap() };
                hops.push(Hop { index: 7, replies: vec![HopReply { from_ip: Some(from), rtt_ms: Some(rng.gen_range(0.5..200.0)) }] });
            }
            TracerouteRecord {
                measurement_id: format!("r{i}-{n}"),
                source: vantage,
                probe_point: rng.gen_bool(0.8).then(|| GeoPoint::new(rng.gen_range(-60.0..60.0), rng.gen_range(-120.0..120.0)).unwrap()),
                target: TraceTarget::parse(&format!("d{i}.rand.test")).unwrap(),
                dst_ip: ip,
                hops,
                stage_tag: stage,
                timestamp: chrono::TimeZone::timestamp_opt(&chrono::Utc, 1_660_521_600, 0).single().unwrap(),
            }
        };
        for n in 0..rng.gen_range(1..=3usize) {
            inputs.source_traces.push(mk_trace(&mut rng, Stage::SourceBased, n));
        }
        if rng.gen_bool(0.5) {
            inputs.dest_traces.push(mk_trace(&mut rng, Stage::DestinationBased, 9));
        }
    }
    let report = run_audit(&inputs).unwrap();
    let f = &report.funnel;
    assert!(f.conservation_ok(), "conservation violated: {f:?}");
    assert!(f.source_unique_ips <= f.geodb_kept);
    assert!(f.dest_unique_ips <= f.source_unique_ips);
    assert!(f.final_unique_ips <= f.dest_unique_ips);

    // Stage-policy contract: anything the destination stage excludes, the
    // source stage excludes as well.
    for _ in 0..10_000 {
        let verdict = match rng.gen_range(0..4) {
            0 => ExtractionVerdict::Usable,
            1 => ExtractionVerdict::ExcludedUnresponsive,
            _ => ExtractionVerdict::ExcludedFirstExceedsLast,
        };
        let last = rng.gen_range(1.0..200.0);
        let x = match verdict {
            ExtractionVerdict::Usable => LatencyExtraction {
                first_hop_rtt_ms: Some(1.0),
                last_hop_rtt_ms: Some(last),
                effective_ms: Some(last - 1.0),
                basis: Some(Basis::DiffFirstLast),
                verdict,
            },
            ExtractionVerdict::ExcludedUnresponsive => LatencyExtraction {
                first_hop_rtt_ms: Some(1.0),
                last_hop_rtt_ms: None,
                effective_ms: None,
                basis: None,
                verdict,
            },
            ExtractionVerdict::ExcludedFirstExceedsLast => LatencyExtraction {
                first_hop_rtt_ms: Some(last + 1.0),
                last_hop_rtt_ms: Some(last),
                effective_ms: None,
                basis: None,
                verdict,
            },
        };
        let dest_excluded = matches!(stage_policy(&x, Stage::DestinationBased), PolicyDecision::Exclude(_));
        let source_excluded = matches!(stage_policy(&x, Stage::SourceBased), PolicyDecision::Exclude(_));
        assert!(!dest_excluded || source_excluded);
    }

    // Determinism: two audit runs over the same bundle, one of them with a
    // different worker count, must be byte-identical across every report.
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_paper_bundle(dir.path());
    let run = |out_dir: &str, jobs: Option<&str>| {
        let full = dir.path().join(out_dir);
        let mut manifest_copy = std::fs::read_to_string(&manifest).unwrap();
        manifest_copy = manifest_copy.replace("output_dir = \"out\"", &format!("output_dir = \"{out_dir}\""));
        let manifest_path = dir.path().join(format!("manifest-{out_dir}.toml"));
        std::fs::write(&manifest_path, manifest_copy).unwrap();
        let mut cmd = locaudit();
        cmd.args(["--manifest", manifest_path.to_str().unwrap()]);
        if let Some(jobs) = jobs {
            cmd.args(["--jobs", jobs]);
        }
        let status = cmd.arg("audit").status().unwrap();
        assert!(status.success());
        full
    };
    let out1 = run("out1", None);
    let out2 = run("out2", Some("2"));
    let mut names: Vec<_> = std::fs::read_dir(&out1).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let a = std::fs::read(out1.join(&name)).unwrap();
        let b = std::fs::read(out2.join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between runs");
    }
    println!("PASS criterion 6: conservation on 10000 random candidates, destination exclusions subset of source exclusions, reruns byte-identical");
}

/// Criterion 7: cookie identifier counts and cascade stability.
#[test]
fn criterion_7_cookies_and_cascade() {
    use locaudit_core::labeling::{label_tracker, TrackerDb, TrackerTier};
    use locaudit_core::model::DomainName;

    let dir = tempfile::tempdir().unwrap();
    let manifest = gen_paper_bundle(dir.path());
    let status = locaudit()
        .args(["--manifest", manifest.to_str().unwrap(), "audit"])
        .status()
        .unwrap();
    assert!(status.success());
    let cookies = std::fs::read_to_string(dir.path().join("out/cookies.csv")).unwrap();
    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for line in cookies.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        counts.insert(fields[0], (fields[3].parse().unwrap(), fields[4].parse().unwrap()));
    }
    assert_eq!(counts["_ga"], (480, 146));
    assert_eq!(counts["_gid"], (443, 135));
    assert_eq!(counts["__gfp_64b"], (234, 84));
    assert_eq!(counts["_fbp"], (223, 63));

    // Tier precedence is stable under appending rules to later tiers.
    let mut rng = ChaCha8Rng::seed_from_u64(0xc00c);
    for _ in 0..1000 {
        let mut db = TrackerDb::default();
        let n1 = rng.gen_range(1..20);
        let n2 = rng.gen_range(0..20);
        let tier1: Vec<DomainName> = (0..n1)
            .map(|i| DomainName::parse(&format!("t1-{i}.example")).unwrap())
            .collect();
        let tier2: Vec<DomainName> = (0..n2)
            .map(|i| DomainName::parse(&format!("t2-{i}.example")).unwrap())
            .collect();
        db.load_tier(TrackerTier::EasyList, tier1.clone());
        db.load_tier(TrackerTier::HostsList, tier2.clone());
        let probe = if n2 > 0 && rng.gen_bool(0.5) {
            tier2[rng.gen_range(0..n2)].clone()
        } else {
            tier1[rng.gen_range(0..n1)].clone()
        };
        let before = label_tracker(&probe, &db).expect("probe is listed");
        let appended: Vec<DomainName> = (0..rng.gen_range(1..10))
            .map(|i| DomainName::parse(&format!("t3-{i}.example")).unwrap())
            .chain(std::iter::once(probe.clone()))
            .collect();
        db.extend_tier(TrackerTier::Manual, appended);
        let after = label_tracker(&probe, &db).expect("probe is still listed");
        assert_eq!(before, after, "tier changed after manual append");
    }
    println!("PASS criterion 7: _ga (480,146), _gid (443,135), __gfp_64b (234,84), _fbp (223,63); cascade stable over 1000 random dbs");
}

/// Criterion 8: the replay transport makes a full fetch-to-ingest round
/// possible with zero network access.
#[test]
fn criterion_8_replay_zero_network() {
    use locaudit_client::{create_measurement, fetch_results, MeasurementSpec, ProbeRef, ReplayTransport, Transport};
    let dir = tempfile::tempdir().unwrap();
    let transport = Transport::Replay(ReplayTransport::new(dir.path()));
    let spec = MeasurementSpec::new(
        vec!["cdn.example.net".into()],
        vec![ProbeRef {
            id: "p1".into(),
            asn: 64600,
            country: CountryCode::parse("RO").unwrap(),
        }],
    )
    .unwrap();
    let id = create_measurement(&spec, &transport).unwrap();
    let line = concat!(
        r#"{"msm_id":"m1","src_asn":64600,"src_country":"RO","target":"cdn.example.net","#,
        r#""dst_ip":"198.18.0.1","stage":"source","timestamp":"2022-08-15T12:00:00Z","#,
        r#""hops":[{"hop":1,"replies":[{"from":"10.0.0.1","rtt":2.0}]},"#,
        r#"{"hop":2,"replies":[{"from":"198.18.0.1","rtt":80.0}]}]}"#,
        "\n"
    );
    std::fs::write(dir.path().join(format!("{id}.jsonl")), line).unwrap();
    let fetched = fetch_results(&id, &transport).unwrap();
    let (records, errors) =
        locaudit_core::ingest::parse_traceroutes(&fetched, locaudit_core::ingest::Stage::SourceBased);
    assert!(errors.is_empty());
    assert_eq!(records.len(), 1);
    println!("PASS criterion 8: replay transport round-trips measurement results into the ingest schema offline");
}
