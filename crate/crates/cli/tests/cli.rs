//! Command-line behavior: exit codes, help surfaces, strict mode, and
//! degenerate inputs.

use std::path::Path;
use std::process::Command;

fn locaudit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_locaudit"))
}

fn write_minimal_bundle(dir: &Path) {
    std::fs::write(dir.join("crawls.jsonl"), "").unwrap();
    std::fs::write(dir.join("src.jsonl"), "").unwrap();
    std::fs::write(dir.join("dst.jsonl"), "").unwrap();
    std::fs::write(dir.join("geodb.csv"), "ip,country,lat,lon,granularity\n").unwrap();
    std::fs::write(dir.join("rdns.csv"), "ip,hostname\n").unwrap();
    std::fs::write(
        dir.join("manifest.toml"),
        r#"audit_date = "2022-08-15"
output_dir = "out"
[inputs]
crawls = "crawls.jsonl"
source_traceroutes = "src.jsonl"
dest_traceroutes = "dst.jsonl"
geodb = "geodb.csv"
rdns = "rdns.csv"
"#,
    )
    .unwrap();
}

#[test]
fn unknown_flag_exits_64() {
    let status = locaudit().arg("--definitely-not-a-flag").status().unwrap();
    assert_eq!(status.code(), Some(64));
    let status = locaudit().args(["audit", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(64));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["audit", "validate", "anova", "ingest-check", "fetch", "cdf"] {
        let out = locaudit().args([sub, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        assert!(!out.stdout.is_empty(), "{sub} --help prints usage");
    }
}

#[test]
fn empty_inputs_give_empty_reports_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_minimal_bundle(dir.path());
    let status = locaudit()
        .args(["--manifest", dir.path().join("manifest.toml").to_str().unwrap(), "audit"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for file in ["funnel.csv", "rates.csv", "flows.csv", "cookies.csv", "instances.csv"] {
        let path = dir.path().join("out").join(file);
        assert!(path.exists(), "{file} missing");
    }
    let rates = std::fs::read_to_string(dir.path().join("out/rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 1, "rates.csv is header-only");
    let instances = std::fs::read_to_string(dir.path().join("out/instances.csv")).unwrap();
    assert_eq!(instances.lines().count(), 1);
}

#[test]
fn missing_input_path_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write_minimal_bundle(dir.path());
    std::fs::remove_file(dir.path().join("geodb.csv")).unwrap();
    let out = locaudit()
        .args(["--manifest", dir.path().join("manifest.toml").to_str().unwrap(), "audit"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("geodb.csv"), "{stderr}");
}

#[test]
fn strict_mode_exits_two_on_parse_failures() {
    let dir = tempfile::tempdir().unwrap();
    write_minimal_bundle(dir.path());
    std::fs::write(dir.path().join("src.jsonl"), "this is not json\n").unwrap();
    let manifest = dir.path().join("manifest.toml");
    // Non-strict tolerates it.
    let status = locaudit()
        .args(["--manifest", manifest.to_str().unwrap(), "audit"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    // Strict fails with the data-quality code.
    let status = locaudit()
        .args(["--manifest", manifest.to_str().unwrap(), "--strict", "audit"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn validate_requires_well_formed_truth() {
    let dir = tempfile::tempdir().unwrap();
    write_minimal_bundle(dir.path());
    std::fs::write(dir.path().join("truth.csv"), "ip,country,group\nnot-an-ip,US,x\n").unwrap();
    let out = locaudit()
        .args([
            "--manifest",
            dir.path().join("manifest.toml").to_str().unwrap(),
            "validate",
            "--truth",
            dir.path().join("truth.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Empty truth is rejected by the scorer.
    std::fs::write(dir.path().join("truth.csv"), "ip,country,group\n").unwrap();
    let out = locaudit()
        .args([
            "--manifest",
            dir.path().join("manifest.toml").to_str().unwrap(),
            "validate",
            "--truth",
            dir.path().join("truth.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truth"));
}

#[test]
fn audit_date_override_flips_us_adequacy() {
    // With the audit dated after the US adequacy decision, US-geolocated
    // candidates are partitioned out before the source stage.
    let dir = tempfile::tempdir().unwrap();
    locaudit_fixtures::paper::write_bundle(dir.path()).unwrap();
    let manifest = dir.path().join("manifest.toml");
    let status = locaudit()
        .args([
            "--manifest",
            manifest.to_str().unwrap(),
            "--audit-date",
            "2024-01-01",
            "audit",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let funnel = std::fs::read_to_string(dir.path().join("out/funnel.csv")).unwrap();
    let source_row = funnel.lines().find(|l| l.starts_with("source,")).unwrap();
    let input: u64 = source_row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(input < 9905, "US-targeted traceroutes must drop out, got {input}");
}

#[test]
fn cdf_subcommand_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    locaudit_fixtures::paper::write_bundle(dir.path()).unwrap();
    let csv = dir.path().join("cdf.csv");
    let svg = dir.path().join("cdf.svg");
    let status = locaudit()
        .args([
            "cdf",
            "--traceroutes",
            dir.path().join("traceroutes_source.jsonl").to_str().unwrap(),
            "--stage",
            "source",
            "--out-csv",
            csv.to_str().unwrap(),
            "--out-svg",
            svg.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("series,x_ms,f\n"));
    assert!(csv_text.lines().count() > 2);
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert!(svg_text.trim_end().ends_with("</svg>"));
}

#[test]
fn fetch_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    std::fs::create_dir_all(&fixtures).unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"targets":["cdn.example.net"],"probes":[{"id":"p1","asn":64600,"country":"RO"}]}"#,
    )
    .unwrap();
    // First run: discover the deterministic measurement id.
    let out = locaudit()
        .args([
            "fetch",
            "--transport",
            "replay",
            "--fixture-dir",
            fixtures.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            dir.path().join("out.jsonl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "no fixture for the id yet");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let id = stderr
        .split("measurement not found: ")
        .nth(1)
        .map(|s| s.trim().to_string())
        .expect("error names the missing id");
    std::fs::write(fixtures.join(format!("{id}.jsonl")), "recorded-results\n").unwrap();
    let status = locaudit()
        .args([
            "fetch",
            "--transport",
            "replay",
            "--fixture-dir",
            fixtures.to_str().unwrap(),
            "--spec",
            spec.to_str().unwrap(),
            "--out",
            dir.path().join("out.jsonl").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("out.jsonl")).unwrap(),
        "recorded-results\n"
    );
}
