//! `locaudit`: batch auditing of data-localization compliance over recorded
//! crawl and traceroute evidence.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data-quality failure
//! under `--strict`, 64 usage error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use locaudit_core::audit::{run_audit, run_validation_audit, CdfSeries};
use locaudit_core::manifest::{load_inputs, parse_truth, RunManifest};
use locaudit_core::model::Region;
use locaudit_core::report;
use locaudit_core::stats::{latency_cdf, one_way_anova};

mod fetch;

#[derive(Parser)]
#[command(
    name = "locaudit",
    version,
    about = "Audits which servers and trackers serving EU users sit in countries without an adequacy decision"
)]
struct Cli {
    /// Run manifest (TOML) naming every input file.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Audit date (YYYY-MM-DD), overriding the manifest.
    #[arg(long, global = true)]
    audit_date: Option<String>,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Treat any input parse failure as fatal (exit 2).
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every pipeline stage and write all report files.
    Audit,
    /// Run the pipeline and score it against ground truth; writes metrics.json.
    Validate {
        /// Ground-truth CSV (ip,country,group); defaults to the manifest's.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// One-way ANOVA over the rate columns of a rates.csv, grouped by region.
    Anova {
        /// rates.csv: country,pct_traceroutes,pct_ips,pct_tracker_ips
        rates: PathBuf,
        /// regions.csv: country,region
        regions: PathBuf,
    },
    /// Parse every manifest input and report per-file error accounting.
    IngestCheck,
    /// Create measurements and fetch results through the live or replay transport.
    Fetch(fetch::FetchArgs),
    /// Empirical latency CDF of one traceroute file.
    Cdf {
        /// Traceroute JSON-lines file.
        #[arg(long)]
        traceroutes: PathBuf,
        /// Measurement campaign: source or destination.
        #[arg(long)]
        stage: String,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_svg: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn data_quality(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn audit_date_override(cli: &Cli) -> Result<Option<chrono::NaiveDate>, Failure> {
    cli.audit_date
        .as_deref()
        .map(|s| {
            chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|_| Failure::config(format!("invalid --audit-date {s:?}")))
        })
        .transpose()
}

fn load_manifest(cli: &Cli) -> Result<RunManifest, Failure> {
    let path = cli
        .manifest
        .as_ref()
        .ok_or_else(|| Failure::config("--manifest is required for this subcommand"))?;
    let date = audit_date_override(cli)?;
    RunManifest::load(path, date).map_err(|e| Failure::config(e.to_string()))
}

fn strict_gate(cli: &Cli, parse_errors: &[(String, locaudit_core::ingest::ParseError)]) -> Result<(), Failure> {
    if cli.strict && !parse_errors.is_empty() {
        let (file, first) = &parse_errors[0];
        return Err(Failure::data_quality(format!(
            "{} input line(s) failed to parse; first: {file}: {first}",
            parse_errors.len()
        )));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Audit => cmd_audit(cli),
        Command::Validate { truth } => cmd_validate(cli, truth.as_deref()),
        Command::Anova { rates, regions } => cmd_anova(rates, regions),
        Command::IngestCheck => cmd_ingest_check(cli),
        Command::Fetch(args) => fetch::cmd_fetch(args).map_err(|e| e.into()),
        Command::Cdf {
            traceroutes,
            stage,
            out_csv,
            out_svg,
        } => cmd_cdf(traceroutes, stage, out_csv, out_svg.as_deref()),
    }
}

fn cmd_audit(cli: &Cli) -> Result<(), Failure> {
    let manifest = load_manifest(cli)?;
    let loaded = load_inputs(&manifest).map_err(|e| Failure::config(e.to_string()))?;
    let report = run_audit(&loaded.inputs)?;
    report::write_audit_reports(&report, &manifest.output_dir)?;
    let f = &report.funnel;
    println!(
        "geodb: {} candidates -> {} non-adequate ({} adequate, {} unknown set aside)",
        f.geodb_candidates, f.geodb_kept, f.geodb_adequate, f.geodb_unknown
    );
    println!(
        "source: {} traceroutes -> {} passed ({} excluded, {} below gate); {} unique IPs",
        f.source_input, f.source_passed, f.source_excluded_policy, f.source_below_gate, f.source_unique_ips
    );
    println!(
        "destination: {} measurements -> {} passed ({} unresponsive/granularity, {} speed-of-light)",
        f.dest_input,
        f.dest_passed,
        f.dest_excluded_unresponsive + f.dest_excluded_granularity,
        f.dest_sol_discarded
    );
    println!(
        "rdns: {} measurements -> {} passed ({} adequate excluded; {} no hostname, {} no geohint)",
        f.rdns_input, f.rdns_passed, f.rdns_indicates_adequate, f.rdns_no_hostname, f.rdns_no_geohint
    );
    println!(
        "final sample: {} unique IPs, {} instances",
        f.final_unique_ips, f.final_instances
    );
    println!("reports written to {}", manifest.output_dir.display());
    if !loaded.parse_errors.is_empty() {
        println!("parse failures: {}", loaded.parse_errors.len());
    }
    strict_gate(cli, &loaded.parse_errors)
}

fn cmd_validate(cli: &Cli, truth_path: Option<&std::path::Path>) -> Result<(), Failure> {
    let manifest = load_manifest(cli)?;
    let loaded = load_inputs(&manifest).map_err(|e| Failure::config(e.to_string()))?;
    let truth = match truth_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            parse_truth(&text).map_err(|e| Failure::config(e.to_string()))?
        }
        None => loaded
            .truth
            .clone()
            .ok_or_else(|| Failure::config("no truth file: pass --truth or set inputs.truth"))?,
    };
    let (funnel, validation) = run_validation_audit(&loaded.inputs, &truth)?;
    report::write_validation_reports(&funnel, &validation, &manifest.output_dir)?;
    print!("{}", report::metrics_json(&validation));
    strict_gate(cli, &loaded.parse_errors)
}

fn cmd_anova(rates: &std::path::Path, regions: &std::path::Path) -> Result<(), Failure> {
    let rates_text = std::fs::read_to_string(rates)
        .map_err(|e| Failure::config(format!("{}: {e}", rates.display())))?;
    let regions_text = std::fs::read_to_string(regions)
        .map_err(|e| Failure::config(format!("{}: {e}", regions.display())))?;
    let region_map = locaudit_core::model::parse_region_map(regions_text.as_bytes())?;

    let mut groups: [BTreeMap<Region, Vec<f64>>; 3] = Default::default();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(rates_text.as_bytes());
    for row in rdr.records() {
        let row = row.map_err(|e| Failure::config(format!("rates: {e}")))?;
        let country = locaudit_core::model::CountryCode::parse(row.get(0).unwrap_or(""))?;
        let Some(region) = region_map.get(&country) else {
            continue;
        };
        for col in 0..3 {
            let value: f64 = row
                .get(col + 1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Failure::config(format!("rates: bad value for {country}")))?;
            groups[col].entry(*region).or_default().push(value);
        }
    }
    let mut out = serde_json::Map::new();
    for (name, group) in ["pct_traceroutes", "pct_ips", "pct_tracker_ips"].iter().zip(&groups) {
        let result = one_way_anova(group)?;
        out.insert(
            name.to_string(),
            serde_json::to_value(&result).expect("anova serializes"),
        );
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(out)).expect("json serializes")
    );
    Ok(())
}

fn cmd_ingest_check(cli: &Cli) -> Result<(), Failure> {
    let manifest = load_manifest(cli)?;
    let loaded = load_inputs(&manifest).map_err(|e| Failure::config(e.to_string()))?;
    let mut per_file: BTreeMap<&str, usize> = BTreeMap::new();
    for (file, _) in &loaded.parse_errors {
        *per_file.entry(file).or_insert(0) += 1;
    }
    println!(
        "records: {} source traceroutes, {} destination traceroutes, {} crawls, {} geo rows, {} rdns rows",
        loaded.inputs.source_traces.len(),
        loaded.inputs.dest_traces.len(),
        loaded.inputs.crawls.len(),
        loaded.inputs.geodb.len(),
        loaded.inputs.rdns.len()
    );
    if loaded.parse_errors.is_empty() {
        println!("all inputs parsed cleanly");
    } else {
        for (file, count) in &per_file {
            println!("{file}: {count} failed line(s)");
        }
        for (file, err) in loaded.parse_errors.iter().take(10) {
            println!("  {file}: {err}");
        }
    }
    strict_gate(cli, &loaded.parse_errors)
}

fn cmd_cdf(
    traceroutes: &std::path::Path,
    stage: &str,
    out_csv: &std::path::Path,
    out_svg: Option<&std::path::Path>,
) -> Result<(), Failure> {
    use locaudit_core::ingest::{parse_traceroutes, Stage};
    use locaudit_core::latency::{extract, stage_policy, PolicyDecision};
    let stage = match stage {
        "source" => Stage::SourceBased,
        "destination" => Stage::DestinationBased,
        other => return Err(Failure::config(format!("invalid --stage {other:?}"))),
    };
    let text = std::fs::read_to_string(traceroutes)
        .map_err(|e| Failure::config(format!("{}: {e}", traceroutes.display())))?;
    let (records, errors) = parse_traceroutes(&text, stage);
    if !errors.is_empty() {
        eprintln!("warning: {} line(s) failed to parse", errors.len());
    }
    let latencies: Vec<f64> = records
        .iter()
        .filter_map(|tr| match stage_policy(&extract(tr), stage) {
            PolicyDecision::Use { effective_ms, .. } => Some(effective_ms),
            PolicyDecision::Exclude(_) => None,
        })
        .collect();
    let series = CdfSeries {
        candidates: latency_cdf(&latencies)?,
        confirmed: Vec::new(),
    };
    std::fs::write(out_csv, report::cdf_csv(&series))
        .map_err(|e| Failure::config(format!("{}: {e}", out_csv.display())))?;
    if let Some(svg_path) = out_svg {
        std::fs::write(svg_path, report::cdf_svg(&series, "Latency CDF"))
            .map_err(|e| Failure::config(format!("{}: {e}", svg_path.display())))?;
    }
    println!("{} usable latencies -> {}", latencies.len(), out_csv.display());
    Ok(())
}
