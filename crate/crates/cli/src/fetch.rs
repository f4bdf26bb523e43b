//! The `fetch` subcommand: measurement creation and result retrieval over
//! the live or replay transport.

use std::path::PathBuf;

use clap::Args;
use locaudit_client::{
    create_measurement, fetch_all, LiveTransport, MeasurementSpec, ProbeRef, ReplayTransport,
    RetryPolicy, Transport,
};
use serde::Deserialize;

/// Environment variable holding the live API key.
pub const API_KEY_ENV: &str = "LOCAUDIT_API_KEY";

#[derive(Args)]
pub struct FetchArgs {
    /// Transport: "replay" (fixture directory) or "live" (REST endpoint).
    #[arg(long, default_value = "replay")]
    pub transport: String,

    /// Fixture directory for the replay transport.
    #[arg(long)]
    pub fixture_dir: Option<PathBuf>,

    /// Base URL for the live transport; API key comes from LOCAUDIT_API_KEY.
    #[arg(long)]
    pub endpoint: Option<String>,

    /// Measurement spec JSON; when given, a measurement is created first
    /// and its results fetched.
    #[arg(long)]
    pub spec: Option<PathBuf>,

    /// Already-created measurement ids to fetch.
    #[arg(long)]
    pub measurement_id: Vec<String>,

    /// Output file for the fetched traceroute JSON-lines.
    #[arg(long)]
    pub out: PathBuf,

    /// Maximum in-flight requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,

    /// Pause between rate-limited retries, in milliseconds.
    #[arg(long, default_value_t = 1000)]
    pub sleep_ms: u64,
}

#[derive(Debug, Deserialize)]
struct SpecFile {
    targets: Vec<String>,
    probes: Vec<SpecProbe>,
    #[serde(default = "default_packets")]
    packets: u32,
    #[serde(default = "default_timeout")]
    timeout_ms: u32,
}

#[derive(Debug, Deserialize)]
struct SpecProbe {
    id: String,
    asn: u32,
    country: String,
}

fn default_packets() -> u32 {
    3
}

fn default_timeout() -> u32 {
    4000
}

pub fn cmd_fetch(args: &FetchArgs) -> anyhow::Result<()> {
    let transport = match args.transport.as_str() {
        "replay" => {
            let dir = args
                .fixture_dir
                .clone()
                .ok_or_else(|| anyhow::anyhow!("--fixture-dir is required with --transport replay"))?;
            Transport::Replay(ReplayTransport::new(dir))
        }
        "live" => {
            let endpoint = args
                .endpoint
                .clone()
                .ok_or_else(|| anyhow::anyhow!("--endpoint is required with --transport live"))?;
            let api_key = std::env::var(API_KEY_ENV)
                .map_err(|_| anyhow::anyhow!("set {API_KEY_ENV} for the live transport"))?;
            Transport::Live(LiveTransport::new(endpoint, api_key).with_retry(RetryPolicy {
                sleep_ms: args.sleep_ms,
                max_attempts: 5,
            }))
        }
        other => anyhow::bail!("invalid --transport {other:?}"),
    };

    let mut ids = args.measurement_id.clone();
    if let Some(spec_path) = &args.spec {
        let text = std::fs::read_to_string(spec_path)?;
        let spec_file: SpecFile = serde_json::from_str(&text)?;
        let probes = spec_file
            .probes
            .into_iter()
            .map(|p| {
                Ok(ProbeRef {
                    id: p.id,
                    asn: p.asn,
                    country: locaudit_core::model::CountryCode::parse(&p.country)
                        .map_err(|e| anyhow::anyhow!("{e}"))?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let spec = MeasurementSpec::with_options(
            spec_file.targets,
            probes,
            spec_file.packets,
            spec_file.timeout_ms,
        )?;
        let id = create_measurement(&spec, &transport)?;
        println!("created measurement {id}");
        ids.push(id);
    }
    if ids.is_empty() {
        anyhow::bail!("nothing to fetch: pass --spec or --measurement-id");
    }

    let results = fetch_all(&ids, &transport, args.max_in_flight);
    let mut out = String::new();
    for (id, result) in ids.iter().zip(results) {
        match result {
            Ok(jsonl) => out.push_str(&jsonl),
            Err(e) => anyhow::bail!("{id}: {e}"),
        }
    }
    std::fs::write(&args.out, out)?;
    println!("results for {} measurement(s) written to {}", ids.len(), args.out.display());
    Ok(())
}
