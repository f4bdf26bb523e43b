//! The run manifest: one config file naming every input, the audit date,
//! and the output directory. Paths are resolved relative to the manifest
//! file; every referenced path must exist at load time.

use std::collections::{BTreeMap, HashMap};
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::audit::AuditInputs;
use crate::error::AuditError;
use crate::geodesy::LatencyThresholdConfig;
use crate::ingest::{self, ParseError, Stage};
use crate::labeling::{parse_cookie_rules, TrackerDb, TrackerTier};
use crate::model::{AdequacyLedger, CountryCode, DomainName};
use crate::rdns::GeohintDb;

#[derive(Debug, Deserialize)]
struct RawManifest {
    audit_date: String,
    output_dir: String,
    inputs: RawInputs,
}

#[derive(Debug, Deserialize)]
struct RawInputs {
    crawls: String,
    source_traceroutes: String,
    dest_traceroutes: String,
    geodb: String,
    rdns: String,
    asmap: Option<String>,
    as2org: Option<String>,
    easylist: Option<String>,
    hosts_trackers: Option<String>,
    manual_trackers: Option<String>,
    cookie_rules: Option<String>,
    geohints_dir: Option<String>,
    regions: Option<String>,
    categories: Option<String>,
    google_extra: Option<String>,
    ledger: Option<String>,
    thresholds: Option<String>,
    truth: Option<String>,
}

/// A validated run manifest with absolute paths.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub audit_date: NaiveDate,
    pub output_dir: PathBuf,
    pub crawls: PathBuf,
    pub source_traceroutes: PathBuf,
    pub dest_traceroutes: PathBuf,
    pub geodb: PathBuf,
    pub rdns: PathBuf,
    pub asmap: Option<PathBuf>,
    pub as2org: Option<PathBuf>,
    pub easylist: Option<PathBuf>,
    pub hosts_trackers: Option<PathBuf>,
    pub manual_trackers: Option<PathBuf>,
    pub cookie_rules: Option<PathBuf>,
    pub geohints_dir: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub categories: Option<PathBuf>,
    pub google_extra: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

impl RunManifest {
    /// Parses and validates a manifest file. An `--audit-date` style
    /// override replaces the file's date.
    pub fn load(path: &Path, audit_date_override: Option<NaiveDate>) -> Result<Self, AuditError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AuditError::io(path.display().to_string(), e))?;
        let raw: RawManifest =
            toml::from_str(&text).map_err(|e| AuditError::Config(format!("manifest: {e}")))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let audit_date = match audit_date_override {
            Some(d) => d,
            None => crate::model::parse_date(&raw.audit_date)?,
        };

        let resolve_required = |rel: &str| -> Result<PathBuf, AuditError> {
            let p = base.join(rel);
            if !p.exists() {
                return Err(AuditError::Config(format!(
                    "input path does not exist: {}",
                    p.display()
                )));
            }
            Ok(p)
        };
        let resolve_optional = |rel: &Option<String>| -> Result<Option<PathBuf>, AuditError> {
            rel.as_deref().map(resolve_required).transpose()
        };

        Ok(RunManifest {
            audit_date,
            output_dir: base.join(&raw.output_dir),
            crawls: resolve_required(&raw.inputs.crawls)?,
            source_traceroutes: resolve_required(&raw.inputs.source_traceroutes)?,
            dest_traceroutes: resolve_required(&raw.inputs.dest_traceroutes)?,
            geodb: resolve_required(&raw.inputs.geodb)?,
            rdns: resolve_required(&raw.inputs.rdns)?,
            asmap: resolve_optional(&raw.inputs.asmap)?,
            as2org: resolve_optional(&raw.inputs.as2org)?,
            easylist: resolve_optional(&raw.inputs.easylist)?,
            hosts_trackers: resolve_optional(&raw.inputs.hosts_trackers)?,
            manual_trackers: resolve_optional(&raw.inputs.manual_trackers)?,
            cookie_rules: resolve_optional(&raw.inputs.cookie_rules)?,
            geohints_dir: resolve_optional(&raw.inputs.geohints_dir)?,
            regions: resolve_optional(&raw.inputs.regions)?,
            categories: resolve_optional(&raw.inputs.categories)?,
            google_extra: resolve_optional(&raw.inputs.google_extra)?,
            ledger: resolve_optional(&raw.inputs.ledger)?,
            thresholds: resolve_optional(&raw.inputs.thresholds)?,
            truth: resolve_optional(&raw.inputs.truth)?,
        })
    }
}

/// Inputs plus the per-file parse-error accounting for `--strict`.
pub struct LoadedInputs {
    pub inputs: AuditInputs,
    /// (file name, error) pairs across every parsed input.
    pub parse_errors: Vec<(String, ParseError)>,
    pub truth: Option<BTreeMap<IpAddr, (CountryCode, String)>>,
}

fn read(path: &Path) -> Result<String, AuditError> {
    std::fs::read_to_string(path).map_err(|e| AuditError::io(path.display().to_string(), e))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads and parses every input named by the manifest, falling back to the
/// bundled defaults for anything optional that is absent.
pub fn load_inputs(manifest: &RunManifest) -> Result<LoadedInputs, AuditError> {
    let mut inputs = AuditInputs::with_defaults(manifest.audit_date);
    let mut parse_errors: Vec<(String, ParseError)> = Vec::new();
    let note = |path: &Path, errors: Vec<ParseError>, acc: &mut Vec<(String, ParseError)>| {
        let name = file_name(path);
        acc.extend(errors.into_iter().map(|e| (name.clone(), e)));
    };

    let (source, errs) = ingest::parse_traceroutes(&read(&manifest.source_traceroutes)?, Stage::SourceBased);
    note(&manifest.source_traceroutes, errs, &mut parse_errors);
    inputs.source_traces = source;

    let (dest, errs) = ingest::parse_traceroutes(&read(&manifest.dest_traceroutes)?, Stage::DestinationBased);
    note(&manifest.dest_traceroutes, errs, &mut parse_errors);
    inputs.dest_traces = dest;

    let (crawls, errs) = ingest::parse_crawls(&read(&manifest.crawls)?);
    note(&manifest.crawls, errs, &mut parse_errors);
    inputs.crawls = crawls;

    let (geodb, errs) = ingest::parse_geodb(&read(&manifest.geodb)?);
    note(&manifest.geodb, errs, &mut parse_errors);
    inputs.geodb = geodb;

    let (rdns, errs) = ingest::parse_rdns(&read(&manifest.rdns)?);
    note(&manifest.rdns, errs, &mut parse_errors);
    inputs.rdns = rdns;

    if let Some(path) = &manifest.asmap {
        let (asmap, errs) = ingest::parse_asmap(&read(path)?);
        note(path, errs, &mut parse_errors);
        inputs.asmap = asmap;
    }
    if let Some(path) = &manifest.as2org {
        let (orgmap, errs) = ingest::parse_as2org(&read(path)?);
        note(path, errs, &mut parse_errors);
        inputs.orgmap = orgmap;
    }

    let easylist = manifest.easylist.as_deref().map(read).transpose()?;
    let hosts = manifest.hosts_trackers.as_deref().map(read).transpose()?;
    let manual = manifest.manual_trackers.as_deref().map(read).transpose()?;
    inputs.trackers = ingest::parse_tracker_lists(
        easylist.as_deref(),
        hosts.as_deref(),
        manual.as_deref(),
    );
    if manual.is_none() {
        inputs
            .trackers
            .load_tier(TrackerTier::Manual, TrackerDb::bundled_manual());
    }

    if let Some(path) = &manifest.cookie_rules {
        inputs.cookie_rules = parse_cookie_rules(&read(path)?)?;
    }
    if let Some(dir) = &manifest.geohints_dir {
        inputs.geohints = GeohintDb::from_files(
            &read(&dir.join("iata.csv"))?,
            &read(&dir.join("cloud_regions.csv"))?,
            &read(&dir.join("country_tokens.csv"))?,
            &read(&dir.join("overrides.csv"))?,
        )?;
    }
    if let Some(path) = &manifest.regions {
        inputs.regions = crate::model::parse_region_map(read(path)?.as_bytes())?;
    }
    if let Some(path) = &manifest.categories {
        inputs.categories = parse_categories(&read(path)?)?;
    }
    if let Some(path) = &manifest.google_extra {
        inputs.google_extra = read(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| DomainName::parse(l.trim()))
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(path) = &manifest.ledger {
        inputs.ledger = AdequacyLedger::from_csv(read(path)?.as_bytes())?;
    }
    if let Some(path) = &manifest.thresholds {
        inputs.thresholds = LatencyThresholdConfig::from_toml(&read(path)?)?;
    }

    let truth = match &manifest.truth {
        Some(path) => Some(parse_truth(&read(path)?)?),
        None => None,
    };

    Ok(LoadedInputs {
        inputs,
        parse_errors,
        truth,
    })
}

/// Parses `site,category` CSV.
pub fn parse_categories(text: &str) -> Result<HashMap<DomainName, String>, AuditError> {
    let mut map = HashMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    for row in rdr.records() {
        let row = row.map_err(|e| AuditError::Config(format!("categories: {e}")))?;
        let site = DomainName::parse(row.get(0).unwrap_or(""))?;
        map.insert(site, row.get(1).unwrap_or("").trim().to_string());
    }
    Ok(map)
}

/// Parses `ip,country,group` CSV; the group column is optional.
pub fn parse_truth(text: &str) -> Result<BTreeMap<IpAddr, (CountryCode, String)>, AuditError> {
    let mut map = BTreeMap::new();
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    for (idx, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| AuditError::Config(format!("truth row {}: {e}", idx + 2)))?;
        let ip: IpAddr = row
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| AuditError::Config(format!("truth row {}: bad ip", idx + 2)))?;
        let country = CountryCode::parse(row.get(1).unwrap_or(""))?;
        let group = row.get(2).unwrap_or("").trim().to_string();
        map.insert(ip, (country, group));
    }
    Ok(map)
}
