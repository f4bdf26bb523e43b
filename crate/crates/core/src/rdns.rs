//! Country-level geohints from reverse-DNS hostnames: IATA airport codes,
//! cloud-region strings, country tokens, and a manual override file.

use std::collections::{HashMap, HashSet};

use chrono::NaiveDate;

use crate::error::ModelError;
use crate::model::{is_adequate, Adequacy, AdequacyLedger, CountryCode, DomainName};

/// Three-letter tokens that are valid IATA codes or common hostname noise
/// but never encode a location in practice.
const IATA_STOPLIST: &[&str] = &[
    "www", "net", "com", "org", "ftp", "dns", "gov", "edu", "mil", "dev", "api", "cdn", "vpn",
    "isp", "dsl", "pop", "box", "srv", "lan", "wan", "sip", "tel", "ntp", "ssl", "web", "mta",
];

/// Where a hint came from; doubles as the precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintSource {
    Override,
    CloudRegion,
    Iata,
    CountryToken,
}

/// Outcome of hostname inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeohintOutcome {
    Hint(CountryCode, HintSource),
    NoHostname,
    NoGeohint,
}

/// Hostname-pattern override: a forced country or a forced no-hint.
#[derive(Debug, Clone)]
struct OverrideRule {
    pattern: String,
    country: Option<CountryCode>,
}

/// Lookup tables for geohint extraction. All keys lowercase.
#[derive(Debug, Clone, Default)]
pub struct GeohintDb {
    iata: HashMap<String, CountryCode>,
    // Sorted by descending key length so the longest region string wins.
    cloud_regions: Vec<(String, CountryCode)>,
    country_tokens: HashMap<String, CountryCode>,
    overrides: Vec<OverrideRule>,
    stoplist: HashSet<String>,
}

fn parse_two_column_csv(text: &str) -> Result<Vec<(String, String)>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| ModelError::LedgerCsv(e.to_string()))?;
        let k = row.get(0).unwrap_or("").trim().to_ascii_lowercase();
        let v = row.get(1).unwrap_or("").trim().to_string();
        if !k.is_empty() {
            rows.push((k, v));
        }
    }
    Ok(rows)
}

impl GeohintDb {
    /// Database shipped with the toolkit: a curated IATA table, AWS region
    /// strings, country-name tokens, and no overrides.
    pub fn bundled() -> Self {
        Self::from_files(
            crate::defaults::GEOHINTS_IATA_CSV,
            crate::defaults::GEOHINTS_CLOUD_REGIONS_CSV,
            crate::defaults::GEOHINTS_COUNTRY_TOKENS_CSV,
            crate::defaults::GEOHINTS_OVERRIDES_CSV,
        )
        .expect("bundled geohint files are well-formed")
    }

    /// Builds the database from the four CSV file contents
    /// (`iata.csv`, `cloud_regions.csv`, `country_tokens.csv`, `overrides.csv`).
    pub fn from_files(
        iata: &str,
        cloud_regions: &str,
        country_tokens: &str,
        overrides: &str,
    ) -> Result<Self, ModelError> {
        let mut db = GeohintDb {
            stoplist: IATA_STOPLIST.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        };
        for (code, country) in parse_two_column_csv(iata)? {
            db.iata.insert(code, CountryCode::parse(&country)?);
        }
        for (region, country) in parse_two_column_csv(cloud_regions)? {
            db.cloud_regions.push((region, CountryCode::parse(&country)?));
        }
        db.cloud_regions
            .sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        for (token, country) in parse_two_column_csv(country_tokens)? {
            db.country_tokens.insert(token, CountryCode::parse(&country)?);
        }
        for (pattern, value) in parse_two_column_csv(overrides)? {
            let country = match value.to_ascii_uppercase().as_str() {
                "NONE" => None,
                other => Some(CountryCode::parse(other)?),
            };
            db.overrides.push(OverrideRule { pattern, country });
        }
        Ok(db)
    }
}

// Anchored glob match supporting `*` wildcards only.
fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let mut rest = text;
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            continue;
        }
        if i == 0 {
            match rest.strip_prefix(part) {
                Some(r) => rest = r,
                None => return false,
            }
        } else if i == parts.len() - 1 {
            return rest.ends_with(part);
        } else {
            match rest.find(part) {
                Some(pos) => rest = &rest[pos + part.len()..],
                None => return false,
            }
        }
    }
    // Pattern ends with '*': any remainder is fine.
    true
}

// IATA candidate for a token: exactly three letters, or a three-letter
// alphabetic prefix followed only by digits ("unn138").
fn iata_candidate(token: &str) -> Option<&str> {
    let bytes = token.as_bytes();
    if bytes.len() == 3 && bytes.iter().all(|b| b.is_ascii_alphabetic()) {
        return Some(token);
    }
    if bytes.len() > 3
        && bytes[..3].iter().all(|b| b.is_ascii_alphabetic())
        && bytes[3..].iter().all(|b| b.is_ascii_digit())
    {
        return Some(&token[..3]);
    }
    None
}

/// Extracts a country hint from a hostname. Matching is case-insensitive;
/// precedence is overrides, then cloud regions (longest match anywhere),
/// then IATA tokens, then country tokens, each resolved leftmost-first.
pub fn extract_geohint(hostname: Option<&DomainName>, db: &GeohintDb) -> GeohintOutcome {
    let Some(hostname) = hostname else {
        return GeohintOutcome::NoHostname;
    };
    let host = hostname.as_str().to_ascii_lowercase();

    for rule in &db.overrides {
        if glob_match(&rule.pattern, &host) {
            return match rule.country {
                Some(cc) => GeohintOutcome::Hint(cc, HintSource::Override),
                None => GeohintOutcome::NoGeohint,
            };
        }
    }

    // cloud_regions is sorted longest-first, so the first substring hit is
    // the longest match.
    for (region, cc) in &db.cloud_regions {
        if host.contains(region.as_str()) {
            return GeohintOutcome::Hint(*cc, HintSource::CloudRegion);
        }
    }

    let tokens: Vec<&str> = host.split(['.', '-', '_']).filter(|t| !t.is_empty()).collect();

    for token in &tokens {
        if let Some(code) = iata_candidate(token) {
            if db.stoplist.contains(code) {
                continue;
            }
            if let Some(cc) = db.iata.get(code) {
                return GeohintOutcome::Hint(*cc, HintSource::Iata);
            }
        }
    }

    for token in &tokens {
        if let Some(cc) = db.country_tokens.get(*token) {
            return GeohintOutcome::Hint(*cc, HintSource::CountryToken);
        }
    }

    GeohintOutcome::NoGeohint
}

/// Stage verdict for one candidate given its hostname hint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdnsVerdict {
    ConfirmsCountry,
    ReassignsTo(CountryCode),
    IndicatesAdequate(CountryCode),
    NoHostname,
    NoGeohint,
}

/// Resolves a hint against the pipeline's current inference. A hint matching
/// the candidate confirms it; a hint in another non-adequate country
/// reassigns it (rDNS tends to beat latency inference); a hint in the EU or
/// an adequate country flags the candidate for exclusion; no evidence passes
/// the candidate through unchanged.
pub fn rdns_stage(
    candidate_country: CountryCode,
    hint: GeohintOutcome,
    ledger: &AdequacyLedger,
    date: NaiveDate,
) -> RdnsVerdict {
    match hint {
        GeohintOutcome::NoHostname => RdnsVerdict::NoHostname,
        GeohintOutcome::NoGeohint => RdnsVerdict::NoGeohint,
        GeohintOutcome::Hint(cc, _) => {
            if cc == candidate_country {
                RdnsVerdict::ConfirmsCountry
            } else if is_adequate(cc, ledger, date) == Adequacy::Adequate {
                RdnsVerdict::IndicatesAdequate(cc)
            } else {
                RdnsVerdict::ReassignsTo(cc)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_date;

    fn cc(s: &str) -> CountryCode {
        CountryCode::parse(s).unwrap()
    }

    fn dom(s: &str) -> DomainName {
        DomainName::parse(s).unwrap()
    }

    #[test]
    fn iata_prefix_token_resolves_thailand() {
        let db = GeohintDb::bundled();
        let host = dom("unn-138-199-8-197.datapacket.com");
        assert_eq!(
            extract_geohint(Some(&host), &db),
            GeohintOutcome::Hint(cc("TH"), HintSource::Iata)
        );
    }

    #[test]
    fn cloud_region_resolves_canada() {
        let db = GeohintDb::bundled();
        let host = dom("ec2-99-79-143-255.ca-central-1.compute.amazonaws.com");
        assert_eq!(
            extract_geohint(Some(&host), &db),
            GeohintOutcome::Hint(cc("CA"), HintSource::CloudRegion)
        );
    }

    #[test]
    fn missing_hostname() {
        let db = GeohintDb::bundled();
        assert_eq!(extract_geohint(None, &db), GeohintOutcome::NoHostname);
    }

    #[test]
    fn stoplist_and_plain_words_give_no_geohint() {
        let db = GeohintDb::bundled();
        for h in ["www.example.com", "static.host.example", "server-12.hosting.example"] {
            assert_eq!(extract_geohint(Some(&dom(h)), &db), GeohintOutcome::NoGeohint, "{h}");
        }
    }

    #[test]
    fn extraction_is_case_insensitive() {
        let db = GeohintDb::bundled();
        let lower = extract_geohint(Some(&dom("svo-gw1.carrier.example")), &db);
        let upper = extract_geohint(Some(&dom("SVO-GW1.Carrier.EXAMPLE")), &db);
        assert_eq!(lower, upper);
        assert_eq!(lower, GeohintOutcome::Hint(cc("RU"), HintSource::Iata));
    }

    #[test]
    fn iata_numeric_suffix_token() {
        let db = GeohintDb::bundled();
        assert_eq!(
            extract_geohint(Some(&dom("fra123.edge.example")), &db),
            GeohintOutcome::Hint(cc("DE"), HintSource::Iata)
        );
        // Four letters followed by digits is not an IATA candidate.
        assert_eq!(
            extract_geohint(Some(&dom("frax123.edge.example")), &db),
            GeohintOutcome::NoGeohint
        );
    }

    #[test]
    fn leftmost_token_wins_within_a_class() {
        let db = GeohintDb::bundled();
        assert_eq!(
            extract_geohint(Some(&dom("ist-svo.carrier.example")), &db),
            GeohintOutcome::Hint(cc("TR"), HintSource::Iata)
        );
    }

    #[test]
    fn cloud_region_beats_iata() {
        let db = GeohintDb::bundled();
        // "svo" would say Russia, but the region string has higher precedence.
        assert_eq!(
            extract_geohint(Some(&dom("svo.eu-west-1.cloud.example")), &db),
            GeohintOutcome::Hint(cc("IE"), HintSource::CloudRegion)
        );
    }

    #[test]
    fn overrides_take_absolute_precedence() {
        let db = GeohintDb::from_files(
            "code,country\nunn,TH\n",
            "region,country\n",
            "token,country\n",
            "pattern,country_or_none\nunn-*.datapacket.com,NONE\n*.forced.example,JP\n",
        )
        .unwrap();
        assert_eq!(
            extract_geohint(Some(&dom("unn-1-2-3-4.datapacket.com")), &db),
            GeohintOutcome::NoGeohint
        );
        assert_eq!(
            extract_geohint(Some(&dom("a.forced.example")), &db),
            GeohintOutcome::Hint(cc("JP"), HintSource::Override)
        );
    }

    #[test]
    fn country_token_fallback() {
        let db = GeohintDb::bundled();
        assert_eq!(
            extract_geohint(Some(&dom("node1.thailand.carrier.example")), &db),
            GeohintOutcome::Hint(cc("TH"), HintSource::CountryToken)
        );
    }

    #[test]
    fn stage_verdicts() {
        let ledger = AdequacyLedger::bundled();
        let date = parse_date("2022-08-15").unwrap();
        let us = cc("US");
        assert_eq!(
            rdns_stage(us, GeohintOutcome::Hint(us, HintSource::Iata), &ledger, date),
            RdnsVerdict::ConfirmsCountry
        );
        assert_eq!(
            rdns_stage(us, GeohintOutcome::Hint(cc("CA"), HintSource::CloudRegion), &ledger, date),
            RdnsVerdict::IndicatesAdequate(cc("CA"))
        );
        assert_eq!(
            rdns_stage(us, GeohintOutcome::Hint(cc("RU"), HintSource::Iata), &ledger, date),
            RdnsVerdict::ReassignsTo(cc("RU"))
        );
        assert_eq!(
            rdns_stage(cc("TH"), GeohintOutcome::NoGeohint, &ledger, date),
            RdnsVerdict::NoGeohint
        );
        assert_eq!(
            rdns_stage(cc("TH"), GeohintOutcome::NoHostname, &ledger, date),
            RdnsVerdict::NoHostname
        );
    }

    #[test]
    fn adequate_hint_never_survives_as_reassignment() {
        let ledger = AdequacyLedger::bundled();
        let date = parse_date("2022-08-15").unwrap();
        for adequate in ["CA", "DE", "JP", "CH", "NO"] {
            let verdict = rdns_stage(
                cc("US"),
                GeohintOutcome::Hint(cc(adequate), HintSource::Iata),
                &ledger,
                date,
            );
            assert!(matches!(verdict, RdnsVerdict::IndicatesAdequate(_)), "{adequate}");
        }
    }
}
