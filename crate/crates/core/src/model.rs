//! Core domain types shared by every pipeline stage, including the
//! adequacy ledger that decides which destination countries are lawful
//! at a given audit date.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// ISO-3166-1 alpha-2 country code, always two uppercase ASCII letters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    /// Parses a two-letter code, normalizing case. Anything else is rejected.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let bytes = s.as_bytes();
        if bytes.len() != 2 || !bytes.iter().all(|b| b.is_ascii_alphabetic()) {
            return Err(ModelError::InvalidCountryCode(s.to_string()));
        }
        Ok(CountryCode([
            bytes[0].to_ascii_uppercase(),
            bytes[1].to_ascii_uppercase(),
        ]))
    }

    pub fn as_str(&self) -> &str {
        // Always valid UTF-8: both bytes are ASCII uppercase letters.
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CountryCode({})", self.as_str())
    }
}

impl FromStr for CountryCode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        CountryCode::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Bundled lookup from common English country names to alpha-2 codes.
/// Ingestion paths accept either form; everything downstream is codes.
pub fn country_name_to_code(name: &str) -> Option<CountryCode> {
    static TABLE: &str = include_str!("../data/country_names.csv");
    let wanted = name.trim().to_ascii_lowercase();
    if wanted.len() == 2 {
        if let Ok(code) = CountryCode::parse(&wanted) {
            return Some(code);
        }
    }
    for line in TABLE.lines().skip(1) {
        if let Some((n, c)) = line.split_once(',') {
            if n == wanted {
                return CountryCode::parse(c).ok();
            }
        }
    }
    None
}

/// An autonomous system observed in a specific country: the unit of
/// measurement vantage. The same ASN may legitimately appear in several
/// countries, each a distinct vantage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ascp {
    pub asn: u32,
    pub country: CountryCode,
}

impl Ascp {
    pub fn new(asn: u32, country: CountryCode) -> Result<Self, ModelError> {
        if asn == 0 {
            return Err(ModelError::InvalidAsn(asn));
        }
        Ok(Ascp { asn, country })
    }
}

impl fmt::Display for Ascp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AS{}/{}", self.asn, self.country)
    }
}

/// Legal basis under which a country is considered adequate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdequacyStatus {
    EuMember,
    Eea,
    AdequateThirdCountry,
}

impl AdequacyStatus {
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s.trim() {
            "eu_member" => Ok(AdequacyStatus::EuMember),
            "eea" => Ok(AdequacyStatus::Eea),
            "adequate_third_country" => Ok(AdequacyStatus::AdequateThirdCountry),
            other => Err(ModelError::InvalidAdequacyStatus(other.to_string())),
        }
    }
}

/// One adequacy determination with its effective date range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyDecision {
    pub country: CountryCode,
    pub status: AdequacyStatus,
    pub effective_from: NaiveDate,
    pub effective_until: Option<NaiveDate>,
    pub scope_note: String,
}

impl AdequacyDecision {
    pub fn active_at(&self, date: NaiveDate) -> bool {
        date >= self.effective_from && self.effective_until.map_or(true, |until| date < until)
    }
}

/// Verdict of an adequacy lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adequacy {
    Adequate,
    NonAdequate,
}

/// The 27 EU member states. Members are adequate regardless of what the
/// decision ledger contains, so the set is pinned here rather than data-driven.
pub const EU_MEMBERS: [&str; 27] = [
    "AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GR", "HR", "HU", "IE",
    "IT", "LT", "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK",
];

pub fn is_eu_member(country: CountryCode) -> bool {
    EU_MEMBERS.iter().any(|m| m.as_bytes() == country.as_str().as_bytes())
}

/// Date-aware registry of adequacy decisions. Lookup is total: countries
/// absent from the ledger are non-adequate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyLedger {
    pub decisions: Vec<AdequacyDecision>,
}

impl AdequacyLedger {
    pub fn new(decisions: Vec<AdequacyDecision>) -> Result<Self, ModelError> {
        for d in &decisions {
            if let Some(until) = d.effective_until {
                if d.effective_from >= until {
                    return Err(ModelError::InvalidDateRange {
                        country: d.country.to_string(),
                        from: d.effective_from,
                        until,
                    });
                }
            }
        }
        Ok(AdequacyLedger { decisions })
    }

    /// Ledger shipped with the toolkit: EU members, the EEA, and the third
    /// countries recognised by the European Commission, with the US decision
    /// effective 2023-07-10 so that audits dated Aug-Sept 2022 treat the US
    /// as non-adequate.
    pub fn bundled() -> Self {
        Self::from_csv(crate::defaults::ADEQUACY_LEDGER_CSV.as_bytes()).expect("bundled ledger is well-formed")
    }

    /// Parses the ledger CSV format:
    /// `country,status,effective_from,effective_until,scope_note`
    /// with ISO-8601 dates and an empty `effective_until` meaning open-ended.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, ModelError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let mut decisions = Vec::new();
        for (idx, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| ModelError::LedgerCsv(format!("row {}: {e}", idx + 2)))?;
            let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
            let country = CountryCode::parse(&field(0))?;
            let status = AdequacyStatus::parse(&field(1))?;
            let effective_from = parse_date(&field(2))?;
            let until_raw = field(3);
            let effective_until = if until_raw.is_empty() {
                None
            } else {
                Some(parse_date(&until_raw)?)
            };
            decisions.push(AdequacyDecision {
                country,
                status,
                effective_from,
                effective_until,
                scope_note: field(4),
            });
        }
        Self::new(decisions)
    }
}

pub(crate) fn parse_date(s: &str) -> Result<NaiveDate, ModelError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| ModelError::InvalidDate(s.to_string()))
}

/// Total adequacy lookup: EU membership always wins, otherwise the ledger
/// decides by whichever decision is active at `date`.
pub fn is_adequate(country: CountryCode, ledger: &AdequacyLedger, date: NaiveDate) -> Adequacy {
    if is_eu_member(country) {
        return Adequacy::Adequate;
    }
    let active = ledger
        .decisions
        .iter()
        .any(|d| d.country == country && d.active_at(date));
    if active {
        Adequacy::Adequate
    } else {
        Adequacy::NonAdequate
    }
}

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ModelError> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(ModelError::InvalidCoordinates { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// Precision of a geolocation inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    City,
    Country,
    None,
}

/// One IP's inferred location from a geolocation source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRecord {
    pub ip: std::net::IpAddr,
    pub country: Option<CountryCode>,
    pub point: Option<GeoPoint>,
    pub granularity: Granularity,
}

impl GeoRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self.granularity {
            Granularity::City if self.point.is_none() => {
                Err(ModelError::GeoRecordInvariant("city granularity requires coordinates"))
            }
            Granularity::None if self.country.is_some() => {
                Err(ModelError::GeoRecordInvariant("granularity none requires absent country"))
            }
            _ => Ok(()),
        }
    }
}

/// UN statistical region of Europe used in the regional analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    Northern,
    Southern,
    Eastern,
    Western,
}

impl Region {
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        match s.trim() {
            "Northern" | "northern" => Ok(Region::Northern),
            "Southern" | "southern" => Ok(Region::Southern),
            "Eastern" | "eastern" => Ok(Region::Eastern),
            "Western" | "western" => Ok(Region::Western),
            other => Err(ModelError::InvalidRegion(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Northern => "Northern",
            Region::Southern => "Southern",
            Region::Eastern => "Eastern",
            Region::Western => "Western",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bundled UN region assignment for the audited source countries.
pub fn bundled_region_map() -> HashMap<CountryCode, Region> {
    parse_region_map(crate::defaults::UN_REGIONS_CSV.as_bytes()).expect("bundled region map is well-formed")
}

/// Parses `country,region` CSV into a region map.
pub fn parse_region_map<R: std::io::Read>(
    reader: R,
) -> Result<HashMap<CountryCode, Region>, ModelError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut map = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| ModelError::LedgerCsv(e.to_string()))?;
        let country = CountryCode::parse(row.get(0).unwrap_or(""))?;
        let region = Region::parse(row.get(1).unwrap_or(""))?;
        map.insert(country, region);
    }
    Ok(map)
}

/// Known second-level public suffixes for registrable-domain derivation.
/// Country-level tracker matching tolerates this abbreviated list; a full
/// public-suffix dataset is deliberately out of scope.
const SECOND_LEVEL_SUFFIXES: &[&str] = &[
    "co.uk", "org.uk", "net.uk", "ac.uk", "gov.uk", "co.jp", "ne.jp", "or.jp", "com.au",
    "net.au", "org.au", "co.nz", "com.br", "net.br", "com.tr", "net.tr", "com.mx", "co.in",
    "net.in", "com.cn", "com.hk", "com.sg", "com.my", "co.kr", "com.ar", "co.za", "com.ua",
    "co.il", "com.pk", "co.th", "com.ph", "com.vn", "com.tw", "co.id",
];

/// A fully-qualified domain name, lowercased, with its registrable
/// (suffix-plus-one) form derived at construction time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DomainName {
    fqdn: String,
}

impl DomainName {
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let fqdn = s.trim().trim_end_matches('.').to_ascii_lowercase();
        if fqdn.is_empty() {
            return Err(ModelError::InvalidDomain(s.to_string()));
        }
        for label in fqdn.split('.') {
            let ok = !label.is_empty()
                && label
                    .bytes()
                    .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
                && !label.starts_with('-')
                && !label.ends_with('-');
            if !ok {
                return Err(ModelError::InvalidDomain(s.to_string()));
            }
        }
        Ok(DomainName { fqdn })
    }

    pub fn as_str(&self) -> &str {
        &self.fqdn
    }

    /// Registrable domain: the public suffix plus one label. Single-label
    /// names are returned unchanged.
    pub fn tld_plus_one(&self) -> &str {
        let labels: Vec<&str> = self.fqdn.split('.').collect();
        if labels.len() <= 2 {
            return &self.fqdn;
        }
        let last_two = self.fqdn.rsplitn(3, '.').take(2).collect::<Vec<_>>();
        let suffix2 = format!("{}.{}", last_two[1], last_two[0]);
        let keep = if SECOND_LEVEL_SUFFIXES.contains(&suffix2.as_str()) {
            3
        } else {
            2
        };
        let split_at = labels.len() - keep;
        let offset: usize = labels[..split_at].iter().map(|l| l.len() + 1).sum();
        &self.fqdn[offset..]
    }
}

impl fmt::Display for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fqdn)
    }
}

impl FromStr for DomainName {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        parse_date(s).unwrap()
    }

    #[test]
    fn country_code_rejects_malformed() {
        assert!(CountryCode::parse("USA").is_err());
        assert!(CountryCode::parse("U").is_err());
        assert!(CountryCode::parse("1A").is_err());
        assert_eq!(CountryCode::parse("us").unwrap().as_str(), "US");
    }

    #[test]
    fn us_is_non_adequate_at_audit_date() {
        let ledger = AdequacyLedger::bundled();
        let us = CountryCode::parse("US").unwrap();
        assert_eq!(
            is_adequate(us, &ledger, date("2022-08-15")),
            Adequacy::NonAdequate
        );
        // The DPF decision flips the verdict from its effective date on.
        assert_eq!(
            is_adequate(us, &ledger, date("2023-07-10")),
            Adequacy::Adequate
        );
    }

    #[test]
    fn canada_is_adequate() {
        let ledger = AdequacyLedger::bundled();
        let ca = CountryCode::parse("CA").unwrap();
        assert_eq!(is_adequate(ca, &ledger, date("2022-08-15")), Adequacy::Adequate);
    }

    #[test]
    fn eu_member_adequate_even_with_empty_ledger() {
        let empty = AdequacyLedger::new(Vec::new()).unwrap();
        let de = CountryCode::parse("DE").unwrap();
        assert_eq!(is_adequate(de, &empty, date("1999-01-01")), Adequacy::Adequate);
        assert_eq!(is_adequate(de, &empty, date("2030-01-01")), Adequacy::Adequate);
    }

    #[test]
    fn adequate_set_contains_all_eu_members_at_any_date() {
        let ledger = AdequacyLedger::bundled();
        for d in ["2010-01-01", "2022-08-15", "2025-06-01"] {
            for m in EU_MEMBERS {
                let cc = CountryCode::parse(m).unwrap();
                assert_eq!(is_adequate(cc, &ledger, date(d)), Adequacy::Adequate);
            }
        }
    }

    #[test]
    fn date_boundary_flips_exactly_one_country() {
        let ledger = AdequacyLedger::bundled();
        let before = date("2023-07-09");
        let after = date("2023-07-10");
        let mut flipped = Vec::new();
        // Scan the whole alpha-2 space for verdict changes across the US boundary.
        for a in b'A'..=b'Z' {
            for b in b'A'..=b'Z' {
                let cc = CountryCode::parse(std::str::from_utf8(&[a, b]).unwrap()).unwrap();
                if is_adequate(cc, &ledger, before) != is_adequate(cc, &ledger, after) {
                    flipped.push(cc.to_string());
                }
            }
        }
        assert_eq!(flipped, vec!["US".to_string()]);
    }

    #[test]
    fn ledger_rejects_inverted_ranges() {
        let d = AdequacyDecision {
            country: CountryCode::parse("XX").unwrap(),
            status: AdequacyStatus::AdequateThirdCountry,
            effective_from: date("2020-01-01"),
            effective_until: Some(date("2019-01-01")),
            scope_note: String::new(),
        };
        assert!(AdequacyLedger::new(vec![d]).is_err());
    }

    #[test]
    fn name_normalization() {
        assert_eq!(country_name_to_code("Thailand").unwrap().as_str(), "TH");
        assert_eq!(country_name_to_code("republic of korea").unwrap().as_str(), "KR");
        assert_eq!(country_name_to_code("de").unwrap().as_str(), "DE");
        assert!(country_name_to_code("atlantis").is_none());
    }

    #[test]
    fn geopoint_bounds() {
        assert!(GeoPoint::new(90.0, 180.0).is_ok());
        assert!(GeoPoint::new(90.1, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.1).is_err());
    }

    #[test]
    fn domain_parse_and_registrable() {
        let d = DomainName::parse("WWW.Example.COM").unwrap();
        assert_eq!(d.as_str(), "www.example.com");
        assert_eq!(d.tld_plus_one(), "example.com");
        let uk = DomainName::parse("news.bbc.co.uk").unwrap();
        assert_eq!(uk.tld_plus_one(), "bbc.co.uk");
        let bare = DomainName::parse("doubleclick.net").unwrap();
        assert_eq!(bare.tld_plus_one(), "doubleclick.net");
        assert!(DomainName::parse("").is_err());
        assert!(DomainName::parse("bad..dots").is_err());
        assert!(DomainName::parse("-lead.example").is_err());
    }

    #[test]
    fn bundled_region_map_covers_19_countries() {
        let map = bundled_region_map();
        assert_eq!(map.len(), 19);
        assert_eq!(map[&CountryCode::parse("RO").unwrap()], Region::Eastern);
        assert_eq!(map[&CountryCode::parse("FI").unwrap()], Region::Northern);
    }
}
