//! First/third-party classification, Google-domain handling, the tracker
//! labeling cascade, cookie identifier rules, and the proxy cross-check.

use std::collections::HashMap;
use std::net::IpAddr;

use crate::error::{LabelError, ModelError};
use crate::ingest::{AsMap, Cookie, OrgMap};
use crate::model::{Ascp, DomainName};

/// Why a domain was labeled first-party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FirstPartyReason {
    AsMatch { asn: u32 },
    OrgMatch { org: String },
}

/// Ownership relation between a linked domain and the initial site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyLabel {
    FirstParty(FirstPartyReason),
    ThirdParty,
}

/// True for `google.TLD`, `google.co.TLD`, `google.com.TLD`, the two
/// well-known Google sites, and anything on the supplied extra list.
pub fn is_google_domain(d: &DomainName, extra: &[DomainName]) -> bool {
    let s = d.as_str();
    if s == "youtube.com" || s == "news.google.com" {
        return true;
    }
    if extra.iter().any(|e| e == d) {
        return true;
    }
    let labels: Vec<&str> = s.split('.').collect();
    match labels.as_slice() {
        ["google", _] => true,
        ["google", "co" | "com", _] => true,
        _ => false,
    }
}

/// The four URLs attempted per top site, most-preferred first. A site that
/// already carries a `www.` prefix is not double-prefixed.
pub fn url_ladder(d: &DomainName) -> [String; 4] {
    let bare = d.as_str().strip_prefix("www.").unwrap_or(d.as_str());
    [
        format!("https://www.{bare}"),
        format!("http://www.{bare}"),
        format!("https://{bare}"),
        format!("http://{bare}"),
    ]
}

/// Labels a linked domain against the initial site: same ASN wins first,
/// then same organization, otherwise third party. Both domains must appear
/// in the resolution fixture.
pub fn label_party(
    initial: &DomainName,
    linked: &DomainName,
    resolution: &HashMap<DomainName, IpAddr>,
    asmap: &AsMap,
    orgmap: &OrgMap,
) -> Result<PartyLabel, LabelError> {
    let resolve = |d: &DomainName| {
        resolution
            .get(d)
            .copied()
            .ok_or_else(|| LabelError::UnresolvedDomain(d.to_string()))
    };
    let ip_initial = resolve(initial)?;
    let ip_linked = resolve(linked)?;
    let asn_initial = asmap.lookup(ip_initial);
    let asn_linked = asmap.lookup(ip_linked);
    if let (Some(a), Some(b)) = (asn_initial, asn_linked) {
        if a == b {
            return Ok(PartyLabel::FirstParty(FirstPartyReason::AsMatch { asn: a }));
        }
        let org_a = orgmap.get(&a).filter(|o| !o.is_empty());
        let org_b = orgmap.get(&b).filter(|o| !o.is_empty());
        if let (Some(oa), Some(ob)) = (org_a, org_b) {
            if oa == ob {
                return Ok(PartyLabel::FirstParty(FirstPartyReason::OrgMatch {
                    org: oa.clone(),
                }));
            }
        }
    }
    Ok(PartyLabel::ThirdParty)
}

/// Tracker-list tier, in cascade order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrackerTier {
    EasyList,
    HostsList,
    Manual,
}

impl TrackerTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackerTier::EasyList => "easylist",
            TrackerTier::HostsList => "hosts",
            TrackerTier::Manual => "manual",
        }
    }
}

/// A tracker hit with the tier that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackerLabel {
    pub domain: DomainName,
    pub tier: TrackerTier,
}

/// Three ordered tiers of known tracker domains.
#[derive(Debug, Clone, Default)]
pub struct TrackerDb {
    easylist: std::collections::HashSet<String>,
    hosts: std::collections::HashSet<String>,
    manual: std::collections::HashSet<String>,
}

impl TrackerDb {
    /// Replaces one tier's contents.
    pub fn load_tier(&mut self, tier: TrackerTier, domains: Vec<DomainName>) {
        let set = domains.into_iter().map(|d| d.as_str().to_string()).collect();
        match tier {
            TrackerTier::EasyList => self.easylist = set,
            TrackerTier::HostsList => self.hosts = set,
            TrackerTier::Manual => self.manual = set,
        }
    }

    /// Appends domains to a tier.
    pub fn extend_tier(&mut self, tier: TrackerTier, domains: impl IntoIterator<Item = DomainName>) {
        let set = match tier {
            TrackerTier::EasyList => &mut self.easylist,
            TrackerTier::HostsList => &mut self.hosts,
            TrackerTier::Manual => &mut self.manual,
        };
        set.extend(domains.into_iter().map(|d| d.as_str().to_string()));
    }

    /// The five manually verified tracker domains shipped as defaults.
    pub fn bundled_manual() -> Vec<DomainName> {
        Self::parse_manual(crate::defaults::MANUAL_TRACKERS)
    }

    /// Domain-anchor rules only: `||domain^` lines (options tolerated) and
    /// plain domain lines. Element-hiding, exception, and path rules are
    /// ignored, not errors.
    pub fn parse_easylist(text: &str) -> Vec<DomainName> {
        let mut out = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty()
                || line.starts_with('!')
                || line.starts_with("@@")
                || line.contains('#')
            {
                continue;
            }
            if let Some(rest) = line.strip_prefix("||") {
                let body = rest.split('^').next().unwrap_or("");
                if body.contains('/') || body.contains('*') || !rest.contains('^') {
                    continue;
                }
                if let Ok(d) = DomainName::parse(body) {
                    out.push(d);
                }
            } else if !line.contains(['/', '^', '$', '*', '|']) {
                if let Ok(d) = DomainName::parse(line) {
                    out.push(d);
                }
            }
        }
        out
    }

    /// `0.0.0.0 domain` hosts-file lines.
    pub fn parse_hosts(text: &str) -> Vec<DomainName> {
        text.lines()
            .filter_map(|line| {
                let line = line.trim();
                let rest = line.strip_prefix("0.0.0.0")?;
                let domain = rest.split_whitespace().next()?;
                DomainName::parse(domain).ok()
            })
            .collect()
    }

    /// One domain per line, anything after whitespace is a source note.
    pub fn parse_manual(text: &str) -> Vec<DomainName> {
        text.lines()
            .filter_map(|line| {
                let first = line.split_whitespace().next()?;
                if first.starts_with('#') {
                    return None;
                }
                DomainName::parse(first).ok()
            })
            .collect()
    }

    fn tier_contains(&self, tier: TrackerTier, d: &DomainName) -> bool {
        let set = match tier {
            TrackerTier::EasyList => &self.easylist,
            TrackerTier::HostsList => &self.hosts,
            TrackerTier::Manual => &self.manual,
        };
        set.contains(d.as_str()) || set.contains(d.tld_plus_one())
    }

    pub fn is_empty(&self) -> bool {
        self.easylist.is_empty() && self.hosts.is_empty() && self.manual.is_empty()
    }
}

/// Cascade lookup: tiers tested in order, first hit wins; both the full
/// hostname and the registrable domain are tried.
pub fn label_tracker(d: &DomainName, db: &TrackerDb) -> Option<TrackerLabel> {
    for tier in [TrackerTier::EasyList, TrackerTier::HostsList, TrackerTier::Manual] {
        if db.tier_contains(tier, d) {
            return Some(TrackerLabel {
                domain: d.clone(),
                tier,
            });
        }
    }
    None
}

/// How a cookie identifier pattern matches names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchKind {
    Exact,
    Prefix,
}

/// One known cookie identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CookieIdRule {
    pub pattern: String,
    pub match_kind: MatchKind,
    pub org: String,
    pub purpose: String,
}

impl CookieIdRule {
    pub fn matches(&self, name: &str) -> bool {
        match self.match_kind {
            MatchKind::Exact => name == self.pattern,
            MatchKind::Prefix => name.starts_with(&self.pattern),
        }
    }
}

/// A classified cookie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CookieMatch {
    pub org: String,
    pub purpose: String,
    pub matched_pattern: String,
}

/// Rules shipped with the toolkit, covering the identifiers discussed in the
/// cookie analysis.
pub fn bundled_cookie_rules() -> Vec<CookieIdRule> {
    parse_cookie_rules(crate::defaults::COOKIE_RULES_CSV)
        .expect("bundled cookie rules are well-formed")
}

/// Parses `pattern,match_kind,org,purpose` CSV.
pub fn parse_cookie_rules(text: &str) -> Result<Vec<CookieIdRule>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rules = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| ModelError::LedgerCsv(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        let match_kind = match field(1).as_str() {
            "exact" => MatchKind::Exact,
            "prefix" => MatchKind::Prefix,
            other => return Err(ModelError::LedgerCsv(format!("bad match_kind {other:?}"))),
        };
        rules.push(CookieIdRule {
            pattern: field(0),
            match_kind,
            org: field(2),
            purpose: field(3),
        });
    }
    Ok(rules)
}

/// First rule whose pattern matches the cookie name.
pub fn classify_cookie(c: &Cookie, rules: &[CookieIdRule]) -> Option<CookieMatch> {
    rules.iter().find(|r| r.matches(&c.name)).map(|r| CookieMatch {
        org: r.org.clone(),
        purpose: r.purpose.clone(),
        matched_pattern: r.pattern.clone(),
    })
}

/// Threshold heuristic for "this value looks like a unique identifier":
/// long enough and with high per-character entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifierHeuristic {
    pub min_len: usize,
    pub min_bits_per_char: f64,
}

impl Default for IdentifierHeuristic {
    fn default() -> Self {
        IdentifierHeuristic {
            min_len: 16,
            min_bits_per_char: 3.0,
        }
    }
}

impl IdentifierHeuristic {
    pub fn is_identifier(&self, value: &str) -> bool {
        if value.chars().count() < self.min_len {
            return false;
        }
        let mut freq: HashMap<char, usize> = HashMap::new();
        let mut n = 0usize;
        for ch in value.chars() {
            *freq.entry(ch).or_default() += 1;
            n += 1;
        }
        let n = n as f64;
        let entropy: f64 = freq
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum();
        entropy >= self.min_bits_per_char
    }
}

/// Outcome of comparing a proxy's claimed vantage against the observed /24.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrosscheckVerdict {
    FullMatch,
    CountryMismatch,
    AsMismatch,
    BothMismatch,
}

/// Compares the claimed ASCP with the ASCPs observed for every IP in the
/// request's /24. `observed` must be non-empty.
pub fn proxy_crosscheck(claimed: Ascp, observed: &[Ascp]) -> CrosscheckVerdict {
    assert!(!observed.is_empty(), "observed ascp list must be non-empty");
    let all_equal = observed.iter().all(|o| *o == claimed);
    if all_equal {
        return CrosscheckVerdict::FullMatch;
    }
    let asn_ok = observed.iter().all(|o| o.asn == claimed.asn);
    let country_ok = observed.iter().all(|o| o.country == claimed.country);
    match (asn_ok, country_ok) {
        (true, false) => CrosscheckVerdict::CountryMismatch,
        (false, true) => CrosscheckVerdict::AsMismatch,
        _ => CrosscheckVerdict::BothMismatch,
    }
}
