//! Raw contents of the bundled default data files, exposed so tooling can
//! materialize self-contained input bundles.

pub const ADEQUACY_LEDGER_CSV: &str = include_str!("../data/adequacy_ledger.csv");
pub const THRESHOLDS_TOML: &str = include_str!("../data/thresholds.toml");
pub const UN_REGIONS_CSV: &str = include_str!("../data/un_regions.csv");
pub const COOKIE_RULES_CSV: &str = include_str!("../data/cookie_rules.csv");
pub const MANUAL_TRACKERS: &str = include_str!("../data/manual_trackers.txt");
pub const GEOHINTS_IATA_CSV: &str = include_str!("../data/geohints/iata.csv");
pub const GEOHINTS_CLOUD_REGIONS_CSV: &str = include_str!("../data/geohints/cloud_regions.csv");
pub const GEOHINTS_COUNTRY_TOKENS_CSV: &str = include_str!("../data/geohints/country_tokens.csv");
pub const GEOHINTS_OVERRIDES_CSV: &str = include_str!("../data/geohints/overrides.csv");
