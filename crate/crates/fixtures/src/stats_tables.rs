//! Literal published tables as fixture files: the per-country rate table,
//! the UN region assignment, and the source/destination traceroute flow
//! counts for the top non-adequate destinations (plus a small tail of
//! rarer destinations so the top-10 coverage sits at 97.7%).

use std::fmt::Write as _;
use std::path::Path;

use locaudit_core::defaults;

use crate::write;

/// (source country, pct_traceroutes, pct_ips, pct_tracker_ips)
pub const RATE_TABLE: [(&str, f64, f64, f64); 19] = [
    ("RO", 6.6, 2.8, 1.4),
    ("FI", 4.3, 4.3, 1.1),
    ("IT", 0.7, 3.8, 4.0),
    ("GR", 1.4, 4.2, 2.9),
    ("SK", 0.8, 3.7, 3.7),
    ("PL", 0.8, 4.6, 2.4),
    ("CZ", 0.3, 3.5, 0.8),
    ("ES", 0.4, 2.3, 1.6),
    ("HR", 0.9, 1.7, 1.6),
    ("HU", 0.4, 1.8, 2.0),
    ("AT", 0.6, 1.7, 1.2),
    ("DE", 0.6, 2.1, 0.5),
    ("PT", 0.4, 1.2, 1.3),
    ("IE", 0.9, 1.4, 0.5),
    ("BG", 0.2, 1.1, 1.4),
    ("FR", 0.4, 1.3, 0.4),
    ("SE", 0.3, 1.3, 0.4),
    ("DK", 0.1, 0.2, 0.0),
    ("BE", 0.1, 0.1, 0.0),
];

/// Per-destination traceroute counts by source country.
pub const FLOW_TABLE: [(&str, &[(&str, u64)]); 10] = [
    (
        "US",
        &[
            ("RO", 3), ("FI", 3), ("GR", 16), ("HR", 29), ("IE", 34), ("PL", 85), ("SK", 46),
            ("IT", 47), ("AT", 43), ("DE", 41), ("PT", 5), ("FR", 12), ("ES", 58), ("HU", 13),
            ("CZ", 17), ("SE", 16), ("BG", 7),
        ],
    ),
    (
        "TR",
        &[
            ("RO", 308), ("FI", 2), ("HR", 2), ("IE", 11), ("SE", 11), ("BG", 1), ("DK", 1),
        ],
    ),
    (
        "RU",
        &[
            ("FI", 147), ("GR", 2), ("IT", 1), ("FR", 1), ("CZ", 7), ("BG", 2), ("DK", 2),
        ],
    ),
    ("MX", &[("PL", 35), ("IT", 2), ("PT", 1), ("FR", 1), ("HU", 1)]),
    (
        "IN",
        &[
            ("RO", 1), ("FI", 1), ("GR", 4), ("HR", 1), ("IE", 4), ("PL", 4), ("SK", 2),
            ("IT", 5), ("AT", 4), ("DE", 1), ("PT", 2), ("ES", 3), ("CZ", 1), ("BG", 1),
        ],
    ),
    (
        "SG",
        &[("GR", 6), ("PL", 1), ("AT", 2), ("DE", 1), ("FR", 1), ("ES", 1), ("CZ", 2)],
    ),
    (
        "HK",
        &[
            ("RO", 1), ("GR", 7), ("HR", 1), ("IE", 1), ("IT", 1), ("DE", 5), ("PT", 1),
            ("ES", 1), ("HU", 1), ("CZ", 1),
        ],
    ),
    (
        "BR",
        &[
            ("RO", 2), ("SK", 1), ("IT", 5), ("FR", 1), ("ES", 1), ("CZ", 2), ("BG", 2),
            ("BE", 2),
        ],
    ),
    ("AE", &[("IT", 3), ("AT", 1), ("FR", 1), ("ES", 1), ("CZ", 4), ("BG", 1)]),
    ("AU", &[("PL", 1), ("IT", 1), ("DE", 2), ("ES", 1), ("CZ", 1)]),
];

/// Rare destinations beyond the top ten; each stays below the smallest
/// top-ten destination so the published top-ten set is preserved.
pub const FLOW_TAIL: [(&str, &[(&str, u64)]); 6] = [
    ("MY", &[("RO", 2), ("GR", 2), ("PL", 1)]),
    ("TH", &[("IT", 2), ("ES", 2), ("CZ", 1)]),
    ("CN", &[("DE", 2), ("FR", 2), ("HU", 1)]),
    ("ID", &[("PL", 2), ("AT", 2), ("SE", 1)]),
    ("VN", &[("RO", 2), ("IE", 2)]),
    ("PH", &[("BG", 1), ("BE", 1)]),
];

/// rates.csv in report format, one decimal as published.
pub fn rates_csv() -> String {
    let mut out = String::from("country,pct_traceroutes,pct_ips,pct_tracker_ips\n");
    for (country, tr, ips, trk) in RATE_TABLE {
        let _ = writeln!(out, "{country},{tr:.1},{ips:.1},{trk:.1}");
    }
    out
}

/// flows.csv expanded to one row per traceroute.
pub fn flows_csv() -> String {
    let mut out = String::from("source_country,dest_country\n");
    for (dest, sources) in FLOW_TABLE.iter().chain(FLOW_TAIL.iter()) {
        for (src, count) in sources.iter() {
            for _ in 0..*count {
                let _ = writeln!(out, "{src},{dest}");
            }
        }
    }
    out
}

/// Writes rates_table.csv, flows_table.csv and regions.csv into `dir`.
pub fn write_tables(dir: &Path) -> std::io::Result<()> {
    write(dir, "rates_table.csv", &rates_csv())?;
    write(dir, "flows_table.csv", &flows_csv())?;
    write(dir, "regions.csv", defaults::UN_REGIONS_CSV)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_totals_match_published_sums() {
        let totals: Vec<u64> = FLOW_TABLE
            .iter()
            .map(|(_, sources)| sources.iter().map(|(_, c)| c).sum())
            .collect();
        assert_eq!(totals, vec![475, 336, 162, 40, 34, 14, 20, 16, 11, 6]);
        let top10: u64 = totals.iter().sum();
        assert_eq!(top10, 1114);
        let tail: u64 = FLOW_TAIL
            .iter()
            .flat_map(|(_, sources)| sources.iter().map(|(_, c)| c))
            .sum();
        assert_eq!(tail, 26);
        // Every tail destination stays below the smallest top-ten count.
        for (_, sources) in FLOW_TAIL {
            let total: u64 = sources.iter().map(|(_, c)| c).sum();
            assert!(total < 6, "tail destination too large: {total}");
        }
    }
}
