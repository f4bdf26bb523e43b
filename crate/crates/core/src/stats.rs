//! Quantitative outputs: per-country rates, the source/destination flow
//! matrix, the regional one-way ANOVA, cookie and category summaries, and
//! empirical latency CDFs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::StatsError;
use crate::ingest::Cookie;
use crate::labeling::CookieIdRule;
use crate::model::{CountryCode, DomainName, Region};
use crate::special::f_distribution_sf;

/// Per-source-country numerators and denominators for the rate table.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateInputs {
    pub traceroutes_total: u64,
    pub traceroutes_non_adequate: u64,
    pub ips_total: u64,
    pub ips_non_adequate: u64,
    pub tracker_ips_total: u64,
    pub tracker_ips_non_adequate: u64,
}

/// One row of the rate table, percentages in [0, 100].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountryRateRow {
    pub country: CountryCode,
    pub pct_traceroutes: f64,
    pub pct_ips: f64,
    pub pct_tracker_ips: f64,
}

impl CountryRateRow {
    pub fn mean(&self) -> f64 {
        (self.pct_traceroutes + self.pct_ips + self.pct_tracker_ips) / 3.0
    }
}

/// Computes the per-country percentage rows, sorted by decreasing row mean
/// with country code breaking ties. Every denominator must be positive.
pub fn country_rates(
    inputs: &BTreeMap<CountryCode, RateInputs>,
) -> Result<Vec<CountryRateRow>, StatsError> {
    for (country, n) in inputs {
        if n.traceroutes_total == 0 || n.ips_total == 0 || n.tracker_ips_total == 0 {
            return Err(StatsError::ZeroTotal(country.to_string()));
        }
    }
    Ok(country_rates_lenient(inputs))
}

/// Rate rows where a zero denominator yields a 0.0 rate instead of an
/// error, for runs that legitimately carry no tracker evidence (for
/// example the validation testbeds).
pub fn country_rates_lenient(inputs: &BTreeMap<CountryCode, RateInputs>) -> Vec<CountryRateRow> {
    let pct = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    let mut rows: Vec<CountryRateRow> = inputs
        .iter()
        .map(|(country, n)| CountryRateRow {
            country: *country,
            pct_traceroutes: pct(n.traceroutes_non_adequate, n.traceroutes_total),
            pct_ips: pct(n.ips_non_adequate, n.ips_total),
            pct_tracker_ips: pct(n.tracker_ips_non_adequate, n.tracker_ips_total),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.mean()
            .partial_cmp(&a.mean())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.country.cmp(&b.country))
    });
    rows
}

/// Counts final non-adequate traceroutes per (source, destination) pair.
pub fn flow_matrix(
    flows: impl IntoIterator<Item = (CountryCode, CountryCode)>,
) -> BTreeMap<(CountryCode, CountryCode), u64> {
    let mut matrix = BTreeMap::new();
    for (src, dst) in flows {
        *matrix.entry((src, dst)).or_insert(0) += 1;
    }
    matrix
}

/// Top-k destinations by traceroute volume and the share of all traces they
/// cover, as a percentage. Ties break on country code for determinism.
pub fn top_k_coverage(
    matrix: &BTreeMap<(CountryCode, CountryCode), u64>,
    k: usize,
) -> (Vec<CountryCode>, f64) {
    let mut per_dest: BTreeMap<CountryCode, u64> = BTreeMap::new();
    let mut total = 0u64;
    for (&(_, dst), &count) in matrix {
        *per_dest.entry(dst).or_insert(0) += count;
        total += count;
    }
    let mut ranked: Vec<(CountryCode, u64)> = per_dest.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    let covered: u64 = ranked.iter().map(|(_, c)| c).sum();
    let coverage = if total == 0 {
        0.0
    } else {
        100.0 * covered as f64 / total as f64
    };
    (ranked.into_iter().map(|(cc, _)| cc).collect(), coverage)
}

/// One-way ANOVA outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub p_value: f64,
    pub df_between: u64,
    pub df_within: u64,
    pub group_means: BTreeMap<Region, f64>,
}

/// Standard one-way F test across regional groups. The p-value comes from
/// the F upper tail via the regularized incomplete beta function.
///
/// Fully degenerate input (zero variance within every group and equal
/// means) reports F = 0, p = 1; zero within-variance with differing means
/// reports an infinite F with p = 0.
pub fn one_way_anova(groups: &BTreeMap<Region, Vec<f64>>) -> Result<AnovaResult, StatsError> {
    let k = groups.len();
    if k < 2 || groups.values().any(|g| g.is_empty()) {
        return Err(StatsError::NotEnoughGroups);
    }
    let n: usize = groups.values().map(|g| g.len()).sum();
    if n <= k {
        return Err(StatsError::NotEnoughGroups);
    }

    // Sum-of-squares route: SSW per group from sum and sum of squares,
    // SSB from group means around the grand mean.
    let grand_sum: f64 = groups.values().flatten().sum();
    let grand_mean = grand_sum / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    let mut group_means = BTreeMap::new();
    for (region, values) in groups {
        let ni = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let sum_sq: f64 = values.iter().map(|v| v * v).sum();
        let mean = sum / ni;
        group_means.insert(*region, mean);
        ss_between += ni * (mean - grand_mean) * (mean - grand_mean);
        ss_within += (sum_sq - ni * mean * mean).max(0.0);
    }

    let df_between = (k - 1) as u64;
    let df_within = (n - k) as u64;
    let (f_stat, p_value) = if ss_within == 0.0 {
        if ss_between <= f64::EPSILON * grand_sum.abs().max(1.0) {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_distribution_sf(f, df_between, df_within))
    };
    Ok(AnovaResult {
        f_stat,
        p_value,
        df_between,
        df_within,
        group_means,
    })
}

/// Per-identifier cookie statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CookieIdStats {
    pub org: String,
    pub purpose: String,
    pub cookie_count: u64,
    pub website_count: u64,
}

/// Counts distinct cookies and distinct hosting sites per matched
/// identifier. Cookies are distinct by (name, value, site).
pub fn cookie_summary(
    cookies: &[Cookie],
    rules: &[CookieIdRule],
) -> BTreeMap<String, CookieIdStats> {
    let mut seen: HashSet<(&str, &str, &str)> = HashSet::new();
    let mut out: BTreeMap<String, CookieIdStats> = BTreeMap::new();
    let mut sites: HashMap<String, BTreeSet<&str>> = HashMap::new();
    for cookie in cookies {
        if !seen.insert((&cookie.name, &cookie.value, cookie.site.as_str())) {
            continue;
        }
        let Some(m) = crate::labeling::classify_cookie(cookie, rules) else {
            continue;
        };
        let entry = out.entry(m.matched_pattern.clone()).or_insert(CookieIdStats {
            org: m.org,
            purpose: m.purpose,
            cookie_count: 0,
            website_count: 0,
        });
        entry.cookie_count += 1;
        sites
            .entry(m.matched_pattern)
            .or_default()
            .insert(cookie.site.as_str());
    }
    for (pattern, stats) in out.iter_mut() {
        stats.website_count = sites.get(pattern).map_or(0, |s| s.len() as u64);
    }
    out
}

/// Bucket used for sites absent from the category map.
pub const UNCATEGORIZED: &str = "Uncategorized";

/// Counts distinct sites per category; sites missing from the map land in
/// the [`UNCATEGORIZED`] bucket so totals always reconcile.
pub fn category_counts(
    sites: &BTreeSet<DomainName>,
    category_map: &HashMap<DomainName, String>,
) -> BTreeMap<String, u64> {
    let mut out: BTreeMap<String, u64> = BTreeMap::new();
    for site in sites {
        let category = category_map
            .get(site)
            .cloned()
            .unwrap_or_else(|| UNCATEGORIZED.to_string());
        *out.entry(category).or_insert(0) += 1;
    }
    out
}

/// Empirical CDF: one right-continuous point per distinct value, with
/// F(max) = 1.
pub fn latency_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    let mut i = 0usize;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == x {
            j += 1;
        }
        points.push((x, (j + 1) as f64 / n));
        i = j + 1;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DomainName;

    fn cc(s: &str) -> CountryCode {
        CountryCode::parse(s).unwrap()
    }

    #[test]
    fn rates_sorted_by_row_mean() {
        let mut inputs = BTreeMap::new();
        inputs.insert(
            cc("AA"),
            RateInputs {
                traceroutes_total: 100,
                traceroutes_non_adequate: 1,
                ips_total: 100,
                ips_non_adequate: 1,
                tracker_ips_total: 100,
                tracker_ips_non_adequate: 1,
            },
        );
        inputs.insert(
            cc("BB"),
            RateInputs {
                traceroutes_total: 100,
                traceroutes_non_adequate: 10,
                ips_total: 100,
                ips_non_adequate: 10,
                tracker_ips_total: 100,
                tracker_ips_non_adequate: 10,
            },
        );
        let rows = country_rates(&inputs).unwrap();
        assert_eq!(rows[0].country, cc("BB"));
        assert_eq!(rows[0].pct_ips, 10.0);
        assert_eq!(rows[1].pct_ips, 1.0);
    }

    #[test]
    fn rates_zero_total_is_an_error() {
        let mut inputs = BTreeMap::new();
        inputs.insert(cc("AA"), RateInputs::default());
        assert!(matches!(
            country_rates(&inputs),
            Err(StatsError::ZeroTotal(_))
        ));
    }

    #[test]
    fn rates_all_zero_numerators_give_zero_rows() {
        let mut inputs = BTreeMap::new();
        inputs.insert(
            cc("AA"),
            RateInputs {
                traceroutes_total: 10,
                ips_total: 10,
                tracker_ips_total: 10,
                ..Default::default()
            },
        );
        let rows = country_rates(&inputs).unwrap();
        assert_eq!(rows[0].pct_traceroutes, 0.0);
        assert_eq!(rows[0].pct_ips, 0.0);
        assert_eq!(rows[0].pct_tracker_ips, 0.0);
    }

    #[test]
    fn flow_matrix_counts_and_conservation() {
        let flows = vec![
            (cc("RO"), cc("TR")),
            (cc("RO"), cc("TR")),
            (cc("FI"), cc("RU")),
        ];
        let total_in = flows.len() as u64;
        let matrix = flow_matrix(flows);
        assert_eq!(matrix[&(cc("RO"), cc("TR"))], 2);
        assert_eq!(matrix.values().sum::<u64>(), total_in);
        assert!(flow_matrix(Vec::new()).is_empty());
    }

    #[test]
    fn top_k_coverage_partial() {
        let flows = vec![
            (cc("RO"), cc("TR")),
            (cc("RO"), cc("TR")),
            (cc("FI"), cc("RU")),
            (cc("DE"), cc("US")),
        ];
        let matrix = flow_matrix(flows);
        let (top, coverage) = top_k_coverage(&matrix, 1);
        assert_eq!(top, vec![cc("TR")]);
        assert!((coverage - 50.0).abs() < 1e-12);
    }

    #[test]
    fn anova_equal_groups_give_f_zero_p_one() {
        let mut groups = BTreeMap::new();
        groups.insert(Region::Northern, vec![1.0, 2.0, 3.0]);
        groups.insert(Region::Southern, vec![1.0, 2.0, 3.0]);
        let r = one_way_anova(&groups).unwrap();
        assert!(r.f_stat.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anova_fully_degenerate_reports_f_zero_p_one() {
        let mut groups = BTreeMap::new();
        groups.insert(Region::Northern, vec![2.0, 2.0]);
        groups.insert(Region::Southern, vec![2.0, 2.0]);
        let r = one_way_anova(&groups).unwrap();
        assert_eq!(r.f_stat, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn anova_zero_within_variance_with_distinct_means() {
        let mut groups = BTreeMap::new();
        groups.insert(Region::Northern, vec![1.0, 1.0]);
        groups.insert(Region::Southern, vec![5.0, 5.0]);
        let r = one_way_anova(&groups).unwrap();
        assert!(r.f_stat.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn anova_rejects_degenerate_shapes() {
        let mut groups = BTreeMap::new();
        groups.insert(Region::Northern, vec![1.0]);
        assert!(one_way_anova(&groups).is_err());
        groups.insert(Region::Southern, vec![2.0]);
        // n == k
        assert!(one_way_anova(&groups).is_err());
    }

    #[test]
    fn anova_affine_invariance_of_f() {
        let mut groups = BTreeMap::new();
        groups.insert(Region::Northern, vec![0.0, 1.1, 0.5, 0.4]);
        groups.insert(Region::Southern, vec![1.6, 2.9, 1.6, 4.0, 1.3]);
        groups.insert(Region::Eastern, vec![1.4, 0.8, 2.0, 2.4, 1.4, 3.7]);
        let base = one_way_anova(&groups).unwrap();
        let scaled: BTreeMap<Region, Vec<f64>> = groups
            .iter()
            .map(|(r, vs)| (*r, vs.iter().map(|v| 7.25 * v - 3.0).collect()))
            .collect();
        let transformed = one_way_anova(&scaled).unwrap();
        let rel = (base.f_stat - transformed.f_stat).abs() / base.f_stat;
        assert!(rel < 1e-9, "rel err {rel}");
    }

    #[test]
    fn cookie_summary_counts_cookies_and_sites() {
        let rules = crate::labeling::bundled_cookie_rules();
        let dom = |s: &str| DomainName::parse(s).unwrap();
        let mut cookies = Vec::new();
        for (i, site) in ["a.test", "b.test"].iter().enumerate() {
            for j in 0..3 {
                cookies.push(Cookie {
                    name: "_ga".into(),
                    value: format!("GA1.2.{i}{j}"),
                    site: dom(site),
                });
            }
        }
        cookies.push(Cookie {
            name: "sessionid".into(),
            value: "x".into(),
            site: dom("a.test"),
        });
        // Exact duplicate must not double-count.
        cookies.push(cookies[0].clone());
        let summary = cookie_summary(&cookies, &rules);
        assert_eq!(summary["_ga"].cookie_count, 6);
        assert_eq!(summary["_ga"].website_count, 2);
        assert!(!summary.contains_key("sessionid"));
        assert!(cookie_summary(&[], &rules).is_empty());
    }

    #[test]
    fn category_counts_with_uncategorized_bucket() {
        let dom = |s: &str| DomainName::parse(s).unwrap();
        let sites: BTreeSet<DomainName> =
            ["a.test", "b.test", "c.test"].iter().map(|s| dom(s)).collect();
        let mut map = HashMap::new();
        map.insert(dom("a.test"), "News & Media Publishers".to_string());
        map.insert(dom("b.test"), "News & Media Publishers".to_string());
        let counts = category_counts(&sites, &map);
        assert_eq!(counts["News & Media Publishers"], 2);
        assert_eq!(counts[UNCATEGORIZED], 1);
        assert_eq!(counts.values().sum::<u64>(), sites.len() as u64);
    }

    #[test]
    fn cdf_counting_examples() {
        let points = latency_cdf(&[10.0, 20.0, 20.0, 40.0]).unwrap();
        assert_eq!(points, vec![(10.0, 0.25), (20.0, 0.75), (40.0, 1.0)]);
        assert_eq!(latency_cdf(&[7.0]).unwrap(), vec![(7.0, 1.0)]);
        assert!(latency_cdf(&[]).is_err());
    }
}
