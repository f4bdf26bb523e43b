//! Deterministic report writers. Two runs over identical inputs produce
//! byte-identical files: every collection is ordered and every float is
//! formatted through the same code path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::audit::{AuditReport, CdfSeries, FunnelReport, ValidationReport};
use crate::error::AuditError;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), AuditError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| AuditError::io(path.display().to_string(), e))
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "null".to_string(),
    }
}

/// funnel.csv: stage rows in Table-1 shape followed by the rDNS breakdown
/// and the final-sample lines.
pub fn funnel_csv(f: &FunnelReport) -> String {
    let mut out = String::new();
    out.push_str("stage,input,excluded_no_evidence,excluded_adequate_or_gate,passed,unique_ips\n");
    let _ = writeln!(
        out,
        "geodb,{},0,{},{},{}",
        f.geodb_candidates,
        f.geodb_adequate + f.geodb_unknown,
        f.geodb_kept,
        f.geodb_kept
    );
    let _ = writeln!(
        out,
        "source,{},{},{},{},{}",
        f.source_input, f.source_excluded_policy, f.source_below_gate, f.source_passed, f.source_unique_ips
    );
    let _ = writeln!(
        out,
        "destination,{},{},{},{},{}",
        f.dest_input,
        f.dest_excluded_unresponsive + f.dest_excluded_granularity,
        f.dest_sol_discarded,
        f.dest_passed,
        f.dest_unique_ips
    );
    let _ = writeln!(
        out,
        "rdns,{},{},{},{},{}",
        f.rdns_input,
        f.rdns_no_hostname + f.rdns_no_geohint,
        f.rdns_indicates_adequate,
        f.rdns_passed,
        f.final_unique_ips
    );
    for (name, value) in [
        ("rdns_no_hostname", f.rdns_no_hostname),
        ("rdns_no_geohint", f.rdns_no_geohint),
        ("rdns_confirms", f.rdns_confirms),
        ("rdns_reassigns", f.rdns_reassigns),
        ("rdns_indicates_adequate", f.rdns_indicates_adequate),
        ("dest_not_measured", f.dest_not_measured),
        ("final_unique_ips", f.final_unique_ips),
        ("final_instances", f.final_instances),
    ] {
        let _ = writeln!(out, "{name},{value},,,,");
    }
    out
}

/// rates.csv: `country,pct_traceroutes,pct_ips,pct_tracker_ips`, already
/// sorted by decreasing row mean.
pub fn rates_csv(report: &AuditReport) -> String {
    let mut out = String::from("country,pct_traceroutes,pct_ips,pct_tracker_ips\n");
    for row in &report.rates {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4}",
            row.country, row.pct_traceroutes, row.pct_ips, row.pct_tracker_ips
        );
    }
    out
}

/// flows.csv: `source_country,dest_country,count` sorted by keys.
pub fn flows_csv(report: &AuditReport) -> String {
    let mut out = String::from("source_country,dest_country,count\n");
    for ((src, dst), count) in &report.flows {
        let _ = writeln!(out, "{src},{dst},{count}");
    }
    out
}

/// anova.json: one entry per rate column.
pub fn anova_json(report: &AuditReport) -> String {
    let mut json = serde_json::Map::new();
    for (name, result) in &report.anova {
        let value = match result {
            Some(r) => serde_json::to_value(r).expect("anova serializes"),
            None => serde_json::Value::Null,
        };
        json.insert(name.clone(), value);
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(json))
        .expect("anova report serializes");
    s.push('\n');
    s
}

/// cookies.csv: per-identifier counts sorted by cookie volume.
pub fn cookies_csv(report: &AuditReport) -> String {
    let mut out = String::from("identifier,org,purpose,cookie_count,website_count\n");
    let mut rows: Vec<_> = report.cookie_stats.iter().collect();
    rows.sort_by(|a, b| b.1.cookie_count.cmp(&a.1.cookie_count).then_with(|| a.0.cmp(b.0)));
    for (pattern, stats) in rows {
        let _ = writeln!(
            out,
            "{pattern},{},{},{},{}",
            stats.org, stats.purpose, stats.cookie_count, stats.website_count
        );
    }
    out
}

/// categories.csv: `category,site_count` sorted by count then name.
pub fn categories_csv(report: &AuditReport) -> String {
    let mut out = String::from("category,site_count\n");
    let mut rows: Vec<_> = report.categories.iter().collect();
    rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for (category, count) in rows {
        let _ = writeln!(out, "{category},{count}");
    }
    out
}

/// One CDF file: `series,x_ms,f` with the candidate series first.
pub fn cdf_csv(series: &CdfSeries) -> String {
    let mut out = String::from("series,x_ms,f\n");
    for (name, points) in [("candidates", &series.candidates), ("confirmed", &series.confirmed)] {
        for (x, f) in points {
            let _ = writeln!(out, "{name},{x},{f}");
        }
    }
    out
}

/// instances.csv: the final sample, sorted by (site, asn, country, ip).
pub fn instances_csv(report: &AuditReport) -> String {
    let mut out = String::from("initial_site,asn,country,server_ip\n");
    for i in &report.instances {
        let _ = writeln!(out, "{},{},{},{}", i.initial_site, i.ascp.asn, i.ascp.country, i.server_ip);
    }
    out
}

/// review_queue.csv: tracker hits our ownership heuristics could not settle.
pub fn review_queue_csv(report: &AuditReport) -> String {
    let mut out = String::from("initial_site,domain,reason\n");
    for item in &report.review_queue {
        let _ = writeln!(out, "{},{},{}", item.initial_site, item.domain, item.reason);
    }
    out
}

/// metrics.json for a validation run.
pub fn metrics_json(v: &ValidationReport) -> String {
    fn metrics_obj(m: &crate::pipeline::ValidationMetrics) -> String {
        format!(
            "{{\"tp\": {}, \"fp\": {}, \"tn\": {}, \"fn\": {}, \"tpr\": {}, \"fnr\": {}, \"precision\": {}}}",
            m.tp,
            m.fp,
            m.tn,
            m.fn_,
            opt(m.tpr),
            opt(m.fnr),
            opt(m.precision)
        )
    }
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"overall\": {},", metrics_obj(&v.overall));
    out.push_str("  \"groups\": {\n");
    let n = v.groups.len();
    for (i, (name, m)) in v.groups.iter().enumerate() {
        let comma = if i + 1 < n { "," } else { "" };
        let _ = writeln!(out, "    \"{name}\": {}{comma}", metrics_obj(m));
    }
    out.push_str("  }\n}\n");
    out
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn step_path(points: &[(f64, f64)], x_max: f64) -> String {
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x / x_max) * plot_w;
    let sy = |f: f64| MARGIN_TOP + (1.0 - f) * plot_h;
    let mut d = String::new();
    let mut prev_f = 0.0;
    for (i, (x, f)) in points.iter().enumerate() {
        if i == 0 {
            let _ = write!(d, "M {:.2} {:.2} ", sx(*x), sy(0.0));
        } else {
            let _ = write!(d, "L {:.2} {:.2} ", sx(*x), sy(prev_f));
        }
        let _ = write!(d, "L {:.2} {:.2} ", sx(*x), sy(*f));
        prev_f = *f;
    }
    d.trim_end().to_string()
}

/// Self-contained SVG with both CDF series and a legend.
pub fn cdf_svg(series: &CdfSeries, title: &str) -> String {
    let x_max = series
        .candidates
        .iter()
        .chain(series.confirmed.iter())
        .map(|(x, _)| *x)
        .fold(1.0_f64, f64::max);
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>",
        MARGIN_LEFT + plot_w / 2.0
    );
    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>",
        MARGIN_TOP + plot_h
    );
    // Ticks and gridlines.
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let y = MARGIN_TOP + (1.0 - f) * plot_h;
        let _ = writeln!(
            svg,
            "  <line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{f:.1}</text>",
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
        let x_val = f * x_max;
        let x = MARGIN_LEFT + f * plot_w;
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{x_val:.0}</text>",
            MARGIN_TOP + plot_h + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">latency (ms)</text>",
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 12.0
    );
    for (points, color, label, y_legend) in [
        (&series.candidates, "#1f77b4", "all candidates", 40.0),
        (&series.confirmed, "#d62728", "confirmed non-adequate", 58.0),
    ] {
        if !points.is_empty() {
            let _ = writeln!(
                svg,
                "  <path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                step_path(points, x_max)
            );
        }
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y_legend}\" x2=\"{:.2}\" y2=\"{y_legend}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            MARGIN_LEFT + 10.0,
            MARGIN_LEFT + 34.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>",
            MARGIN_LEFT + 40.0,
            y_legend + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes every audit report file into `dir`.
pub fn write_audit_reports(report: &AuditReport, dir: &Path) -> Result<(), AuditError> {
    fs::create_dir_all(dir).map_err(|e| AuditError::io(dir.display().to_string(), e))?;
    write_file(dir, "funnel.csv", &funnel_csv(&report.funnel))?;
    write_file(dir, "rates.csv", &rates_csv(report))?;
    write_file(dir, "flows.csv", &flows_csv(report))?;
    write_file(dir, "anova.json", &anova_json(report))?;
    write_file(dir, "cookies.csv", &cookies_csv(report))?;
    write_file(dir, "categories.csv", &categories_csv(report))?;
    write_file(dir, "cdf_source.csv", &cdf_csv(&report.cdf_source))?;
    write_file(dir, "cdf_dest.csv", &cdf_csv(&report.cdf_dest))?;
    write_file(dir, "cdf_source.svg", &cdf_svg(&report.cdf_source, "Source-based latency CDF"))?;
    write_file(dir, "cdf_dest.svg", &cdf_svg(&report.cdf_dest, "Destination-based latency CDF"))?;
    write_file(dir, "instances.csv", &instances_csv(report))?;
    write_file(dir, "review_queue.csv", &review_queue_csv(report))?;
    Ok(())
}

/// Writes funnel.csv and metrics.json for a validation run.
pub fn write_validation_reports(
    funnel: &FunnelReport,
    validation: &ValidationReport,
    dir: &Path,
) -> Result<(), AuditError> {
    fs::create_dir_all(dir).map_err(|e| AuditError::io(dir.display().to_string(), e))?;
    write_file(dir, "funnel.csv", &funnel_csv(funnel))?;
    write_file(dir, "metrics.json", &metrics_json(validation))?;
    Ok(())
}
