//! Geodesic distance, speed-of-light feasibility, and the regional latency
//! thresholds behind the source-based gate.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::GeodesyError;
use crate::model::{CountryCode, GeoPoint};

/// Mean Earth radius in kilometres (IUGG R1).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Speed of light in vacuum, km per millisecond.
pub const LIGHT_SPEED_KM_PER_MS: f64 = 299.792458;

/// Great-circle distance between two points on the mean-radius sphere.
///
/// Haversine rather than an ellipsoidal formula: country-level filtering
/// tolerates the < 0.5% spherical error and haversine has no antipodal
/// singularities. Maximum possible value is half the circumference,
/// pi * 6371.0088 ~= 20015.11 km.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    // Absolute deltas keep the function bitwise symmetric in its arguments.
    let d_lat = (b.lat - a.lat).abs().to_radians();
    let d_lon = (b.lon - a.lon).abs().to_radians();
    let s = (d_lat / 2.0).sin().powi(2)
        + lat_a.cos() * lat_b.cos() * (d_lon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * s.sqrt().min(1.0).asin()
}

/// Speed-of-light feasibility bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolConfig {
    /// Maximum believable propagation speed in km/ms.
    pub max_speed_km_per_ms: f64,
}

impl Default for SolConfig {
    /// 4c/9 ~= 133.24 km/ms: more conservative than the commonly used 2c/3,
    /// absorbing non-geodesic fiber paths and router queueing.
    fn default() -> Self {
        SolConfig {
            max_speed_km_per_ms: 4.0 / 9.0 * LIGHT_SPEED_KM_PER_MS,
        }
    }
}

/// Feasibility verdict of a distance/RTT pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolVerdict {
    Feasible,
    Infeasible,
}

/// Implied one-hop propagation speed. The RTT covers the path twice, so the
/// speed is 2*d / rtt.
pub fn implied_speed(distance_km: f64, rtt_ms: f64) -> Result<f64, GeodesyError> {
    if !(rtt_ms > 0.0) {
        return Err(GeodesyError::NonPositiveRtt(rtt_ms));
    }
    Ok(2.0 * distance_km / rtt_ms)
}

/// Discards measurements whose implied speed strictly exceeds the bound;
/// exact equality stays feasible.
pub fn sol_feasible(
    distance_km: f64,
    rtt_ms: f64,
    cfg: &SolConfig,
) -> Result<SolVerdict, GeodesyError> {
    let speed = implied_speed(distance_km, rtt_ms)?;
    if speed > cfg.max_speed_km_per_ms {
        Ok(SolVerdict::Infeasible)
    } else {
        Ok(SolVerdict::Feasible)
    }
}

/// Threshold region for published latency averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRegion {
    Europe,
    Us,
    Emea,
    AsiaPacific,
}

/// Regional latency averages and the candidate gate fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyThresholdConfig {
    pub fraction: f64,
    pub region_avgs_ms: BTreeMap<ThresholdRegion, f64>,
    pub country_to_region: BTreeMap<CountryCode, ThresholdRegion>,
    pub latam_overrides_ms: BTreeMap<CountryCode, f64>,
}

#[derive(Debug, Deserialize)]
struct RawThresholds {
    fraction: f64,
    averages: RawAverages,
    #[serde(default)]
    country_region: BTreeMap<String, ThresholdRegion>,
    #[serde(default)]
    latam_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
struct RawAverages {
    europe: f64,
    us: f64,
    emea: f64,
    asia_pacific: f64,
}

impl LatencyThresholdConfig {
    /// Config shipped with the toolkit: Europe 13ms, US 65ms, EMEA 78ms,
    /// Asia-Pacific 106ms, per-country Latin America values, 90% gate.
    pub fn bundled() -> Self {
        Self::from_toml(crate::defaults::THRESHOLDS_TOML).expect("bundled thresholds are well-formed")
    }

    pub fn from_toml(text: &str) -> Result<Self, GeodesyError> {
        let raw: RawThresholds =
            toml::from_str(text).map_err(|e| GeodesyError::Config(e.to_string()))?;
        if !(raw.fraction > 0.0 && raw.fraction <= 1.0) {
            return Err(GeodesyError::Config(format!(
                "fraction must be in (0, 1], got {}",
                raw.fraction
            )));
        }
        let mut region_avgs_ms = BTreeMap::new();
        region_avgs_ms.insert(ThresholdRegion::Europe, raw.averages.europe);
        region_avgs_ms.insert(ThresholdRegion::Us, raw.averages.us);
        region_avgs_ms.insert(ThresholdRegion::Emea, raw.averages.emea);
        region_avgs_ms.insert(ThresholdRegion::AsiaPacific, raw.averages.asia_pacific);
        for (_, avg) in region_avgs_ms.iter() {
            if !(*avg > 0.0) {
                return Err(GeodesyError::Config("averages must be positive".into()));
            }
        }
        let mut country_to_region = BTreeMap::new();
        for (cc, region) in raw.country_region {
            let cc = CountryCode::parse(&cc).map_err(|e| GeodesyError::Config(e.to_string()))?;
            country_to_region.insert(cc, region);
        }
        let mut latam_overrides_ms = BTreeMap::new();
        for (cc, avg) in raw.latam_overrides {
            if !(avg > 0.0) {
                return Err(GeodesyError::Config("averages must be positive".into()));
            }
            let cc = CountryCode::parse(&cc).map_err(|e| GeodesyError::Config(e.to_string()))?;
            latam_overrides_ms.insert(cc, avg);
        }
        Ok(LatencyThresholdConfig {
            fraction: raw.fraction,
            region_avgs_ms,
            country_to_region,
            latam_overrides_ms,
        })
    }

    /// Published average latency for a destination country. Per-country
    /// overrides take precedence over the regional value.
    pub fn average_ms(&self, dest: CountryCode) -> Result<f64, GeodesyError> {
        if let Some(&avg) = self.latam_overrides_ms.get(&dest) {
            return Ok(avg);
        }
        let region = self
            .country_to_region
            .get(&dest)
            .ok_or_else(|| GeodesyError::UnmappedDestination(dest.to_string()))?;
        Ok(self.region_avgs_ms[region])
    }
}

/// Source-based gate verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateVerdict {
    Candidate,
    ExcludedTooClose,
}

/// A traceroute keeps its candidate status only when the observed latency is
/// at least `fraction` of the published average for the destination; "at
/// least" makes the boundary inclusive.
pub fn source_latency_gate(
    observed_ms: f64,
    dest_country: CountryCode,
    cfg: &LatencyThresholdConfig,
) -> Result<GateVerdict, GeodesyError> {
    let threshold = cfg.fraction * cfg.average_ms(dest_country)?;
    if observed_ms >= threshold {
        Ok(GateVerdict::Candidate)
    } else {
        Ok(GateVerdict::ExcludedTooClose)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn cc(s: &str) -> CountryCode {
        CountryCode::parse(s).unwrap()
    }

    // Computed with an independent haversine implementation before the build.
    #[test]
    fn paris_to_new_york() {
        let d = haversine_km(pt(48.8566, 2.3522), pt(40.7128, -74.0060));
        assert!((d - 5837.25).abs() < 5.0, "got {d}");
    }

    #[test]
    fn identical_points_are_zero() {
        assert_eq!(haversine_km(pt(10.0, 20.0), pt(10.0, 20.0)), 0.0);
    }

    #[test]
    fn antipodal_points_hit_half_circumference() {
        let d = haversine_km(pt(0.0, 0.0), pt(0.0, 180.0));
        let half = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert!((d - half).abs() < 1.0, "got {d}, expected {half}");
    }

    #[test]
    fn implied_speed_examples() {
        assert_eq!(implied_speed(6000.0, 20.0).unwrap(), 600.0);
        assert_eq!(implied_speed(0.0, 5.0).unwrap(), 0.0);
        // 1332.4 km in 20 ms sits exactly on the 4c/9 bound (to rounding).
        let s = implied_speed(1332.4, 20.0).unwrap();
        assert!((s - 133.24).abs() < 1e-9);
        assert!(implied_speed(100.0, 0.0).is_err());
        assert!(implied_speed(100.0, -3.0).is_err());
    }

    #[test]
    fn sol_verdicts_with_boundary_feasible() {
        let cfg = SolConfig::default();
        assert_eq!(sol_feasible(6000.0, 20.0, &cfg).unwrap(), SolVerdict::Infeasible);
        assert_eq!(sol_feasible(600.0, 20.0, &cfg).unwrap(), SolVerdict::Feasible);
        // Exact equality stays feasible: discard is strict.
        let d = cfg.max_speed_km_per_ms * 20.0 / 2.0;
        assert_eq!(sol_feasible(d, 20.0, &cfg).unwrap(), SolVerdict::Feasible);
    }

    #[test]
    fn gate_uses_ninety_percent_of_destination_average() {
        let cfg = LatencyThresholdConfig::bundled();
        assert_eq!(
            source_latency_gate(40.0, cc("US"), &cfg).unwrap(),
            GateVerdict::ExcludedTooClose
        );
        // Boundary is inclusive: 58.5 = 0.9 * 65.
        assert_eq!(
            source_latency_gate(58.5, cc("US"), &cfg).unwrap(),
            GateVerdict::Candidate
        );
        assert_eq!(
            source_latency_gate(12.0, cc("RU"), &cfg).unwrap(),
            GateVerdict::Candidate
        );
        assert_eq!(
            source_latency_gate(11.0, cc("RU"), &cfg).unwrap(),
            GateVerdict::ExcludedTooClose
        );
    }

    #[test]
    fn latam_overrides_take_precedence() {
        let cfg = LatencyThresholdConfig::bundled();
        assert_eq!(cfg.average_ms(cc("BR")).unwrap(), 113.0);
        assert_eq!(cfg.average_ms(cc("CL")).unwrap(), 166.0);
    }

    #[test]
    fn unmapped_destination_is_an_error() {
        let cfg = LatencyThresholdConfig::bundled();
        let err = source_latency_gate(50.0, cc("AQ"), &cfg).unwrap_err();
        assert!(matches!(err, GeodesyError::UnmappedDestination(_)));
    }

    #[test]
    fn gate_invariant_under_joint_scaling() {
        let mut cfg = LatencyThresholdConfig::bundled();
        let before = source_latency_gate(58.4, cc("US"), &cfg).unwrap();
        for avg in cfg.region_avgs_ms.values_mut() {
            *avg *= 3.5;
        }
        for avg in cfg.latam_overrides_ms.values_mut() {
            *avg *= 3.5;
        }
        let after = source_latency_gate(58.4 * 3.5, cc("US"), &cfg).unwrap();
        assert_eq!(before, after);
    }
}
