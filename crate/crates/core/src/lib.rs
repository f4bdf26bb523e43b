//! Batch auditing toolkit that determines, from recorded web-crawl and
//! traceroute evidence, which servers and trackers serving EU users are
//! physically located in countries without an EU adequacy decision.
//!
//! The pipeline runs entirely offline over recorded fixtures: geolocation
//! partition, source-based latency gating, destination-based speed-of-light
//! constraints, reverse-DNS geohint filtering, and the statistical reports
//! over the final sample.

#![forbid(unsafe_code)]

pub mod audit;
pub mod defaults;
pub mod error;
pub mod geodesy;
pub mod ingest;
pub mod labeling;
pub mod latency;
pub mod manifest;
pub mod model;
pub mod pipeline;
pub mod rdns;
pub mod report;
pub mod special;
pub mod stats;
