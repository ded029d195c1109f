//! On-disk formats: run configs and manifests, field snapshots, heatmaps and
//! diagnostics CSV.

pub mod config;
pub mod heatmap;
pub mod sinks;
pub mod snapshot;
