//! Configuration files, CSV tables, SVG plots and run manifests.

pub mod config;
pub mod format;
pub mod manifest;
pub mod records;
pub mod svg;

pub use config::{build_config, load_config, render_config, Setting};
pub use manifest::{RunManifest, CSV_SCHEMA_VERSION};
pub use records::{
    read_losses, read_records, write_losses, write_records, LossRow, MetricRow, Network,
    LOSSES_HEADER, RECORDS_HEADER,
};
pub use svg::{plot_losses, plot_metrics};
