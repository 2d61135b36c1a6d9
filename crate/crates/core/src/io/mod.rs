//! File formats: run configuration, long-format CSV tables, the PGM heatmap
//! and the fit report.

pub mod config;
mod pgm;
mod report;
mod tables;

pub use config::{ConfigError, RunConfig};
pub use pgm::{heatmap_pixels, write_pgm};
pub use report::FitReport;
pub use tables::{
    read_spectrum_csv, write_branch_csv, write_spectrum_csv, write_thickness_csv, DataError,
    BRANCH_HEADER, SPECTRUM_HEADER, THICKNESS_HEADER,
};
