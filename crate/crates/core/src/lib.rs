//! LiDAR panoptic tracking around a pluggable segmentation source.
//!
//! Stages, in pipeline order: [`geometry`] accumulates three consecutive
//! scans into the newest scan's frame, [`projection`] turns the clip into a
//! range image, a [`oracle::Segmenter`] produces semantic logits and
//! instance masks, [`fusion`] merges them into panoptic labels, and
//! [`tracker`] re-projects the labels onto the points and links clips into
//! sequence-wide track ids. [`metrics`] scores the result and [`simulator`]
//! produces synthetic sequences with exact ground truth.

pub mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod projection;
pub mod render;
pub mod simulator;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
pub use geometry::{build_trio, transform_points, Trio};
pub use metrics::MetricReport;
pub use projection::{KnnConfig, LabelGrid, ProjectionConfig, RangeImage};
pub use tracker::{run_sequence, PipelineConfig, ProjectionMode, TrackLedger};
pub use types::*;
