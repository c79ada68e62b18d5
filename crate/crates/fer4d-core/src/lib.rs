//! End-to-end 4D facial expression recognition on dynamic 3D face scans:
//! mesh preprocessing, multi-view geometric imaging, rank-pooled dynamic
//! images, landmark-sequence classification, and decision-level fusion of
//! the two streams across views, evaluated under subject-independent
//! cross-validation.
//!
//! The crate is organized along the pipeline:
//!
//! * [`mesh`] — domain types for 4D samples plus outlier removal and
//!   landmark-guided face cropping
//! * [`render`] / [`clahe`] — orthographic multi-view depth/texture
//!   rasterization and contrast-limited adaptive histogram equalization
//! * [`rankpool`] — dynamic images via rank pooling (closed-form and exact)
//! * [`landmarks`] — projected landmark bitmaps and per-frame descriptors
//! * [`neural`] — from-scratch ConvNet and BiLSTM with exact gradients
//! * [`fusion`] — multi-view/multi-stream collaboration, folds, reports
//! * [`synth`] — deterministic synthetic 4D data generator
//! * [`io`] / [`config`] — file formats and pipeline configuration

pub mod clahe;
pub mod config;
pub mod fusion;
pub mod io;
pub mod landmarks;
pub mod mesh;
pub mod neural;
pub mod rankpool;
pub mod render;
pub mod synth;
