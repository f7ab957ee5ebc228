//! Class-imbalance toolkit for semantic segmentation.
//!
//! Rare-class sampling with mosaic augmentation, adaptive class-weighted
//! cross-entropy, flip test-time augmentation, arithmetic-mean ensembling
//! and per-class probability post-processing, built around a small
//! convolutional pixel classifier and evaluated with confusion-matrix mIoU.

pub mod acw;
pub mod augment;
pub mod config;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod rcs;
pub mod rng;
pub mod stats;
pub mod types;

pub use error::{Error, ErrorKind, Result};
pub use types::{argmax_map, normalize, ClassSet, InputImage, LabelMap, ProbMap};
