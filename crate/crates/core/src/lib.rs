//! Correlation-filter visual tracker with channel compression, scale
//! estimation, confidence-gated long-term memory, histogram SVM
//! re-detection and low-light enhancement.

pub mod config;
pub mod dcf;
pub mod enhance;
pub mod error;
pub mod eval;
pub mod features;
pub mod imgproc;
pub mod memory;
pub mod redetect;
pub mod scale;
pub mod spectral;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
