//! Median-of-means robust k-means quantization.
//!
//! The crate provides the quantizer geometry (`geometry`), block-based MOM
//! and QOM criteria (`mom`), exact oracles and samplers (`distributions`),
//! the ERM and MOM estimators (`estimators`), and a seeded Monte-Carlo
//! harness (`experiments`).

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod geometry;
pub mod mom;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Dataset, Point, Quantizer};
