//! Correlation-matrix analysis of asset return panels: Marchenko-Pastur
//! filtering, eigenportfolio betas, long-only Markowitz frontiers and the
//! power-law scaling of portfolio-weight entropy with risk.
//!
//! The pipeline runs bottom-up through the modules:
//!
//! * [`panel`]: price/return panels, CSV ingestion, windows, synthetic data
//! * [`correlation`]: `C = G G^T / L` and off-diagonal summaries
//! * [`rmt`]: Marchenko-Pastur law, eigendecomposition, random/filter split
//! * [`factor`]: eigenportfolio series and their market beta
//! * [`markowitz`]: long-only minimum-variance frontiers, weight entropy
//! * [`scaling`]: `E(sigma) ~ sigma^-gamma` fits and rolling scans
//! * [`cli`]: the `rmtp` command-line driver

pub mod cli;
pub mod correlation;
pub mod error;
pub mod factor;
pub mod markowitz;
pub mod panel;
pub mod pipeline;
mod rng;
pub mod rmt;
pub mod scaling;
mod stats;

pub use error::{Error, Result};
