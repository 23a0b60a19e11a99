//! Tools for studying δ-hallucination of loss-minimizing estimators.
//!
//! * [`mixture`]: latent-variable Gaussian mixtures, Bayes-optimal estimates and losses.
//! * [`regions`]: δ-hallucination verdicts, high-conditional-density regions, HDR/HCDR.
//! * [`constructions`]: explicit hallucinating mixtures, each verified numerically.
//! * [`bounds`]: the hallucination-probability lower bound and its Monte Carlo checks.
//! * [`coinflip`]: coin-flip experiment with exact Poisson-binomial targets.
//! * [`detector`]: embedding-space HCDR detector (PCA + per-class GMM + percentile cutoffs).
//! * [`report`]: run configuration, seeds, versioned reports.

pub mod bounds;
pub mod coinflip;
pub mod constructions;
pub mod detector;
pub mod error;
pub mod mixture;
pub mod regions;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{HalluError, Result};
pub use mixture::{Covariance, GaussianComponent, LatentMixture, SimplexVector};
