//! Posterior versus possibilistic (valid IM) inference for Gaussian means,
//! with diagnostics for false confidence.

pub mod commands;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod hypothesis;
pub mod noloco;
mod optim;
pub mod output;
pub mod posterior;
pub mod presets;
pub mod special;
pub mod valid_im;

pub use error::{Error, Result};
pub use gaussian::{GaussianExperiment, SeedSpec};
pub use hypothesis::{BoundingBox, Hypothesis};
pub use posterior::{posterior_prob, PosteriorMethod, PosteriorProbEstimate};
pub use special::{Probability, SeriesTolerance};
pub use valid_im::{ContourKind, PossibilityContour};
