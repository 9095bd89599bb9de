//! Endorsement dynamics of emergent social hierarchy.
//!
//! Nodes repeatedly endorse one another. Each endorsement is chosen by a
//! multinomial logit over utilities that depend on the current node scores,
//! and remembered endorsements decay geometrically. The crate provides:
//!
//! - [`model`]: state, parameters and the decay update;
//! - [`scores`]: Root-Degree, PageRank and SpringRank score functions;
//! - [`choice`]: feature maps, utilities, logit probabilities and sampling;
//! - [`sim`]: trajectory simulation and rank-variance summaries;
//! - [`stability`]: the long-memory drift field, egalitarian stability,
//!   critical preference values and two-group equilibrium branches;
//! - [`inference`]: likelihood, maximum-likelihood fitting and model comparison;
//! - [`data`]: the `period,source,target,count` interchange format and
//!   dataset converters.

pub mod choice;
pub mod data;
pub mod error;
pub mod inference;
pub mod model;
pub mod scores;
pub mod serde_matrix;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use model::{EndorsementState, ModelParams};
pub use scores::ScoreKind;
