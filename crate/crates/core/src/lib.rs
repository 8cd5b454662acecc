//! Analytics for altruistic request success: corpus handling, text
//! features, narrative topic models, penalized logistic regression,
//! ROC evaluation, and the request studies built on them.

pub mod corpus;
pub mod error;
pub mod features;
pub mod glm;
pub mod scoring;
pub mod similarity;
pub mod studies;
pub mod stats;
pub mod topics;
pub mod textkit;

pub use error::{Error, Result};
