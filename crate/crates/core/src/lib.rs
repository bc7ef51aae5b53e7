//! Desk-scale model of self-identity formation: metric spaces over
//! episodic memories, ε-chain continuum detection, softmax belief
//! calibration, low-rank-adapter recognizer training, and the evaluation
//! metrics used to compare response corpora.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`synthdata`] generates seeded memory streams and labels.
//! 2. [`spaces`] defines memories, identities and both metrics.
//! 3. [`continuum`] checks ε-chain connectivity (condition 1).
//! 4. [`recognition`] maps memories to identities through a frozen base
//!    plus a trainable low-rank adapter.
//! 5. [`belief`] turns recognizer outputs into belief distributions and
//!    checks belief sufficiency (condition 2).
//! 6. [`trainer`] fits the adapter by gradient descent and verifies both
//!    conditions end to end.
//! 7. [`textmetrics`] computes corpus statistics from response files.

pub mod belief;
pub mod continuum;
pub mod error;
pub mod linalg;
pub mod recognition;
pub mod spaces;
pub mod synthdata;
pub mod textmetrics;
pub mod trainer;

pub use error::{CoreError, Result};
pub use spaces::{Memory, SelfIdentity};
