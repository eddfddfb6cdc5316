//! Analysis pipeline for densely annotated film clips rated for
//! objectification.
//!
//! The crate covers the path from raw annotations to evaluated models:
//!
//! * [`annotation`]: levels, concepts, spans, clips, and their file formats;
//! * [`embedding`]: per-clip embedding tables and frame pooling;
//! * [`fusion`]: projection of free spans onto clips and max-level merging;
//! * [`agreement`]: the γ inter-annotator agreement;
//! * [`stats`]: level and concept distributions;
//! * [`models`]: SVM, logistic regression, CART, MLP and F1;
//! * [`cbm`]: concept activation vectors and concept bottleneck classifiers;
//! * [`harness`]: folds, balanced draws, tasks and error-factor analysis;
//! * [`synth`]: seeded synthetic datasets.
//!
//! All randomness flows through [`seed`], so every result is a pure
//! function of its inputs and seed.

pub mod agreement;
pub mod annotation;
pub mod cbm;
pub mod embedding;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod models;
pub mod seed;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
