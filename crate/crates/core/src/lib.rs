//! Cross-lingual, cross-platform rumor verification.
//!
//! A rumor and the titles of webpages retrieved through its media are embedded
//! in a shared bilingual space; distance and agreement statistics over those
//! titles form a 10-dimensional feature vector that a small MLP classifies as
//! real or fake.

pub mod agreement;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod features;
pub mod manifest;
mod mlp_io;
pub mod nn;
pub mod rng;
pub mod verifier;

pub use error::{Error, Result};
pub use rng::RngState;
