//! Relation-driven procedural indoor scene synthesis.

pub mod assembly;
pub mod config;
pub mod curation;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod hierarchy;
pub mod mol;
pub mod pipeline;
pub mod predictor;
pub mod seed;
