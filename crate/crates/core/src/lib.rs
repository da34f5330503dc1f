//! Data generation, source synthesis, probe rendering, preference metrics and
//! the repetition-mitigation objective for source-preference experiments.

pub mod chat;
pub mod conflict;
pub mod entity;
pub mod error;
pub mod lexicon;
pub mod metrics;
pub mod mitigation;
pub mod numeric;
pub mod perturb;
pub mod prompt;
pub mod results;
pub mod rng;
pub mod sources;
