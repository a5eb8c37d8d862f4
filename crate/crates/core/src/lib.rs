//! Multimodal Earth-observation preprocessing, a desk-scale vision-language
//! model with a decoupled generation head and mixer regression head, a
//! two-stage trainer and an evaluation harness.

pub mod datasetio;
pub mod error;
pub mod evalkit;
pub mod modality;
pub mod model;
pub mod numerics;
pub mod synthdata;
pub mod text;
pub mod training;

pub use error::{Error, Result};
