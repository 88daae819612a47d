//! Core algorithms for measuring and predicting the quality of experience
//! of streamed text answers.
//!
//! The crate is `no_std` (with `alloc`) and performs no IO: timing runs
//! against an abstract [`shaper::Clock`], and persistence lives in the
//! companion `tokenqoe` crate.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod assign;
pub mod model;
pub mod pca;
pub mod pipeline;
pub mod predictor;
pub mod shaper;
pub mod stats;
pub mod synth;

pub use model::{
    ConditionId, ContentConfig, Dimension, Feature, FeatureVector, Grid, PipelineParams, QosConfig, RaterProfile,
    RatingRecord,
};
