//! Compact convolutional cascade for frontal face detection: a dense
//! stage-1 scan over an image pyramid feeding a two-network selective
//! verification unit, with detection grouping, several execution modes,
//! a desk-scale trainer and an evaluation harness.

pub mod cascade;
pub mod error;
pub mod eval;
pub mod imageio;
pub mod model;
pub mod nn;
pub mod pack;
pub mod pipeline;
pub mod plane;
pub mod pyramid;
pub mod stats;
pub mod synth;
pub mod train;

pub use cascade::{
    detect, DecisionRule, Detection, DetectorParams, ExecMode, RawDetection,
};
pub use error::{Error, Result};
pub use model::{
    load_model, reference_cascade_random, reference_specs, save_model, CascadeModel,
    NetworkSpec, NetworkWeights,
};
pub use nn::PoolMode;
pub use plane::{FeatureStack, ImagePlane};
pub use stats::RunStats;
pub use train::{train_cascade, TrainConfig, TrainedCascade};
