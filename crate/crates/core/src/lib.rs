//! Semantic change detection between two co-registered point-cloud epochs
//! with a cross-temporal point transformer.
//!
//! Both epochs are serialized together along space-filling curves, cut into
//! patches that mix points of the two dates, and processed by a four-stage
//! encoder-decoder of patch-attention blocks. Two heads predict per-point
//! change classes for the later epoch and semantic classes for both.

pub mod datagen;
pub mod error;
pub mod kernels;
mod keyvalue;
pub mod model;
pub mod pointset;
pub mod serialization;
pub mod training;

pub use error::{Error, Result};
pub use kernels::{FeatureMatrix, ParamStore};
pub use pointset::{
    cylinder_sample, load_pointset, merge_epochs, save_pointset, voxel_downsample, BiTemporalSample, ChangeClass,
    EpochPointSet, MergedInput, Point3, SemanticClass, IGNORED,
};
pub use model::{predict_labels, ForwardOutput, Model, ModelConfig};
pub use serialization::{build_order, Curve, SerializationConfig, SerializedOrder};
