//! Synthetic camera, image encoder and its supervised pretraining.

pub mod dataset;
pub mod encoder;
pub mod frame;

pub use encoder::{pretrain_encoder, FeatureHistory, LabeledImage, PretrainConfig, PretrainReport, VisionEncoder};
pub use frame::{labels_from_mask, render, Frame, Labels, RenderConfig};
