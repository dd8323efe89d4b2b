//! Spatio-temporal clip classifier used for lipreading, emotion and blink
//! features.
//!
//! Written directly on `ndarray` with hand-derived backward passes. The
//! refine stage follows the ResNet-18 block layout without normalization
//! layers.

mod arcloss;
pub mod checkpoint;
mod layers;
mod lexicon;
mod net;
pub mod toy;
mod train;

pub use arcloss::{arcloss, arcloss_with_grad, ArcLossGrad, ArcLossParams, ArcMargin};
pub use checkpoint::Checkpoint;
pub use lexicon::build_lexicon;
pub use net::{RefineSpec, STNetConfig, StLayer, StNet};
pub use train::{
    accuracy, extract_features, mean_intra_class_cosine, predict, train_classifier, AdamConfig,
    EpochLog, Head, LabeledClip, TrainRun,
};
