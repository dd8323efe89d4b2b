//! Image-level visual quality: SSIM, PSNR, CPBD sharpness and the Fréchet
//! distance between Gaussian fits of feature sets (FID once the features come
//! from an Inception-style provider, see [`crate::embed`]).
//!
//! All metrics work on grayscale [`Plane`](crate::Plane)s; colour frames are
//! reduced to BT.601 luma first.

mod cpbd;
mod fid;
mod psnr;
mod ssim;

use serde::{Deserialize, Serialize};

pub use cpbd::{cpbd, CpbdParams, CpbdScore};
pub use fid::{frechet_distance, gaussian_stats, GaussianStats};
pub use psnr::{mse, psnr};
pub use ssim::{ssim, SsimParams};

/// Slack below zero tolerated on a Fréchet distance before clamping.
pub const FID_SLACK: f64 = 1e-6;

/// The four visual-quality numbers reported per clip or method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub ssim: f64,
    /// `f64::INFINITY` for identical inputs.
    pub psnr: f64,
    pub cpbd: f64,
    pub fid: f64,
}
