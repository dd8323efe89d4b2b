//! Evaluation toolkit for talking-head video generation.
//!
//! The crate covers the four axes a generated talking-head clip is judged on:
//!
//! * identity preservation: [`embed::arcsim`] over face-identity embeddings,
//! * visual quality: [`imgq`] (SSIM, PSNR, CPBD sharpness, Fréchet distance),
//! * semantic lip synchronization: [`semmet::lrsd`] over features of the
//!   spatio-temporal classifier in [`stnet`],
//! * spontaneous motion: [`semmet::esd`] and [`semmet::bsd`] over emotion and
//!   blink features, with the blink training corpus built by [`blinkdata`].
//!
//! [`geom`] holds the landmark geometry (temporal smoothing, face tracking and
//! cropping, rigid head-pose registration, eye openness), [`report`] bins the
//! metrics by head pose and head motion, and [`bench`] drives the whole
//! pipeline from a dataset manifest.

pub mod bench;
pub mod blinkdata;
pub mod embed;
pub mod error;
pub mod frame;
pub mod geom;
pub mod imgq;
pub mod report;
pub mod semmet;
pub mod stnet;

pub use error::{Error, Result};
pub use frame::{ClipTensor, Frame, Plane};
