//! Embedding providers and the identity-preservation metric.
//!
//! A provider maps an image to a fixed-length [`FeatureVector`]. Identity
//! providers feed [`arcsim`]; Inception-style providers feed the Fréchet
//! distance in [`crate::imgq`]. Every provider is deterministic.

mod features;
mod provider;

use serde::{Deserialize, Serialize};

use crate::frame::Frame;
use crate::{Error, Result};

pub use features::{read_feature_csv, write_feature_csv, FeatureRecord};
pub use provider::{
    load_provider, resolve_model_source, EmbeddingProvider, LinearProvider, LinearProviderModel,
    Modality, ProviderConfig, Sharing, StubProvider, MODEL_DIR_ENV,
};

/// An embedding with its Euclidean norm cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector {
    values: Vec<f64>,
    norm: f64,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("feature vector must have at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector has non-finite entries"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(FeatureVector { values, norm })
    }

    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * k).collect())
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FeatureVector::new(v)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(f: FeatureVector) -> Self {
        f.values
    }
}

/// Cosine similarity `a·b / (|a| |b|)`, clamped to `[-1, 1]`.
///
/// Shared by identity (ArcSim), emotion and blink similarity.
pub(crate) fn cosine(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Err(Error::DegenerateEmbedding("zero-norm feature vector".into()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let aa: f64 = a.values.iter().map(|x| x * x).sum();
    let bb: f64 = b.values.iter().map(|x| x * x).sum();
    // sqrt(x²) is exact, so identical inputs give exactly one
    let denom = if (aa * bb).is_finite() && aa * bb > 0.0 {
        (aa * bb).sqrt()
    } else {
        a.norm * b.norm
    };
    Ok((dot / denom).clamp(-1.0, 1.0))
}

/// Identity similarity between two face embeddings, higher is better.
pub fn arcsim(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    cosine(a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoArcSim {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

/// ArcSim of every pair of corresponding frames plus their mean.
pub fn video_arcsim(
    real: &[Frame],
    fake: &[Frame],
    provider: &dyn EmbeddingProvider,
) -> Result<VideoArcSim> {
    if real.len() != fake.len() {
        return Err(Error::Pairing(format!(
            "real clip has {} frames, generated clip has {}",
            real.len(),
            fake.len()
        )));
    }
    if real.is_empty() {
        return Err(Error::Pairing("clips have no frames".into()));
    }
    let per_frame = real
        .iter()
        .zip(fake)
        .map(|(r, f)| arcsim(&provider.embed_image(r)?, &provider.embed_image(f)?))
        .collect::<Result<Vec<f64>>>()?;
    let mean = mean(&per_frame);
    Ok(VideoArcSim { per_frame, mean })
}

/// Arithmetic mean with Neumaier compensation.
pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.iter().any(|v| !v.is_finite()) {
        return values.iter().sum::<f64>() / values.len() as f64;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / values.len() as f64
}
