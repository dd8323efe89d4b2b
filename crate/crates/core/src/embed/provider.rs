use std::fmt::Debug;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::FeatureVector;
use crate::frame::Frame;
use crate::{Error, Result};

/// Directory against which relative model paths are resolved.
pub const MODEL_DIR_ENV: &str = "HEADBENCH_MODEL_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    FaceIdentity,
    ImageInception,
}

/// How a provider instance may be used from several workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sharing {
    /// One instance serves every worker concurrently.
    #[default]
    Shared,
    /// Each worker loads its own instance.
    PerWorker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    pub modality: Modality,
    /// Declared embedding length.
    pub dim: usize,
    /// Path to a serialized model, or `"stub"`.
    pub model_source: String,
}

impl ProviderConfig {
    pub fn stub(name: &str, modality: Modality, dim: usize) -> Self {
        ProviderConfig {
            name: name.to_string(),
            modality,
            dim,
            model_source: "stub".to_string(),
        }
    }
}

pub trait EmbeddingProvider: Send + Sync + Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn modality(&self) -> Modality;

    fn sharing(&self) -> Sharing {
        Sharing::Shared
    }

    /// Embeds one image. Implementations resize to their own input geometry.
    fn embed_image(&self, img: &Frame) -> Result<FeatureVector>;
}

fn fault(name: &str, reason: impl ToString) -> Error {
    Error::ProviderFault {
        name: name.to_string(),
        reason: reason.to_string(),
    }
}

fn finish(name: &str, dim: usize, values: Vec<f64>) -> Result<FeatureVector> {
    if values.len() != dim {
        return Err(fault(name, format!("produced {} values, declared {dim}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(fault(name, "non-finite output"));
    }
    FeatureVector::new(values).map_err(|e| fault(name, e))
}

/// Analytic provider for tests and dry runs.
///
/// The first four entries are the red, green and blue channel means and the
/// standard deviation of luma, all on a `[0, 1]` scale; entry `4 + k` is the
/// mean luma of horizontal band `k` (of `dim - 4` equal bands) minus the
/// global mean luma.
#[derive(Debug, Clone)]
pub struct StubProvider {
    name: String,
    dim: usize,
    modality: Modality,
}

impl StubProvider {
    pub fn new(name: &str, modality: Modality, dim: usize) -> Result<Self> {
        if dim < 4 {
            return Err(Error::ProviderLoad {
                name: name.to_string(),
                reason: format!("stub provider needs dim >= 4, got {dim}"),
            });
        }
        Ok(StubProvider {
            name: name.to_string(),
            dim,
            modality,
        })
    }
}

impl EmbeddingProvider for StubProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn embed_image(&self, img: &Frame) -> Result<FeatureVector> {
        let n = (img.width() * img.height()) as f64;
        let mut rgb = [0.0f64; 3];
        for y in 0..img.height() {
            for x in 0..img.width() {
                for (c, acc) in rgb.iter_mut().enumerate() {
                    let ch = if img.channels() == 1 { 0 } else { c };
                    *acc += img.get(x, y, ch) as f64;
                }
            }
        }
        rgb.iter_mut().for_each(|v| *v /= n);
        let luma = img.luma(1.0);
        let mean = luma.data.iter().sum::<f64>() / n;
        let var = luma.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut values = vec![rgb[0], rgb[1], rgb[2], var.sqrt()];
        let bands = self.dim - 4;
        for k in 0..bands {
            let y0 = k * img.height() / bands;
            let y1 = ((k + 1) * img.height() / bands).max(y0 + 1).min(img.height());
            let row_mean = if y0 >= img.height() {
                mean
            } else {
                let slice = &luma.data[y0 * luma.width..y1 * luma.width];
                slice.iter().sum::<f64>() / slice.len() as f64
            };
            values.push(row_mean - mean);
        }
        finish(&self.name, self.dim, values)
    }
}

/// Serialized form of a [`LinearProvider`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProviderModel {
    pub input_width: usize,
    pub input_height: usize,
    /// 1 (luma) or 3 (RGB).
    pub channels: usize,
    pub dim: usize,
    /// Row-major `dim x (input_height * input_width * channels)`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Affine projection of resized pixels, loaded from a JSON model file.
#[derive(Debug, Clone)]
pub struct LinearProvider {
    name: String,
    modality: Modality,
    model: LinearProviderModel,
}

impl LinearProvider {
    pub fn from_model(name: &str, modality: Modality, model: LinearProviderModel) -> Result<Self> {
        let inputs = model.input_width * model.input_height * model.channels;
        let load_err = |reason: String| Error::ProviderLoad {
            name: name.to_string(),
            reason,
        };
        if model.channels != 1 && model.channels != 3 {
            return Err(load_err(format!("unsupported channel count {}", model.channels)));
        }
        if inputs == 0 || model.dim == 0 {
            return Err(load_err("empty input geometry or output".into()));
        }
        if model.weights.len() != model.dim * inputs || model.bias.len() != model.dim {
            return Err(load_err(format!(
                "expected {} weights and {} biases, found {} and {}",
                model.dim * inputs,
                model.dim,
                model.weights.len(),
                model.bias.len()
            )));
        }
        Ok(LinearProvider {
            name: name.to_string(),
            modality,
            model,
        })
    }

    pub fn load(name: &str, modality: Modality, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::ProviderLoad {
            name: name.to_string(),
            reason: format!("{}: {e}", path.display()),
        })?;
        let model: LinearProviderModel =
            serde_json::from_str(&text).map_err(|e| Error::ProviderLoad {
                name: name.to_string(),
                reason: format!("{}: {e}", path.display()),
            })?;
        Self::from_model(name, modality, model)
    }
}

impl EmbeddingProvider for LinearProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.model.dim
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn embed_image(&self, img: &Frame) -> Result<FeatureVector> {
        let m = &self.model;
        let resized = img.resize(m.input_width, m.input_height);
        let input: Vec<f64> = if m.channels == 1 {
            resized.luma(1.0).data
        } else if resized.channels() == 3 {
            resized.data().iter().map(|&v| v as f64).collect()
        } else {
            resized
                .data()
                .iter()
                .flat_map(|&v| [v as f64; 3])
                .collect()
        };
        let values = m
            .weights
            .chunks_exact(input.len())
            .zip(&m.bias)
            .map(|(row, b)| row.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        finish(&self.name, m.dim, values)
    }
}

/// Resolves a relative model path against `$HEADBENCH_MODEL_DIR`, if set.
pub fn resolve_model_source(source: &str) -> PathBuf {
    let p = PathBuf::from(source);
    if p.is_relative() {
        if let Some(dir) = std::env::var_os(MODEL_DIR_ENV) {
            return PathBuf::from(dir).join(p);
        }
    }
    p
}

/// Instantiates the provider described by `cfg` and checks its dimension.
pub fn load_provider(cfg: &ProviderConfig) -> Result<Arc<dyn EmbeddingProvider>> {
    let provider: Arc<dyn EmbeddingProvider> = if cfg.model_source == "stub" {
        Arc::new(StubProvider::new(&cfg.name, cfg.modality, cfg.dim)?)
    } else {
        let path = resolve_model_source(&cfg.model_source);
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Arc::new(LinearProvider::load(&cfg.name, cfg.modality, &path)?),
            _ => {
                return Err(Error::ProviderLoad {
                    name: cfg.name.clone(),
                    reason: format!("unrecognized model artifact {}", path.display()),
                })
            }
        }
    };
    if provider.dim() != cfg.dim {
        return Err(Error::ProviderLoad {
            name: cfg.name.clone(),
            reason: format!("model produces {} values, config declares {}", provider.dim(), cfg.dim),
        });
    }
    Ok(provider)
}
