//! Additive angular margin loss over scale-normalized features.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Class directions `W` (feature_dim x classes), scale `s` and margin `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLossParams {
    w: Array2<f64>,
    pub scale: f64,
    pub margin: f64,
}

/// Scale and margin without the class directions, as stored in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcMargin {
    pub scale: f64,
    pub margin: f64,
}

impl Default for ArcMargin {
    fn default() -> Self {
        ArcMargin {
            scale: 64.0,
            margin: 0.5,
        }
    }
}

impl ArcMargin {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("arcloss scale must be positive, got {}", self.scale)));
        }
        if !(0.0..FRAC_PI_2).contains(&self.margin) {
            return Err(Error::invalid(format!(
                "arcloss margin must lie in [0, pi/2), got {}",
                self.margin
            )));
        }
        Ok(())
    }
}

impl ArcLossParams {
    pub fn new(w: Array2<f64>, scale: f64, margin: f64) -> Result<Self> {
        ArcMargin { scale, margin }.validate()?;
        if w.ncols() < 2 || w.nrows() < 1 {
            return Err(Error::invalid("class matrix needs a feature axis and at least two classes"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("class matrix has non-finite entries"));
        }
        if w.axis_iter(Axis(1)).any(|c| c.dot(&c) == 0.0) {
            return Err(Error::invalid("class matrix has a zero column"));
        }
        Ok(ArcLossParams { w, scale, margin })
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn num_classes(&self) -> usize {
        self.w.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Columns of `W` scaled to unit length.
    pub fn normalized_w(&self) -> Array2<f64> {
        let mut w = self.w.clone();
        for mut c in w.axis_iter_mut(Axis(1)) {
            let n = c.dot(&c).sqrt();
            c /= n;
        }
        w
    }

    /// `cos θ_j` between a feature and every class direction.
    pub fn cosines(&self, feature: ArrayView1<f64>) -> Result<Vec<f64>> {
        let n = feature.dot(&feature).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateFeature("zero-norm feature row".into()));
        }
        let w = self.normalized_w();
        Ok(w.t().dot(&feature).iter().map(|c| (c / n).clamp(-1.0, 1.0)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ArcLossGrad {
    pub loss: f64,
    /// Gradient with respect to the raw (unnormalized) features.
    pub d_features: Array2<f64>,
    /// Gradient with respect to the raw class matrix.
    pub d_w: Array2<f64>,
}

fn check(features: &Array2<f64>, labels: &[usize], params: &ArcLossParams) -> Result<()> {
    if features.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if features.ncols() != params.feature_dim() {
        return Err(Error::invalid(format!(
            "features have {} columns, class matrix expects {}",
            features.ncols(),
            params.feature_dim()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= params.num_classes()) {
        return Err(Error::invalid(format!(
            "label {bad} outside [0, {})",
            params.num_classes()
        )));
    }
    Ok(())
}

/// Mean loss over the batch.
pub fn arcloss(features: &Array2<f64>, labels: &[usize], params: &ArcLossParams) -> Result<f64> {
    Ok(arcloss_with_grad(features, labels, params)?.loss)
}

pub fn arcloss_with_grad(
    features: &Array2<f64>,
    labels: &[usize],
    params: &ArcLossParams,
) -> Result<ArcLossGrad> {
    check(features, labels, params)?;
    let (s, m) = (params.scale, params.margin);
    let b = features.nrows() as f64;
    let what = params.normalized_w();
    let w_norms: Vec<f64> = params
        .w
        .axis_iter(Axis(1))
        .map(|c| c.dot(&c).sqrt())
        .collect();
    let mut d_features = Array2::zeros(features.raw_dim());
    let mut d_what = Array2::<f64>::zeros(what.raw_dim());
    let mut loss = 0.0;
    for (i, (row, &y)) in features.axis_iter(Axis(0)).zip(labels).enumerate() {
        let n = row.dot(&row).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateFeature(format!("zero-norm feature row {i}")));
        }
        let xhat = &row / n;
        let cos: Vec<f64> = what.t().dot(&xhat).iter().map(|c| c.clamp(-1.0, 1.0)).collect();
        let theta = cos[y].acos();
        let target = theta + m;
        let (target_cos, target_slope) = if target <= PI {
            (target.cos(), target.sin() / theta.sin().max(1e-12))
        } else {
            (-1.0, 0.0)
        };
        let logits: Vec<f64> = cos
            .iter()
            .enumerate()
            .map(|(j, &c)| s * if j == y { target_cos } else { c })
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        loss += lse - logits[y];

        let mut dxhat = Array1::<f64>::zeros(xhat.len());
        for j in 0..cos.len() {
            let p = (logits[j] - lse).exp();
            let dl = (p - if j == y { 1.0 } else { 0.0 }) / b;
            let dc = dl * s * if j == y { target_slope } else { 1.0 };
            if dc != 0.0 {
                dxhat.scaled_add(dc, &what.column(j));
                d_what.column_mut(j).scaled_add(dc, &xhat);
            }
        }
        // project out the radial component, then undo the length scaling
        let radial = dxhat.dot(&xhat);
        d_features.row_mut(i).assign(&((&dxhat - &(&xhat * radial)) / n));
    }
    let mut d_w = Array2::zeros(what.raw_dim());
    for (j, (wc, dwc)) in what.axis_iter(Axis(1)).zip(d_what.axis_iter(Axis(1))).enumerate() {
        let radial = dwc.dot(&wc);
        d_w.column_mut(j).assign(&((&dwc - &(&wc * radial)) / w_norms[j]));
    }
    Ok(ArcLossGrad {
        loss: loss / b,
        d_features,
        d_w,
    })
}
