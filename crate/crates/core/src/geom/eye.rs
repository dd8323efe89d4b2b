use serde::{Deserialize, Serialize};

use super::landmarks::LandmarkSequence;
use crate::{Error, Result};

/// Landmark indices of both eyes, each ordered as outer corner, two upper
/// lid points, inner corner, two lower lid points (iBUG order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EyeLayout {
    pub right: [usize; 6],
    pub left: [usize; 6],
}

impl Default for EyeLayout {
    fn default() -> Self {
        EyeLayout {
            right: [36, 37, 38, 39, 40, 41],
            left: [42, 43, 44, 45, 46, 47],
        }
    }
}

impl EyeLayout {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.right.iter().chain(&self.left).copied()
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn single_eye(lms: &[[f64; 3]], idx: &[usize; 6]) -> Result<f64> {
    let p = |k: usize| -> Result<&[f64; 3]> {
        lms.get(idx[k])
            .ok_or_else(|| Error::invalid(format!("eye landmark {} missing", idx[k])))
    };
    let width = dist(p(0)?, p(3)?);
    if width <= f64::EPSILON {
        return Err(Error::DegenerateGeometry("eye has zero width".into()));
    }
    let gap = dist(p(1)?, p(5)?) + dist(p(2)?, p(4)?);
    Ok(gap / (2.0 * width))
}

/// Mean over both eyes of eyelid gap divided by eye width, measured in the
/// image plane.
pub fn eye_open_rate(lms: &[[f64; 3]], layout: &EyeLayout) -> Result<f64> {
    Ok(0.5 * (single_eye(lms, &layout.right)? + single_eye(lms, &layout.left)?))
}

pub fn eye_open_rates(seq: &LandmarkSequence, layout: &EyeLayout) -> Result<Vec<f64>> {
    seq.frames().map(|f| eye_open_rate(f, layout)).collect()
}
