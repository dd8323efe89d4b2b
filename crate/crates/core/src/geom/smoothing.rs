use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How indices that fall outside the sequence are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Mirror about the end samples without repeating them (`x[-k] = x[k]`).
    #[default]
    Reflect,
    /// Repeat the end samples.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingConfig {
    pub window_size: usize,
    pub boundary_policy: BoundaryPolicy,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            window_size: 11,
            boundary_policy: BoundaryPolicy::Reflect,
        }
    }
}

impl SmoothingConfig {
    pub fn new(window_size: usize, boundary_policy: BoundaryPolicy) -> Result<Self> {
        validate_window(window_size)?;
        Ok(SmoothingConfig {
            window_size,
            boundary_policy,
        })
    }
}

fn validate_window(n: usize) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "window size must be a positive odd integer, got {n}"
        )));
    }
    Ok(())
}

/// Hanning weights `w_j = 0.5 - 0.5 cos(2πj / (N - 1))` for `0 <= j < N`.
///
/// `N = 1` yields `[1]`, the identity window.
pub fn hanning_window(n: usize) -> Result<Vec<f64>> {
    validate_window(n)?;
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|j| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / denom).cos())
        .collect())
}

fn resolve(i: i64, len: usize, policy: BoundaryPolicy) -> usize {
    let last = len as i64 - 1;
    match policy {
        BoundaryPolicy::Clamp => i.clamp(0, last) as usize,
        BoundaryPolicy::Reflect => {
            if last == 0 {
                return 0;
            }
            let period = 2 * last;
            let m = i.rem_euclid(period);
            (if m > last { period - m } else { m }) as usize
        }
    }
}

/// Weight-normalized convolution of `x` with a Hanning window.
///
/// The output has the length of the input; indices beyond either end are
/// resolved by the configured boundary policy.
pub fn smooth_sequence(x: &[f64], cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("cannot smooth an empty sequence"));
    }
    let w = hanning_window(cfg.window_size)?;
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let half = (cfg.window_size as i64 - 1) / 2;
    let len = x.len();
    Ok((0..len as i64)
        .map(|i| {
            // Accumulate deviations from the centre sample: the normalized
            // weights sum to one, and constant input comes back bit-exact.
            let centre = x[resolve(i, len, cfg.boundary_policy)];
            let mut acc = 0.0;
            for (j, &wj) in w.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                acc += wj * (x[resolve(i + j as i64 - half, len, cfg.boundary_policy)] - centre);
            }
            centre + acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_windows() {
        assert_eq!(hanning_window(1).unwrap(), vec![1.0]);
        let w3 = hanning_window(3).unwrap();
        assert_eq!(w3, vec![0.0, 1.0, 0.0]);
        let w11 = hanning_window(11).unwrap();
        assert_eq!(w11[5], 1.0);
        for j in 0..11 {
            assert!((w11[j] - w11[10 - j]).abs() < 1e-15);
        }
    }

    #[test]
    fn even_or_zero_window_is_rejected() {
        assert!(hanning_window(0).is_err());
        assert!(hanning_window(4).is_err());
        assert!(SmoothingConfig::new(10, BoundaryPolicy::Clamp).is_err());
    }

    #[test]
    fn empty_sequence_is_rejected() {
        assert!(smooth_sequence(&[], &SmoothingConfig::default()).is_err());
    }

    #[test]
    fn reflect_indexing() {
        let r = |i| resolve(i, 5, BoundaryPolicy::Reflect);
        assert_eq!([r(-2), r(-1), r(0), r(4), r(5), r(6)], [2, 1, 0, 4, 3, 2]);
        // windows wider than the sequence keep folding
        assert_eq!(r(-9), 1);
        assert_eq!(resolve(-3, 1, BoundaryPolicy::Reflect), 0);
        assert_eq!(resolve(-3, 5, BoundaryPolicy::Clamp), 0);
        assert_eq!(resolve(9, 5, BoundaryPolicy::Clamp), 4);
    }

    #[test]
    fn constant_and_ramp() {
        let cfg = SmoothingConfig::new(3, BoundaryPolicy::Reflect).unwrap();
        assert_eq!(smooth_sequence(&[5.0; 5], &cfg).unwrap(), vec![5.0; 5]);
        let ramp: Vec<f64> = (0..20).map(|i| 0.5 * i as f64 - 3.0).collect();
        let cfg = SmoothingConfig::new(7, BoundaryPolicy::Reflect).unwrap();
        let out = smooth_sequence(&ramp, &cfg).unwrap();
        for i in 3..17 {
            assert!((out[i] - ramp[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_sequence() {
        let out = smooth_sequence(&[4.25], &SmoothingConfig::default()).unwrap();
        assert_eq!(out, vec![4.25]);
    }
}
