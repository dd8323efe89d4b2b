use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NUM_LANDMARKS: usize = 68;

/// Per-frame facial landmarks of one clip, in pixels.
///
/// Two-dimensional sequences store `z = 0` and report `dim() == 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    points: Vec<[f64; 3]>,
    dim: usize,
    frame_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct LandmarkJson {
    #[serde(default)]
    frame_rate: Option<f64>,
    frames: Vec<Vec<Vec<f64>>>,
}

impl LandmarkSequence {
    pub fn new(frames: Vec<Vec<[f64; 3]>>, dim: usize, frame_rate: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("landmark dimension must be 2 or 3, got {dim}")));
        }
        if frames.is_empty() {
            return Err(Error::invalid("landmark sequence has no frames"));
        }
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::invalid(format!("frame rate must be positive, got {frame_rate}")));
        }
        let mut points = Vec::with_capacity(frames.len() * NUM_LANDMARKS);
        for (t, frame) in frames.into_iter().enumerate() {
            if frame.len() != NUM_LANDMARKS {
                return Err(Error::invalid(format!(
                    "frame {t} has {} landmarks, expected {NUM_LANDMARKS}",
                    frame.len()
                )));
            }
            for mut p in frame {
                if dim == 2 {
                    p[2] = 0.0;
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("non-finite landmark in frame {t}")));
                }
                points.push(p);
            }
        }
        Ok(LandmarkSequence {
            points,
            dim,
            frame_rate,
        })
    }

    pub fn from_2d(frames: Vec<Vec<[f64; 2]>>, frame_rate: f64) -> Result<Self> {
        let frames = frames
            .into_iter()
            .map(|f| f.into_iter().map(|[x, y]| [x, y, 0.0]).collect())
            .collect();
        Self::new(frames, 2, frame_rate)
    }

    pub fn len(&self) -> usize {
        self.points.len() / NUM_LANDMARKS
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frame(&self, t: usize) -> &[[f64; 3]] {
        &self.points[t * NUM_LANDMARKS..(t + 1) * NUM_LANDMARKS]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[[f64; 3]]> {
        self.points.chunks_exact(NUM_LANDMARKS)
    }

    /// Keeps frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "frame range {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        Ok(LandmarkSequence {
            points: self.points[start * NUM_LANDMARKS..end * NUM_LANDMARKS].to_vec(),
            dim: self.dim,
            frame_rate: self.frame_rate,
        })
    }

    /// Reads a CSV landmark file: one row per frame holding `x,y` (136 values)
    /// or `x,y,z` (204 values) per point, optionally preceded by a frame index
    /// column. A non-numeric first row is treated as a header.
    pub fn read_csv(path: impl AsRef<Path>, frame_rate: f64) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut frames = Vec::new();
        let mut dim = None;
        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if row_idx == 0 => continue,
                Err(e) => {
                    return Err(Error::format(
                        format!("landmark csv {}", path.display()),
                        format!("row {row_idx}: {e}"),
                    ))
                }
            };
            let (d, body) = match values.len() {
                136 => (2, &values[..]),
                137 => (2, &values[1..]),
                204 => (3, &values[..]),
                205 => (3, &values[1..]),
                n => {
                    return Err(Error::format(
                        format!("landmark csv {}", path.display()),
                        format!("row {row_idx} has {n} columns"),
                    ))
                }
            };
            if *dim.get_or_insert(d) != d {
                return Err(Error::format(
                    format!("landmark csv {}", path.display()),
                    "rows mix 2D and 3D landmarks",
                ));
            }
            frames.push(
                body.chunks_exact(d)
                    .map(|c| [c[0], c[1], if d == 3 { c[2] } else { 0.0 }])
                    .collect(),
            );
        }
        Self::new(frames, dim.unwrap_or(2), frame_rate)
    }

    /// Reads `{"frame_rate": f, "frames": [[[x, y(, z)], ...68], ...]}`.
    pub fn read_json(path: impl AsRef<Path>, default_frame_rate: f64) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let parsed: LandmarkJson = serde_json::from_str(&text)?;
        let mut dim = None;
        let mut frames = Vec::with_capacity(parsed.frames.len());
        for frame in parsed.frames {
            let mut pts = Vec::with_capacity(frame.len());
            for p in frame {
                let d = p.len();
                if d != 2 && d != 3 || *dim.get_or_insert(d) != d {
                    return Err(Error::format("landmark json", "inconsistent point dimension"));
                }
                pts.push([p[0], p[1], if d == 3 { p[2] } else { 0.0 }]);
            }
            frames.push(pts);
        }
        Self::new(
            frames,
            dim.unwrap_or(2),
            parsed.frame_rate.unwrap_or(default_frame_rate),
        )
    }

    /// Dispatches on the extension (`.json` or anything else as CSV).
    pub fn read(path: impl AsRef<Path>, default_frame_rate: f64) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::read_json(path, default_frame_rate),
            _ => Self::read_csv(path, default_frame_rate),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["frame".to_string()];
        for i in 0..NUM_LANDMARKS {
            header.push(format!("x{i}"));
            header.push(format!("y{i}"));
            if self.dim == 3 {
                header.push(format!("z{i}"));
            }
        }
        writer.write_record(&header)?;
        for (t, frame) in self.frames().enumerate() {
            let mut row = vec![t.to_string()];
            for p in frame {
                row.extend(p[..self.dim].iter().map(|v| v.to_string()));
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = LandmarkJson {
            frame_rate: Some(self.frame_rate),
            frames: self
                .frames()
                .map(|f| f.iter().map(|p| p[..self.dim].to_vec()).collect())
                .collect(),
        };
        fs::write(path, serde_json::to_string(&doc)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dim: usize, frames: usize) -> LandmarkSequence {
        let f = (0..frames)
            .map(|t| {
                (0..NUM_LANDMARKS)
                    .map(|i| [i as f64 * 1.5 + t as f64, 0.25 * i as f64, (i % 7) as f64])
                    .collect()
            })
            .collect();
        LandmarkSequence::new(f, dim, 25.0).unwrap()
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for dim in [2, 3] {
            let seq = sample(dim, 4);
            let csv_path = dir.path().join(format!("lm{dim}.csv"));
            seq.write_csv(&csv_path).unwrap();
            assert_eq!(LandmarkSequence::read(&csv_path, 25.0).unwrap(), seq);
            let json_path = dir.path().join(format!("lm{dim}.json"));
            seq.write_json(&json_path).unwrap();
            assert_eq!(LandmarkSequence::read(&json_path, 30.0).unwrap(), seq);
        }
    }

    #[test]
    fn rejects_wrong_point_count_and_nan() {
        assert!(LandmarkSequence::new(vec![vec![[0.0; 3]; 67]], 2, 25.0).is_err());
        let mut f = vec![[0.0; 3]; 68];
        f[3][1] = f64::NAN;
        assert!(LandmarkSequence::new(vec![f], 2, 25.0).is_err());
        assert!(LandmarkSequence::new(vec![], 2, 25.0).is_err());
    }

    #[test]
    fn csv_with_bad_column_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "1,2,3\n").unwrap();
        assert!(matches!(
            LandmarkSequence::read_csv(&p, 25.0),
            Err(Error::Format { .. })
        ));
    }
}
