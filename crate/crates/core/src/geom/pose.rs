use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::landmarks::{LandmarkSequence, NUM_LANDMARKS};
use crate::{Error, Result};

const CANONICAL_CSV: &str = include_str!("../../assets/canonical_face_68.csv");

/// Ratio of smallest to largest singular value below which a point cloud is
/// treated as lying in a plane or on a line.
const RANK_TOLERANCE: f64 = 1e-9;

/// Zero-mean 68-point reference face in metric units.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFace {
    points: Vec<Vector3<f64>>,
}

impl CanonicalFace {
    /// Re-centres `points` on their centroid and checks they span 3D.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(Error::invalid(format!(
                "canonical face needs {NUM_LANDMARKS} points, got {}",
                points.len()
            )));
        }
        let pts: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::from(*p)).collect();
        let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        let pts: Vec<Vector3<f64>> = pts.into_iter().map(|p| p - centroid).collect();
        check_rank(&pts, "canonical face")?;
        Ok(CanonicalFace { points: pts })
    }

    /// The mean shape bundled with the crate.
    pub fn bundled() -> Self {
        let points: Vec<[f64; 3]> = CANONICAL_CSV
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let v: Vec<f64> = l.split(',').map(|s| s.trim().parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        CanonicalFace::new(points).expect("bundled canonical face is valid")
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

impl Default for CanonicalFace {
    fn default() -> Self {
        CanonicalFace::bundled()
    }
}

/// Whether the registration also fits a uniform scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationMode {
    RigidOnly,
    #[default]
    WithScale,
}

/// Head pose of a single frame, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    /// RMS distance between the registered canonical face and the landmarks.
    pub residual: f64,
    pub scale: f64,
}

impl HeadPose {
    pub fn angles(&self) -> [f64; 3] {
        [self.pitch, self.yaw, self.roll]
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_from_euler(self.pitch, self.yaw, self.roll)
    }
}

/// `R = Rx(pitch) · Ry(yaw) · Rz(roll)`, angles in degrees.
///
/// This is the intrinsic pitch, then yaw, then roll sequence: pitch turns
/// about the image `x` axis (nodding), yaw about the vertical `y` axis
/// (shaking) and roll about the optical `z` axis (tilting).
pub fn rotation_from_euler(pitch: f64, yaw: f64, roll: f64) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), pitch.to_radians());
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw.to_radians());
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), roll.to_radians());
    (rx * ry * rz).into_inner()
}

/// Inverse of [`rotation_from_euler`]; returns `[pitch, yaw, roll]` in degrees
/// with yaw in `[-90, 90]`. At gimbal lock (|yaw| = 90) roll is set to zero.
pub fn euler_from_rotation(r: &Matrix3<f64>) -> [f64; 3] {
    let sin_yaw = r[(0, 2)].clamp(-1.0, 1.0);
    let yaw = sin_yaw.asin();
    let cos_yaw = (1.0 - sin_yaw * sin_yaw).sqrt();
    let (pitch, roll) = if cos_yaw > 1e-12 {
        (
            (-r[(1, 2)]).atan2(r[(2, 2)]),
            (-r[(0, 1)]).atan2(r[(0, 0)]),
        )
    } else {
        (r[(2, 1)].atan2(r[(1, 1)]), 0.0)
    };
    [pitch.to_degrees(), yaw.to_degrees(), roll.to_degrees()]
}

fn check_rank(points: &[Vector3<f64>], what: &str) -> Result<()> {
    let mut scatter = Matrix3::zeros();
    for p in points {
        scatter += p * p.transpose();
    }
    let sv = scatter.singular_values();
    let max = sv.max();
    if !(max > 0.0) || sv.min() / max < RANK_TOLERANCE * RANK_TOLERANCE {
        return Err(Error::DegenerateGeometry(format!(
            "{what} does not span three dimensions"
        )));
    }
    Ok(())
}

/// Registers `canon` onto one frame of 3D landmarks by the closed-form
/// least-squares similarity (or rigid) alignment and decomposes the rotation.
pub fn estimate_pose(
    lms3d: &[[f64; 3]],
    canon: &CanonicalFace,
    mode: RegistrationMode,
) -> Result<HeadPose> {
    if lms3d.len() != NUM_LANDMARKS {
        return Err(Error::invalid(format!(
            "expected {NUM_LANDMARKS} landmarks, got {}",
            lms3d.len()
        )));
    }
    let obs: Vec<Vector3<f64>> = lms3d.iter().map(|p| Vector3::from(*p)).collect();
    if obs.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("non-finite landmark coordinate"));
    }
    let mean = obs.iter().sum::<Vector3<f64>>() / obs.len() as f64;
    let centred: Vec<Vector3<f64>> = obs.iter().map(|p| p - mean).collect();
    check_rank(&centred, "landmark cloud")?;

    // cross-covariance between observed and canonical points
    let mut cov = Matrix3::zeros();
    for (o, c) in centred.iter().zip(&canon.points) {
        cov += o * c.transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = u * d * v_t;
    let scale = match mode {
        RegistrationMode::RigidOnly => 1.0,
        RegistrationMode::WithScale => {
            let spread: f64 = canon.points.iter().map(|c| c.norm_squared()).sum();
            (svd.singular_values.component_mul(&d.diagonal())).sum() / spread
        }
    };
    let sq_err: f64 = centred
        .iter()
        .zip(&canon.points)
        .map(|(o, c)| (scale * rotation * c - o).norm_squared())
        .sum();
    let [pitch, yaw, roll] = euler_from_rotation(&rotation);
    Ok(HeadPose {
        pitch,
        yaw,
        roll,
        residual: (sq_err / NUM_LANDMARKS as f64).sqrt(),
        scale,
    })
}

/// Per-frame head pose of a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseTrace {
    /// `[pitch, yaw, roll]` per frame, degrees.
    pub angles: Vec<[f64; 3]>,
    pub residuals: Vec<f64>,
}

impl PoseTrace {
    pub fn from_angles(angles: Vec<[f64; 3]>) -> Self {
        let residuals = vec![0.0; angles.len()];
        PoseTrace { angles, residuals }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn axis(&self, axis: PoseAxis) -> impl Iterator<Item = f64> + '_ {
        let i = axis.index();
        self.angles.iter().map(move |a| a[i])
    }

    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["frame", "pitch", "yaw", "roll", "residual"])?;
        for (t, (a, r)) in self.angles.iter().zip(&self.residuals).enumerate() {
            w.write_record(&[
                t.to_string(),
                a[0].to_string(),
                a[1].to_string(),
                a[2].to_string(),
                r.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut trace = PoseTrace {
            angles: Vec::new(),
            residuals: Vec::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|e| Error::format("pose csv", e)))
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::format("pose csv", "expected 5 columns"));
            }
            trace.angles.push([v[0], v[1], v[2]]);
            trace.residuals.push(v[3]);
        }
        Ok(trace)
    }
}

pub fn estimate_pose_trace(
    lms: &LandmarkSequence,
    canon: &CanonicalFace,
    mode: RegistrationMode,
) -> Result<PoseTrace> {
    if lms.dim() != 3 {
        return Err(Error::DegenerateGeometry(
            "head pose needs 3D landmarks".to_string(),
        ));
    }
    let mut trace = PoseTrace {
        angles: Vec::with_capacity(lms.len()),
        residuals: Vec::with_capacity(lms.len()),
    };
    for frame in lms.frames() {
        let pose = estimate_pose(frame, canon, mode)?;
        trace.angles.push(pose.angles());
        trace.residuals.push(pose.residual);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PoseAxis {
    Pitch,
    #[default]
    Yaw,
    Roll,
}

impl PoseAxis {
    pub fn index(self) -> usize {
        match self {
            PoseAxis::Pitch => 0,
            PoseAxis::Yaw => 1,
            PoseAxis::Roll => 2,
        }
    }
}

/// Spread (max - min) of one pose angle over a clip, degrees.
///
/// Meaningful for short clips (well under twenty seconds); over long videos
/// it saturates.
pub fn head_motion_score(trace: &PoseTrace, axis: PoseAxis) -> f64 {
    let (lo, hi) = trace
        .axis(axis)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        0.0
    } else {
        (hi - lo).abs()
    }
}
