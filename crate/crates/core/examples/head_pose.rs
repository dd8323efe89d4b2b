//! Recovers head pose from 3-D landmarks of a face turning left to right
//! and reports the yaw motion score.
//!
//! cargo run --example head_pose

use anyhow::Result;
use headbench::geom::{
    estimate_pose_trace, head_motion_score, rotation_from_euler, CanonicalFace, LandmarkSequence,
    PoseAxis, RegistrationMode,
};
use nalgebra::Vector3;

fn main() -> Result<()> {
    let canon = CanonicalFace::bundled();
    let frames: Vec<Vec<[f64; 3]>> = (0..25)
        .map(|t| {
            let phase = t as f64 / 24.0 * std::f64::consts::PI;
            let r = rotation_from_euler(4.0 * phase.sin(), -35.0 * phase.cos(), 2.0);
            canon
                .points()
                .iter()
                .map(|p| {
                    let q = r * Vector3::from(*p) * 1.6;
                    [q.x + 320.0, q.y + 240.0, q.z]
                })
                .collect()
        })
        .collect();
    let lms = LandmarkSequence::new(frames, 3, 25.0)?;
    let trace = estimate_pose_trace(&lms, &canon, RegistrationMode::WithScale)?;
    for (t, yaw) in trace.axis(PoseAxis::Yaw).enumerate().step_by(6) {
        println!("frame {t:2}: yaw {yaw:7.2}");
    }
    println!("yaw motion score {:.2} degrees", head_motion_score(&trace, PoseAxis::Yaw));
    println!("pitch motion score {:.2} degrees", head_motion_score(&trace, PoseAxis::Pitch));
    Ok(())
}
