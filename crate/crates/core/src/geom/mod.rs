//! Landmark geometry: temporal smoothing, face tracking and cropping, rigid
//! head-pose registration, head-motion scoring and eye openness.
//!
//! Landmarks follow the 68-point iBUG layout (jaw 0-16, brows 17-26, nose
//! 27-35, eyes 36-47, mouth 48-67) in image coordinates: `x` to the right,
//! `y` downwards and, for 3D landmarks, `z` pointing away from the camera.

mod crop;
mod eye;
mod landmarks;
mod pose;
mod smoothing;

pub use crop::{plan_crops, track_and_crop, CropConfig, CropPlan, CropRect, CroppedClip};
pub use eye::{eye_open_rate, eye_open_rates, EyeLayout};
pub use landmarks::{LandmarkSequence, NUM_LANDMARKS};
pub use pose::{
    estimate_pose, estimate_pose_trace, euler_from_rotation, head_motion_score,
    rotation_from_euler, CanonicalFace, HeadPose, PoseAxis, PoseTrace, RegistrationMode,
};
pub use smoothing::{hanning_window, smooth_sequence, BoundaryPolicy, SmoothingConfig};
