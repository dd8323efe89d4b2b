use std::fs;
use std::io::Write;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geom::{
    estimate_pose_trace, track_and_crop, CanonicalFace, LandmarkSequence, RegistrationMode,
};
use crate::report::FailureRecord;
use crate::Result;

use super::layout::{load_frames, save_frames, source_files, OutputLayout};
use super::{thread_pool, BenchConfig, DatasetManifest, ManifestEntry};

const HASH_FILE: &str = ".source-sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Processed,
    /// Inputs and settings unchanged since the last run.
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryLog {
    pub id: String,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessSummary {
    pub entries: Vec<EntryLog>,
}

impl PreprocessSummary {
    fn count(&self, s: EntryStatus) -> usize {
        self.entries.iter().filter(|e| e.status == s).count()
    }

    pub fn processed(&self) -> usize {
        self.count(EntryStatus::Processed)
    }

    pub fn skipped(&self) -> usize {
        self.count(EntryStatus::Skipped)
    }

    pub fn failures(&self) -> Vec<FailureRecord> {
        self.entries
            .iter()
            .filter(|e| e.status == EntryStatus::Failed)
            .map(|e| FailureRecord {
                id: e.id.clone(),
                stage: "preprocess".into(),
                error: e.error.clone().unwrap_or_default(),
            })
            .collect()
    }
}

/// Hash of an entry's inputs together with the settings that shape its output.
fn input_hash(entry: &ManifestEntry, cfg: &BenchConfig) -> Result<String> {
    let mut h = Sha256::new();
    let settings = (&cfg.smoothing, &cfg.crop, cfg.frame_rate);
    h.update(serde_json::to_vec(&settings)?);
    for path in source_files(&entry.source)?.into_iter().chain([entry.landmarks.clone()]) {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        let bytes = fs::read(&path)?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn process(entry: &ManifestEntry, cfg: &BenchConfig, out: &OutputLayout, canon: &CanonicalFace) -> Result<EntryStatus> {
    let hash = input_hash(entry, cfg)?;
    let crop_dir = out.crop_dir(&entry.id);
    let hash_path = crop_dir.join(HASH_FILE);
    if fs::read_to_string(&hash_path).is_ok_and(|h| h.trim() == hash) {
        return Ok(EntryStatus::Skipped);
    }
    let frames = load_frames(&entry.source)?;
    let lms = LandmarkSequence::read(&entry.landmarks, cfg.frame_rate)?;
    let cropped = track_and_crop(&entry.id, &frames, &lms, &cfg.crop, &cfg.smoothing)?;
    let pose = if lms.dim() == 3 {
        Some(estimate_pose_trace(&lms, canon, RegistrationMode::WithScale)?)
    } else {
        None
    };

    if crop_dir.exists() {
        fs::remove_dir_all(&crop_dir)?;
    }
    save_frames(&crop_dir, &cropped.clip.frames)?;
    let pose_path = out.pose_file(&entry.id);
    match pose {
        Some(p) => p.write_csv(&pose_path)?,
        None if pose_path.exists() => fs::remove_file(&pose_path)?,
        None => {}
    }
    fs::write(hash_path, format!("{hash}\n"))?;
    Ok(EntryStatus::Processed)
}

/// Crops every entry and estimates its head pose, writing `crops/<id>/`
/// and `poses/<id>.csv`. Entries whose inputs are unchanged are skipped;
/// an entry that fails is logged and leaves no output behind.
pub fn run_preprocess(manifest: &DatasetManifest, cfg: &BenchConfig) -> Result<PreprocessSummary> {
    cfg.validate()?;
    let out = OutputLayout::new(&cfg.output_dir);
    fs::create_dir_all(out.crops())?;
    fs::create_dir_all(out.poses())?;
    let canon = CanonicalFace::bundled();
    let pool = thread_pool(cfg.workers)?;
    let mut entries: Vec<EntryLog> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| match process(e, cfg, &out, &canon) {
                Ok(status) => EntryLog {
                    id: e.id.clone(),
                    status,
                    error: None,
                },
                Err(err) => {
                    warn!("{}: {err}", e.id);
                    let _ = fs::remove_dir_all(out.crop_dir(&e.id));
                    let _ = fs::remove_file(out.pose_file(&e.id));
                    EntryLog {
                        id: e.id.clone(),
                        status: EntryStatus::Failed,
                        error: Some(err.to_string()),
                    }
                }
            })
            .collect()
    });
    entries.sort_by(|a, b| a.id.cmp(&b.id));

    let mut log = fs::File::create(out.root.join("preprocess.jsonl"))?;
    for e in &entries {
        writeln!(log, "{}", serde_json::to_string(e)?)?;
    }
    let summary = PreprocessSummary { entries };
    info!(
        "preprocess: {} processed, {} skipped, {} failed",
        summary.processed(),
        summary.skipped(),
        summary.failures().len()
    );
    Ok(summary)
}
