use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::codecs::gif::GifDecoder;
use image::{AnimationDecoder, DynamicImage};

use crate::frame::Frame;
use crate::{Error, Result};

use super::Target;

/// Paths inside the output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    pub fn crops(&self) -> PathBuf {
        self.root.join("crops")
    }

    pub fn crop_dir(&self, id: &str) -> PathBuf {
        self.crops().join(id)
    }

    pub fn poses(&self) -> PathBuf {
        self.root.join("poses")
    }

    pub fn pose_file(&self, id: &str) -> PathBuf {
        self.poses().join(format!("{id}.csv"))
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn checkpoint(&self, target: Target) -> PathBuf {
        self.checkpoints().join(format!("{}.hbst", target.name()))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

/// Image files of a frame directory in name order.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| is_image(p));
    files.sort();
    Ok(files)
}

/// Files whose bytes determine a source's content.
pub fn source_files(source: &Path) -> Result<Vec<PathBuf>> {
    if source.is_dir() {
        frame_files(source)
    } else {
        Ok(vec![source.to_path_buf()])
    }
}

/// Decodes a frame directory or an animated GIF.
pub fn load_frames(source: &Path) -> Result<Vec<Frame>> {
    let frames = if source.is_dir() {
        frame_files(source)?
            .iter()
            .map(Frame::load)
            .collect::<Result<Vec<_>>>()?
    } else {
        let ext = source.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !ext.eq_ignore_ascii_case("gif") {
            return Err(Error::InvalidInput(format!(
                "{}: only frame directories and GIF files are supported",
                source.display()
            )));
        }
        let decoder = GifDecoder::new(BufReader::new(fs::File::open(source)?))?;
        decoder
            .into_frames()
            .collect_frames()?
            .into_iter()
            .map(|f| Frame::from_dynamic(&DynamicImage::ImageRgba8(f.into_buffer())))
            .collect()
    };
    if frames.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no frames", source.display())));
    }
    Ok(frames)
}

pub fn save_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        f.save(dir.join(format!("{i:05}.png")))?;
    }
    Ok(())
}
