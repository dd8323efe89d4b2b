use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    #[default]
    Test,
}

/// One clip: a real recording or a generated video paired with one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Directory of frame images, or an animated GIF.
    pub source: PathBuf,
    /// 68-point landmarks, CSV or JSON.
    pub landmarks: PathBuf,
    /// Generating method; absent for real clips.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// The real clip a generated one is compared against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_id: Option<String>,
    /// Named labels, e.g. `word`, `emotion`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub split: Split,
    /// Frame of the real clip the generator took its identity from.
    #[serde(default)]
    pub reference_frame: usize,
}

impl ManifestEntry {
    pub fn is_generated(&self) -> bool {
        self.method.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Reads a JSON manifest; relative paths are taken against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut m: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::format("manifest", e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &mut m.entries {
            if e.source.is_relative() {
                e.source = base.join(&e.source);
            }
            if e.landmarks.is_relative() {
                e.landmarks = base.join(&e.landmarks);
            }
        }
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn generated(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.is_generated())
    }

    pub fn methods(&self) -> BTreeSet<&str> {
        self.generated().filter_map(|e| e.method.as_deref()).collect()
    }

    /// Ids are unique, paths exist, and within a split every method maps its
    /// clips one-to-one onto real clips of that split.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            if e.id.is_empty() || e.id.contains(['/', '\\']) {
                return Err(Error::Config(format!("bad entry id `{}`", e.id)));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Config(format!("duplicate entry id `{}`", e.id)));
            }
            for p in [&e.source, &e.landmarks] {
                if !p.exists() {
                    return Err(Error::Config(format!("{}: {} does not exist", e.id, p.display())));
                }
            }
        }
        let mut used: BTreeMap<(Split, &str), BTreeSet<&str>> = BTreeMap::new();
        for e in &self.entries {
            match (&e.method, &e.real_id) {
                (None, None) => {}
                (None, Some(_)) => {
                    return Err(Error::Pairing(format!("real clip `{}` names a real_id", e.id)))
                }
                (Some(_), None) => {
                    return Err(Error::Pairing(format!("generated clip `{}` has no real_id", e.id)))
                }
                (Some(method), Some(real)) => {
                    let r = self.get(real).ok_or_else(|| {
                        Error::Pairing(format!("`{}` pairs with unknown clip `{real}`", e.id))
                    })?;
                    if r.is_generated() {
                        return Err(Error::Pairing(format!("`{}` pairs with generated clip `{real}`", e.id)));
                    }
                    if r.split != e.split {
                        return Err(Error::Pairing(format!("`{}` and `{real}` are in different splits", e.id)));
                    }
                    if !used.entry((e.split, method)).or_default().insert(real) {
                        return Err(Error::Pairing(format!(
                            "method `{method}` uses real clip `{real}` more than once"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
