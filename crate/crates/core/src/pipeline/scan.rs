//! Cityscapes-style dataset layout:
//!
//! ```text
//! <root>/leftImg8bit/<split>/<city>/<frame>_leftImg8bit.png
//! <root>/disparity/<split>/<city>/<frame>_disparity.png
//! <root>/camera/<split>/<city>/<frame>_camera.json
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{JobConfig, RigSource};

pub const IMAGE_DIR: &str = "leftImg8bit";
pub const DISPARITY_DIR: &str = "disparity";
pub const CAMERA_DIR: &str = "camera";
const IMAGE_SUFFIX: &str = "_leftImg8bit.png";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::usage(format!("unknown split '{other}' (expected train|val|test)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub image_path: PathBuf,
    pub disparity_path: Option<PathBuf>,
    pub camera_path: Option<PathBuf>,
    pub split: Split,
    pub city: String,
    pub frame_id: String,
}

impl DatasetItem {
    /// Image file name, e.g. `aachen_000000_000019_leftImg8bit.png`.
    pub fn file_name(&self) -> String {
        format!("{}{IMAGE_SUFFIX}", self.frame_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub frame_id: String,
    pub image_path: PathBuf,
    pub reason: String,
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(path, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Lists every frame under `root` for the requested splits, ordered by
/// split then lexicographically by path. Sidecars are attached when present.
pub fn scan_dataset(root: &Path, splits: &[Split]) -> Result<Vec<DatasetItem>> {
    std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    let mut splits = splits.to_vec();
    splits.sort();
    splits.dedup();

    let mut items = Vec::new();
    for split in splits {
        let split_dir = root.join(IMAGE_DIR).join(split.as_str());
        if !split_dir.is_dir() {
            continue;
        }
        for city_dir in sorted_dir(&split_dir)? {
            if !city_dir.is_dir() {
                continue;
            }
            let city = city_dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::data(format!("non UTF-8 city name {}", city_dir.display())))?
                .to_string();
            for image_path in sorted_dir(&city_dir)? {
                let Some(name) = image_path.file_name().and_then(|n| n.to_str()) else {
                    continue;
                };
                let Some(frame_id) = name.strip_suffix(IMAGE_SUFFIX) else {
                    continue;
                };
                let sidecar = |dir: &str, suffix: &str| {
                    let p = root
                        .join(dir)
                        .join(split.as_str())
                        .join(&city)
                        .join(format!("{frame_id}{suffix}"));
                    p.is_file().then_some(p)
                };
                items.push(DatasetItem {
                    disparity_path: sidecar(DISPARITY_DIR, "_disparity.png"),
                    camera_path: sidecar(CAMERA_DIR, "_camera.json"),
                    image_path: image_path.clone(),
                    split,
                    city: city.clone(),
                    frame_id: frame_id.to_string(),
                });
            }
        }
    }
    if items.is_empty() {
        return Err(Error::data(format!(
            "no frames matching {IMAGE_DIR}/<split>/<city>/*{IMAGE_SUFFIX} under {}",
            root.display()
        )));
    }
    Ok(items)
}

/// Separates items that can be processed under `cfg` from those missing a
/// required sidecar.
pub fn plan_items(items: Vec<DatasetItem>, cfg: &JobConfig) -> (Vec<DatasetItem>, Vec<SkippedItem>) {
    let mut ready = Vec::new();
    let mut skipped = Vec::new();
    for item in items {
        let reason = if !cfg.variant.needs_depth() {
            None
        } else if item.disparity_path.is_none() {
            Some(format!("variant {} needs a disparity map", cfg.variant))
        } else if cfg.rig_source == RigSource::Sidecar && item.camera_path.is_none() {
            Some(format!("variant {} needs a camera sidecar", cfg.variant))
        } else {
            None
        };
        match reason {
            Some(reason) => skipped.push(SkippedItem {
                frame_id: item.frame_id,
                image_path: item.image_path,
                reason,
            }),
            None => ready.push(item),
        }
    }
    (ready, skipped)
}
