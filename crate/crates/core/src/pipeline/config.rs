use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::depth::{DepthClip, FillPolicy, StereoRig};
use crate::error::{Error, Result};
use crate::optics::CameraConfig;
use crate::render::{Variant, DEFAULT_LAYERS};
use crate::transform::GrayscaleWeights;

/// Camera block of the config file, in lens units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub focal_length_mm: f64,
    pub f_number: f64,
    pub pixel_size_um: f64,
    pub focus_m: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl CameraSpec {
    pub fn to_camera(&self) -> Result<CameraConfig> {
        CameraConfig::from_lens_units(
            self.focal_length_mm,
            self.f_number,
            self.pixel_size_um,
            self.focus_m,
            self.description.clone(),
        )
    }

    pub fn from_camera(cam: &CameraConfig) -> Self {
        CameraSpec {
            focal_length_mm: cam.focal_length_m * 1e3,
            f_number: cam.f_number,
            pixel_size_um: cam.pixel_size_m * 1e6,
            focus_m: cam.focus_distance_m,
            description: cam.description.clone(),
        }
    }
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec {
            focal_length_mm: 80.0,
            f_number: 2.8,
            pixel_size_um: 4.4,
            focus_m: 400.0,
            description: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RigSourceKind {
    Sidecar,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub source: RigSourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fx_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_m: Option<f64>,
}

impl Default for RigSpec {
    fn default() -> Self {
        RigSpec {
            source: RigSourceKind::Sidecar,
            fx_px: None,
            baseline_m: None,
        }
    }
}

/// On-disk job configuration (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfigFile {
    #[serde(default)]
    pub camera: CameraSpec,
    pub variant: Variant,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub fill_policy: FillPolicy,
    #[serde(default = "default_weights")]
    pub grayscale_weights: [f64; 3],
    #[serde(default)]
    pub rig: RigSpec,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_clip: Option<DepthClip>,
}

fn default_k() -> usize {
    DEFAULT_LAYERS
}

fn default_weights() -> [f64; 3] {
    let w = GrayscaleWeights::REC601;
    [w.wr, w.wg, w.wb]
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RigSource {
    /// Per-frame camera JSON next to the disparity map.
    Sidecar,
    Fixed(StereoRig),
}

/// Validated job configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub camera: CameraConfig,
    pub rig_source: RigSource,
    pub variant: Variant,
    pub k: usize,
    pub fill_policy: FillPolicy,
    pub weights: GrayscaleWeights,
    pub clip: DepthClip,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

impl JobConfig {
    pub fn new(camera: CameraConfig, variant: Variant, output_dir: impl Into<PathBuf>) -> Self {
        JobConfig {
            camera,
            rig_source: RigSource::Sidecar,
            variant,
            k: DEFAULT_LAYERS,
            fill_policy: FillPolicy::default(),
            weights: GrayscaleWeights::default(),
            clip: DepthClip::default(),
            output_dir: output_dir.into(),
            jobs: 1,
        }
    }

    pub fn from_file(file: &JobConfigFile, output_dir: impl Into<PathBuf>) -> Result<Self> {
        let camera = file.camera.to_camera()?;
        let rig_source = match file.rig.source {
            RigSourceKind::Sidecar => {
                if file.rig.fx_px.is_some() || file.rig.baseline_m.is_some() {
                    return Err(Error::usage(
                        "rig.fx_px/rig.baseline_m are only allowed with rig.source = \"fixed\"",
                    ));
                }
                RigSource::Sidecar
            }
            RigSourceKind::Fixed => match (file.rig.fx_px, file.rig.baseline_m) {
                (Some(fx), Some(b)) => RigSource::Fixed(StereoRig::new(fx, b)?),
                _ => {
                    return Err(Error::usage(
                        "rig.source = \"fixed\" requires rig.fx_px and rig.baseline_m",
                    ))
                }
            },
        };
        let [wr, wg, wb] = file.grayscale_weights;
        let cfg = JobConfig {
            camera,
            rig_source,
            variant: file.variant,
            k: file.k,
            fill_policy: file.fill_policy,
            weights: GrayscaleWeights::new(wr, wg, wb)?,
            clip: file.depth_clip.unwrap_or_default(),
            output_dir: output_dir.into(),
            jobs: file.jobs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str, output_dir: impl Into<PathBuf>) -> Result<Self> {
        let file: JobConfigFile =
            serde_json::from_str(text).map_err(|e| Error::usage(format!("config JSON: {e}")))?;
        Self::from_file(&file, output_dir)
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.weights.validate()?;
        self.clip.validate()?;
        if let RigSource::Fixed(rig) = &self.rig_source {
            rig.validate()?;
        }
        if self.k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::usage("jobs must be at least 1"));
        }
        Ok(())
    }

    pub fn to_file(&self) -> JobConfigFile {
        let rig = match self.rig_source {
            RigSource::Sidecar => RigSpec::default(),
            RigSource::Fixed(r) => RigSpec {
                source: RigSourceKind::Fixed,
                fx_px: Some(r.focal_length_px),
                baseline_m: Some(r.baseline_m),
            },
        };
        JobConfigFile {
            camera: CameraSpec::from_camera(&self.camera),
            variant: self.variant,
            k: self.k,
            fill_policy: self.fill_policy,
            grayscale_weights: [self.weights.wr, self.weights.wg, self.weights.wb],
            rig,
            jobs: self.jobs,
            depth_clip: (self.clip != DepthClip::default()).then_some(self.clip),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "camera": {"focal_length_mm": 80, "f_number": 2.8, "pixel_size_um": 4.4, "focus_m": 400},
        "variant": "BG",
        "k": 16,
        "fill_policy": "nearest_neighbor",
        "grayscale_weights": [0.2126, 0.7152, 0.0722],
        "rig": {"source": "fixed", "fx_px": 2262.52, "baseline_m": 0.209313},
        "jobs": 4
    }"#;

    #[test]
    fn parses_full_schema() {
        let cfg = JobConfig::from_json(SAMPLE, "/tmp/out").unwrap();
        assert_eq!(cfg.variant, Variant::BG);
        assert_eq!(cfg.k, 16);
        assert_eq!(cfg.jobs, 4);
        assert_eq!(cfg.fill_policy, FillPolicy::NearestNeighbor);
        assert!((cfg.camera.focal_length_m - 0.08).abs() < 1e-15);
        assert!((cfg.camera.pixel_size_m - 4.4e-6).abs() < 1e-18);
        assert_eq!(cfg.rig_source, RigSource::Fixed(StereoRig::new(2262.52, 0.209313).unwrap()));
    }

    #[test]
    fn json_round_trip() {
        let cfg = JobConfig::from_json(SAMPLE, "/tmp/out").unwrap();
        let again = JobConfig::from_json(&cfg.to_json(), "/tmp/out").unwrap();
        assert_eq!(cfg.to_file(), again.to_file());
        assert_eq!(cfg.variant, again.variant);
        assert_eq!(cfg.rig_source, again.rig_source);
    }

    #[test]
    fn defaults_apply() {
        let cfg = JobConfig::from_json(r#"{"variant": "B"}"#, "out").unwrap();
        assert_eq!(cfg.k, 32);
        assert_eq!(cfg.jobs, 1);
        assert_eq!(cfg.rig_source, RigSource::Sidecar);
        assert_eq!(cfg.fill_policy, FillPolicy::NearestLayerMaxBlur);
        assert_eq!(cfg.weights, GrayscaleWeights::REC601);
        assert_eq!(cfg.camera.focus_distance_m, 400.0);
    }

    #[test]
    fn rejects_inconsistent_input() {
        for bad in [
            r#"{"variant": "B", "rig": {"source": "fixed"}}"#,
            r#"{"variant": "B", "rig": {"source": "sidecar", "fx_px": 10}}"#,
            r#"{"variant": "B", "k": 0}"#,
            r#"{"variant": "B", "jobs": 0}"#,
            r#"{"variant": "Q"}"#,
            r#"{"variant": "B", "grayscale_weights": [1, 1, 1]}"#,
            r#"{"variant": "B", "camera": {"focal_length_mm": 80, "f_number": 2.8, "pixel_size_um": 4.4, "focus_m": 0.01}}"#,
            r#"{"variant": "B", "unknown": 1}"#,
        ] {
            assert!(JobConfig::from_json(bad, "out").is_err(), "{bad}");
        }
    }
}
