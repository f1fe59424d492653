//! Dataset layout and manifest loading.
//!
//! ```text
//! <root>/splits.json                 optional {"train": [...], "val": [...], "test": [...]}
//! <root>/scenes/<scene_id>/meta.json
//! <root>/scenes/<scene_id>/<scene_id>_f<value>.{jpg,png}
//! ```
//!
//! Without `splits.json` every scene belongs to the test split.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const INPUT_F_NUMBER: f64 = 22.0;
pub const REFERENCE_TARGET_F_NUMBER: f64 = 2.0;

/// Published split sizes; mismatches only warn.
pub const EXPECTED_TRAIN: usize = 20_500;
pub const EXPECTED_VAL: usize = 78;
pub const EXPECTED_TEST: usize = 68;

/// `2 -> "2.0"`, `7.1 -> "7.1"`, `14 -> "14.0"`.
pub fn format_f_number(f: f64) -> String {
    let s = f.to_string();
    if s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

/// `{scene_id}_f{f}` without extension.
pub fn capture_stem(scene_id: &str, f: f64) -> String {
    format!("{scene_id}_f{}", format_f_number(f))
}

/// Splits `0042_f2.0.png` (or a bare stem) into `("0042", 2.0)`.
pub fn parse_capture_name(name: &str) -> Option<(String, f64)> {
    let stem = name
        .strip_suffix(".png")
        .or_else(|| name.strip_suffix(".jpg"))
        .or_else(|| name.strip_suffix(".jpeg"))
        .unwrap_or(name);
    let (scene, f) = stem.rsplit_once("_f")?;
    let f: f64 = f.parse().ok()?;
    (!scene.is_empty() && f.is_finite() && f > 0.0).then(|| (scene.to_string(), f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureMeta {
    pub f_number: f64,
    /// `null` marks a withheld ground truth.
    pub filename: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub scene_id: String,
    pub focal_length_mm: f64,
    #[serde(default)]
    pub focus_distance_m: Option<f64>,
    pub captures: Vec<CaptureMeta>,
    /// Optional PFM depth map next to the captures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub f_number: f64,
    /// `None` when the ground truth is private.
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub input_path: PathBuf,
    /// Strictly decreasing f-numbers ending at f/2.0.
    pub targets: Vec<Target>,
    pub focal_length_mm: f64,
    pub focus_distance_m: Option<f64>,
    pub depth_path: Option<PathBuf>,
}

impl SceneRecord {
    /// Validates `meta` against the capture sequence rules; file paths are
    /// resolved against `dir` and must exist.
    pub fn from_meta(meta: SceneMeta, dir: &Path) -> Result<Self> {
        let id = &meta.scene_id;
        let violation = |msg: String| HarnessError::InvariantViolation(format!("scene {id}: {msg}"));
        if meta.captures.is_empty() {
            return Err(violation("no captures".into()));
        }
        let mut caps = meta.captures.clone();
        if let Some(c) = caps.iter().find(|c| !(c.f_number.is_finite() && c.f_number > 0.0)) {
            return Err(violation(format!("invalid f-number {}", c.f_number)));
        }
        caps.sort_by(|a, b| b.f_number.total_cmp(&a.f_number));
        if let Some(w) = caps.windows(2).find(|w| w[0].f_number == w[1].f_number) {
            return Err(violation(format!("duplicate capture at f/{}", format_f_number(w[0].f_number))));
        }
        let resolve = |name: &str| -> Result<PathBuf> {
            let p = dir.join(name);
            if p.is_file() {
                Ok(p)
            } else {
                Err(violation(format!("missing file {}", p.display())))
            }
        };
        let input = &caps[0];
        if input.f_number != INPUT_F_NUMBER {
            return Err(violation(format!(
                "input capture must be f/22, found f/{}",
                format_f_number(input.f_number)
            )));
        }
        let input_path = match &input.filename {
            Some(name) => resolve(name)?,
            None => return Err(violation("input capture cannot be private".into())),
        };
        let targets = caps[1..]
            .iter()
            .map(|c| {
                Ok(Target {
                    f_number: c.f_number,
                    path: c.filename.as_deref().map(resolve).transpose()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        match targets.last() {
            Some(t) if t.f_number == REFERENCE_TARGET_F_NUMBER => {}
            _ => return Err(violation("capture sequence must end at the f/2.0 reference".into())),
        }
        if !(meta.focal_length_mm > 0.0) {
            return Err(violation(format!("focal length {} mm", meta.focal_length_mm)));
        }
        if !(28.0..=70.0).contains(&meta.focal_length_mm) {
            log::warn!("scene {id}: focal length {} mm outside 28-70 mm", meta.focal_length_mm);
        }
        if let Some(d) = meta.focus_distance_m {
            if !(d > 0.0) {
                return Err(violation(format!("focus distance {d} m")));
            }
        }
        let depth_path = meta.depth.as_deref().map(resolve).transpose()?;
        Ok(SceneRecord {
            scene_id: meta.scene_id,
            input_path,
            targets,
            focal_length_mm: meta.focal_length_mm,
            focus_distance_m: meta.focus_distance_m,
            depth_path,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn split(&self, name: &str) -> Result<&[String]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(HarnessError::InvalidArgument(format!(
                "unknown split {other:?}; expected train, val or test"
            ))),
        }
    }

    /// Warnings for split sizes that differ from the published counts.
    pub fn count_warnings(&self) -> Vec<String> {
        [
            ("train", self.train.len(), EXPECTED_TRAIN),
            ("val", self.val.len(), EXPECTED_VAL),
            ("test", self.test.len(), EXPECTED_TEST),
        ]
        .into_iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name} split has {got} scenes, expected {want}"))
        .collect()
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id) {
                return Err(HarnessError::DuplicateScene(id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub splits: SplitManifest,
    pub scenes: BTreeMap<String, SceneRecord>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn scenes_in(&self, split: &str) -> Result<Vec<&SceneRecord>> {
        Ok(self
            .splits
            .split(split)?
            .iter()
            .map(|id| &self.scenes[id])
            .collect())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::malformed(path, e))
}

pub fn load_scene(dir: &Path) -> Result<SceneRecord> {
    let meta_path = dir.join("meta.json");
    if !meta_path.is_file() {
        return Err(HarnessError::MissingMeta(dir.to_path_buf()));
    }
    let meta: SceneMeta = read_json(&meta_path)?;
    let dir_name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if meta.scene_id != dir_name {
        return Err(HarnessError::InvariantViolation(format!(
            "meta.json in {} names scene {:?}",
            dir.display(),
            meta.scene_id
        )));
    }
    SceneRecord::from_meta(meta, dir)
}

/// Loads and validates every scene under `root/scenes`.
pub fn load_manifest(root: &Path) -> Result<Dataset> {
    let scenes_dir = root.join("scenes");
    let entries = fs::read_dir(&scenes_dir).map_err(|e| HarnessError::io(&scenes_dir, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| HarnessError::io(&scenes_dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    let mut scenes = BTreeMap::new();
    for dir in &dirs {
        let rec = load_scene(dir)?;
        scenes.insert(rec.scene_id.clone(), rec);
    }

    let splits_path = root.join("splits.json");
    let mut warnings = Vec::new();
    let splits = if splits_path.is_file() {
        let s: SplitManifest = read_json(&splits_path)?;
        s.check_unique()?;
        for id in s.train.iter().chain(&s.val).chain(&s.test) {
            if !scenes.contains_key(id) {
                return Err(HarnessError::InvariantViolation(format!(
                    "splits.json lists unknown scene {id}"
                )));
            }
        }
        let listed = s.train.len() + s.val.len() + s.test.len();
        if listed < scenes.len() {
            warnings.push(format!("{} scenes belong to no split", scenes.len() - listed));
        }
        s
    } else {
        SplitManifest {
            test: scenes.keys().cloned().collect(),
            ..Default::default()
        }
    };
    warnings.extend(splits.count_warnings());
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Dataset {
        root: root.to_path_buf(),
        splits,
        scenes,
        warnings,
    })
}
