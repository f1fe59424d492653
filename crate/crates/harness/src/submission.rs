//! Local submission checks: coverage and dimensions against the manifest.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use bokeh_core::raster::image_dimensions;

use crate::dataset::{capture_stem, Dataset, SceneRecord, Target};
use crate::error::{HarnessError, Result};

/// One expected prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedFile {
    pub scene_id: String,
    pub f_number: f64,
    pub file_name: String,
    /// Ground truth when public; `None` for withheld targets.
    pub gt_path: Option<PathBuf>,
}

pub fn expected_files<'a>(scenes: impl IntoIterator<Item = &'a SceneRecord>) -> Vec<ExpectedFile> {
    let mut out = Vec::new();
    for rec in scenes {
        for Target { f_number, path } in &rec.targets {
            out.push(ExpectedFile {
                scene_id: rec.scene_id.clone(),
                f_number: *f_number,
                file_name: format!("{}.png", capture_stem(&rec.scene_id, *f_number)),
                gt_path: path.clone(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimensionMismatch {
    pub file: String,
    pub expected: (usize, usize),
    pub found: (usize, usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    pub dimension_mismatches: Vec<DimensionMismatch>,
    /// Files that exist but cannot be read as images.
    pub unreadable: Vec<(String, String)>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty()
            && self.extra.is_empty()
            && self.dimension_mismatches.is_empty()
            && self.unreadable.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return writeln!(f, "submission OK");
        }
        for m in &self.missing {
            writeln!(f, "missing: {m}")?;
        }
        for e in &self.extra {
            writeln!(f, "extra: {e}")?;
        }
        for d in &self.dimension_mismatches {
            writeln!(
                f,
                "dimensions: {} is {}x{}, expected {}x{}",
                d.file, d.found.0, d.found.1, d.expected.0, d.expected.1
            )?;
        }
        for (file, why) in &self.unreadable {
            writeln!(f, "unreadable: {file}: {why}")?;
        }
        Ok(())
    }
}

/// Compares the files in `pred_dir` with the predictions `split` requires.
/// Only I/O failures on the submission directory or the dataset are errors.
pub fn validate_submission(pred_dir: &Path, dataset: &Dataset, split: &str) -> Result<ValidationReport> {
    let scenes = dataset.scenes_in(split)?;
    let expected = expected_files(scenes.iter().copied());
    let present: BTreeSet<String> = fs::read_dir(pred_dir)
        .map_err(|e| HarnessError::io(pred_dir, e))?
        .map(|e| e.map_err(|e| HarnessError::io(pred_dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    let wanted: BTreeSet<&str> = expected.iter().map(|e| e.file_name.as_str()).collect();

    let mut report = ValidationReport {
        extra: present
            .iter()
            .filter(|p| !wanted.contains(p.as_str()))
            .cloned()
            .collect(),
        ..Default::default()
    };
    for rec in scenes {
        let reference = expected
            .iter()
            .find(|e| e.scene_id == rec.scene_id && e.gt_path.is_some())
            .and_then(|e| e.gt_path.clone())
            .unwrap_or_else(|| rec.input_path.clone());
        let want = image_dimensions(&reference)?;
        for e in expected.iter().filter(|e| e.scene_id == rec.scene_id) {
            if !present.contains(&e.file_name) {
                report.missing.push(e.file_name.clone());
                continue;
            }
            match image_dimensions(pred_dir.join(&e.file_name)) {
                Ok(found) if found != want => report.dimension_mismatches.push(DimensionMismatch {
                    file: e.file_name.clone(),
                    expected: want,
                    found,
                }),
                Ok(_) => {}
                Err(err) => report.unreadable.push((e.file_name.clone(), err.to_string())),
            }
        }
    }
    Ok(report)
}
