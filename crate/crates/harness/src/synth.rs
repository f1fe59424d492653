//! Synthetic datasets with known depth and renderer-generated ground truth.

use std::fs;
use std::path::Path;

use bokeh_core::raster::{save_depth, save_image};
use bokeh_core::renderer::{render_bokeh_with, RenderConfig};
use bokeh_core::{ApertureSetting, DepthMap, Exec, RasterImage, Transfer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{capture_stem, CaptureMeta, Dataset, SceneMeta, SplitManifest, INPUT_F_NUMBER};
use crate::error::{HarnessError, Result};
use crate::submission::expected_files;

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub scenes: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Strictly decreasing, ending at 2.0.
    pub targets: Vec<f64>,
    pub focal_length_mm: f64,
    pub render: RenderConfig,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            scenes: 5,
            width: 160,
            height: 120,
            seed: 0,
            targets: vec![8.0, 4.0, 2.0],
            focal_length_mm: 50.0,
            render: RenderConfig {
                max_radius_px: Some(10.0),
                ..RenderConfig::default()
            },
        }
    }
}

/// A textured all-in-focus frame (sRGB-encoded values) and its depth.
///
/// A near subject rectangle sits in front of a receding background. The
/// depth spread is small enough that blur radii keep growing from f/8 to f/2.
pub fn synth_scene(rng: &mut ChaCha8Rng, width: usize, height: usize) -> (RasterImage, DepthMap) {
    let cell = rng.random_range(4..12usize);
    let freq: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.05f32..0.4));
    let phase: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.0f32..std::f32::consts::TAU));
    let (sx0, sy0) = (rng.random_range(0.2..0.4), rng.random_range(0.2..0.4));
    let (sx1, sy1) = (sx0 + rng.random_range(0.2..0.35), sy0 + rng.random_range(0.3..0.45));
    let lights: Vec<(usize, usize)> = (0..6)
        .map(|_| (rng.random_range(0..width), rng.random_range(0..height)))
        .collect();

    let mut img = Vec::with_capacity(width * height * 3);
    let mut depth = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = (x as f64 / width as f64, y as f64 / height as f64);
            let subject = (sx0..sx1).contains(&u) && (sy0..sy1).contains(&v);
            let checker = ((x / cell + y / cell) % 2) as f32;
            for c in 0..3 {
                let wave = 0.5 + 0.5 * (freq[c] * (x + 2 * y) as f32 + phase[c]).sin();
                let base = if subject {
                    0.3 + 0.4 * wave
                } else {
                    0.15 + 0.55 * checker * wave + 0.1 * v as f32
                };
                img.push(base.clamp(0.0, 1.0));
            }
            depth.push(if subject { 1.0 } else { 1.3 + 0.7 * v as f32 });
        }
    }
    let mut img = RasterImage::new(width, height, 3, img).expect("sized above");
    for (lx, ly) in lights {
        for c in 0..3 {
            img.set(lx, ly, c, 1.0);
        }
    }
    (img, DepthMap::new(width, height, depth).expect("finite, positive"))
}

/// Writes `opts.scenes` scenes under `root/scenes` plus a test-only
/// `splits.json`, and returns the scene ids.
pub fn generate_dataset(root: &Path, opts: &SynthOptions) -> Result<Vec<String>> {
    generate_dataset_with(root, opts, Exec::default())
}

pub fn generate_dataset_with(root: &Path, opts: &SynthOptions, exec: Exec) -> Result<Vec<String>> {
    opts.render.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ids = Vec::with_capacity(opts.scenes);
    for k in 0..opts.scenes {
        let id = format!("{k:04}");
        let dir = root.join("scenes").join(&id);
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        let (img, depth) = synth_scene(&mut rng, opts.width, opts.height);
        let mut captures = Vec::with_capacity(opts.targets.len() + 1);

        let input_name = format!("{}.png", capture_stem(&id, INPUT_F_NUMBER));
        save_image(&img, dir.join(&input_name), Transfer::Linear)?;
        captures.push(CaptureMeta {
            f_number: INPUT_F_NUMBER,
            filename: Some(input_name),
        });
        for &f in &opts.targets {
            let target = ApertureSetting::new(f, opts.focal_length_mm, None)?;
            let gt = render_bokeh_with(&img, &depth, &target, &opts.render, exec)?;
            let name = format!("{}.png", capture_stem(&id, f));
            save_image(&gt, dir.join(&name), Transfer::Linear)?;
            captures.push(CaptureMeta {
                f_number: f,
                filename: Some(name),
            });
        }
        save_depth(&depth, dir.join("depth.pfm"))?;
        let meta = SceneMeta {
            scene_id: id.clone(),
            focal_length_mm: opts.focal_length_mm,
            focus_distance_m: None,
            captures,
            depth: Some("depth.pfm".into()),
        };
        write_json(&dir.join("meta.json"), &meta)?;
        ids.push(id);
    }
    let splits = SplitManifest {
        test: ids.clone(),
        ..Default::default()
    };
    write_json(&root.join("splits.json"), &splits)?;
    Ok(ids)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubmissionSource {
    GroundTruth,
    /// The f/22 input copied to every target.
    Inputs,
}

/// Fills `out_dir` with a complete submission for `split`.
pub fn write_submission(dataset: &Dataset, split: &str, source: SubmissionSource, out_dir: &Path) -> Result<usize> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let scenes = dataset.scenes_in(split)?;
    let files = expected_files(scenes.iter().copied());
    for e in &files {
        let src = match source {
            SubmissionSource::GroundTruth => e.gt_path.clone().ok_or_else(|| {
                HarnessError::InvariantViolation(format!("ground truth for {} is withheld", e.file_name))
            })?,
            SubmissionSource::Inputs => dataset.scenes[&e.scene_id].input_path.clone(),
        };
        let dst = out_dir.join(&e.file_name);
        fs::copy(&src, &dst).map_err(|err| HarnessError::io(&src, err))?;
    }
    Ok(files.len())
}
