//! Full-reference scoring of a validated submission.

use std::path::Path;

use bokeh_core::metrics::{format_psnr, lpips_for_pairs, psnr, ssim_with, LpipsAdapter, LpipsPair, MetricReport};
use bokeh_core::raster::load_image;
use bokeh_core::{Exec, Transfer};
use serde_json::json;

use crate::dataset::{capture_stem, format_f_number, Dataset};
use crate::error::{HarnessError, Result};
use crate::submission::{expected_files, validate_submission};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneScore {
    pub scene_id: String,
    pub f_number: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSummary {
    /// Flat means over all pairs; PSNR over finite entries only.
    pub report: MetricReport,
    pub pairs: usize,
    /// Pairs with identical prediction and ground truth, left out of the PSNR mean.
    pub psnr_infinite: usize,
}

impl ScoreSummary {
    pub fn to_json(&self) -> serde_json::Value {
        let p = self.report.psnr_db;
        json!({
            "pairs": self.pairs,
            "psnr": if p.is_finite() { json!(p) } else { json!(format_psnr(p, 3)) },
            "psnr_infinite": self.psnr_infinite,
            "ssim": self.report.ssim,
            "lpips": self.report.lpips,
        })
    }
}

/// Arithmetic means over `rows`. The PSNR mean is infinite only when every
/// pair is infinite.
pub fn summarize(rows: &[SceneScore]) -> ScoreSummary {
    let finite: Vec<f64> = rows.iter().map(|r| r.psnr_db).filter(|p| p.is_finite()).collect();
    let n = rows.len().max(1) as f64;
    let psnr_db = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let lpips = rows
        .iter()
        .map(|r| r.lpips)
        .collect::<Option<Vec<f64>>>()
        .filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64);
    ScoreSummary {
        report: MetricReport {
            psnr_db,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
            lpips,
        },
        pairs: rows.len(),
        psnr_infinite: rows.len() - finite.len(),
    }
}

/// Scores every `(scene, f-number)` pair of `split` after the validation gate.
/// Metrics are computed on the stored (sRGB-encoded) values.
pub fn score_submission(
    pred_dir: &Path,
    dataset: &Dataset,
    split: &str,
    adapter: Option<&LpipsAdapter>,
    exec: Exec,
) -> Result<(Vec<SceneScore>, ScoreSummary)> {
    let report = validate_submission(pred_dir, dataset, split)?;
    if !report.is_ok() {
        return Err(HarnessError::Validation(report.to_string().trim_end().replace('\n', "; ")));
    }
    let expected = expected_files(dataset.scenes_in(split)?);
    if expected.is_empty() {
        return Err(HarnessError::Validation(format!("split {split} has nothing to score")));
    }
    if let Some(e) = expected.iter().find(|e| e.gt_path.is_none()) {
        return Err(HarnessError::InvariantViolation(format!(
            "ground truth for {} is withheld; cannot score locally",
            e.file_name
        )));
    }

    let scored = exec.map_range(expected.len(), |i| -> Result<(f64, f64)> {
        let e = &expected[i];
        let pred = load_image(pred_dir.join(&e.file_name), Transfer::Linear)?;
        let gt = load_image(e.gt_path.as_ref().expect("checked above"), Transfer::Linear)?;
        Ok((psnr(&pred, &gt)?, ssim_with(&pred, &gt, Exec::Sequential)?))
    });
    let lpips = match adapter {
        Some(a) => {
            let pairs: Vec<LpipsPair> = expected
                .iter()
                .map(|e| LpipsPair {
                    key: capture_stem(&e.scene_id, e.f_number),
                    scene_id: e.scene_id.clone(),
                    pred: pred_dir.join(&e.file_name),
                    gt: e.gt_path.clone().expect("checked above"),
                })
                .collect();
            Some(lpips_for_pairs(&pairs, a)?)
        }
        None => None,
    };

    let mut rows = Vec::with_capacity(expected.len());
    for (i, (e, s)) in expected.iter().zip(scored).enumerate() {
        let (psnr_db, ssim) = s?;
        rows.push(SceneScore {
            scene_id: e.scene_id.clone(),
            f_number: e.f_number,
            psnr_db,
            ssim,
            lpips: lpips.as_ref().map(|v| v[i]),
        });
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}

/// `scene_id,f_number,psnr,ssim,lpips` at full round-trip precision.
pub fn write_scene_csv(rows: &[SceneScore], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    w.write_record(["scene_id", "f_number", "psnr", "ssim", "lpips"])
        .map_err(|e| HarnessError::csv(path, e))?;
    for r in rows {
        let psnr = if r.psnr_db.is_finite() {
            r.psnr_db.to_string()
        } else {
            format_psnr(r.psnr_db, 0)
        };
        w.write_record([
            r.scene_id.clone(),
            format_f_number(r.f_number),
            psnr,
            r.ssim.to_string(),
            r.lpips.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_scene_csv(path: &Path) -> Result<Vec<SceneScore>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let bad = |what: &str| HarnessError::malformed(path, format!("row {}: bad {what}", line + 1));
        let num = |i: usize, what: &str| -> Result<f64> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(what))
        };
        rows.push(SceneScore {
            scene_id: rec.get(0).ok_or_else(|| bad("scene_id"))?.to_string(),
            f_number: num(1, "f_number")?,
            psnr_db: rec
                .get(2)
                .and_then(bokeh_core::metrics::parse_psnr)
                .ok_or_else(|| bad("psnr"))?,
            ssim: num(3, "ssim")?,
            lpips: match rec.get(4) {
                Some("") | None => None,
                Some(s) => Some(s.parse().map_err(|_| bad("lpips"))?),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: f64, s: f64, l: Option<f64>) -> SceneScore {
        SceneScore {
            scene_id: "x".into(),
            f_number: 2.0,
            psnr_db: p,
            ssim: s,
            lpips: l,
        }
    }

    #[test]
    fn infinite_psnr_is_excluded_and_counted() {
        let s = summarize(&[row(f64::INFINITY, 1.0, None), row(30.0, 0.5, None), row(20.0, 0.5, None)]);
        assert_eq!(s.report.psnr_db, 25.0);
        assert_eq!(s.psnr_infinite, 1);
        assert!((s.report.ssim - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.report.lpips, None);
        let all_inf = summarize(&[row(f64::INFINITY, 1.0, Some(0.0))]);
        assert!(all_inf.report.psnr_db.is_infinite());
        assert_eq!(all_inf.to_json()["psnr"], "inf");
        assert_eq!(all_inf.report.lpips, Some(0.0));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let rows = vec![row(f64::INFINITY, 1.0, Some(0.125)), row(31.057_123_456_789, 0.1 + 0.2, None)];
        write_scene_csv(&rows, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("scene_id,f_number,psnr,ssim,lpips\n"));
        assert!(text.contains("x,2.0,inf,1,0.125"));
        assert_eq!(read_scene_csv(&p).unwrap(), rows);
    }
}
