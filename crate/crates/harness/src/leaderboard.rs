//! Leaderboard CSV plus the metrics and MOS tables that feed it.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use bokeh_core::metrics::{format_psnr, mos_aggregate, parse_psnr, MosRecord};

use crate::error::{HarnessError, Result};
use crate::ranking::{LeaderboardRow, TeamMetrics};

pub const LEADERBOARD_HEADER: [&str; 10] = [
    "team",
    "psnr",
    "ssim",
    "lpips",
    "mos",
    "psnr_rank",
    "ssim_rank",
    "lpips_rank",
    "fidelity_rank",
    "perceptual_rank",
];

/// Writes ranked rows with 3/4/4/2 decimals for PSNR/SSIM/LPIPS/MOS.
pub fn emit_leaderboard(rows: &[LeaderboardRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    w.write_record(LEADERBOARD_HEADER).map_err(|e| HarnessError::csv(path, e))?;
    for r in rows {
        w.write_record([
            r.team.clone(),
            format_psnr(r.psnr_db, 3),
            format!("{:.4}", r.ssim),
            format!("{:.4}", r.lpips),
            r.mos.map(|m| format!("{m:.2}")).unwrap_or_default(),
            r.psnr_rank.to_string(),
            r.ssim_rank.to_string(),
            r.lpips_rank.to_string(),
            r.fidelity_rank.to_string(),
            r.perceptual_rank.map(|p| p.to_string()).unwrap_or_default(),
        ])
        .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Column lookup by header name.
struct Columns {
    path: std::path::PathBuf,
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(path: &Path, headers: &csv::StringRecord) -> Self {
        Self {
            path: path.to_path_buf(),
            index: headers
                .iter()
                .enumerate()
                .map(|(i, h)| (h.trim().to_ascii_lowercase(), i))
                .collect(),
        }
    }

    fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn text<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index.get(name).and_then(|&i| rec.get(i)).map(str::trim)
    }

    fn require<'r>(&self, rec: &'r csv::StringRecord, name: &str, line: usize) -> Result<&'r str> {
        self.text(rec, name)
            .ok_or_else(|| HarnessError::malformed(&self.path, format!("line {line}: no {name} column")))
    }

    /// Empty cells read as `None`.
    fn float(
        &self,
        rec: &csv::StringRecord,
        name: &str,
        line: usize,
        parse: impl Fn(&str) -> Option<f64>,
    ) -> Result<Option<f64>> {
        match self.text(rec, name) {
            None | Some("") => Ok(None),
            Some(s) => parse(s)
                .map(Some)
                .ok_or_else(|| HarnessError::malformed(&self.path, format!("line {line}: bad {name} {s:?}"))),
        }
    }

    fn rank(&self, rec: &csv::StringRecord, name: &str, line: usize) -> Result<Option<usize>> {
        match self.text(rec, name) {
            None | Some("") => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| HarnessError::malformed(&self.path, format!("line {line}: bad {name} {s:?}"))),
        }
    }
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, Columns)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let cols = Columns::new(path, r.headers().map_err(|e| HarnessError::csv(path, e))?);
    Ok((r, cols))
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse().ok()
}

pub fn parse_leaderboard(path: &Path) -> Result<Vec<LeaderboardRow>> {
    let (mut r, cols) = open(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let line = i + 2;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| HarnessError::malformed(path, format!("line {line}: empty {name}")))
        };
        let need_rank = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| HarnessError::malformed(path, format!("line {line}: empty {name}")))
        };
        out.push(LeaderboardRow {
            team: cols.require(&rec, "team", line)?.to_string(),
            psnr_db: need(cols.float(&rec, "psnr", line, parse_psnr)?, "psnr")?,
            ssim: need(cols.float(&rec, "ssim", line, parse_f64)?, "ssim")?,
            lpips: need(cols.float(&rec, "lpips", line, parse_f64)?, "lpips")?,
            mos: cols.float(&rec, "mos", line, parse_f64)?,
            psnr_rank: need_rank(cols.rank(&rec, "psnr_rank", line)?, "psnr_rank")?,
            ssim_rank: need_rank(cols.rank(&rec, "ssim_rank", line)?, "ssim_rank")?,
            lpips_rank: need_rank(cols.rank(&rec, "lpips_rank", line)?, "lpips_rank")?,
            fidelity_rank: need_rank(cols.rank(&rec, "fidelity_rank", line)?, "fidelity_rank")?,
            perceptual_rank: cols.rank(&rec, "perceptual_rank", line)?,
        });
    }
    Ok(out)
}

/// Reads `team,psnr,ssim,lpips[,mos]`; extra columns are ignored, so a
/// leaderboard CSV is accepted as well.
pub fn read_team_metrics(path: &Path) -> Result<Vec<TeamMetrics>> {
    let (mut r, cols) = open(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let line = i + 2;
        out.push(TeamMetrics {
            team: cols.require(&rec, "team", line)?.to_string(),
            psnr_db: cols.float(&rec, "psnr", line, parse_psnr)?,
            ssim: cols.float(&rec, "ssim", line, parse_f64)?,
            lpips: cols.float(&rec, "lpips", line, parse_f64)?,
            mos: cols.float(&rec, "mos", line, parse_f64)?,
        });
    }
    Ok(out)
}

/// Reads either per-team means (`team,mos`) or raw ratings
/// (`rater_id,scene_id,method,score`), which are validated and aggregated.
pub fn read_mos(path: &Path) -> Result<BTreeMap<String, f64>> {
    let (mut r, cols) = open(path)?;
    let raw = cols.has("rater_id") && cols.has("scene_id") && cols.has("method") && cols.has("score");
    if !raw && !(cols.has("team") && cols.has("mos")) {
        return Err(HarnessError::malformed(
            path,
            "expected columns team,mos or rater_id,scene_id,method,score",
        ));
    }
    let mut means = BTreeMap::new();
    let mut records = Vec::new();
    let mut grouping = HashMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let line = i + 2;
        if raw {
            let method = cols.require(&rec, "method", line)?.to_string();
            // ratings are keyed per (method, scene) so scenes shared by methods stay apart
            let key = format!("{method}/{}", cols.require(&rec, "scene_id", line)?);
            grouping.insert(key.clone(), method);
            records.push(MosRecord {
                rater_id: cols.require(&rec, "rater_id", line)?.to_string(),
                scene_id: key,
                score: cols
                    .float(&rec, "score", line, parse_f64)?
                    .ok_or_else(|| HarnessError::malformed(path, format!("line {line}: empty score")))?,
            });
        } else {
            let team = cols.require(&rec, "team", line)?.to_string();
            let mos = cols
                .float(&rec, "mos", line, parse_f64)?
                .ok_or_else(|| HarnessError::MissingMos(team.clone()))?;
            means.insert(team, mos);
        }
    }
    if raw {
        means = mos_aggregate(&records, &grouping)?;
    }
    Ok(means)
}

/// Replaces each team's MOS with the value from `mos`; teams absent there
/// keep no MOS.
pub fn attach_mos(rows: &mut [TeamMetrics], mos: &BTreeMap<String, f64>) {
    for r in rows {
        r.mos = mos.get(&r.team).copied();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::build_leaderboard;
    use std::fs;

    #[test]
    fn empty_board_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lb.csv");
        emit_leaderboard(&[], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), LEADERBOARD_HEADER.join(",") + "\n");
        assert!(parse_leaderboard(&p).unwrap().is_empty());
    }

    #[test]
    fn absent_mos_is_empty_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lb.csv");
        let board = build_leaderboard(&[
            TeamMetrics::new("Inputs", 20.723, 0.7011, 0.3885, None),
            TeamMetrics::new("A", 30.0, 0.9, 0.1, Some(7.5)),
        ])
        .unwrap();
        emit_leaderboard(&board, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("Inputs,20.723,0.7011,0.3885,,2,2,2,2,\n"), "{text}");
        assert!(text.contains("A,30.000,0.9000,0.1000,7.50,1,1,1,1,1\n"), "{text}");
        assert_eq!(parse_leaderboard(&p).unwrap(), board);
    }

    #[test]
    fn mos_tables() {
        let dir = tempfile::tempdir().unwrap();
        let means = dir.path().join("m.csv");
        fs::write(&means, "team,mos\nA,7.49\nB,2.51\n").unwrap();
        let m = read_mos(&means).unwrap();
        assert_eq!(m["A"], 7.49);

        let raw = dir.path().join("r.csv");
        fs::write(
            &raw,
            "rater_id,scene_id,method,score\nr1,s1,A,8\nr2,s1,A,7.5\nr1,s1,B,3\nr2,s2,B,2\n",
        )
        .unwrap();
        let m = read_mos(&raw).unwrap();
        assert_eq!(m["A"], 7.75);
        assert_eq!(m["B"], 2.5);

        let bad = dir.path().join("b.csv");
        fs::write(&bad, "rater_id,scene_id,method,score\nr1,s1,A,2.5\n").unwrap();
        assert!(matches!(
            read_mos(&bad),
            Err(HarnessError::Core(bokeh_core::Error::InvalidScore { .. }))
        ));
        let wrong = dir.path().join("w.csv");
        fs::write(&wrong, "who,what\nx,y\n").unwrap();
        assert!(read_mos(&wrong).is_err());
    }

    #[test]
    fn metrics_table_tolerates_extra_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "team,psnr,ssim,lpips,runtime\nA,inf,1.0,0.0,3\nB,25.5,0.8,,4\n").unwrap();
        let rows = read_team_metrics(&p).unwrap();
        assert_eq!(rows[0].psnr_db, Some(f64::INFINITY));
        assert_eq!(rows[1].lpips, None);
        assert_eq!(rows[1].mos, None);
    }
}
