//! Fidelity and perceptual track rankings.

use std::cmp::Ordering;

use crate::error::{HarnessError, Result};

/// Scores of one team as fed to the ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct TeamMetrics {
    pub team: String,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub lpips: Option<f64>,
    pub mos: Option<f64>,
}

impl TeamMetrics {
    pub fn new(team: &str, psnr_db: f64, ssim: f64, lpips: f64, mos: Option<f64>) -> Self {
        Self {
            team: team.to_string(),
            psnr_db: Some(psnr_db),
            ssim: Some(ssim),
            lpips: Some(lpips),
            mos,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderboardRow {
    pub team: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub lpips: f64,
    pub mos: Option<f64>,
    pub psnr_rank: usize,
    pub ssim_rank: usize,
    pub lpips_rank: usize,
    pub fidelity_rank: usize,
    pub perceptual_rank: Option<usize>,
}

impl LeaderboardRow {
    /// Mean of the three per-metric ranks.
    pub fn fidelity_score(&self) -> f64 {
        (self.psnr_rank + self.ssim_rank + self.lpips_rank) as f64 / 3.0
    }
}

fn require(v: Option<f64>, team: &str, metric: &'static str) -> Result<f64> {
    match v {
        Some(x) if !x.is_nan() => Ok(x),
        _ => Err(HarnessError::MissingMetric {
            team: team.to_string(),
            metric,
        }),
    }
}

/// 1-based ranks of `values` under `better` (the best value first); equal
/// values are ordered by team name.
fn ranks_by(teams: &[&str], values: &[f64], better: impl Fn(f64, f64) -> Ordering) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| better(values[a], values[b]).then_with(|| teams[a].cmp(teams[b])));
    let mut ranks = vec![0; values.len()];
    for (pos, i) in idx.into_iter().enumerate() {
        ranks[i] = pos + 1;
    }
    ranks
}

/// Ranks teams by the mean of their PSNR, SSIM and LPIPS ranks. Ties go to
/// the higher PSNR, then the lexicographically smaller team name. Rows come
/// back in fidelity order with no perceptual rank.
pub fn fidelity_rank(rows: &[TeamMetrics]) -> Result<Vec<LeaderboardRow>> {
    if rows.is_empty() {
        return Err(HarnessError::InvalidArgument("no rows to rank".into()));
    }
    let mut psnr = Vec::with_capacity(rows.len());
    let mut ssim = Vec::with_capacity(rows.len());
    let mut lpips = Vec::with_capacity(rows.len());
    for r in rows {
        psnr.push(require(r.psnr_db, &r.team, "psnr")?);
        ssim.push(require(r.ssim, &r.team, "ssim")?);
        lpips.push(require(r.lpips, &r.team, "lpips")?);
    }
    let teams: Vec<&str> = rows.iter().map(|r| r.team.as_str()).collect();
    let desc = |a: f64, b: f64| b.total_cmp(&a);
    let psnr_r = ranks_by(&teams, &psnr, desc);
    let ssim_r = ranks_by(&teams, &ssim, desc);
    let lpips_r = ranks_by(&teams, &lpips, |a: f64, b: f64| a.total_cmp(&b));

    let mut out: Vec<LeaderboardRow> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| LeaderboardRow {
            team: r.team.clone(),
            psnr_db: psnr[i],
            ssim: ssim[i],
            lpips: lpips[i],
            mos: r.mos,
            psnr_rank: psnr_r[i],
            ssim_rank: ssim_r[i],
            lpips_rank: lpips_r[i],
            fidelity_rank: 0,
            perceptual_rank: None,
        })
        .collect();
    // integer rank sums order exactly like their means
    out.sort_by(|a, b| {
        let sa = a.psnr_rank + a.ssim_rank + a.lpips_rank;
        let sb = b.psnr_rank + b.ssim_rank + b.lpips_rank;
        sa.cmp(&sb)
            .then_with(|| b.psnr_db.total_cmp(&a.psnr_db))
            .then_with(|| a.team.cmp(&b.team))
    });
    for (pos, r) in out.iter_mut().enumerate() {
        r.fidelity_rank = pos + 1;
    }
    Ok(out)
}

/// Ranks by descending MOS, ties by team name. Returns `(team, rank)` in rank order.
pub fn perceptual_rank(rows: &[(String, Option<f64>)]) -> Result<Vec<(String, usize)>> {
    let mut scored = Vec::with_capacity(rows.len());
    for (team, mos) in rows {
        match mos {
            Some(m) if !m.is_nan() => scored.push((team.clone(), *m)),
            _ => return Err(HarnessError::MissingMos(team.clone())),
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (team, _))| (team, i + 1))
        .collect())
}

/// Fidelity ranks for every row plus perceptual ranks among the rows that
/// carry a MOS.
pub fn build_leaderboard(rows: &[TeamMetrics]) -> Result<Vec<LeaderboardRow>> {
    let mut board = fidelity_rank(rows)?;
    let rated: Vec<(String, Option<f64>)> = board
        .iter()
        .filter(|r| r.mos.is_some())
        .map(|r| (r.team.clone(), r.mos))
        .collect();
    for (team, rank) in perceptual_rank(&rated)? {
        if let Some(r) = board.iter_mut().find(|r| r.team == team) {
            r.perceptual_rank = Some(rank);
        }
    }
    Ok(board)
}
