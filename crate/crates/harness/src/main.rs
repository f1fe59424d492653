use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bokeh_core::inference::{tile_process, tta_ensemble, ImageOperator, TileSpec, DEFAULT_STRIDE_PX};
use bokeh_core::metrics::LpipsAdapter;
use bokeh_core::optics::{default_max_radius_px, FocusRef};
use bokeh_core::raster::{load_depth, load_image, save_image};
use bokeh_core::renderer::{render_bokeh, RenderConfig};
use bokeh_core::{ApertureSetting, DepthMap, Exec, RasterImage, Transfer};
use bokeh_harness::dataset::load_manifest;
use bokeh_harness::leaderboard::{attach_mos, emit_leaderboard, read_mos, read_team_metrics};
use bokeh_harness::ranking::build_leaderboard;
use bokeh_harness::scoring::{score_submission, write_scene_csv};
use bokeh_harness::submission::validate_submission;
use bokeh_harness::{HarnessError, Result};
use clap::{Parser, Subcommand};

/// Controllable bokeh rendering and challenge evaluation.
#[derive(Parser, Debug)]
#[command(name = "bokeh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a target aperture from an f/22 capture and its depth map.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        f_number: f64,
        /// Focal length in millimeters.
        #[arg(long)]
        focal_length: f64,
        /// JSON render configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Average over the eight flips and quarter turns.
        #[arg(long)]
        tta: bool,
        /// Process in overlapping square tiles of this size.
        #[arg(long)]
        tile: Option<usize>,
        /// Tile stride; defaults to min(384, tile).
        #[arg(long, requires = "tile")]
        stride: Option<usize>,
    },
    /// Score a submission against a dataset's ground truth.
    Score {
        #[arg(long)]
        pred: PathBuf,
        /// Dataset root.
        #[arg(long)]
        gt: PathBuf,
        /// Executable or precomputed `scene_id,lpips` CSV.
        #[arg(long)]
        lpips_adapter: Option<String>,
        /// Per-scene CSV output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Rank teams on both tracks and write the leaderboard.
    Rank {
        /// `team,psnr,ssim,lpips[,mos]`.
        #[arg(long)]
        metrics: PathBuf,
        /// `team,mos` means or raw `rater_id,scene_id,method,score` ratings.
        #[arg(long)]
        mos: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a submission for coverage and dimensions.
    Validate {
        #[arg(long)]
        pred: PathBuf,
        /// Dataset root.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Validate a dataset layout and its split sizes.
    DatasetCheck {
        #[arg(long)]
        root: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("BOKEH_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = bokeh_core::par::configure_threads(n) {
                log::warn!("could not cap worker threads: {e}");
            }
        }
        _ => log::warn!("ignoring BOKEH_THREADS={raw:?}; expected a positive integer"),
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Render {
            input,
            depth,
            f_number,
            focal_length,
            config,
            out,
            tta,
            tile,
            stride,
        } => {
            let tiles = tile
                .map(|t| TileSpec::new(t, stride.unwrap_or(DEFAULT_STRIDE_PX.min(t))))
                .transpose()?;
            render(&input, &depth, f_number, focal_length, config.as_deref(), &out, tta, tiles)?;
            Ok(0)
        }
        Command::Score {
            pred,
            gt,
            lpips_adapter,
            out,
            split,
        } => {
            let adapter = lpips_adapter.as_deref().map(LpipsAdapter::parse).transpose()?;
            let dataset = load_manifest(&gt)?;
            let (rows, summary) = score_submission(&pred, &dataset, &split, adapter.as_ref(), Exec::default())?;
            write_scene_csv(&rows, &out)?;
            println!("{}", summary.to_json());
            Ok(0)
        }
        Command::Rank { metrics, mos, out } => {
            let mut rows = read_team_metrics(&metrics)?;
            if let Some(path) = mos {
                attach_mos(&mut rows, &read_mos(&path)?);
            }
            let board = build_leaderboard(&rows)?;
            emit_leaderboard(&board, &out)?;
            Ok(0)
        }
        Command::Validate { pred, manifest, split } => {
            let dataset = load_manifest(&manifest)?;
            let report = validate_submission(&pred, &dataset, &split)?;
            print!("{report}");
            Ok(if report.is_ok() { 0 } else { 1 })
        }
        Command::DatasetCheck { root } => {
            let ds = load_manifest(&root)?;
            let s = &ds.splits;
            println!(
                "{} scenes: train {}, val {}, test {}",
                ds.scenes.len(),
                s.train.len(),
                s.val.len(),
                s.test.len()
            );
            for w in &ds.warnings {
                println!("warning: {w}");
            }
            Ok(0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn render(
    input: &Path,
    depth: &Path,
    f_number: f64,
    focal_length: f64,
    config: Option<&Path>,
    out: &Path,
    tta: bool,
    tiles: Option<TileSpec>,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => RenderConfig::from_json(&fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?)?,
        None => RenderConfig::default(),
    };
    let target = ApertureSetting::new(f_number, focal_length, None)?;
    if target.focal_length_warning() {
        log::warn!("focal length {focal_length} mm outside the 28-70 mm capture range");
    }
    let img = load_image(input, Transfer::Linear)?;
    let depth = load_depth(depth)?;
    // focus and blur scale come from the whole frame, not from each tile
    cfg.focus_ref = FocusRef::Distance(cfg.focus_ref.resolve(&depth));
    cfg.max_radius_px = Some(
        cfg.max_radius_px
            .unwrap_or_else(|| default_max_radius_px(img.width(), img.height())),
    );
    let op = |x: &RasterImage, d: Option<&DepthMap>| {
        let d = d.expect("depth travels with the image");
        render_bokeh(x, d, &target, &cfg)
    };
    let result = match (tta, tiles) {
        (false, None) => op.apply(&img, Some(&depth))?,
        (true, None) => tta_ensemble(&op, &img, Some(&depth))?,
        (false, Some(spec)) => tile_process(&op, &img, Some(&depth), spec)?,
        (true, Some(spec)) => {
            let tiled = |x: &RasterImage, d: Option<&DepthMap>| tile_process(&op, x, d, spec);
            tta_ensemble(&tiled, &img, Some(&depth))?
        }
    };
    save_image(&result, out, Transfer::Linear)?;
    Ok(())
}
