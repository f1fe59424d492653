use bokeh_core::inference::{tile_process_with, tta_ensemble_with, TileSpec};
use bokeh_core::metrics::{psnr, ssim, ssim_with};
use bokeh_core::optics::FocusRef;
use bokeh_core::raster::{load_depth, load_image, save_depth, save_image};
use bokeh_core::renderer::{render_bokeh_with, RenderConfig};
use bokeh_core::{ApertureSetting, DepthMap, Exec, RasterImage, Transfer};

fn scene(w: usize, h: usize) -> (RasterImage, DepthMap) {
    let mut data = Vec::with_capacity(w * h * 3);
    let mut depth = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = if (x / 5 + y / 7) % 2 == 0 { 0.9 } else { 0.1 };
            data.extend([v, (x as f32 / w as f32), (y as f32 / h as f32)]);
            depth.push(if (x + y) < w / 2 { 1.0 } else { 1.0 + 3.0 * y as f32 / h as f32 });
        }
    }
    (
        RasterImage::new(w, h, 3, data).unwrap(),
        DepthMap::new(w, h, depth).unwrap(),
    )
}

fn cfg() -> RenderConfig {
    RenderConfig {
        max_radius_px: Some(6.0),
        blade_count: 7,
        blade_rotation_rad: 0.2,
        ..RenderConfig::default()
    }
}

#[test]
fn files_round_trip_into_identical_renders() {
    let dir = tempfile::tempdir().unwrap();
    let (img, depth) = scene(40, 30);
    save_image(&img, dir.path().join("in.png"), Transfer::Linear).unwrap();
    save_depth(&depth, dir.path().join("d.pfm")).unwrap();
    let img2 = load_image(dir.path().join("in.png"), Transfer::Linear).unwrap();
    let depth2 = load_depth(dir.path().join("d.pfm")).unwrap();
    assert_eq!(depth.data(), depth2.data());
    assert!(img.data().iter().zip(img2.data()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-6));

    let t = ApertureSetting::new(2.8, 35.0, None).unwrap();
    let a = render_bokeh_with(&img2, &depth2, &t, &cfg(), Exec::Sequential).unwrap();
    let b = render_bokeh_with(&img2, &depth2, &t, &cfg(), Exec::Sequential).unwrap();
    assert_eq!(a, b);
}

#[test]
fn execution_modes_agree_bitwise() {
    let (img, depth) = scene(57, 43);
    let t = ApertureSetting::new(2.0, 50.0, None).unwrap();
    let seq = render_bokeh_with(&img, &depth, &t, &cfg(), Exec::Sequential).unwrap();
    let par = render_bokeh_with(&img, &depth, &t, &cfg(), Exec::Parallel).unwrap();
    assert_eq!(seq.data(), par.data());
    assert_eq!(
        ssim_with(&img, &seq, Exec::Sequential).unwrap().to_bits(),
        ssim_with(&img, &seq, Exec::Parallel).unwrap().to_bits()
    );

    let op = |x: &RasterImage, d: Option<&DepthMap>| render_bokeh_with(x, d.unwrap(), &t, &cfg(), Exec::Sequential);
    let spec = TileSpec::new(24, 16).unwrap();
    let tiles_seq = tile_process_with(&op, &img, Some(&depth), spec, Exec::Sequential).unwrap();
    let tiles_par = tile_process_with(&op, &img, Some(&depth), spec, Exec::Parallel).unwrap();
    assert_eq!(tiles_seq.data(), tiles_par.data());
    let tta_seq = tta_ensemble_with(&op, &img, Some(&depth), Exec::Sequential).unwrap();
    let tta_par = tta_ensemble_with(&op, &img, Some(&depth), Exec::Parallel).unwrap();
    assert_eq!(tta_seq.data(), tta_par.data());
}

#[test]
fn wider_apertures_drift_further_from_the_input() {
    let (img, depth) = scene(64, 48);
    let c = RenderConfig {
        focus_ref: FocusRef::Distance(1.0),
        ..cfg()
    };
    let mut last = f64::INFINITY;
    for f in [16.0, 8.0, 4.0, 2.0] {
        let t = ApertureSetting::new(f, 50.0, None).unwrap();
        let out = render_bokeh_with(&img, &depth, &t, &c, Exec::default()).unwrap();
        let p = psnr(&img, &out).unwrap();
        assert!(p <= last, "f/{f}: {p} > {last}");
        last = p;
    }
    let t = ApertureSetting::new(22.0, 50.0, None).unwrap();
    let same = render_bokeh_with(&img, &depth, &t, &c, Exec::default()).unwrap();
    assert!(ssim(&img, &same).unwrap() > 0.9999);
}
