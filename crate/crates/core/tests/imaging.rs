//! End-to-end imaging properties on the default double-slit scene.

use ghostbeam_core::joint::detected_subset_image;
use ghostbeam_core::propagation::time_reversed_field;
use ghostbeam_core::{
    electron_image, forward_bucket_intensity, gated_image_sum, ghost_scan, postselect,
    transmitted_image, ungated_image, ImagePlane, ImagingOptics, JointState, ObjectSpec, SlabScene,
    SourceParams,
};

fn state(scene: &SlabScene) -> JointState {
    JointState::new(scene, &SourceParams::for_scene(scene), 33).unwrap()
}

fn rms_rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[test]
fn gated_fringes_and_ungated_washout() {
    let scene = SlabScene::default();
    let st = state(&scene);
    let optics = ImagingOptics::for_scene(&scene);
    let plane = ImagePlane::Defocus(0.0);

    let post = postselect(&st, scene.bucket_center).unwrap();
    assert!(post.dominance_ratio() < 0.05, "{}", post.dominance_ratio());
    let gated = electron_image(&post, &optics, plane);
    assert!(gated.visibility > 0.8, "gated V = {}", gated.visibility);

    let want = post.two_beam_period().unwrap();
    let got = gated.fringe_period(want / 4.0, want * 4.0).unwrap();
    assert!((got - want).abs() <= optics.spacing, "{got} vs {want}");

    let ungated = ungated_image(&st, &optics, plane);
    assert!(
        ungated.visibility < 0.05,
        "ungated V = {}",
        ungated.visibility
    );
}

#[test]
fn bucket_scan_marginalizes_to_detected_subset() {
    let scene = SlabScene::default();
    let st = state(&scene);
    let optics = ImagingOptics::for_scene(&scene);
    let points = scene.bucket_grid_points();
    for plane in [ImagePlane::Defocus(0.0), ImagePlane::FarField] {
        let sum = gated_image_sum(&st, &points, &optics, plane).unwrap();
        let subset = detected_subset_image(&st, &points, &optics, plane).unwrap();
        let e = rms_rel(&sum.normalized(), &subset.normalized());
        assert!(e < 0.02, "{plane:?}: {e}");
    }
}

#[test]
fn ghost_scan_of_clear_object_is_flat_and_matches_forward_route() {
    let scene = SlabScene::default().with_object(ObjectSpec::uniform(1.0, 5_000.0));
    let st = state(&scene);
    let pts = scene.bucket_scan(41);
    let scan = ghost_scan(&st, &pts).unwrap();
    let half = scene.bucket_extent_dy / 4.0;
    let central: Vec<f64> = pts
        .iter()
        .zip(&scan)
        .filter(|(p, _)| (p[1] - scene.bucket_center[1]).abs() <= half)
        .map(|(_, v)| *v)
        .collect();
    let mean = central.iter().sum::<f64>() / central.len() as f64;
    for v in &central {
        assert!((v / mean - 1.0).abs() < 0.1, "{v} vs {mean}");
    }
    let fwd = forward_bucket_intensity(&st, &pts).unwrap();
    assert!(rms_rel(&scan, &fwd) < 0.02);

    let slits = SlabScene::default();
    let st = state(&slits);
    let scan = ghost_scan(&st, &pts).unwrap();
    let fwd = forward_bucket_intensity(&st, &pts).unwrap();
    assert!(rms_rel(&scan, &fwd) < 0.02);
}

#[test]
fn reverse_field_is_two_plane_waves_over_the_slits() {
    let scene = SlabScene::default();
    let p = scene.bucket_center;
    let rev = time_reversed_field(p, &scene).unwrap();
    let ix = rev.column_at(scene.object_x).unwrap() + 2;
    let (dx, dy) = (rev.dx(), rev.dy());
    let v = rev.values();
    let ObjectSpec::DoubleSlit { d, b } = scene.object else {
        unreachable!()
    };
    for yc in [-d / 2.0, d / 2.0] {
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 1..rev.ny() - 1 {
            if (rev.y(j) - yc).abs() > b / 4.0 {
                continue;
            }
            gx += (v[[ix + 1, j]] / v[[ix - 1, j]]).arg() / (2.0 * dx);
            gy += (v[[ix, j + 1]] / v[[ix, j - 1]]).arg() / (2.0 * dy);
        }
        let geo = (yc - p[1]).atan2(rev.x(ix) - p[0]);
        let err = (gy.atan2(gx) - geo).sin().asin().to_degrees().abs();
        assert!(err < 1.0, "slit at {yc}: {err}°");
    }
}

#[test]
fn transmitted_image_is_incoherent_and_vanishes_for_opaque_object() {
    let scene = SlabScene::default();
    let optics = ImagingOptics::for_scene(&scene);
    for plane in [ImagePlane::Defocus(0.0), ImagePlane::Defocus(5_000.0)] {
        let img = transmitted_image(&state(&scene), &optics, plane).unwrap();
        assert!(img.visibility < 0.05, "{}", img.visibility);
        assert!(img.total() > 0.0);
    }
    let dark = SlabScene::default().with_object(ObjectSpec::uniform(0.0, 5_000.0));
    let img = transmitted_image(&state(&dark), &optics, ImagePlane::Defocus(0.0)).unwrap();
    assert!(img.intensity.iter().all(|v| *v == 0.0));
}
