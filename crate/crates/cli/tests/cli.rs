use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghostbeam_core::{ObjectSpec, RunConfig, SlabScene};

fn ghostbeam(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostbeam"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("GHOSTBEAM_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, cfg.to_toml()).unwrap();
    p
}

fn ring_config() -> RunConfig {
    RunConfig::with_scene(SlabScene::default().with_object(ObjectSpec::RingResonator {
        n_rings: 5,
        spacing: 600.0,
        center: [10_000.0, 0.0],
    }))
}

/// `key = value` lookup in a summary or report file.
fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| {
            l.strip_prefix(key)
                .and_then(|r| r.trim_start().strip_prefix('='))
        })
        .unwrap_or_else(|| panic!("`{key}` missing in\n{text}"))
        .trim()
        .to_string()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn forward_writes_incoherent_profile_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &RunConfig::with_scene(SlabScene::default()),
    );
    let out = tmp.path().join("o");
    let r = ghostbeam(&["forward", "--write-fields"], &cfg, &out);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = read(out.join("ungated_defocus_0.csv"));
    let v: f64 = field(&csv, "# visibility").parse().unwrap();
    assert!(v < 0.05);
    let manifest: serde_json::Value =
        serde_json::from_str(&read(out.join("manifest.json"))).unwrap();
    let names: Vec<&str> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["path"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"forward_intensity.field") && names.contains(&"ungated_far_field.csv"));
    for n in names {
        assert!(out.join(n).exists());
    }
}

#[test]
fn opaque_object_gives_zero_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = SlabScene::default().with_object(ObjectSpec::uniform(0.0, 5_000.0));
    let cfg = write_config(tmp.path(), "c.toml", &RunConfig::with_scene(scene));
    let out = tmp.path().join("o");
    let r = ghostbeam(&["forward"], &cfg, &out);
    assert!(r.status.success());
    let csv = read(out.join("ungated_defocus_0.csv"));
    let values: Vec<f64> = csv
        .lines()
        .skip_while(|l| !l.starts_with("axis"))
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!values.is_empty() && values.iter().all(|v| *v == 0.0));
}

#[test]
fn missing_key_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text: String = RunConfig::with_scene(SlabScene::default())
        .to_toml()
        .lines()
        .filter(|l| !l.starts_with("lambda_spp"))
        .map(|l| format!("{l}\n"))
        .collect();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, text).unwrap();
    let r = ghostbeam(&["forward"], &cfg, &tmp.path().join("o"));
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("lambda_spp") && err.contains("line"), "{err}");
}

#[test]
fn axial_bucket_point_gives_gated_fringes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &RunConfig::with_scene(SlabScene::default()),
    );
    let out = tmp.path().join("o");
    let r = ghostbeam(
        &["ghost", "--bucket-point", "17000,0", "--defocus", "0,20000"],
        &cfg,
        &out,
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = read(out.join("ghost_summary.txt"));
    assert!(
        field(&summary, "gated_defocus_0_visibility")
            .parse::<f64>()
            .unwrap()
            > 0.8
    );
    let a = read(out.join("gated_defocus_0.csv"));
    let b = read(out.join("gated_defocus_20000.csv"));
    assert_ne!(a, b);
}

#[test]
fn bucket_scan_matches_forward_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &RunConfig::with_scene(SlabScene::default()),
    );
    let out = tmp.path().join("o");
    let r = ghostbeam(&["ghost", "--bucket-scan", "21"], &cfg, &out);
    assert!(r.status.success());
    let rows: Vec<(f64, f64)> = read(out.join("ghost_scan.csv"))
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[1], v[2])
        })
        .collect();
    assert_eq!(rows.len(), 21);
    let num: f64 = rows.iter().map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = rows.iter().map(|(_, b)| b * b).sum();
    assert!((num / den).sqrt() < 0.02);
}

#[test]
fn bucket_point_outside_extent_is_a_geometry_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &RunConfig::with_scene(SlabScene::default()),
    );
    let r = ghostbeam(
        &["ghost", "--bucket-point", "17000,1500"],
        &cfg,
        &tmp.path().join("o"),
    );
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn coincidence_report_and_reproducibility() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::with_scene(SlabScene::default());
    c.rates.duration_s = 0.1;
    let cfg = write_config(tmp.path(), "c.toml", &c);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(ghostbeam(&["coincidence", "--seed", "5"], &cfg, &a)
        .status
        .success());
    assert!(ghostbeam(&["coincidence", "--seed", "5"], &cfg, &b)
        .status
        .success());
    let report = read(a.join("coincidence_report.txt"));
    assert_eq!(field(&report, "tau_spp_us_theory"), "16.021766");
    let emp: f64 = field(&report, "tau_spp_us_empirical").parse().unwrap();
    assert!((emp / 16.021766 - 1.0).abs() < 0.05);
    let hashes = |d: &Path| {
        let m: serde_json::Value = serde_json::from_str(&read(d.join("manifest.json"))).unwrap();
        m["artifacts"].clone()
    };
    assert_eq!(hashes(&a), hashes(&b));
    assert_eq!(read(a.join("events.csv")), read(b.join("events.csv")));
    let other = tmp.path().join("c");
    assert!(ghostbeam(&["coincidence", "--seed", "6"], &cfg, &other)
        .status
        .success());
    assert_ne!(read(a.join("events.csv")), read(other.join("events.csv")));
}

#[test]
fn certain_photon_without_darks_has_no_accidentals() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::with_scene(SlabScene::default());
    c.rates.duration_s = 0.01;
    c.rates.p_ps = 1.0;
    c.rates.dark_rate = 0.0;
    let cfg = write_config(tmp.path(), "c.toml", &c);
    let out = tmp.path().join("o");
    assert!(ghostbeam(&["coincidence"], &cfg, &out).status.success());
    let report = read(out.join("coincidence_report.txt"));
    assert_eq!(field(&report, "accidentals"), "0");
    assert!(field(&report, "true_coincidences").parse::<u64>().unwrap() > 0);
}

#[test]
fn huge_runs_need_streaming() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::with_scene(SlabScene::default());
    c.rates.p_spp = 1.0;
    c.rates.duration_s = 100.0;
    let cfg = write_config(tmp.path(), "c.toml", &c);
    let r = ghostbeam(&["coincidence"], &cfg, &tmp.path().join("o"));
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("--stream"));
}

#[test]
fn streaming_mode_skips_the_event_log() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::with_scene(SlabScene::default());
    c.rates.duration_s = 0.05;
    let cfg = write_config(tmp.path(), "c.toml", &c);
    let out = tmp.path().join("o");
    assert!(ghostbeam(&["coincidence", "--stream"], &cfg, &out)
        .status
        .success());
    assert!(!out.join("events.csv").exists());
    assert!(out.join("coincidence_report.txt").exists());
}

#[test]
fn beamshape_channels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &ring_config());
    for (l, name) in [("1", "plus"), ("-1", "minus")] {
        let out = tmp.path().join(name);
        let r = ghostbeam(&["beamshape", "--l", l], &cfg, &out);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let s = read(out.join("beamshape_summary.txt"));
        let spectrum = s.split("[spectrum]").nth(1).unwrap();
        assert_eq!(field(spectrum, "dominant_l"), l);
        assert!(out.join(format!("electron_{name}.field")).exists());
    }
    let out = tmp.path().join("mix");
    assert!(ghostbeam(&["beamshape", "--unconditioned"], &cfg, &out)
        .status
        .success());
    let s = read(out.join("beamshape_summary.txt"));
    let spectrum = s.split("[spectrum]").nth(1).unwrap();
    for k in ["weight_plus1", "weight_minus1"] {
        assert!((field(spectrum, k).parse::<f64>().unwrap() - 0.5).abs() < 0.01);
    }
}

#[test]
fn beamshape_rejects_other_channels_and_scenes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &ring_config());
    let r = ghostbeam(&["beamshape", "--l", "2"], &cfg, &tmp.path().join("o"));
    assert_eq!(r.status.code(), Some(2));
    let slit = write_config(
        tmp.path(),
        "s.toml",
        &RunConfig::with_scene(SlabScene::default()),
    );
    let r = ghostbeam(&["beamshape"], &slit, &tmp.path().join("o"));
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn resolution_sweep_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &RunConfig::with_scene(SlabScene::default()),
    );
    let out = tmp.path().join("o");
    assert!(ghostbeam(&["resolution"], &cfg, &out).status.success());
    let cutoffs: Vec<f64> = read(out.join("resolution.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(cutoffs.len(), 5);
    assert!(cutoffs.windows(2).all(|w| w[1] > w[0]));
}
