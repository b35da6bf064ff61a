//! Subcommand pipelines. Every command loads one config file, writes its
//! artifacts through [`Outputs`] and finishes with a manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use ghostbeam_core::coincidence::{gated_accumulate, write_event, Correlator, EventStream};
use ghostbeam_core::fields::{
    decompose_source, render_component, ComplexField2D, PlaneWaveComponent,
};
use ghostbeam_core::joint::ghost_scan;
use ghostbeam_core::propagation::{propagate_line, Propagator};
use ghostbeam_core::{
    build_transfer, electron_image, forward_bucket_intensity, oam_analyze, phase_circulation,
    postselect, resolution_sweep, ring_vortex_scene, transmitted_image, Complex64, Error,
    EventKind, ImagePlane, ImageProfile, JointState, OamSpectrum, RingParams, RunConfig, SlabScene,
};
use rayon::prelude::*;

use crate::manifest::Outputs;
use crate::{CliError, Common};

/// Runs needing more records than this must use `--stream`.
pub const EVENT_LIMIT: f64 = 1e9;

struct Loaded {
    cfg: RunConfig,
    text: Vec<u8>,
    out: Outputs,
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    let text = std::fs::read(&common.config)
        .map_err(|e| Error::Config(format!("{}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.rates.seed = seed;
    }
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("ghostbeam-out"));
    let out = Outputs::create(&dir)?;
    Ok(Loaded { cfg, text, out })
}

fn plane_name(plane: ImagePlane) -> String {
    match plane {
        ImagePlane::Defocus(df) => format!("defocus_{df}"),
        ImagePlane::FarField => "far_field".into(),
    }
}

fn profile_csv(p: &ImageProfile) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    p.write_csv(&mut buf)?;
    Ok(buf)
}

fn field_bytes(f: &ComplexField2D) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f.write_to(&mut buf)?;
    Ok(buf)
}

fn joint_state(cfg: &RunConfig, strict: bool) -> Result<JointState, CliError> {
    let params = cfg.source_params()?;
    Ok(JointState::new(&cfg.scene, &params, cfg.source.n_components)?.strict(strict))
}

/// One component through the slab: incident field up to the object line,
/// transmitted and propagated beyond it.
fn forward_component(
    comp: &PlaneWaveComponent,
    scene: &SlabScene,
    t: &[Complex64],
    strict: bool,
) -> Result<ComplexField2D, CliError> {
    let mut field = render_component(comp, scene)?;
    let g = scene.grid();
    let last = (0..g.nx)
        .take_while(|&i| g.x(i) <= scene.object_x)
        .last()
        .ok_or_else(|| Error::Geometry("object line lies before the first grid column".into()))?;
    let mut prop = Propagator::for_scene(scene, scene.object_x - g.x(last));
    prop.strict = strict;
    let at_object: Vec<Complex64> = propagate_line(&field.line(last).to_vec(), g.dy, &prop)?
        .iter()
        .zip(t)
        .map(|(a, b)| a * b)
        .collect();
    let beyond: Vec<(usize, Vec<Complex64>)> = (last + 1..g.nx)
        .into_par_iter()
        .map(|i| {
            let line = propagate_line(
                &at_object,
                g.dy,
                &prop.with_distance(g.x(i) - scene.object_x),
            )?;
            Ok((i, line))
        })
        .collect::<ghostbeam_core::Result<_>>()?;
    let v = field.values_mut();
    for (i, line) in beyond {
        for (j, z) in line.into_iter().enumerate() {
            v[[i, j]] = z;
        }
    }
    Ok(field)
}

pub fn forward(common: &Common, write_fields: bool) -> Result<(), CliError> {
    let Loaded { cfg, text, mut out } = load(common)?;
    let state = joint_state(&cfg, common.strict)?;
    let optics = cfg.imaging.optics(&cfg.scene);
    let mut summary = String::from("# ghostbeam forward summary\n");
    for plane in cfg.imaging.planes() {
        let img = transmitted_image(&state, &optics, plane)?;
        let name = plane_name(plane);
        let _ = writeln!(summary, "ungated_{name}_visibility = {:.6}", img.visibility);
        out.write(&format!("ungated_{name}.csv"), &profile_csv(&img)?)?;
    }
    if write_fields || cfg.output.write_fields {
        let scene = &cfg.scene;
        let params = cfg.source_params()?;
        let comps = decompose_source(scene, &params, cfg.source.n_components)?;
        let t = build_transfer(&scene.object, &scene.grid().y_axis())?;
        let central = comps.len() / 2;
        let mut intensity: Option<ComplexField2D> = None;
        for (j, comp) in comps.iter().enumerate() {
            let f = forward_component(comp, scene, &t, common.strict)?;
            if j == central {
                out.write("forward_central.field", &field_bytes(&f)?)?;
            }
            let acc = intensity.get_or_insert_with(|| {
                let mut z = f.clone();
                z.values_mut().fill(Complex64::new(0.0, 0.0));
                z
            });
            for (a, b) in acc.values_mut().iter_mut().zip(f.values().iter()) {
                a.re += b.norm_sqr();
            }
        }
        if let Some(i) = intensity {
            out.write("forward_intensity.field", &field_bytes(&i)?)?;
        }
    }
    out.write("forward_summary.txt", summary.as_bytes())?;
    out.finish("forward", &text, None)?;
    Ok(())
}

pub fn ghost(
    common: &Common,
    bucket_scan: Option<usize>,
    bucket_point: Option<[f64; 2]>,
    defocus: &[f64],
) -> Result<(), CliError> {
    let Loaded {
        mut cfg,
        text,
        mut out,
    } = load(common)?;
    if !defocus.is_empty() {
        cfg.imaging.defocus = defocus.to_vec();
    }
    let state = joint_state(&cfg, common.strict)?;
    let scene = &cfg.scene;

    if let Some(n) = bucket_scan {
        if n == 0 {
            return Err(CliError::Usage(
                "--bucket-scan needs at least one point".into(),
            ));
        }
        let pts = scene.bucket_scan(n);
        let scan = ghost_scan(&state, &pts)?;
        let oracle = forward_bucket_intensity(&state, &pts)?;
        let mut s = String::from("y_nm,probability,forward_intensity\n");
        for ((p, a), b) in pts.iter().zip(&scan).zip(&oracle) {
            let _ = writeln!(s, "{:.6},{a:.9e},{b:.9e}", p[1]);
        }
        out.write("ghost_scan.csv", s.as_bytes())?;
        out.finish("ghost", &text, None)?;
        return Ok(());
    }

    let p = bucket_point
        .or(cfg.ghost.bucket_point)
        .unwrap_or(scene.bucket_center);
    let post = postselect(&state, p)?;
    let optics = cfg.imaging.optics(scene);
    let mut summary = String::from("# ghostbeam gated summary\n");
    let _ = writeln!(summary, "bucket_point_nm = [{}, {}]", p[0], p[1]);
    let _ = writeln!(
        summary,
        "detection_probability = {:.9e}",
        post.detection_probability()
    );
    let _ = writeln!(summary, "dark = {}", post.is_dark());
    let ratio = post.dominance_ratio();
    let _ = writeln!(summary, "dominance_ratio = {ratio:.6}");
    if ratio > cfg.ghost.dominance_threshold {
        log::warn!(
            "third-strongest term is {ratio:.3} of the strongest; the two-beam picture is approximate"
        );
    }
    if let Some(period) = post.two_beam_period() {
        let _ = writeln!(summary, "two_beam_period_nm = {period:.6}");
    }
    if let Some(phase) = post.relative_phase() {
        let _ = writeln!(summary, "relative_phase_rad = {phase:.9}");
    }
    for plane in cfg.imaging.planes() {
        let img = electron_image(&post, &optics, plane);
        let name = plane_name(plane);
        let _ = writeln!(summary, "gated_{name}_visibility = {:.6}", img.visibility);
        if let (ImagePlane::Defocus(_), Some(period)) = (plane, post.two_beam_period()) {
            if let Some(f) = img.fringe_period(period / 4.0, period * 4.0) {
                let _ = writeln!(summary, "gated_{name}_fringe_period_nm = {f:.6}");
            }
        }
        out.write(&format!("gated_{name}.csv"), &profile_csv(&img)?)?;
    }
    let mut terms =
        String::from("component,recoil_x,recoil_y,weight_re,weight_im,overlap_re,overlap_im\n");
    for t in &post.terms {
        let _ = writeln!(
            terms,
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            t.component,
            t.recoil[0],
            t.recoil[1],
            t.weight.re,
            t.weight.im,
            t.overlap.re,
            t.overlap.im
        );
    }
    out.write("postselected_terms.csv", terms.as_bytes())?;
    out.write("ghost_summary.txt", summary.as_bytes())?;
    out.finish("ghost", &text, None)?;
    Ok(())
}

pub fn coincidence(common: &Common, stream: bool) -> Result<(), CliError> {
    let Loaded { cfg, text, mut out } = load(common)?;
    let rates = &cfg.rates;
    rates.validate()?;
    let expected = rates.expected_records();
    if expected > EVENT_LIMIT && !stream {
        return Err(Error::Config(format!(
            "about {expected:.3e} events expected (limit {EVENT_LIMIT:.0e}); shorten rates.duration_s or pass --stream to correlate without keeping the event log"
        ))
        .into());
    }

    let mut events = EventStream::new(rates)?;
    let mut correlator = Correlator::new(rates.window_ns, rates.dead_time_ns)?;
    let mut recorded_electrons = 0u64;
    let mut feed = |e: &ghostbeam_core::Event| -> ghostbeam_core::Result<()> {
        if e.kind == EventKind::Electron {
            recorded_electrons += 1;
        }
        correlator.push(e)
    };
    if stream {
        for e in events.by_ref() {
            feed(&e)?;
        }
    } else {
        out.write_with("events.csv", |w| -> Result<(), CliError> {
            writeln!(w, "timestamp_ns,kind,tag")?;
            for e in events.by_ref() {
                write_event(w, &e)?;
                feed(&e)?;
            }
            Ok(())
        })?;
    }
    let report = correlator.finish(events.duration_ns());
    let s = &report.summary;

    // gated image per bucket tag, tags spread evenly over the bucket
    let n_tags = rates.tag_weights.len();
    let state = joint_state(&cfg, common.strict)?;
    let optics = cfg.imaging.optics(&cfg.scene);
    let plane = ImagePlane::Defocus(cfg.imaging.defocus.first().copied().unwrap_or(0.0));
    let images: BTreeMap<u32, ImageProfile> = cfg
        .scene
        .bucket_scan(n_tags)
        .into_iter()
        .enumerate()
        .map(|(tag, p)| {
            Ok((
                tag as u32,
                electron_image(&postselect(&state, p)?, &optics, plane),
            ))
        })
        .collect::<Result<_, CliError>>()?;
    let acc = gated_accumulate(
        &report.coincidences,
        &images,
        rates.seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    out.write("accumulated.csv", &profile_csv(&acc.combined)?)?;
    if n_tags > 1 {
        for (tag, img) in &acc.per_tag {
            out.write(&format!("accumulated_tag{tag}.csv"), &profile_csv(img)?)?;
        }
    }

    let duration = s.duration_s;
    let total = events.total_electrons();
    let per = |n: u64, scale: f64| -> String {
        if n > 0 {
            format!("{:.6}", duration / n as f64 * scale)
        } else {
            "nan".into()
        }
    };
    let mut r = String::from("# ghostbeam coincidence report\n");
    let _ = writeln!(r, "seed = {}", rates.seed);
    let _ = writeln!(r, "duration_s = {duration}");
    let _ = writeln!(r, "current_pa = {}", rates.current_pa);
    let _ = writeln!(r, "p_spp = {}", rates.p_spp);
    let _ = writeln!(r, "p_ps = {}", rates.p_ps);
    let _ = writeln!(r, "window_ns = {}", rates.window_ns);
    let _ = writeln!(r, "dead_time_ns = {}", rates.dead_time_ns);
    let _ = writeln!(r, "electron_rate_per_s = {:.6e}", rates.electron_rate());
    let _ = writeln!(
        r,
        "electron_spacing_ns_theory = {:.6}",
        rates.electron_spacing_ns()
    );
    let _ = writeln!(r, "electron_spacing_ns_empirical = {}", per(total, 1e9));
    let _ = writeln!(r, "tau_spp_us_theory = {:.6}", rates.tau_spp_s() * 1e6);
    let _ = writeln!(r, "tau_spp_us_empirical = {}", per(recorded_electrons, 1e6));
    let _ = writeln!(r, "tau_ps_ms_theory = {:.6}", rates.tau_ps_s() * 1e3);
    let _ = writeln!(r, "tau_ps_ms_empirical = {}", per(s.true_coincidences, 1e3));
    let _ = writeln!(r, "electrons_total = {total}");
    let _ = writeln!(r, "electrons_recorded = {}", s.electrons);
    let _ = writeln!(r, "photons = {}", s.photons);
    let _ = writeln!(r, "darks = {}", s.darks);
    let _ = writeln!(r, "true_coincidences = {}", s.true_coincidences);
    let _ = writeln!(r, "accidentals = {}", s.accidentals);
    let _ = writeln!(r, "rejected_dead_time = {}", s.rejected_dead_time);
    let _ = writeln!(r, "accumulated_hits = {}", acc.hits);
    out.write("coincidence_report.txt", r.as_bytes())?;
    out.finish("coincidence", &text, Some(rates.seed))?;
    Ok(())
}

fn vortex_map_csv(f: &ComplexField2D) -> Vec<u8> {
    let mut s = String::from("x_nm,y_nm,amplitude,phase_rad\n");
    for ((i, j), z) in f.values().indexed_iter() {
        let _ = writeln!(
            s,
            "{:.3},{:.3},{:.9e},{:.9}",
            f.x(i),
            f.y(j),
            z.norm(),
            z.arg()
        );
    }
    s.into_bytes()
}

pub fn beamshape(common: &Common, l: Option<i32>, unconditioned: bool) -> Result<(), CliError> {
    let Loaded { cfg, text, mut out } = load(common)?;
    let l = l.unwrap_or(cfg.beamshape.l);
    if !unconditioned && l.abs() != 1 {
        return Err(CliError::Usage(format!(
            "--l must be +1 or -1 (only |l| = 1 channels are modeled), got {l}"
        )));
    }
    let source = cfg.source_params()?;
    let channel = |l: i32| {
        ring_vortex_scene(
            &cfg.scene,
            &source,
            &RingParams {
                l,
                ..cfg.beamshape.clone()
            },
        )
    };
    let spectrum_csv = |s: &OamSpectrum| -> Result<Vec<u8>, CliError> {
        let mut b = Vec::new();
        s.write_csv(&mut b)?;
        Ok(b)
    };
    let mut summary = String::from("# ghostbeam beamshape summary\n");
    let channels: Vec<i32> = if unconditioned { vec![1, -1] } else { vec![l] };
    let mut spectra = Vec::new();
    for &ch in &channels {
        let v = channel(ch)?;
        let oam = oam_analyze(&v.electron)?;
        let k = 2.0 * PI / cfg.scene.lambda_spp;
        let c = v.electron.x(0) + 0.5 * (v.electron.nx() - 1) as f64 * v.electron.dx();
        let cy = v.electron.y(0) + 0.5 * (v.electron.ny() - 1) as f64 * v.electron.dy();
        let winding = phase_circulation(&v.electron, [c, cy], 1.8412 / k, 720)?;
        let tag = if ch > 0 { "plus" } else { "minus" };
        let _ = writeln!(summary, "[{tag}]");
        let _ = writeln!(summary, "l = {ch}");
        let _ = writeln!(summary, "dominant_l = {}", oam.dominant_l);
        let _ = writeln!(summary, "weight_l = {:.9}", oam.weight(ch));
        let _ = writeln!(summary, "mean_l = {:.9}", oam.mean());
        let _ = writeln!(summary, "phase_circulation_rad = {winding:.9}");
        let _ = writeln!(summary, "max_abs_beta = {:.9e}", v.beta.max_abs());
        let _ = writeln!(
            summary,
            "ring_factor = {:.9e}{:+.9e}i",
            v.ring_factor.re, v.ring_factor.im
        );
        out.write(&format!("beta_{tag}.field"), &field_bytes(&v.beta.field)?)?;
        out.write(&format!("electron_{tag}.field"), &field_bytes(&v.electron)?)?;
        out.write(&format!("electron_{tag}.csv"), &vortex_map_csv(&v.electron))?;
        out.write(&format!("oam_{tag}.csv"), &spectrum_csv(&oam)?)?;
        spectra.push(oam);
    }
    let final_spec = if unconditioned {
        OamSpectrum::mixture(&[(&spectra[0], 0.5), (&spectra[1], 0.5)])
    } else {
        spectra.remove(0)
    };
    let _ = writeln!(summary, "[spectrum]");
    let _ = writeln!(summary, "unconditioned = {unconditioned}");
    let _ = writeln!(summary, "dominant_l = {}", final_spec.dominant_l);
    let _ = writeln!(summary, "mean_l = {:.9}", final_spec.mean());
    let _ = writeln!(summary, "weight_plus1 = {:.9}", final_spec.weight(1));
    let _ = writeln!(summary, "weight_minus1 = {:.9}", final_spec.weight(-1));
    out.write("oam_spectrum.csv", &spectrum_csv(&final_spec)?)?;
    out.write("beamshape_summary.txt", summary.as_bytes())?;
    out.finish("beamshape", &text, None)?;
    Ok(())
}

pub fn resolution(common: &Common) -> Result<(), CliError> {
    let Loaded { cfg, text, mut out } = load(common)?;
    let points = resolution_sweep(&cfg.resolution)?;
    let mut s = String::from("distance_nm,cutoff_rad_per_nm,evanescent_estimate,out_of_regime\n");
    for p in &points {
        let _ = writeln!(
            s,
            "{},{:.9e},{:.9e},{}",
            p.distance, p.cutoff, p.evanescent_estimate, p.out_of_regime
        );
    }
    out.write("resolution.csv", s.as_bytes())?;
    out.finish("resolution", &text, None)?;
    Ok(())
}
