//! Superposition integrals, post-selection and image formation.
//!
//! The overlap `c_j(P) = ∫ E_j^FWD(y)·E^REV_P(y) dy` is taken on the object
//! line as a plain (bilinear) product. `E^REV_P` is the bucket detection
//! mode at `P` propagated back to the object and multiplied by `T`, so by
//! reciprocity `c_j(P)` is the amplitude for SPP component `j` to be detected
//! at `P`, and `Σ_j |a_j c_j|²` is the detection probability.

mod image;
mod resolution;

pub use image::{
    electron_image, transmitted_image, ungated_image, AxisUnit, ImagePlane, ImageProfile,
    ImagingOptics,
};
pub use resolution::{resolution_sweep, ResolutionParams, ResolutionPoint};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    decompose_source, object_line_field, ComplexField2D, PlaneWaveComponent, SourceParams,
};
use crate::propagation::{apply_transfer_line, pixel_mode, reverse_line, Propagator};
use crate::scene::{build_transfer, ensure_valid, Point, SlabScene};

/// Overlaps below this are treated as no detection.
pub const DARK_FLOOR: f64 = 1e-12;
/// Default dominance threshold for "two plane waves survive".
pub const DOMINANCE_THRESHOLD: f64 = 0.05;

/// Joint electron–SPP state `Σ_k a_k |ψ_e(−k)⟩|E_k⟩`, with every component's
/// field sampled on the object line.
#[derive(Debug, Clone)]
pub struct JointState {
    scene: SlabScene,
    omega: f64,
    components: Vec<PlaneWaveComponent>,
    lines: Vec<Vec<Complex64>>,
    ys: Vec<f64>,
    dy: f64,
    strict: bool,
}

impl JointState {
    pub fn new(scene: &SlabScene, params: &SourceParams, n_components: usize) -> Result<Self> {
        ensure_valid(scene)?;
        let v = params.violations();
        if !v.is_empty() {
            return Err(Error::Precondition(v.join("; ")));
        }
        let comps = decompose_source(scene, params, n_components)?;
        Self::from_components(scene, params.omega, comps)
    }

    /// Builds a state from explicit components; amplitudes are used as given.
    pub fn from_components(
        scene: &SlabScene,
        omega: f64,
        components: Vec<PlaneWaveComponent>,
    ) -> Result<Self> {
        ensure_valid(scene)?;
        let g = scene.grid();
        let ys = g.y_axis();
        let lines = components
            .iter()
            .map(|c| object_line_field(c, scene.object_x, &ys))
            .collect();
        Ok(JointState {
            scene: scene.clone(),
            omega,
            components,
            lines,
            ys,
            dy: g.dy,
            strict: false,
        })
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn scene(&self) -> &SlabScene {
        &self.scene
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn components(&self) -> &[PlaneWaveComponent] {
        &self.components
    }

    /// Forward field of component `j` on the object line (unit weight).
    pub fn object_line(&self, j: usize) -> &[Complex64] {
        &self.lines[j]
    }

    pub fn y_axis(&self) -> &[f64] {
        &self.ys
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// Same state with every amplitude multiplied by `z`.
    pub fn scaled(&self, z: Complex64) -> Self {
        let mut s = self.clone();
        for c in &mut s.components {
            c.a_k *= z;
        }
        s
    }

    /// Keeps only the listed components (amplitudes untouched).
    pub fn subset(&self, keep: &[usize]) -> Self {
        let mut s = self.clone();
        s.components = keep.iter().map(|&j| self.components[j].clone()).collect();
        s.lines = keep.iter().map(|&j| self.lines[j].clone()).collect();
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|c| c.a_k.norm_sqr()).sum()
    }
}

/// `Σ f·g·dy` for line fields whose L2 norms do not exceed one.
pub fn line_overlap(f: &[Complex64], g: &[Complex64], dy: f64) -> Result<Complex64> {
    if f.len() != g.len() {
        return Err(Error::Argument(format!(
            "overlap lines differ in length ({} vs {})",
            f.len(),
            g.len()
        )));
    }
    for (name, v) in [("forward", f), ("reverse", g)] {
        let p: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() * dy;
        if p > 1.0 + 1e-9 {
            return Err(Error::Precondition(format!(
                "{name} field has line norm² {p:.6} > 1"
            )));
        }
    }
    Ok(f.iter().zip(g).map(|(a, b)| a * b).sum::<Complex64>() * dy)
}

/// Overlap `∫E^FWD·E^REV dy` on the column nearest `line_x`.
pub fn superposition_integral(
    e_fwd: &ComplexField2D,
    e_rev: &ComplexField2D,
    line_x: f64,
) -> Result<Complex64> {
    if !e_fwd.same_grid(e_rev) {
        return Err(Error::Argument("fields are on different grids".into()));
    }
    let ix = e_fwd
        .column_at(line_x)
        .ok_or_else(|| Error::Argument(format!("line x = {line_x} nm outside the grid")))?;
    let f = e_fwd.line(ix).to_vec();
    let g = e_rev.line(ix).to_vec();
    line_overlap(&f, &g, e_fwd.dy())
}

/// One term of the post-selected electron: recoil `−k_j` with weight `a_j·c_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectronTerm {
    pub component: usize,
    pub recoil: [f64; 2],
    pub weight: Complex64,
    /// The superposition integral `c_j`.
    pub overlap: Complex64,
}

/// Pure electron state after a bucket detection at `detection_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostselectedElectron {
    pub terms: Vec<ElectronTerm>,
    pub detection_point: Point,
}

impl PostselectedElectron {
    pub fn is_dark(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ|a_j c_j|²`.
    pub fn detection_probability(&self) -> f64 {
        self.terms.iter().map(|t| t.weight.norm_sqr()).sum()
    }

    /// Terms sorted by decreasing weight magnitude.
    pub fn ranked(&self) -> Vec<&ElectronTerm> {
        let mut r: Vec<&ElectronTerm> = self.terms.iter().collect();
        r.sort_by(|a, b| b.weight.norm().total_cmp(&a.weight.norm()));
        r
    }

    /// The two strongest terms, ordered by recoil y.
    pub fn dominant_pair(&self) -> Option<(&ElectronTerm, &ElectronTerm)> {
        let r = self.ranked();
        if r.len() < 2 {
            return None;
        }
        let (a, b) = (r[0], r[1]);
        Some(if a.recoil[1] <= b.recoil[1] {
            (a, b)
        } else {
            (b, a)
        })
    }

    /// `arg(w_2/w_1)` for the dominant pair.
    pub fn relative_phase(&self) -> Option<f64> {
        self.dominant_pair()
            .map(|(a, b)| (b.weight * a.weight.conj()).arg())
    }

    /// Largest non-dominant weight magnitude relative to the strongest one.
    pub fn dominance_ratio(&self) -> f64 {
        let r = self.ranked();
        if r.len() < 3 || r[0].weight.norm() == 0.0 {
            return 0.0;
        }
        r[2].weight.norm() / r[0].weight.norm()
    }

    /// Fringe period `2π/|q_1 − q_2|` of the dominant pair.
    pub fn two_beam_period(&self) -> Option<f64> {
        self.dominant_pair()
            .map(|(a, b)| 2.0 * std::f64::consts::PI / (a.recoil[1] - b.recoil[1]).abs())
    }
}

/// Overlaps `c_j(P)` of every component with the reverse field from `p`.
pub fn overlaps(state: &JointState, p: Point) -> Result<Vec<Complex64>> {
    let rev = reverse_line(&state.scene, p, state.strict)?;
    state
        .lines
        .iter()
        .map(|l| line_overlap(l, &rev, state.dy))
        .collect()
}

/// Projects the joint state onto a bucket detection at `p`.
pub fn postselect(state: &JointState, p: Point) -> Result<PostselectedElectron> {
    let c = overlaps(state, p)?;
    let terms = if c.iter().all(|z| z.norm() < DARK_FLOOR) {
        Vec::new()
    } else {
        state
            .components
            .iter()
            .zip(&c)
            .enumerate()
            .filter(|(_, (_, cj))| cj.norm() >= DARK_FLOOR)
            .map(|(j, (comp, cj))| ElectronTerm {
                component: j,
                recoil: comp.electron_recoil,
                weight: comp.a_k * cj,
                overlap: *cj,
            })
            .collect()
    };
    Ok(PostselectedElectron {
        terms,
        detection_point: p,
    })
}

/// Detection probability `Σ_j |a_j c_j(P)|²` for every bucket point.
pub fn ghost_scan(state: &JointState, points: &[Point]) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|&p| {
            let c = overlaps(state, p)?;
            Ok(state
                .components
                .iter()
                .zip(&c)
                .map(|(comp, cj)| (comp.a_k * cj).norm_sqr())
                .sum())
        })
        .collect()
}

/// Forward route: every component is transmitted through the object,
/// propagated to the bucket line and projected on the detection modes.
/// Returns `b[p][j]`, the amplitude of component `j` (unit weight) at point `p`.
pub fn forward_bucket_amplitudes(
    state: &JointState,
    points: &[Point],
) -> Result<Array2<Complex64>> {
    let scene = &state.scene;
    let t = build_transfer(&scene.object, &state.ys)?;
    let bucket_x = scene.bucket_center[0];
    let mut prop = Propagator::for_scene(scene, bucket_x - scene.object_x);
    prop.strict = state.strict;
    let plan = prop.plan(state.ys.len(), state.dy)?;
    let at_bucket: Vec<Vec<Complex64>> = state
        .lines
        .par_iter()
        .map(|l| plan.apply(&apply_transfer_line(l, &t)?))
        .collect::<Result<_>>()?;
    let w = scene.detector_waist();
    let mut out = Array2::zeros((points.len(), state.components.len()));
    for (ip, p) in points.iter().enumerate() {
        if !scene.in_bucket(p[1]) || (p[0] - bucket_x).abs() > 1e-6 {
            return Err(Error::Geometry(format!(
                "point ({}, {}) is not on the bucket",
                p[0], p[1]
            )));
        }
        let m = pixel_mode(&state.ys, p[1], w);
        for (j, e) in at_bucket.iter().enumerate() {
            out[[ip, j]] = e.iter().zip(&m).map(|(a, b)| a * b).sum::<Complex64>() * state.dy;
        }
    }
    Ok(out)
}

/// Forward-only bucket intensity `Σ_j |a_j|²|b_j(P)|²` (no post-selection).
pub fn forward_bucket_intensity(state: &JointState, points: &[Point]) -> Result<Vec<f64>> {
    let b = forward_bucket_amplitudes(state, points)?;
    Ok((0..points.len())
        .map(|ip| {
            state
                .components
                .iter()
                .enumerate()
                .map(|(j, c)| c.a_k.norm_sqr() * b[[ip, j]].norm_sqr())
                .sum()
        })
        .collect())
}

/// Sum of the (probability-weighted) gated images over `points`.
pub fn gated_image_sum(
    state: &JointState,
    points: &[Point],
    optics: &ImagingOptics,
    plane: ImagePlane,
) -> Result<ImageProfile> {
    let images: Vec<ImageProfile> = points
        .par_iter()
        .map(|&p| Ok(electron_image(&postselect(state, p)?, optics, plane)))
        .collect::<Result<_>>()?;
    let axis = optics.axis(plane);
    let mut total = vec![0.0; axis.len()];
    for img in &images {
        for (t, v) in total.iter_mut().zip(&img.intensity) {
            *t += v;
        }
    }
    Ok(ImageProfile::new(
        axis,
        total,
        true,
        plane,
        optics.central_half_width,
    ))
}

/// Electron image restricted to electrons whose SPP reached the bucket:
/// `Σ_{jj'} a_j a_j'^* ρ_jj' ψ_j ψ_j'^*` with `ρ_jj' = Σ_P b_j(P) b_j'(P)^*`
/// from the forward route.
pub fn detected_subset_image(
    state: &JointState,
    points: &[Point],
    optics: &ImagingOptics,
    plane: ImagePlane,
) -> Result<ImageProfile> {
    let b = forward_bucket_amplitudes(state, points)?;
    let n = state.components.len();
    let axis = optics.axis(plane);
    let psi: Vec<Vec<Complex64>> = state
        .components
        .iter()
        .map(|c| optics.term_field(c.electron_recoil[1], plane, &axis))
        .collect();
    let mut rho = Array2::<Complex64>::zeros((n, n));
    for ip in 0..points.len() {
        for j in 0..n {
            let bj = state.components[j].a_k * b[[ip, j]];
            for k in 0..n {
                rho[[j, k]] += bj * (state.components[k].a_k * b[[ip, k]]).conj();
            }
        }
    }
    let intensity: Vec<f64> = (0..axis.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                for k in 0..n {
                    acc += rho[[j, k]] * psi[j][i] * psi[k][i].conj();
                }
            }
            acc.re.max(0.0)
        })
        .collect();
    Ok(ImageProfile::new(
        axis,
        intensity,
        false,
        plane,
        optics.central_half_width,
    ))
}
