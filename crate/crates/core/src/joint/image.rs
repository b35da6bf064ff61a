//! Electron-side image formation.
//!
//! Each surviving term is a collimated electron wave tilted by its recoil
//! `q = −k_y`, uniform over the field of view. A finite defocus adds the
//! quadratic phase `−Δf·q²/(2K_ref)`. The far-field plane plots each term as
//! a Gaussian spot of the beam's coherence width on a recoil-wavevector axis.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{JointState, PostselectedElectron};
use crate::error::Result;
use crate::scene::{build_transfer, SlabScene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagePlane {
    /// Conjugate plane at the given defocus (nm); axis in nm.
    Defocus(f64),
    /// Recoil-wavevector axis (rad/nm).
    FarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisUnit {
    Nanometre,
    InverseNanometre,
}

impl AxisUnit {
    fn label(self) -> &'static str {
        match self {
            AxisUnit::Nanometre => "nm",
            AxisUnit::InverseNanometre => "rad/nm",
        }
    }
}

/// Camera-side settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagingOptics {
    /// Full width of the image axis, nm.
    pub field_of_view: f64,
    /// Sample spacing, nm.
    pub spacing: f64,
    /// Coherent width of the electron beam, nm; sets the far-field spot size.
    pub coherence_width: f64,
    /// Wavenumber used in the defocus phase; the SPP wavenumber by default.
    pub reference_wavenumber: f64,
    /// Visibility is measured over `|axis| ≤ central_half_width` (nm).
    pub central_half_width: f64,
    pub far_field_samples: usize,
    /// Far-field axis spans `±far_field_extent` (rad/nm).
    pub far_field_extent: f64,
}

impl Default for ImagingOptics {
    fn default() -> Self {
        ImagingOptics::for_scene(&SlabScene::default())
    }
}

impl ImagingOptics {
    pub fn for_scene(scene: &SlabScene) -> Self {
        let k = scene.wavenumber();
        ImagingOptics {
            field_of_view: 40_000.0,
            spacing: scene.grid().dy,
            coherence_width: 20_000.0,
            reference_wavenumber: k,
            central_half_width: 1_000.0,
            far_field_samples: 4096,
            far_field_extent: 1.25 * k,
        }
    }

    /// Symmetric axis for `plane`: `a_i = (i − (n−1)/2)·h`.
    pub fn axis(&self, plane: ImagePlane) -> Vec<f64> {
        let (n, h) = match plane {
            ImagePlane::Defocus(_) => {
                let n = (self.field_of_view / self.spacing).round() as usize + 1;
                (n.max(2), self.spacing)
            }
            ImagePlane::FarField => {
                let n = self.far_field_samples.max(2);
                (n, 2.0 * self.far_field_extent / (n - 1) as f64)
            }
        };
        (0..n)
            .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * h)
            .collect()
    }

    fn spot(&self, q: f64) -> f64 {
        (-(q * self.coherence_width / 2.0).powi(2)).exp()
    }

    /// Field of one tilted electron term (unit weight) on `axis`.
    pub(crate) fn term_field(
        &self,
        recoil_y: f64,
        plane: ImagePlane,
        axis: &[f64],
    ) -> Vec<Complex64> {
        match plane {
            ImagePlane::Defocus(df) => {
                let defocus = -df * recoil_y * recoil_y / (2.0 * self.reference_wavenumber);
                axis.iter()
                    .map(|&y| Complex64::from_polar(1.0, recoil_y * y + defocus))
                    .collect()
            }
            ImagePlane::FarField => axis
                .iter()
                .map(|&q| Complex64::new(self.spot(q - recoil_y), 0.0))
                .collect(),
        }
    }
}

/// Sampled detector intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageProfile {
    pub axis: Vec<f64>,
    pub intensity: Vec<f64>,
    pub gated: bool,
    pub visibility: f64,
    pub unit: AxisUnit,
    pub plane: ImagePlane,
    pub central_half_width: f64,
}

impl ImageProfile {
    pub fn new(
        axis: Vec<f64>,
        intensity: Vec<f64>,
        gated: bool,
        plane: ImagePlane,
        central_half_width: f64,
    ) -> Self {
        let unit = match plane {
            ImagePlane::Defocus(_) => AxisUnit::Nanometre,
            ImagePlane::FarField => AxisUnit::InverseNanometre,
        };
        let mut p = ImageProfile {
            axis,
            intensity,
            gated,
            visibility: 0.0,
            unit,
            plane,
            central_half_width,
        };
        p.visibility = p.measure_visibility();
        p
    }

    /// `(I_max − I_min)/(I_max + I_min)` over the central region
    /// (the whole axis in the far field).
    pub fn measure_visibility(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, i) in self.axis.iter().zip(&self.intensity) {
            if self.unit == AxisUnit::Nanometre && a.abs() > self.central_half_width {
                continue;
            }
            lo = lo.min(*i);
            hi = hi.max(*i);
        }
        if !(hi + lo > 0.0) {
            return 0.0;
        }
        ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
    }

    pub fn total(&self) -> f64 {
        self.intensity.iter().sum()
    }

    /// Intensity scaled to unit sum (zero profiles stay zero).
    pub fn normalized(&self) -> Vec<f64> {
        let t = self.total();
        if t > 0.0 {
            self.intensity.iter().map(|v| v / t).collect()
        } else {
            self.intensity.clone()
        }
    }

    pub fn spacing(&self) -> f64 {
        (self.axis[self.axis.len() - 1] - self.axis[0]) / (self.axis.len() - 1) as f64
    }

    /// Dominant fringe period from the periodogram of the mean-subtracted
    /// intensity over the whole axis, restricted to periods in
    /// `[min_period, max_period]`.
    pub fn fringe_period(&self, min_period: f64, max_period: f64) -> Option<f64> {
        let n = self.axis.len();
        if n < 4 || !(max_period > min_period) {
            return None;
        }
        let mean = self.total() / n as f64;
        let centred: Vec<f64> = self.intensity.iter().map(|v| v - mean).collect();
        let power = |f: f64| -> f64 {
            let w = 2.0 * PI * f;
            let (mut re, mut im) = (0.0, 0.0);
            for (a, v) in self.axis.iter().zip(&centred) {
                let (s, c) = (w * a).sin_cos();
                re += v * c;
                im -= v * s;
            }
            re * re + im * im
        };
        let span = self.axis[n - 1] - self.axis[0];
        let df = 1.0 / (8.0 * span);
        let (f_lo, f_hi) = (
            1.0 / max_period,
            (1.0 / min_period).min(0.5 / self.spacing()),
        );
        let mut best = (f_lo, f64::NEG_INFINITY);
        let mut f = f_lo;
        while f <= f_hi {
            let p = power(f);
            if p > best.1 {
                best = (f, p);
            }
            f += df;
        }
        if !(best.1 > 0.0) {
            return None;
        }
        // golden-section refinement around the coarse peak
        let (mut a, mut b) = ((best.0 - df).max(f_lo), (best.0 + df).min(f_hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if power(c) > power(d) {
                b = d;
            } else {
                a = c;
            }
        }
        Some(2.0 / (a + b))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        s.push_str("# ghostbeam image profile\n");
        let _ = writeln!(s, "# gated = {}", self.gated);
        let _ = writeln!(s, "# visibility = {:.6}", self.visibility);
        match self.plane {
            ImagePlane::Defocus(df) => {
                let _ = writeln!(s, "# plane = defocus {df}");
                let _ = writeln!(s, "# central_half_width = {}", self.central_half_width);
            }
            ImagePlane::FarField => s.push_str("# plane = far_field\n"),
        }
        let _ = writeln!(s, "# axis_unit = {}", self.unit.label());
        s.push_str("axis,intensity\n");
        for (a, i) in self.axis.iter().zip(&self.intensity) {
            let _ = writeln!(s, "{a:.6},{i:.9e}");
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }
}

/// `|Σ_j w_j ψ_j|²`: the coherent image of the post-selected electron.
pub fn electron_image(
    post: &PostselectedElectron,
    optics: &ImagingOptics,
    plane: ImagePlane,
) -> ImageProfile {
    let axis = optics.axis(plane);
    let mut psi = vec![Complex64::new(0.0, 0.0); axis.len()];
    for t in &post.terms {
        let f = optics.term_field(t.recoil[1], plane, &axis);
        for (p, v) in psi.iter_mut().zip(&f) {
            *p += t.weight * v;
        }
    }
    let intensity = psi.iter().map(|z| z.norm_sqr()).collect();
    let mut img = ImageProfile::new(axis, intensity, true, plane, optics.central_half_width);
    if let ImagePlane::Defocus(df) = plane {
        let at = |y: f64| -> f64 {
            post.terms
                .iter()
                .map(|t| {
                    let q = t.recoil[1];
                    t.weight
                        * Complex64::from_polar(
                            1.0,
                            q * y - df * q * q / (2.0 * optics.reference_wavenumber),
                        )
                })
                .sum::<Complex64>()
                .norm_sqr()
        };
        img.visibility = refined_visibility(&img, at);
    }
    img
}

/// Visibility with every sampled local extremum in the central region
/// polished by golden-section search on the continuous intensity.
fn refined_visibility(img: &ImageProfile, at: impl Fn(f64) -> f64) -> f64 {
    let n = img.axis.len();
    let h = img.spacing();
    let inside = |i: usize| img.axis[i].abs() <= img.central_half_width;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        if !inside(i) {
            continue;
        }
        let v = img.intensity[i];
        lo = lo.min(v);
        hi = hi.max(v);
        let left = if i > 0 { img.intensity[i - 1] } else { v };
        let right = if i + 1 < n { img.intensity[i + 1] } else { v };
        let a = (img.axis[i] - h).max(-img.central_half_width);
        let b = (img.axis[i] + h).min(img.central_half_width);
        if v <= left && v <= right {
            lo = lo.min(golden(&at, a, b, false));
        }
        if v >= left && v >= right {
            hi = hi.max(golden(&at, a, b, true));
        }
    }
    if !(hi + lo > 0.0) {
        return 0.0;
    }
    ((hi - lo) / (hi + lo)).clamp(0.0, 1.0)
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let sign = if maximize { -1.0 } else { 1.0 };
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if sign * f(c) < sign * f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

/// `Σ_j |a_j|²|ψ_j|²`: the image with the SPP traced out.
pub fn ungated_image(
    state: &JointState,
    optics: &ImagingOptics,
    plane: ImagePlane,
) -> ImageProfile {
    let axis = optics.axis(plane);
    let mut intensity = vec![0.0; axis.len()];
    for c in state.components() {
        let p = c.a_k.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let f = optics.term_field(c.electron_recoil[1], plane, &axis);
        for (i, v) in intensity.iter_mut().zip(&f) {
            *i += p * v.norm_sqr();
        }
    }
    ImageProfile::new(axis, intensity, false, plane, optics.central_half_width)
}

/// `Σ_j |a_j|²·τ_j·|ψ_j|²` with `τ_j` the power of component `j` that passes
/// the object line: the ungated image of electrons whose SPP was transmitted.
pub fn transmitted_image(
    state: &JointState,
    optics: &ImagingOptics,
    plane: ImagePlane,
) -> Result<ImageProfile> {
    let t = build_transfer(&state.scene().object, state.y_axis())?;
    let axis = optics.axis(plane);
    let mut intensity = vec![0.0; axis.len()];
    for (j, c) in state.components().iter().enumerate() {
        let tau: f64 = state
            .object_line(j)
            .iter()
            .zip(&t)
            .map(|(e, tt)| (e * tt).norm_sqr())
            .sum::<f64>()
            * state.dy();
        let p = c.a_k.norm_sqr() * tau;
        if p == 0.0 {
            continue;
        }
        let f = optics.term_field(c.electron_recoil[1], plane, &axis);
        for (i, v) in intensity.iter_mut().zip(&f) {
            *i += p * v.norm_sqr();
        }
    }
    Ok(ImageProfile::new(
        axis,
        intensity,
        false,
        plane,
        optics.central_half_width,
    ))
}
