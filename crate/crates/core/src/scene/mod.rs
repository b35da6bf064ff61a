//! Slab geometry, object transfer functions and scene validation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D position `[x, y]` in nm.
pub type Point = [f64; 2];

/// Ring spacing must equal the SPP wavelength to this relative tolerance.
pub const RING_SPACING_RTOL: f64 = 1e-9;

/// Boundary handling for line propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Taper the outer 5% at each end, then zero-pad.
    #[default]
    Apodized,
    Periodic,
}

/// Object mounted on the line `x = object_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectSpec {
    /// Two slits of width `b` centred at `y = ±d/2`.
    DoubleSlit { d: f64, b: f64 },
    /// Complex samples `re + i·im` of T at positions `y`; linearly interpolated, edge values held.
    TransmissionProfile {
        y: Vec<f64>,
        re: Vec<f64>,
        #[serde(default)]
        im: Vec<f64>,
    },
    /// Concentric rings around `center`, used for beam shaping.
    RingResonator {
        n_rings: usize,
        spacing: f64,
        center: Point,
    },
}

impl ObjectSpec {
    pub fn profile(y: Vec<f64>, t: &[Complex64]) -> Self {
        ObjectSpec::TransmissionProfile {
            y,
            re: t.iter().map(|z| z.re).collect(),
            im: t.iter().map(|z| z.im).collect(),
        }
    }

    /// Constant transmission over `[-half_width, half_width]` (edges held beyond).
    pub fn uniform(value: f64, half_width: f64) -> Self {
        ObjectSpec::TransmissionProfile {
            y: vec![-half_width, half_width],
            re: vec![value, value],
            im: vec![0.0, 0.0],
        }
    }

    /// A single open slit of width `b` at `center`, with sub-nanometre edges.
    pub fn single_slit(center: f64, b: f64, half_width: f64) -> Self {
        let eps = 1e-3;
        let lo = center - b / 2.0;
        let hi = center + b / 2.0;
        ObjectSpec::TransmissionProfile {
            y: vec![-half_width, lo - eps, lo, hi, hi + eps, half_width],
            re: vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            im: vec![0.0; 6],
        }
    }

    fn profile_samples(y: &[f64], re: &[f64], im: &[f64]) -> Vec<Complex64> {
        re.iter()
            .enumerate()
            .map(|(i, &r)| Complex64::new(r, im.get(i).copied().unwrap_or(0.0)))
            .take(y.len())
            .collect()
    }
}

/// Simulated slab and the ghost-imaging geometry on it.
///
/// Coordinates: `x ∈ [0, width_x]`, `y ∈ [-width_y/2, width_y/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlabScene {
    pub width_x: f64,
    pub width_y: f64,
    pub lambda_spp: f64,
    pub injection_center: Point,
    pub injection_waist_s: f64,
    pub object_x: f64,
    pub bucket_center: Point,
    pub bucket_extent_dy: f64,
    pub object: ObjectSpec,
    /// Grid step; defaults to `lambda_spp / 8`.
    #[serde(default)]
    pub grid_step: Option<f64>,
    /// Explicit `[nx, ny]`, overriding `grid_step`.
    #[serde(default)]
    pub grid_shape: Option<[usize; 2]>,
    /// Waist of the Gaussian detection mode of one bucket point; defaults to `lambda_spp / 2`.
    #[serde(default)]
    pub detector_waist: Option<f64>,
    #[serde(default)]
    pub boundary: Boundary,
    /// Zero-padding factor for apodized propagation.
    #[serde(default = "default_pad")]
    pub pad_factor: usize,
}

fn default_pad() -> usize {
    16
}

impl Default for SlabScene {
    /// 20 μm × 10 μm slab, λ_SPP = 600 nm, double slit 5 μm from the
    /// injection point and 10 μm before the bucket.
    fn default() -> Self {
        SlabScene {
            width_x: 20_000.0,
            width_y: 10_000.0,
            lambda_spp: 600.0,
            injection_center: [2_000.0, 0.0],
            injection_waist_s: 200.0,
            object_x: 7_000.0,
            bucket_center: [17_000.0, 0.0],
            bucket_extent_dy: 2_000.0,
            object: ObjectSpec::DoubleSlit {
                d: 2_000.0,
                b: 400.0,
            },
            grid_step: None,
            grid_shape: None,
            detector_waist: None,
            boundary: Boundary::Apodized,
            pad_factor: default_pad(),
        }
    }
}

impl SlabScene {
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda_spp
    }

    pub fn step(&self) -> f64 {
        self.grid_step.unwrap_or(self.lambda_spp / 8.0)
    }

    pub fn detector_waist(&self) -> f64 {
        self.detector_waist.unwrap_or(self.lambda_spp / 2.0)
    }

    pub fn grid(&self) -> Grid {
        let [nx, ny] = self.grid_shape.unwrap_or_else(|| {
            let h = self.step();
            [
                ((self.width_x / h).round() as usize).max(2),
                ((self.width_y / h).round() as usize).max(2),
            ]
        });
        Grid::new(nx, ny, self.width_x / nx as f64, self.width_y / ny as f64)
    }

    pub fn with_object(mut self, object: ObjectSpec) -> Self {
        self.object = object;
        self
    }

    pub fn with_grid_shape(mut self, nx: usize, ny: usize) -> Self {
        self.grid_shape = Some([nx, ny]);
        self
    }

    /// Whether `y` lies within the bucket extent.
    pub fn in_bucket(&self, y: f64) -> bool {
        (y - self.bucket_center[1]).abs() <= self.bucket_extent_dy / 2.0 * (1.0 + 1e-12)
    }

    /// `n` evenly spaced points spanning the bucket extent.
    pub fn bucket_scan(&self, n: usize) -> Vec<Point> {
        let [bx, by] = self.bucket_center;
        let half = self.bucket_extent_dy / 2.0;
        if n == 1 {
            return vec![[bx, by]];
        }
        (0..n)
            .map(|i| [bx, by - half + 2.0 * half * i as f64 / (n - 1) as f64])
            .collect()
    }

    /// Bucket points on the grid rows inside the bucket extent.
    pub fn bucket_grid_points(&self) -> Vec<Point> {
        let g = self.grid();
        (0..g.ny)
            .map(|j| g.y(j))
            .filter(|&y| self.in_bucket(y))
            .map(|y| [self.bucket_center[0], y])
            .collect()
    }
}

/// Cell-centred uniform grid. `x_i = (i + ½)·dx`, `y_j = (j − (ny−1)/2)·dy`,
/// so the y axis is exactly symmetric about zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Self {
        Grid { nx, ny, dx, dy }
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 - (self.ny as f64 - 1.0) / 2.0) * self.dy
    }

    pub fn y_axis(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn x_axis(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn origin(&self) -> Point {
        [self.x(0), self.y(0)]
    }
}

/// Uniform spacing of a sampled axis, or an argument error.
pub fn uniform_spacing(axis: &[f64]) -> Result<f64> {
    if axis.len() < 2 {
        return Err(Error::Argument("axis needs at least two samples".into()));
    }
    let h = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Argument("axis must be strictly increasing".into()));
    }
    for w in axis.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-6 * h {
            return Err(Error::Argument("axis is not uniformly sampled".into()));
        }
    }
    Ok(h)
}

/// Samples the object's transmission on `y_grid`.
pub fn build_transfer(object: &ObjectSpec, y_grid: &[f64]) -> Result<Vec<Complex64>> {
    let h = uniform_spacing(y_grid)?;
    let lo = y_grid[0] - h / 2.0;
    let hi = y_grid[y_grid.len() - 1] + h / 2.0;
    match object {
        ObjectSpec::DoubleSlit { d, b } => {
            let (d, b) = (*d, *b);
            if !(d > b && b > 0.0) {
                return Err(Error::Geometry(format!(
                    "double slit needs d > b > 0 (d = {d}, b = {b})"
                )));
            }
            let reach = d / 2.0 + b / 2.0;
            if reach > hi || -reach < lo {
                return Err(Error::Geometry(format!(
                    "slits reach |y| = {reach} nm, outside the grid [{lo}, {hi}]"
                )));
            }
            Ok(y_grid
                .iter()
                .map(|&y| {
                    let open = (y - d / 2.0).abs() <= b / 2.0 || (y + d / 2.0).abs() <= b / 2.0;
                    Complex64::new(if open { 1.0 } else { 0.0 }, 0.0)
                })
                .collect())
        }
        ObjectSpec::TransmissionProfile { y, re, im } => {
            let t = ObjectSpec::profile_samples(y, re, im);
            if y.len() < 2 || t.len() != y.len() {
                return Err(Error::Argument(
                    "transmission profile needs matching y/re samples (at least two)".into(),
                ));
            }
            if y.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Argument(
                    "transmission profile y must be strictly increasing".into(),
                ));
            }
            Ok(y_grid.iter().map(|&yy| interpolate(y, &t, yy)).collect())
        }
        ObjectSpec::RingResonator { .. } => Err(Error::Argument(
            "ring resonators have no line transmission; use the beam-shaping pipeline".into(),
        )),
    }
}

fn interpolate(y: &[f64], t: &[Complex64], at: f64) -> Complex64 {
    if at <= y[0] {
        return t[0];
    }
    if at >= y[y.len() - 1] {
        return t[t.len() - 1];
    }
    let k = y.partition_point(|&v| v <= at) - 1;
    let f = (at - y[k]) / (y[k + 1] - y[k]);
    t[k] * (1.0 - f) + t[k + 1] * f
}

/// Lists every violated scene invariant; empty when the scene is well formed.
pub fn validate_scene(scene: &SlabScene) -> Vec<String> {
    let mut v = Vec::new();
    let s = scene;
    let finite = [
        s.width_x,
        s.width_y,
        s.lambda_spp,
        s.injection_waist_s,
        s.object_x,
        s.bucket_extent_dy,
        s.injection_center[0],
        s.injection_center[1],
        s.bucket_center[0],
        s.bucket_center[1],
    ];
    if finite.iter().any(|x| x.is_nan()) {
        v.push("non-finite scene parameter".to_string());
        return v;
    }
    if !(s.lambda_spp > 0.0) {
        v.push("lambda_spp must be positive".into());
    }
    if !(s.width_x > 0.0 && s.width_y > 0.0) {
        v.push("slab extent must be positive".into());
    }
    if !(s.injection_waist_s > 0.0) {
        v.push("injection waist must be positive".into());
    }
    if !(s.injection_center[0] < s.object_x && s.object_x < s.bucket_center[0]) {
        v.push("ordering violated".into());
    }
    let inside = |p: Point| p[0] >= 0.0 && p[0] <= s.width_x && p[1].abs() <= s.width_y / 2.0;
    if !inside(s.injection_center) {
        v.push("injection outside slab".into());
    }
    if !(s.bucket_extent_dy > 0.0) {
        v.push("bucket extent must be positive".into());
    } else if !inside(s.bucket_center)
        || s.bucket_center[1].abs() + s.bucket_extent_dy / 2.0 > s.width_y / 2.0
    {
        v.push("bucket outside slab".into());
    }
    if s.lambda_spp > 0.0 {
        let g = s.grid();
        if g.dx > s.lambda_spp / 4.0 || g.dy > s.lambda_spp / 4.0 {
            v.push("grid coarser than lambda_spp/4".into());
        }
    }
    if s.pad_factor == 0 {
        v.push("pad_factor must be at least 1".into());
    }
    if let Some(w) = s.detector_waist {
        if !(w > 0.0) {
            v.push("detector waist must be positive".into());
        }
    }
    match &s.object {
        ObjectSpec::DoubleSlit { d, b } => {
            if !(*d > *b && *b > 0.0) {
                v.push("double slit requires d > b > 0".into());
            } else if d / 2.0 + b / 2.0 > s.width_y / 2.0 {
                v.push("slits outside slab".into());
            }
        }
        ObjectSpec::TransmissionProfile { y, re, im } => {
            if y.len() < 2 || re.len() != y.len() || (!im.is_empty() && im.len() != y.len()) {
                v.push("transmission profile sample counts mismatch".into());
            } else if y.windows(2).any(|w| w[1] <= w[0]) {
                v.push("transmission profile y not increasing".into());
            } else if ObjectSpec::profile_samples(y, re, im)
                .iter()
                .any(|t| t.norm() > 1.0 + 1e-12)
            {
                v.push("transmission exceeds 1 (object not passive)".into());
            }
        }
        ObjectSpec::RingResonator {
            n_rings,
            spacing,
            center,
        } => {
            if *n_rings == 0 {
                v.push("ring resonator needs at least one ring".into());
            }
            if ((spacing - s.lambda_spp) / s.lambda_spp).abs() > RING_SPACING_RTOL {
                v.push("ring spacing ≠ λ_SPP".into());
            }
            if !inside(*center) {
                v.push("ring center outside slab".into());
            }
        }
    }
    v
}

/// `validate_scene` as a `Result`, mapping the first violation to the fitting error kind.
pub fn ensure_valid(scene: &SlabScene) -> Result<()> {
    let v = validate_scene(scene);
    if v.is_empty() {
        return Ok(());
    }
    let msg = v.join("; ");
    if v.iter().any(|m| m.contains("grid coarser")) {
        Err(Error::Sampling(msg))
    } else {
        Err(Error::Geometry(msg))
    }
}
