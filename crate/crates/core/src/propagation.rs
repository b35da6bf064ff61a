//! Angular-spectrum propagation along x, object transfer, and the reverse
//! field emanating from a bucket point.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fields::ComplexField2D;
pub use crate::scene::Boundary;
use crate::scene::{build_transfer, Point, SlabScene};

/// Fraction of the line tapered at each end in apodized mode.
pub const TAPER_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub lambda_spp: f64,
    pub distance: f64,
    pub include_evanescent: bool,
    pub boundary: Boundary,
    /// Zero-padding factor in apodized mode.
    pub pad_factor: usize,
    /// Escalate aliasing warnings to errors.
    pub strict: bool,
}

impl Propagator {
    pub fn new(lambda_spp: f64, distance: f64) -> Self {
        Propagator {
            lambda_spp,
            distance,
            include_evanescent: true,
            boundary: Boundary::Apodized,
            pad_factor: 16,
            strict: false,
        }
    }

    pub fn for_scene(scene: &SlabScene, distance: f64) -> Self {
        Propagator {
            boundary: scene.boundary,
            pad_factor: scene.pad_factor.max(1),
            ..Propagator::new(scene.lambda_spp, distance)
        }
    }

    pub fn periodic(mut self) -> Self {
        self.boundary = Boundary::Periodic;
        self
    }

    pub fn with_distance(&self, distance: f64) -> Self {
        Propagator {
            distance,
            ..self.clone()
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda_spp
    }

    /// `P_D(k_y)`: `exp(i·k_x·D)` in band, `exp(−D·sqrt(k_y² − K²))` beyond.
    pub fn transfer(&self, ky: f64) -> Complex64 {
        let kk = self.wavenumber();
        let d = self.distance;
        if ky.abs() <= kk {
            Complex64::from_polar(1.0, (kk * kk - ky * ky).sqrt() * d)
        } else if self.include_evanescent {
            Complex64::new((-d * (ky * ky - kk * kk).sqrt()).exp(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Precomputes FFTs and the transfer for lines of `n` samples at spacing `dy`.
    pub fn plan(&self, n: usize, dy: f64) -> Result<LinePropagator> {
        if !(self.distance >= 0.0) {
            return Err(Error::Argument(format!(
                "propagation distance {} < 0; use time reversal instead",
                self.distance
            )));
        }
        if !(dy > 0.0) || dy > self.lambda_spp / 4.0 {
            return Err(Error::Sampling(format!(
                "dy = {dy} nm exceeds λ_SPP/4 = {} nm",
                self.lambda_spp / 4.0
            )));
        }
        let m = match self.boundary {
            Boundary::Periodic => n,
            Boundary::Apodized => n * self.pad_factor.max(1),
        };
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let h: Vec<Complex64> = (0..m)
            .map(|i| self.transfer(fft_wavenumber(i, m, dy)) / m as f64)
            .collect();
        let taper = match self.boundary {
            Boundary::Periodic => None,
            Boundary::Apodized => Some(taper(n)),
        };
        Ok(LinePropagator {
            identity: self.distance == 0.0,
            n,
            m,
            dy,
            forward,
            inverse,
            h,
            taper,
            strict: self.strict,
        })
    }
}

/// Angular wavenumber of FFT bin `i` of `m` at spacing `dy`.
pub fn fft_wavenumber(i: usize, m: usize, dy: f64) -> f64 {
    let j = if i <= m / 2 {
        i as f64
    } else {
        i as f64 - m as f64
    };
    2.0 * PI * j / (m as f64 * dy)
}

fn taper(n: usize) -> Vec<f64> {
    let w = ((n as f64) * TAPER_FRACTION).round() as usize;
    (0..n)
        .map(|i| {
            let e = i.min(n - 1 - i);
            if e >= w || w == 0 {
                1.0
            } else {
                0.5 - 0.5 * (PI * (e as f64 + 0.5) / w as f64).cos()
            }
        })
        .collect()
}

/// A planned line propagation; cheap to apply many times.
pub struct LinePropagator {
    identity: bool,
    n: usize,
    m: usize,
    dy: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    h: Vec<Complex64>,
    taper: Option<Vec<f64>>,
    strict: bool,
}

impl LinePropagator {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn apply(&self, line: &[Complex64]) -> Result<Vec<Complex64>> {
        if line.len() != self.n {
            return Err(Error::Argument(format!(
                "line has {} samples, propagator planned for {}",
                line.len(),
                self.n
            )));
        }
        if self.identity {
            return Ok(line.to_vec());
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.m];
        match &self.taper {
            Some(t) => {
                for (i, (z, w)) in line.iter().zip(t).enumerate() {
                    buf[i] = z * w;
                }
            }
            None => buf[..self.n].copy_from_slice(line),
        }
        self.forward.process(&mut buf);
        self.check_aliasing(&buf)?;
        for (z, h) in buf.iter_mut().zip(&self.h) {
            *z *= h;
        }
        self.inverse.process(&mut buf);
        buf.truncate(self.n);
        Ok(buf)
    }

    /// Power in the top 10% of the sampled band above 1% of the total.
    fn check_aliasing(&self, spectrum: &[Complex64]) -> Result<()> {
        let k_nyq = PI / self.dy;
        let mut total = 0.0;
        let mut top = 0.0;
        for (i, z) in spectrum.iter().enumerate() {
            let p = z.norm_sqr();
            total += p;
            if fft_wavenumber(i, self.m, self.dy).abs() > 0.9 * k_nyq {
                top += p;
            }
        }
        if total > 0.0 && top > 0.01 * total {
            let msg = format!(
                "{:.1}% of the line power lies in the top 10% of the sampled band",
                100.0 * top / total
            );
            if self.strict {
                return Err(Error::Sampling(msg));
            }
            log::warn!("possible aliasing: {msg}");
        }
        Ok(())
    }
}

/// Propagates a single y-line by `prop.distance`.
pub fn propagate_line(line: &[Complex64], dy: f64, prop: &Propagator) -> Result<Vec<Complex64>> {
    prop.plan(line.len(), dy)?.apply(line)
}

/// Advances every y-line of `field` by `prop.distance` along x.
pub fn propagate(field: &ComplexField2D, prop: &Propagator) -> Result<ComplexField2D> {
    let plan = prop.plan(field.ny(), field.dy())?;
    let rows: Vec<Vec<Complex64>> = (0..field.nx())
        .into_par_iter()
        .map(|ix| plan.apply(&field.line(ix).to_vec()))
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_vec(
        (field.nx(), field.ny()),
        rows.into_iter().flatten().collect(),
    )
    .expect("shape preserved");
    let o = field.origin();
    ComplexField2D::new(values, field.dx(), field.dy(), [o[0] + prop.distance, o[1]])
}

/// Multiplies every y-line by `t`.
pub fn apply_transfer(field: &ComplexField2D, t: &[Complex64]) -> Result<ComplexField2D> {
    if t.len() != field.ny() {
        return Err(Error::Argument(format!(
            "transfer has {} samples, field lines have {}",
            t.len(),
            field.ny()
        )));
    }
    let mut out = field.clone();
    for mut row in out.values_mut().rows_mut() {
        for (z, tt) in row.iter_mut().zip(t) {
            *z *= tt;
        }
    }
    Ok(out)
}

pub fn apply_transfer_line(line: &[Complex64], t: &[Complex64]) -> Result<Vec<Complex64>> {
    if t.len() != line.len() {
        return Err(Error::Argument("transfer/line length mismatch".into()));
    }
    Ok(line.iter().zip(t).map(|(a, b)| a * b).collect())
}

/// Unit-norm Gaussian detection mode of waist `w` centred at `y0`.
pub fn pixel_mode(ys: &[f64], y0: f64, w: f64) -> Vec<Complex64> {
    let dy = (ys[ys.len() - 1] - ys[0]) / (ys.len() - 1) as f64;
    let raw: Vec<f64> = ys
        .iter()
        .map(|&y| (-((y - y0) / w).powi(2)).exp())
        .collect();
    let norm = (raw.iter().map(|v| v * v).sum::<f64>() * dy).sqrt();
    raw.iter().map(|v| Complex64::new(v / norm, 0.0)).collect()
}

fn check_bucket_point(scene: &SlabScene, p: Point) -> Result<()> {
    if !scene.in_bucket(p[1]) {
        return Err(Error::Geometry(format!(
            "bucket point y = {} nm outside the bucket extent {} ± {} nm",
            p[1],
            scene.bucket_center[1],
            scene.bucket_extent_dy / 2.0
        )));
    }
    if !(p[0] > scene.object_x && p[0] <= scene.width_x) {
        return Err(Error::Geometry(format!(
            "bucket point x = {} nm must lie between the object line and the slab edge",
            p[0]
        )));
    }
    Ok(())
}

/// Reverse field at the object line, transfer applied: the bucket detection
/// mode at `p` propagated back to `x = object_x`, then multiplied by T.
pub fn reverse_line(scene: &SlabScene, p: Point, strict: bool) -> Result<Vec<Complex64>> {
    check_bucket_point(scene, p)?;
    let g = scene.grid();
    let ys = g.y_axis();
    let m = pixel_mode(&ys, p[1], scene.detector_waist());
    let mut prop = Propagator::for_scene(scene, p[0] - scene.object_x);
    prop.strict = strict;
    let back = prop.plan(g.ny, g.dy)?.apply(&m)?;
    let t = build_transfer(&scene.object, &ys)?;
    apply_transfer_line(&back, &t)
}

/// `E^REV` over the slab for a detection at `p`.
///
/// Behind the object line the field is the detection mode propagated away
/// from `p`; in front of it, the transmitted part continues towards the
/// source. No conjugation is applied, so the plain product with a forward
/// field is the detection amplitude.
pub fn time_reversed_field(p: Point, scene: &SlabScene) -> Result<ComplexField2D> {
    check_bucket_point(scene, p)?;
    let g = scene.grid();
    let ys = g.y_axis();
    let m = pixel_mode(&ys, p[1], scene.detector_waist());
    let at_object = reverse_line(scene, p, false)?;
    let base = Propagator::for_scene(scene, 0.0);
    let rows: Vec<Vec<Complex64>> = (0..g.nx)
        .into_par_iter()
        .map(|ix| {
            let x = g.x(ix);
            if x > scene.object_x {
                base.with_distance((p[0] - x).abs())
                    .plan(g.ny, g.dy)?
                    .apply(&m)
            } else {
                base.with_distance(scene.object_x - x)
                    .plan(g.ny, g.dy)?
                    .apply(&at_object)
            }
        })
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_vec((g.nx, g.ny), rows.into_iter().flatten().collect())
        .expect("grid shape");
    ComplexField2D::new(values, g.dx, g.dy, g.origin())
}
