//! Orbital angular momentum analysis of transverse electron waves.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ComplexField2D;
use crate::scene::Point;

/// Angular samples per analysis circle.
pub const ANGULAR_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OamSpectrum {
    pub weights: BTreeMap<i32, f64>,
    pub dominant_l: i32,
}

impl OamSpectrum {
    fn from_weights(weights: BTreeMap<i32, f64>) -> Self {
        let dominant_l = weights
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.abs().cmp(&a.0.abs())))
            .map(|(l, _)| *l)
            .unwrap_or(0);
        OamSpectrum {
            weights,
            dominant_l,
        }
    }

    pub fn weight(&self, l: i32) -> f64 {
        self.weights.get(&l).copied().unwrap_or(0.0)
    }

    /// `Σ ℓ·w_ℓ`.
    pub fn mean(&self) -> f64 {
        self.weights.iter().map(|(l, w)| *l as f64 * w).sum()
    }

    /// Incoherent mixture of spectra with the given probabilities.
    pub fn mixture(parts: &[(&OamSpectrum, f64)]) -> Self {
        let total: f64 = parts.iter().map(|p| p.1).sum();
        let mut weights = BTreeMap::new();
        for (s, p) in parts {
            for (l, w) in &s.weights {
                *weights.entry(*l).or_insert(0.0) += w * p / total;
            }
        }
        Self::from_weights(weights)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "l,weight")?;
        for (l, v) in &self.weights {
            writeln!(w, "{l},{v:e}")?;
        }
        Ok(())
    }
}

/// Bilinear interpolation at `(x, y)`; `None` outside the grid.
pub(crate) fn sample(f: &ComplexField2D, x: f64, y: f64) -> Option<Complex64> {
    let fx = (x - f.origin()[0]) / f.dx();
    let fy = (y - f.origin()[1]) / f.dy();
    let (nx, ny) = (f.nx() as f64, f.ny() as f64);
    if fx < 0.0 || fy < 0.0 || fx > nx - 1.0 || fy > ny - 1.0 {
        return None;
    }
    let (i, j) = (
        (fx.floor() as usize).min(f.nx() - 2),
        (fy.floor() as usize).min(f.ny() - 2),
    );
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let v = f.values();
    Some(
        v[[i, j]] * ((1.0 - tx) * (1.0 - ty))
            + v[[i + 1, j]] * (tx * (1.0 - ty))
            + v[[i, j + 1]] * ((1.0 - tx) * ty)
            + v[[i + 1, j + 1]] * (tx * ty),
    )
}

/// Net phase advance (rad) around the circle of `radius` about `center`,
/// counter-clockwise, from `n` bilinear samples.
pub fn phase_circulation(
    field: &ComplexField2D,
    center: Point,
    radius: f64,
    n: usize,
) -> Result<f64> {
    if n < 8 || !(radius > 0.0) {
        return Err(Error::Argument(
            "circulation needs ≥ 8 samples and radius > 0".into(),
        ));
    }
    let pts: Vec<Complex64> = (0..n)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / n as f64;
            sample(
                field,
                center[0] + radius * phi.cos(),
                center[1] + radius * phi.sin(),
            )
            .ok_or_else(|| Error::Argument(format!("circle of radius {radius} nm leaves the grid")))
        })
        .collect::<Result<_>>()?;
    if pts.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::Argument(
            "field vanishes on the circulation loop".into(),
        ));
    }
    Ok((0..n).map(|k| (pts[(k + 1) % n] / pts[k]).arg()).sum())
}

fn centroid(field: &ComplexField2D) -> Option<Point> {
    let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for ((i, j), z) in field.values().indexed_iter() {
        let p = z.norm_sqr();
        m += p;
        sx += p * field.x(i);
        sy += p * field.y(j);
    }
    (m > 0.0).then(|| [sx / m, sy / m])
}

/// Azimuthal decomposition on concentric circles, each weighted by its
/// circumference so the weights are fractions of the total power.
pub fn oam_analyze(field: &ComplexField2D) -> Result<OamSpectrum> {
    let geometric = [
        field.x(0) + 0.5 * (field.nx() - 1) as f64 * field.dx(),
        field.y(0) + 0.5 * (field.ny() - 1) as f64 * field.dy(),
    ];
    let c = centroid(field).ok_or_else(|| Error::Argument("field is identically zero".into()))?;
    let off = ((c[0] - geometric[0]) / field.dx()).hypot((c[1] - geometric[1]) / field.dy());
    let center = if off > 1.0 {
        log::warn!("field centroid is {off:.1} pixels off-centre; recentring the OAM analysis");
        c
    } else {
        geometric
    };
    let step = field.dx().min(field.dy());
    let r_max = [
        center[0] - field.x(0),
        field.x(field.nx() - 1) - center[0],
        center[1] - field.y(0),
        field.y(field.ny() - 1) - center[1],
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    let n_r = (r_max / step).floor() as usize;
    if n_r == 0 {
        return Err(Error::Argument(
            "no analysis circle fits inside the grid".into(),
        ));
    }
    let n = ANGULAR_SAMPLES;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for ir in 1..=n_r {
        let r = ir as f64 * step;
        for (k, b) in buf.iter_mut().enumerate() {
            let phi = 2.0 * PI * k as f64 / n as f64;
            *b = sample(field, center[0] + r * phi.cos(), center[1] + r * phi.sin())
                .unwrap_or_default();
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += r * b.norm_sqr();
        }
    }
    let total: f64 = acc.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Argument(
            "field vanishes on every analysis circle".into(),
        ));
    }
    let weights = acc
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let l = if i <= n / 2 {
                i as i32
            } else {
                i as i32 - n as i32
            };
            (l, p / total)
        })
        .collect();
    Ok(OamSpectrum::from_weights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn ring_mode(n: usize, f: impl Fn(f64) -> Complex64) -> ComplexField2D {
        let mid = (n - 1) as f64 / 2.0;
        let d = 10.0;
        let v = Array2::from_shape_fn((n, n), |(i, j)| {
            let (x, y) = ((i as f64 - mid) * d, (j as f64 - mid) * d);
            let r = x.hypot(y);
            f(y.atan2(x)) * (r / 150.0) * (-(r / 150.0).powi(2)).exp()
        });
        ComplexField2D::new(v, d, d, [-mid * d, -mid * d]).unwrap()
    }

    #[test]
    fn pure_vortex() {
        let s = oam_analyze(&ring_mode(101, |p| Complex64::from_polar(1.0, p))).unwrap();
        assert!(s.weight(1) > 0.99, "{}", s.weight(1));
        assert_eq!(s.dominant_l, 1);
        assert!((s.weights.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn real_mode_is_symmetric() {
        let s = oam_analyze(&ring_mode(101, |p| {
            Complex64::new(p.cos() + 0.3 * (3.0 * p).sin(), 0.0)
        }))
        .unwrap();
        for l in 1..20 {
            assert!((s.weight(l) - s.weight(-l)).abs() < 1e-9);
        }
    }

    /// Direct projection onto e^{±iφ} on each circle, no FFT.
    fn projection_oracle(f: &ComplexField2D, l: i32) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        let n = 720;
        for ir in 1..=45 {
            let r = ir as f64 * 10.0;
            let mut c = Complex64::new(0.0, 0.0);
            let mut p = 0.0;
            for k in 0..n {
                let phi = 2.0 * PI * k as f64 / n as f64;
                let z = sample(f, r * phi.cos(), r * phi.sin()).unwrap();
                c += z * Complex64::from_polar(1.0, -(l as f64) * phi);
                p += z.norm_sqr();
            }
            num += r * (c / n as f64).norm_sqr();
            den += r * p / n as f64;
        }
        num / den
    }

    #[test]
    fn equal_superposition_splits_evenly() {
        let f = ring_mode(101, |p| {
            Complex64::from_polar(1.0, p) + Complex64::from_polar(1.0, -p)
        });
        let s = oam_analyze(&f).unwrap();
        for l in [1, -1] {
            assert!((s.weight(l) - 0.5).abs() < 0.01);
            assert!((s.weight(l) - projection_oracle(&f, l)).abs() < 0.01);
        }
        assert!(s.mean().abs() < 1e-9);
    }

    #[test]
    fn winding_matches_spectrum() {
        for l in [-2, -1, 1, 2, 3] {
            let f = ring_mode(101, |p| Complex64::from_polar(1.0, l as f64 * p));
            let s = oam_analyze(&f).unwrap();
            let w = phase_circulation(&f, [0.0, 0.0], 200.0, 512).unwrap();
            assert_eq!((w / (2.0 * PI)).round() as i32, s.dominant_l);
        }
    }

    #[test]
    fn mixture_of_opposite_vortices_has_zero_mean() {
        let p = oam_analyze(&ring_mode(101, |p| Complex64::from_polar(1.0, p))).unwrap();
        let m = oam_analyze(&ring_mode(101, |p| Complex64::from_polar(1.0, -p))).unwrap();
        let mix = OamSpectrum::mixture(&[(&p, 0.5), (&m, 0.5)]);
        assert!(mix.mean().abs() < 1e-9);
        assert!((mix.weight(1) - 0.5).abs() < 0.01);
        assert!((p.mean() - 1.0).abs() < 0.01 && (m.mean() + 1.0).abs() < 0.01);
    }

    #[test]
    fn off_centre_field_is_recentred() {
        let f = ring_mode(101, |p| Complex64::from_polar(1.0, p));
        let shifted =
            ComplexField2D::new(f.values().clone(), 10.0, 10.0, [-400.0, -500.0]).unwrap();
        let big = {
            let mut v = Array2::zeros((161, 161));
            v.slice_mut(ndarray::s![20..121, 30..131])
                .assign(shifted.values());
            ComplexField2D::new(v, 10.0, 10.0, [-800.0, -800.0]).unwrap()
        };
        let s = oam_analyze(&big).unwrap();
        assert!(s.weight(1) > 0.95, "{}", s.weight(1));
    }
}
