//! Conditional electron beam shaping by inverse PINEM.
//!
//! Units: `E_z` in V/nm, lengths in nm, `ω₀` in rad/s, `v` in nm/s. With
//! these, `β = ∫E_z·exp(iω₀z/v) dz / (ħω₀ in eV)` is dimensionless.

mod oam;
mod rings;

pub use oam::{oam_analyze, phase_circulation, OamSpectrum};
pub use rings::{ring_vortex_scene, RingParams, RingVortex};

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::constants::HBAR_EV_S;
use crate::error::{Error, Result};
use crate::fields::ComplexField2D;
use crate::scene::Point;

/// Relative tail magnitude allowed at the z boundaries.
pub const TAIL_TOLERANCE: f64 = 1e-6;

/// Uniform z sampling `z_k = z0 + k·dz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZSampling {
    pub z0: f64,
    pub dz: f64,
    /// The field is identically zero outside the sampled range (e.g. a
    /// finite slab), so nonzero boundary samples are not a truncation.
    pub vanishes_outside: bool,
}

/// `E_z(R, z)` on a 3D grid; `values[[ix, iy, iz]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EzVolume {
    pub values: Array3<Complex64>,
    pub dx: f64,
    pub dy: f64,
    pub origin: Point,
    pub z: ZSampling,
}

/// Complex coupling `β(R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaMap {
    pub field: ComplexField2D,
    pub omega0: f64,
    pub velocity_nm_s: f64,
}

impl BetaMap {
    pub fn values(&self) -> &Array2<Complex64> {
        self.field.values()
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Post-selected electron transmission `T_e(β(R))`.
    pub fn transmission_field(&self) -> ComplexField2D {
        let mut f = self.field.clone();
        f.values_mut().mapv_inplace(transmission);
        f
    }
}

/// `β(R) = (e/ħω₀)·∫E_z(R, z)·exp(iω₀z/v) dz`, trapezoidal in z.
pub fn pinem_beta(ez: &EzVolume, omega0: f64, velocity_nm_s: f64) -> Result<BetaMap> {
    if !(omega0 > 0.0) || !(velocity_nm_s > 0.0) {
        return Err(Error::Argument("ω₀ and v must be positive".into()));
    }
    let (nx, ny, nz) = ez.values.dim();
    if nz < 2 || !(ez.z.dz > 0.0) {
        return Err(Error::Argument(
            "need at least two z samples with dz > 0".into(),
        ));
    }
    if !ez.z.vanishes_outside {
        let peak = ez.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tail = ez
            .values
            .index_axis(Axis(2), 0)
            .iter()
            .chain(ez.values.index_axis(Axis(2), nz - 1).iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if tail > TAIL_TOLERANCE * peak {
            return Err(Error::Truncation(format!(
                "E_z at the z boundary is {:.3e} of its peak (limit {TAIL_TOLERANCE:.0e}); extend the z range",
                tail / peak
            )));
        }
    }
    let kappa = omega0 / velocity_nm_s;
    let hbar_omega = HBAR_EV_S * omega0;
    let weights: Vec<Complex64> = (0..nz)
        .map(|k| {
            let z = ez.z.z0 + k as f64 * ez.z.dz;
            let w = if k == 0 || k == nz - 1 { 0.5 } else { 1.0 };
            Complex64::from_polar(w * ez.z.dz / hbar_omega, kappa * z)
        })
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..nx)
        .into_par_iter()
        .map(|ix| {
            (0..ny)
                .map(|iy| {
                    ez.values
                        .slice(ndarray::s![ix, iy, ..])
                        .iter()
                        .zip(&weights)
                        .map(|(e, w)| e * w)
                        .sum()
                })
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn((nx, ny), |(i, j)| rows[i][j]);
    Ok(BetaMap {
        field: ComplexField2D::new(values, ez.dx, ez.dy, ez.origin)?,
        omega0,
        velocity_nm_s,
    })
}

/// `T_e = J₁(|β|)·exp(i·arg(−β))`.
pub fn transmission(beta: Complex64) -> Complex64 {
    let r = beta.norm();
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(puruspe::Jn(1, r), (-beta).arg())
}
