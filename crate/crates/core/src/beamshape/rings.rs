//! Concentric-ring vortex scene.
//!
//! A circularly polarized photon detected at the outcoupler corresponds to
//! an inward cylindrical SPP with azimuthal phase `e^{iℓφ}`. Rings at radii
//! `a_n = n·λ_SPP` add in phase, and inside the innermost ring the reverse
//! solution is the standing wave `C·J_ℓ(K·r)·e^{iℓφ}` with
//! `C = Σ_n (iπ·a_n/2)·H⁽¹⁾_ℓ(K·a_n)`. Its normal field decays away from the
//! surface as `e^{−|z|/δ}`.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use super::{pinem_beta, BetaMap, EzVolume, ZSampling};
use crate::error::{Error, Result};
use crate::fields::{ComplexField2D, SourceParams};
use crate::scene::{ObjectSpec, SlabScene};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingParams {
    /// Selected OAM channel.
    pub l: i32,
    /// Half width of the central map (nm); defaults to 0.9 of the inner ring radius.
    pub half_width: Option<f64>,
    /// Samples per side; forced odd so one sample sits on the axis.
    pub samples: usize,
    /// Evanescent decay length of `E_z` above the surface (nm).
    pub decay_length: f64,
    pub z_half_extent: f64,
    pub z_samples: usize,
    /// Peak `|E_z|` at the surface (V/nm).
    pub field_amplitude: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            l: 1,
            half_width: None,
            samples: 129,
            decay_length: 100.0,
            z_half_extent: 2_000.0,
            z_samples: 4001,
            field_amplitude: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingVortex {
    pub l: i32,
    /// In-plane reverse SPP solution over the central region.
    pub reverse: ComplexField2D,
    pub beta: BetaMap,
    /// Post-selected electron wave `T_e(β(R))`.
    pub electron: ComplexField2D,
    pub ring_factor: Complex64,
}

fn bessel_j(l: i32, x: f64) -> f64 {
    let v = puruspe::Jn(l.unsigned_abs(), x);
    if l < 0 && l % 2 != 0 {
        -v
    } else {
        v
    }
}

fn bessel_y(l: i32, x: f64) -> f64 {
    let v = puruspe::Yn(l.unsigned_abs(), x);
    if l < 0 && l % 2 != 0 {
        -v
    } else {
        v
    }
}

pub fn ring_vortex_scene(
    scene: &SlabScene,
    source: &SourceParams,
    params: &RingParams,
) -> Result<RingVortex> {
    let ObjectSpec::RingResonator {
        n_rings,
        spacing,
        center,
    } = scene.object
    else {
        return Err(Error::Geometry(
            "scene object is not a ring resonator".into(),
        ));
    };
    if n_rings == 0 {
        return Err(Error::Geometry(
            "ring resonator needs at least one ring".into(),
        ));
    }
    if ((spacing - scene.lambda_spp) / scene.lambda_spp).abs() > 1e-9 {
        return Err(Error::Geometry(format!(
            "ring spacing {spacing} nm ≠ λ_SPP = {} nm: resonance condition violated",
            scene.lambda_spp
        )));
    }
    if params.samples < 3 || params.z_samples < 3 || !(params.decay_length > 0.0) {
        return Err(Error::Argument(
            "ring map needs ≥ 3 samples and a positive decay length".into(),
        ));
    }
    let k = scene.wavenumber();
    let l = params.l;
    let ring_factor: Complex64 = (1..=n_rings)
        .map(|n| {
            let a = n as f64 * spacing;
            let h = Complex64::new(bessel_j(l, k * a), bessel_y(l, k * a));
            Complex64::new(0.0, std::f64::consts::PI * a / 2.0) * h
        })
        .sum();
    let n = params.samples | 1;
    let hw = params.half_width.unwrap_or(0.9 * spacing);
    let d = 2.0 * hw / (n - 1) as f64;
    let origin = [center[0] - hw, center[1] - hw];
    let mid = (n - 1) / 2;
    let raw = Array2::from_shape_fn((n, n), |(i, j)| {
        let x = (i as f64 - mid as f64) * d;
        let y = (j as f64 - mid as f64) * d;
        let r = x.hypot(y);
        let phi = y.atan2(x);
        ring_factor * bessel_j(l, k * r) * Complex64::from_polar(1.0, l as f64 * phi)
    });
    let peak = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = if peak > 0.0 {
        params.field_amplitude / peak
    } else {
        0.0
    };
    let reverse = ComplexField2D::new(raw.mapv(|z| z * scale), d, d, origin)?;

    // The normal field is separable, so the z integral is done once on a
    // single-pixel volume and β follows by linearity.
    let nz = params.z_samples | 1;
    let dz = 2.0 * params.z_half_extent / (nz - 1) as f64;
    let profile = Array3::from_shape_fn((2, 2, nz), |(_, _, kz)| {
        let z = -params.z_half_extent + kz as f64 * dz;
        Complex64::new((-z.abs() / params.decay_length).exp(), 0.0)
    });
    let unit = pinem_beta(
        &EzVolume {
            values: profile,
            dx: 1.0,
            dy: 1.0,
            origin: [0.0, 0.0],
            z: ZSampling {
                z0: -params.z_half_extent,
                dz,
                vanishes_outside: false,
            },
        },
        source.omega,
        source.velocity_nm_s(),
    )?;
    let bz = unit.values()[[0, 0]];
    let beta_field = ComplexField2D::new(reverse.values().mapv(|e| e * bz), d, d, origin)?;
    let beta = BetaMap {
        field: beta_field,
        omega0: source.omega,
        velocity_nm_s: source.velocity_nm_s(),
    };
    let electron = beta.transmission_field();
    Ok(RingVortex {
        l,
        reverse,
        beta,
        electron,
        ring_factor,
    })
}
