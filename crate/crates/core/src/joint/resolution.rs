//! Near-field resolution sweep.
//!
//! An electron line at distance `D` from a grating `T = 1 + m·cos(k_g·y)`
//! launches every transverse wavenumber, evanescent ones included. The
//! component `exp(i·k_g·y)` reaches the grating attenuated by `P_D(k_g)`, is
//! down-converted to `k_y = 0` by the grating and carried to a bucket a
//! distance `L` behind it. The object-induced change of the bucket overlap,
//! `|c_obj − c_bare|/(m/2)`, is the coincidence-signal modulation; its 1/e
//! point in `k_g` is the cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{fft_wavenumber, pixel_mode, Propagator};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionParams {
    pub lambda_spp: f64,
    /// Electron-line to object distances `D` (nm).
    pub distances: Vec<f64>,
    pub dy: f64,
    pub samples: usize,
    /// Grating modulation depth `m`.
    pub modulation: f64,
    /// Object to bucket distance `L` (nm).
    pub bucket_distance: f64,
    pub bucket_waist: f64,
    /// Reference frequency as a fraction of `2π/λ_SPP`.
    pub k_low_fraction: f64,
}

impl Default for ResolutionParams {
    fn default() -> Self {
        ResolutionParams {
            lambda_spp: 600.0,
            distances: vec![400.0, 200.0, 100.0, 50.0, 25.0],
            dy: 2.0,
            samples: 8192,
            modulation: 0.5,
            bucket_distance: 3_000.0,
            bucket_waist: 2_000.0,
            k_low_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPoint {
    pub distance: f64,
    /// Object frequency `k_y*` (rad/nm) where the modulation falls to 1/e.
    pub cutoff: f64,
    /// `sqrt(K² + 1/D²)`, the pure evanescent-decay prediction.
    pub evanescent_estimate: f64,
    /// `D ≥ λ_SPP`: far-field resolution governs instead.
    pub out_of_regime: bool,
}

struct Probe {
    ys: Vec<f64>,
    bucket: Vec<Complex64>,
    to_bucket: crate::propagation::LinePropagator,
    params: ResolutionParams,
}

impl Probe {
    fn new(p: &ResolutionParams) -> Result<Self> {
        let n = p.samples;
        let ys: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * p.dy).collect();
        let bucket = pixel_mode(&ys, 0.0, p.bucket_waist);
        let to_bucket = Propagator::new(p.lambda_spp, p.bucket_distance)
            .periodic()
            .plan(n, p.dy)?;
        Ok(Probe {
            ys,
            bucket,
            to_bucket,
            params: p.clone(),
        })
    }

    fn overlap(&self, line: &[Complex64]) -> Result<Complex64> {
        let at = self.to_bucket.apply(line)?;
        Ok(at
            .iter()
            .zip(&self.bucket)
            .map(|(a, b)| a * b)
            .sum::<Complex64>()
            * self.params.dy)
    }

    /// `|c_obj − c_bare|/(m/2)` for grating frequency `k` at gap `d`.
    fn modulation(&self, k: f64, d: f64) -> Result<f64> {
        let p = &self.params;
        let n = self.ys.len() as f64;
        let amp = 1.0 / (n * p.dy).sqrt();
        let src: Vec<Complex64> = self
            .ys
            .iter()
            .map(|&y| Complex64::from_polar(amp, k * y))
            .collect();
        let at_obj = Propagator::new(p.lambda_spp, d)
            .periodic()
            .plan(src.len(), p.dy)?
            .apply(&src)?;
        let with_obj: Vec<Complex64> = at_obj
            .iter()
            .zip(&self.ys)
            .map(|(e, &y)| e * (1.0 + p.modulation * (k * y).cos()))
            .collect();
        let c_obj = self.overlap(&with_obj)?;
        let c_bare = self.overlap(&at_obj)?;
        Ok((c_obj - c_bare).norm() / (p.modulation / 2.0))
    }
}

/// Cutoff frequency for every distance in `params.distances`.
pub fn resolution_sweep(params: &ResolutionParams) -> Result<Vec<ResolutionPoint>> {
    if params.samples < 16 || !(params.dy > 0.0) || !(params.lambda_spp > 0.0) {
        return Err(Error::Argument("resolution grid is degenerate".into()));
    }
    if !(params.modulation > 0.0 && params.modulation <= 1.0) {
        return Err(Error::Argument(format!(
            "modulation depth {} outside (0, 1]",
            params.modulation
        )));
    }
    let probe = Probe::new(params)?;
    let kk = 2.0 * std::f64::consts::PI / params.lambda_spp;
    let n = params.samples;
    let bin = fft_wavenumber(1, n, params.dy);
    let k_max = 0.9 * std::f64::consts::PI / params.dy;
    let i_low = ((params.k_low_fraction * kk) / bin).round().max(1.0) as usize;
    params
        .distances
        .iter()
        .map(|&d| {
            if !(d > 0.0) {
                return Err(Error::Argument(format!(
                    "distance D = {d} nm must be positive"
                )));
            }
            let out_of_regime = d >= params.lambda_spp;
            if out_of_regime {
                log::warn!(
                    "D = {d} nm ≥ λ_SPP = {} nm: far-field resolution governs",
                    params.lambda_spp
                );
            }
            let k_low = i_low as f64 * bin;
            let reference = probe.modulation(k_low, d)?;
            if reference <= 0.0 {
                return Err(Error::Sampling(
                    "no low-frequency modulation reaches the bucket".into(),
                ));
            }
            let target = (-1.0f64).exp();
            let mut prev = (k_low, 1.0f64);
            let mut i = i_low + 1;
            loop {
                let k = i as f64 * bin;
                if k > k_max {
                    return Err(Error::Sampling(format!(
                        "no 1/e cutoff below 0.9·Nyquist for D = {d} nm; refine dy"
                    )));
                }
                let r = probe.modulation(k, d)? / reference;
                if r <= target {
                    let cutoff = if r > 0.0 && prev.1 > 0.0 {
                        let (l0, l1) = (prev.1.ln(), r.ln());
                        prev.0 + (k - prev.0) * (target.ln() - l0) / (l1 - l0)
                    } else {
                        k
                    };
                    return Ok(ResolutionPoint {
                        distance: d,
                        cutoff,
                        evanescent_estimate: (kk * kk + 1.0 / (d * d)).sqrt(),
                        out_of_regime,
                    });
                }
                prev = (k, r);
                i += 1;
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ResolutionParams {
        ResolutionParams {
            distances: vec![100.0, 50.0, 25.0],
            ..ResolutionParams::default()
        }
    }

    #[test]
    fn cutoff_follows_evanescent_decay() {
        let pts = resolution_sweep(&small()).unwrap();
        for p in &pts {
            let rel = (p.cutoff - p.evanescent_estimate).abs() / p.evanescent_estimate;
            assert!(
                rel < 0.01,
                "D = {}: {} vs {}",
                p.distance,
                p.cutoff,
                p.evanescent_estimate
            );
            assert!(!p.out_of_regime);
        }
    }

    #[test]
    fn cutoff_decreases_with_distance_and_roughly_doubles() {
        let pts = resolution_sweep(&small()).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].cutoff > w[0].cutoff);
        }
        let ratio = pts[2].cutoff / pts[1].cutoff;
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn far_field_limit_and_regime_flag() {
        let p = ResolutionParams {
            samples: 4096,
            distances: vec![600.0],
            ..ResolutionParams::default()
        };
        let pt = &resolution_sweep(&p).unwrap()[0];
        assert!(pt.out_of_regime);
        let kk = 2.0 * std::f64::consts::PI / 600.0;
        assert!((pt.cutoff - kk).abs() < 0.05 * kk, "{} vs {kk}", pt.cutoff);
    }

    #[test]
    fn evanescent_gap_attenuation() {
        let kk = 2.0 * std::f64::consts::PI / 600.0;
        let d = 40.0;
        let k = 5.0 * kk;
        let probe = Probe::new(&small()).unwrap();
        let bin = fft_wavenumber(1, 8192, 2.0);
        let k = (k / bin).round() * bin;
        let got = probe.modulation(k, d).unwrap()
            / probe
                .modulation((0.25 * kk / bin).round() * bin, d)
                .unwrap();
        let want = (-d * (k * k - kk * kk).sqrt()).exp();
        assert!(
            (got - want).abs() < 1e-6 * want.max(1e-3),
            "{got} vs {want}"
        );
    }

    #[test]
    fn rejects_bad_distance() {
        let p = ResolutionParams {
            distances: vec![0.0],
            samples: 256,
            ..ResolutionParams::default()
        };
        assert!(resolution_sweep(&p).is_err());
    }
}
