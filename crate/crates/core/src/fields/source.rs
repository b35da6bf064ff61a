use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ComplexField2D;
use crate::constants::{ELECTRON_REST_KEV, HBAR_EV_S, SPEED_OF_LIGHT_NM_S};
use crate::error::{Error, Result};
use crate::scene::{Point, SlabScene};

/// Swift-electron and SPP parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Electron kinetic energy, keV.
    pub electron_energy_kev: f64,
    /// Velocity as a fraction of c.
    pub v: f64,
    pub gamma: f64,
    /// SPP angular frequency, rad/s.
    pub omega: f64,
    /// Source waist, nm. `f64::INFINITY` means plane illumination.
    pub s: f64,
    /// Monochromation window, meV.
    pub energy_window_mev: f64,
    /// Overall scale of the source field; observables do not depend on it.
    pub field_scale: f64,
}

impl SourceParams {
    pub fn new(electron_energy_kev: f64, spp_energy_ev: f64, s: f64) -> Result<Self> {
        if !(electron_energy_kev > 0.0 && spp_energy_ev > 0.0) {
            return Err(Error::Argument(
                "electron and SPP energies must be positive".into(),
            ));
        }
        let gamma = 1.0 + electron_energy_kev / ELECTRON_REST_KEV;
        let v = (1.0 - 1.0 / (gamma * gamma)).sqrt();
        Ok(SourceParams {
            electron_energy_kev,
            v,
            gamma,
            omega: spp_energy_ev / HBAR_EV_S,
            s,
            energy_window_mev: 100.0,
            field_scale: 1.0,
        })
    }

    /// 200 keV electrons, ħω = 2 eV.
    pub fn for_scene(scene: &SlabScene) -> Self {
        SourceParams::new(200.0, 2.0, scene.injection_waist_s).expect("valid defaults")
    }

    /// Velocity in nm/s.
    pub fn velocity_nm_s(&self) -> f64 {
        self.v * SPEED_OF_LIGHT_NM_S
    }

    /// Characteristic source size `s_0 = v·γ/ω`, nm.
    pub fn s0(&self) -> f64 {
        self.velocity_nm_s() * self.gamma / self.omega
    }

    /// ħω in eV.
    pub fn energy_loss_ev(&self) -> f64 {
        HBAR_EV_S * self.omega
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = 1.0 / (1.0 - self.v * self.v).sqrt();
        let g_energy = 1.0 + self.electron_energy_kev / ELECTRON_REST_KEV;
        if !((g - self.gamma).abs() <= 1e-9 * self.gamma
            && (g_energy - self.gamma).abs() <= 1e-9 * self.gamma)
        {
            out.push("gamma inconsistent with velocity or energy".to_string());
        }
        if !(self.s >= self.s0()) {
            out.push(format!(
                "source waist s = {} nm below s_0 = {:.1} nm",
                self.s,
                self.s0()
            ));
        }
        if self.energy_window_mev > 1000.0 * self.energy_loss_ev() {
            out.push("energy window exceeds ħω".to_string());
        }
        out
    }
}

/// Longitudinal (`ez`) and radial (`erho`) components of the electron's field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwiftField {
    pub ez: Complex64,
    pub erho: Complex64,
}

impl SwiftField {
    pub fn magnitude(&self) -> f64 {
        (self.ez.norm_sqr() + self.erho.norm_sqr()).sqrt()
    }
}

fn bessel_k(n: u32, x: f64) -> f64 {
    if x > 600.0 {
        let nu2 = 4.0 * (n * n) as f64;
        return (PI / (2.0 * x)).sqrt()
            * (-x).exp()
            * (1.0 + (nu2 - 1.0) / (8.0 * x) + (nu2 - 1.0) * (nu2 - 9.0) / (128.0 * x * x));
    }
    puruspe::Kn(n, x)
}

/// Field of a swift electron at transverse distance `rho`:
/// `scale·[(i/γ)K₀(ωρ/vγ) ẑ − K₁(ωρ/vγ) ρ̂]`.
pub fn swift_electron_field(rho: f64, params: &SourceParams) -> Result<SwiftField> {
    if !(rho > 0.0) {
        return Err(Error::Argument(format!("rho must be positive, got {rho}")));
    }
    let x = rho / params.s0();
    let k0 = bessel_k(0, x);
    let k1 = bessel_k(1, x);
    Ok(SwiftField {
        ez: Complex64::new(0.0, params.field_scale * k0 / params.gamma),
        erho: Complex64::new(-params.field_scale * k1, 0.0),
    })
}

/// One term `(k, a_k)` of the joint electron–SPP state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveComponent {
    /// SPP wavevector, rad/nm.
    pub k: [f64; 2],
    pub a_k: Complex64,
    /// Electron recoil, always `-k`.
    pub electron_recoil: [f64; 2],
    /// ħω, eV.
    pub energy_loss: f64,
    /// Point the Gaussian envelope is centred on.
    pub center: Point,
    /// Transverse envelope displacement (along `ẑ × k̂`).
    pub offset: f64,
    /// Envelope waist, nm (infinite for plane illumination).
    pub waist: f64,
}

impl PlaneWaveComponent {
    pub fn new(theta: f64, wavenumber: f64, a_k: Complex64, center: Point, waist: f64) -> Self {
        let k = [wavenumber * theta.cos(), wavenumber * theta.sin()];
        PlaneWaveComponent {
            k,
            a_k,
            electron_recoil: [-k[0], -k[1]],
            energy_loss: 0.0,
            center,
            offset: 0.0,
            waist,
        }
    }

    pub fn angle(&self) -> f64 {
        self.k[1].atan2(self.k[0])
    }

    pub fn wavenumber(&self) -> f64 {
        self.k[0].hypot(self.k[1])
    }

    /// Unnormalized Gaussian-envelope plane wave at `(x, y)`.
    fn ansatz(&self, x: f64, y: f64) -> Complex64 {
        let kk = self.wavenumber();
        let (ux, uy) = (self.k[0] / kk, self.k[1] / kk);
        let rx = x - self.center[0];
        let ry = y - self.center[1];
        let envelope = if self.waist.is_finite() {
            let perp = -rx * uy + ry * ux - self.offset;
            (-(perp * perp) / (self.waist * self.waist)).exp()
        } else {
            1.0
        };
        Complex64::from_polar(envelope, self.k[0] * rx + self.k[1] * ry)
    }
}

/// Decomposes the generated SPP into `n_components` plane waves with
/// directions uniform in angle over the forward half circle,
/// `θ_j = (j − (n−1)/2)·π/n`, and Gaussian angular-spectrum weights
/// `a_j ∝ exp(−K²s²sin²θ_j/4)`, normalized so `∑|a|² = 1`.
pub fn decompose_source(
    scene: &SlabScene,
    params: &SourceParams,
    n_components: usize,
) -> Result<Vec<PlaneWaveComponent>> {
    if n_components < 3 || n_components % 2 == 0 {
        return Err(Error::Argument(format!(
            "n_components must be odd and at least 3, got {n_components}"
        )));
    }
    let s = params.s;
    if !(s >= params.s0()) {
        return Err(Error::Precondition(format!(
            "source waist {s} nm is below s_0 = {:.1} nm",
            params.s0()
        )));
    }
    let kk = scene.wavenumber();
    let half = (n_components - 1) / 2;
    let thetas: Vec<f64> = (0..n_components)
        .map(|j| (j as f64 - half as f64) * PI / n_components as f64)
        .collect();
    let raw: Vec<f64> = thetas
        .iter()
        .enumerate()
        .map(|(j, th)| {
            if s.is_infinite() {
                if j == half {
                    1.0
                } else {
                    0.0
                }
            } else {
                let q = kk * s * th.sin();
                (-q * q / 4.0).exp()
            }
        })
        .collect();
    let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
    let loss = params.energy_loss_ev();
    Ok(thetas
        .iter()
        .zip(&raw)
        .map(|(&th, &a)| {
            let mut c = PlaneWaveComponent::new(
                th,
                kk,
                Complex64::new(a / norm, 0.0),
                scene.injection_center,
                s,
            );
            c.energy_loss = loss;
            c
        })
        .collect())
}

/// Samples a component on the scene grid, scaled to total power `|a_k|²`.
pub fn render_component(comp: &PlaneWaveComponent, scene: &SlabScene) -> Result<ComplexField2D> {
    let g = scene.grid();
    if g.dx > scene.lambda_spp / 4.0 || g.dy > scene.lambda_spp / 4.0 {
        return Err(Error::Sampling(format!(
            "grid step ({:.1}, {:.1}) nm coarser than λ_SPP/4",
            g.dx, g.dy
        )));
    }
    let ys = g.y_axis();
    let rows: Vec<Complex64> = (0..g.nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = g.x(i);
            ys.iter()
                .map(move |&y| comp.ansatz(x, y))
                .collect::<Vec<_>>()
        })
        .collect();
    let values = Array2::from_shape_vec((g.nx, g.ny), rows).expect("grid shape");
    let mut f = ComplexField2D::new(values, g.dx, g.dy, g.origin())?;
    f.normalize();
    let a = comp.a_k;
    f.values_mut().mapv_inplace(|z| z * a);
    Ok(f)
}

/// Component field on the line `x = line_x`, normalized by the envelope's
/// power on the infinite line (so truncation can only lower the line norm
/// below one). The weight `a_k` is not applied.
pub fn object_line_field(comp: &PlaneWaveComponent, line_x: f64, ys: &[f64]) -> Vec<Complex64> {
    let kk = comp.wavenumber();
    let cos = (comp.k[0] / kk).abs();
    let line_power = if comp.waist.is_finite() {
        comp.waist * (PI / 2.0).sqrt() / cos.max(1e-300)
    } else {
        let h = (ys[ys.len() - 1] - ys[0]) / (ys.len() - 1) as f64;
        h * ys.len() as f64
    };
    let scale = 1.0 / line_power.sqrt();
    ys.iter().map(|&y| comp.ansatz(line_x, y) * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn params(s: f64) -> SourceParams {
        SourceParams::new(200.0, 2.0, s).unwrap()
    }

    /// K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt by composite Simpson.
    fn k_quadrature(nu: f64, x: f64) -> f64 {
        let (a, b, n) = (0.0, 12.0, 200_000);
        let h = (b - a) / n as f64;
        let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn kinematics() {
        let p = params(200.0);
        assert!((p.gamma - 1.391_390).abs() < 1e-5);
        assert!((p.v - 0.695_2).abs() < 1e-3);
        assert!((p.s0() - 95.3).abs() < 0.5, "s0 = {}", p.s0());
        assert!(p.violations().is_empty());
    }

    #[test]
    fn bessel_arguments_at_s0_match_quadrature() {
        let p = params(200.0);
        let f = swift_electron_field(p.s0(), &p).unwrap();
        let k0 = k_quadrature(0.0, 1.0);
        let k1 = k_quadrature(1.0, 1.0);
        assert!((f.ez.im * p.gamma - k0).abs() < 1e-7 * k0);
        assert!((-f.erho.re - k1).abs() < 1e-7 * k1);
        assert!((k0 - 0.421_024_438_240_708_3).abs() < 1e-12);
    }

    #[test]
    fn component_ratio_is_k0_over_gamma_k1() {
        let p = params(200.0);
        for rho in [10.0, 95.0, 400.0, 2000.0] {
            let f = swift_electron_field(rho, &p).unwrap();
            let x = rho / p.s0();
            let want = puruspe::Kn(0, x) / (p.gamma * puruspe::Kn(1, x));
            assert!(((f.ez.norm() / f.erho.norm()) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn field_decays_and_is_monotone() {
        let p = params(200.0);
        let s0 = p.s0();
        let at = |r: f64| swift_electron_field(r, &p).unwrap().magnitude();
        assert!(at(10.0 * s0) < (-8.0f64).exp() * at(s0));
        let mut last = f64::INFINITY;
        for i in 0..=400 {
            let r = s0 * 10f64.powf(-2.0 + 4.0 * i as f64 / 400.0);
            let m = at(r);
            assert!(m < last, "not decreasing at rho = {r}");
            last = m;
        }
        assert!(swift_electron_field(0.0, &p).is_err());
        assert!(at(1e6 * s0).is_finite());
    }

    #[test]
    fn decomposition_contract() {
        let scene = SlabScene::default();
        let p = params(200.0);
        let comps = decompose_source(&scene, &p, 33).unwrap();
        let total: f64 = comps.iter().map(|c| c.a_k.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let kk = scene.wavenumber();
        for (i, c) in comps.iter().enumerate() {
            assert!((c.wavenumber() - kk).abs() / kk < 1e-9);
            assert_eq!(c.k[0] + c.electron_recoil[0], 0.0);
            assert_eq!(c.k[1] + c.electron_recoil[1], 0.0);
            assert_eq!(c.energy_loss, p.energy_loss_ev());
            let mirror = &comps[comps.len() - 1 - i];
            assert!((c.a_k - mirror.a_k).norm() < 1e-12);
            assert!(c.k[0] > 0.0);
        }
    }

    #[test]
    fn decomposition_errors() {
        let scene = SlabScene::default();
        assert!(matches!(
            decompose_source(&scene, &params(200.0), 32),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            decompose_source(&scene, &params(200.0), 1),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            decompose_source(&scene, &params(50.0), 33),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn infinite_waist_collapses_forward() {
        let scene = SlabScene::default();
        let comps = decompose_source(&scene, &params(f64::INFINITY), 33).unwrap();
        for c in &comps {
            if c.k[1] != 0.0 {
                assert!(c.a_k.norm() < 1e-6);
            } else {
                assert!((c.a_k.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    fn fwhm(xs: &[f64], ys: &[f64]) -> f64 {
        let peak = ys.iter().cloned().fold(f64::MIN, f64::max);
        let half = peak / 2.0;
        let i0 = ys.iter().position(|&v| v == peak).unwrap();
        let cross = |range: Box<dyn Iterator<Item = usize>>, step: isize| {
            for i in range {
                let j = (i as isize + step) as usize;
                if ys[j] < half {
                    let f = (ys[i] - half) / (ys[i] - ys[j]);
                    return xs[i] + f * (xs[j] - xs[i]);
                }
            }
            panic!("no half-maximum crossing");
        };
        let right = cross(Box::new(i0..xs.len() - 1), 1);
        let left = cross(Box::new((1..=i0).rev()), -1);
        right - left
    }

    #[test]
    fn angular_width_matches_brute_force_fourier_transform() {
        let mut scene = SlabScene::default();
        scene.injection_waist_s = 2.0 * scene.lambda_spp;
        let s = scene.injection_waist_s;
        let comps = decompose_source(&scene, &params(s), 33).unwrap();
        let th: Vec<f64> = comps.iter().map(|c| c.angle()).collect();
        let w: Vec<f64> = comps.iter().map(|c| c.a_k.norm_sqr()).collect();
        let got = fwhm(&th, &w);

        // oracle: |FFT|² of the sampled source profile exp(−y²/s²)
        let n = 1 << 16;
        let h = 2.0;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| {
                let y = (i as f64 - n as f64 / 2.0) * h;
                Complex64::new((-(y * y) / (s * s)).exp(), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let kk = scene.wavenumber();
        let mut pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let m = if i < n / 2 {
                    i as f64
                } else {
                    i as f64 - n as f64
                };
                (2.0 * PI * m / (n as f64 * h), buf[i].norm_sqr())
            })
            .filter(|(k, _)| k.abs() < kk)
            .map(|(k, p)| ((k / kk).asin(), p))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let want = fwhm(&xs, &ys);
        assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    }

    #[test]
    fn rendered_component_contract() {
        let mut scene = SlabScene::default();
        scene.grid_step = Some(50.0);
        let comps = decompose_source(&scene, &params(200.0), 33).unwrap();
        let fwd = &comps[16];
        let f = render_component(fwd, &scene).unwrap();
        assert!((f.power() - fwd.a_k.norm_sqr()).abs() < 1e-9);
        // phase advance along the axis
        let g = scene.grid();
        let iy = (0..g.ny)
            .min_by(|&a, &b| g.y(a).abs().total_cmp(&g.y(b).abs()))
            .unwrap();
        let per = scene.lambda_spp / g.dx;
        let i0 = 40;
        let i1 = i0 + (12.0 * per).round() as usize;
        let dphi = (f.values()[[i1, iy]] / f.values()[[i0, iy]]).arg();
        let want = scene.wavenumber() * (i1 - i0) as f64 * g.dx;
        let wrapped = (want + PI).rem_euclid(2.0 * PI) - PI;
        assert!((dphi - wrapped).abs() < 1e-9);
        // envelope maximum on the injection row
        let ix = f.column_at(scene.injection_center[0]).unwrap();
        let col = f.line(ix);
        let best = (0..g.ny)
            .max_by(|&a, &b| col[a].norm().partial_cmp(&col[b].norm()).unwrap())
            .unwrap();
        assert!((g.y(best) - scene.injection_center[1]).abs() <= g.dy);

        scene.grid_step = Some(200.0);
        assert!(matches!(
            render_component(fwd, &scene),
            Err(Error::Sampling(_))
        ));
    }

    #[test]
    fn object_line_norm_is_at_most_one() {
        let scene = SlabScene::default();
        let ys = scene.grid().y_axis();
        let h = scene.grid().dy;
        for c in decompose_source(&scene, &params(200.0), 33).unwrap() {
            let line = object_line_field(&c, scene.object_x, &ys);
            let p: f64 = line.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
            assert!(p <= 1.0 + 1e-9, "line power {p}");
        }
    }
}
