//! Run configuration files (TOML).
//!
//! ```toml
//! schema = "ghostbeam/1"
//!
//! [scene]            # SlabScene, lengths in nm, positions as [x, y]
//! width_x = 20000.0
//! ...
//! [scene.object]
//! kind = "double_slit"
//! d = 2000.0
//! b = 400.0
//!
//! [source]           # optional
//! [rates]            # optional, coincidence runs
//! [output]           # optional
//! [imaging] [ghost] [resolution] [beamshape]   # optional
//! ```

use serde::{Deserialize, Serialize};

use crate::beamshape::RingParams;
use crate::coincidence::RateConfig;
use crate::error::{Error, Result};
use crate::fields::SourceParams;
use crate::joint::{ImagePlane, ImagingOptics, ResolutionParams, DOMINANCE_THRESHOLD};
use crate::scene::{Point, SlabScene};

pub const SCHEMA: &str = "ghostbeam/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub electron_energy_kev: f64,
    pub spp_energy_ev: f64,
    pub n_components: usize,
    pub energy_window_mev: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            electron_energy_kev: 200.0,
            spp_energy_ev: 2.0,
            n_components: 33,
            energy_window_mev: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` overrides it.
    pub dir: Option<String>,
    /// Also dump 2D field grids (forward run).
    pub write_fields: bool,
}

/// Camera overrides; unset values follow the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingConfig {
    pub field_of_view: Option<f64>,
    pub spacing: Option<f64>,
    pub coherence_width: Option<f64>,
    pub central_half_width: Option<f64>,
    /// Defocus planes (nm) to image.
    pub defocus: Vec<f64>,
    pub far_field: bool,
}

impl Default for ImagingConfig {
    fn default() -> Self {
        ImagingConfig {
            field_of_view: None,
            spacing: None,
            coherence_width: None,
            central_half_width: None,
            defocus: vec![0.0],
            far_field: true,
        }
    }
}

impl ImagingConfig {
    pub fn optics(&self, scene: &SlabScene) -> ImagingOptics {
        let mut o = ImagingOptics::for_scene(scene);
        if let Some(v) = self.field_of_view {
            o.field_of_view = v;
        }
        if let Some(v) = self.spacing {
            o.spacing = v;
        }
        if let Some(v) = self.coherence_width {
            o.coherence_width = v;
        }
        if let Some(v) = self.central_half_width {
            o.central_half_width = v;
        }
        o
    }

    pub fn planes(&self) -> Vec<ImagePlane> {
        let mut p: Vec<ImagePlane> = self
            .defocus
            .iter()
            .map(|&d| ImagePlane::Defocus(d))
            .collect();
        if self.far_field {
            p.push(ImagePlane::FarField);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhostConfig {
    /// Number of bucket points in a scan across Δy.
    pub bucket_scan: usize,
    /// Single detection point; the bucket centre when unset.
    pub bucket_point: Option<Point>,
    pub dominance_threshold: f64,
}

impl Default for GhostConfig {
    fn default() -> Self {
        GhostConfig {
            bucket_scan: 41,
            bucket_point: None,
            dominance_threshold: DOMINANCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub scene: SlabScene,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub rates: RateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub imaging: ImagingConfig,
    #[serde(default)]
    pub ghost: GhostConfig,
    #[serde(default)]
    pub resolution: ResolutionParams,
    #[serde(default)]
    pub beamshape: RingParams,
}

impl RunConfig {
    pub fn with_scene(scene: SlabScene) -> Self {
        RunConfig {
            schema: SCHEMA.into(),
            scene,
            source: SourceConfig::default(),
            rates: RateConfig::default(),
            output: OutputConfig::default(),
            imaging: ImagingConfig::default(),
            ghost: GhostConfig::default(),
            resolution: ResolutionParams::default(),
            beamshape: RingParams::default(),
        }
    }

    /// Parses and checks the schema tag. Errors carry the line and column.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(describe(text, &e)))?;
        if cfg.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema `{}` (expected `{SCHEMA}`)",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}:{m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn source_params(&self) -> Result<SourceParams> {
        let mut p = SourceParams::new(
            self.source.electron_energy_kev,
            self.source.spp_energy_ev,
            self.scene.injection_waist_s,
        )?;
        p.energy_window_mev = self.source.energy_window_mev;
        Ok(p)
    }
}

fn describe(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().trim().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_text() -> String {
        RunConfig::with_scene(SlabScene::default()).to_toml()
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::from_toml(&default_text()).unwrap();
        assert_eq!(cfg, RunConfig::with_scene(SlabScene::default()));
    }

    #[test]
    fn missing_key_is_named_with_line() {
        let text: String = default_text()
            .lines()
            .filter(|l| !l.starts_with("lambda_spp"))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = RunConfig::from_toml(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("lambda_spp") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn wrong_schema_rejected() {
        let text = default_text().replace("ghostbeam/1", "ghostbeam/0");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn minimal_file() {
        let text = r#"
schema = "ghostbeam/1"
[scene]
width_x = 20000.0
width_y = 10000.0
lambda_spp = 600.0
injection_center = [2000.0, 0.0]
injection_waist_s = 200.0
object_x = 7000.0
bucket_center = [17000.0, 0.0]
bucket_extent_dy = 2000.0
[scene.object]
kind = "double_slit"
d = 2000.0
b = 400.0
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.scene, SlabScene::default());
        assert_eq!(cfg.source.n_components, 33);
    }
}
