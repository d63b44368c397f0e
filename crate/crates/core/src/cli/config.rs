//! JSON pipeline configuration. Every section rejects unknown keys. Units are
//! SI unless the field name carries a suffix (`_mw`, `_nm`).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::resonator::{ModeProperties, RingGeometry};
use crate::sfwm::CouplingObjective;
use crate::tag_sim::{DetectorModel, FransonConfig, RunControls, SourceModel};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub geometry: Option<GeometrySection>,
    pub mode: Option<ModeSection>,
    pub q: Option<QSection>,
    /// Extra devices sharing `geometry` and `mode`, one design row each.
    pub devices: Option<Vec<DeviceRow>>,
    pub pump: Option<PumpSection>,
    pub optimize: Option<OptimizeSection>,
    pub sweep: Option<SweepSection>,
    pub source: Option<SourceModel>,
    pub detectors: Option<DetectorSection>,
    pub experiment: Option<ExperimentSection>,
    pub analysis: Option<AnalysisSection>,
    pub run: Option<RunSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// m
    pub radius: Option<f64>,
    /// Hz; needs the mode group index.
    pub fsr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub n_eff: f64,
    pub n_g: Option<f64>,
    /// m/s
    pub group_velocity: Option<f64>,
    /// m²
    pub a_eff: f64,
    /// m²/W
    pub n2: Option<f64>,
    /// 1/(W·m)
    pub gamma: Option<f64>,
    /// s²/m
    pub beta2: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QSection {
    pub intrinsic: f64,
    pub external: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceRow {
    pub name: String,
    pub q_intrinsic: f64,
    pub q_external: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub power_mw: f64,
    /// Defaults to the mode wavelength.
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub q_intrinsic: f64,
    #[serde(default = "default_objective")]
    pub objective: CouplingObjective,
}

fn default_objective() -> CouplingObjective {
    CouplingObjective::MaxEmitted
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub q_i_min: f64,
    pub q_i_max: f64,
    pub q_e_min: f64,
    pub q_e_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    41
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub signal: DetectorModel,
    pub idler: DetectorModel,
    /// HBT arms; default to `signal`.
    pub s1: Option<DetectorModel>,
    pub s2: Option<DetectorModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    PairSource,
    Hbt,
    Franson,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScannedPhase {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScan {
    pub points: usize,
    pub scanned: ScannedPhase,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub pump_mw: f64,
    /// s
    pub duration: f64,
    #[serde(default = "default_ratio")]
    pub splitter_ratio: f64,
    pub franson: Option<FransonConfig>,
    /// Franson only: one stream per phase step over `[0, 2π)`.
    pub phase_scan: Option<PhaseScan>,
}

fn default_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub event_cap: u64,
    pub segment_duration: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let c = RunControls::default();
        Self {
            seed: 0,
            event_cap: c.event_cap,
            segment_duration: c.segment_duration,
        }
    }
}

impl RunSection {
    pub fn controls(&self) -> RunControls {
        RunControls {
            event_cap: self.event_cap,
            segment_duration: self.segment_duration,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramOptions {
    pub ch_a: u32,
    pub ch_b: u32,
    /// s
    pub bin_width: f64,
    /// s
    pub span: f64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self {
            ch_a: 1,
            ch_b: 2,
            bin_width: 50e-12,
            span: 200e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarOptions {
    /// s
    pub window: f64,
    /// Window centre, s; defaults to the tallest bin.
    pub centre: Option<f64>,
    /// Further delays kept out of the accidental estimate, s.
    #[serde(default)]
    pub exclude: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2hOptions {
    pub herald: u32,
    pub s1: u32,
    pub s2: u32,
    pub window: f64,
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2uhOptions {
    pub ch_a: u32,
    pub ch_b: u32,
    pub window: f64,
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFitOptions {
    /// Channel whose singles rate is fitted.
    pub channel: u32,
    /// One pump power per input file, mW.
    pub pump_mw: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyOptions {
    pub window: f64,
    pub noise_fraction_s: f64,
    pub noise_fraction_i: f64,
    pub dark_s: f64,
    pub dark_i: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityOptions {
    /// One phase per input file, rad.
    pub phases: Vec<f64>,
    pub window: f64,
    /// Side-peak delays kept out of the accidental estimate, s.
    #[serde(default)]
    pub exclude: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub histogram: HistogramOptions,
    pub car: Option<CarOptions>,
    pub g2h: Option<G2hOptions>,
    pub g2uh: Option<G2uhOptions>,
    pub power_fit: Option<PowerFitOptions>,
    pub efficiency: Option<EfficiencyOptions>,
    pub visibility: Option<VisibilityOptions>,
    #[serde(default)]
    pub chsh: bool,
    #[serde(default = "default_trials")]
    pub monte_carlo_trials: usize,
}

fn default_trials() -> usize {
    1000
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            histogram: HistogramOptions::default(),
            car: Some(CarOptions {
                window: 1.6e-9,
                centre: None,
                exclude: Vec::new(),
            }),
            g2h: None,
            g2uh: None,
            power_fit: None,
            efficiency: None,
            visibility: None,
            chsh: false,
            monte_carlo_trials: default_trials(),
        }
    }
}

/// A parsed config together with the SHA-256 of its source bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl LoadedConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            config,
            hash: sha256_hex(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(crate::error::with_path(path))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Config used when no file is given.
    pub fn empty() -> Self {
        Self::parse("{}").expect("empty config parses")
    }
}

pub(crate) fn require<'a, T>(value: &'a Option<T>, path: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| Error::Config(format!("missing required section `{path}`")))
}

impl PipelineConfig {
    pub fn mode_properties(&self) -> Result<ModeProperties> {
        let m = require(&self.mode, "mode")?;
        let wl = m.wavelength_nm * 1e-9;
        let mode = match (m.group_velocity, m.n_g, m.gamma, m.n2) {
            (Some(vg), None, Some(gamma), None) => ModeProperties::from_group_velocity(m.n_eff, vg, m.a_eff, gamma, m.beta2, wl),
            (None, Some(ng), None, Some(n2)) => ModeProperties::new(m.n_eff, ng, m.a_eff, n2, m.beta2, wl),
            (None, Some(ng), Some(gamma), None) => {
                ModeProperties::from_group_velocity(m.n_eff, crate::units::SPEED_OF_LIGHT / ng, m.a_eff, gamma, m.beta2, wl)
            }
            (Some(vg), None, None, Some(n2)) => {
                ModeProperties::new(m.n_eff, crate::units::SPEED_OF_LIGHT / vg, m.a_eff, n2, m.beta2, wl)
            }
            _ => {
                return Err(Error::Config(
                    "`mode` needs exactly one of n_g/group_velocity and exactly one of n2/gamma".into(),
                ))
            }
        };
        mode.map_err(|e| Error::Config(format!("mode: {e}")))
    }

    pub fn ring_geometry(&self, mode: &ModeProperties) -> Result<RingGeometry> {
        let g = require(&self.geometry, "geometry")?;
        let geometry = match (g.radius, g.fsr) {
            (Some(r), None) => RingGeometry::from_radius(r),
            (None, Some(fsr)) => RingGeometry::from_fsr(fsr, mode.n_g),
            _ => return Err(Error::Config("`geometry` needs exactly one of radius or fsr".into())),
        };
        geometry.map_err(|e| Error::Config(format!("geometry: {e}")))
    }

    pub fn run_section(&self) -> RunSection {
        self.run.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = LoadedConfig::parse(r#"{"pump": {"power_mw": 1.0, "colour": 3}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("colour")));
        assert!(LoadedConfig::parse(r#"{"bogus": {}}"#).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let a = LoadedConfig::parse("{}").unwrap();
        assert_eq!(a.hash, "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
    }

    #[test]
    fn missing_section_is_named() {
        let c = LoadedConfig::empty();
        let err = c.config.mode_properties().unwrap_err();
        assert!(err.to_string().contains("`mode`"));
    }

    #[test]
    fn mode_variants() {
        let text = r#"{"mode": {"n_eff": 1.85, "group_velocity": 1.42e8, "a_eff": 1.16e-12, "gamma": 0.88,
                       "beta2": -8.48e-26, "wavelength_nm": 1540.5},
                       "geometry": {"fsr": 200e9}}"#;
        let c = LoadedConfig::parse(text).unwrap().config;
        let mode = c.mode_properties().unwrap();
        assert!((mode.gamma - 0.88).abs() < 1e-12);
        let g = c.ring_geometry(&mode).unwrap();
        assert!((g.radius() - 113.0e-6).abs() < 0.05e-6);
    }
}
