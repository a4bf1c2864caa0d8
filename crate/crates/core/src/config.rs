//! Run configuration: a versioned TOML schema with every section optional and
//! unknown keys rejected.

use serde::{Deserialize, Serialize};

use crate::dispersion::{calibrate, CalibrationTargets, DispersionModel};
use crate::efficiency::{GenerationProfile, LossBudget, LossElement};
use crate::error::{Error, Result};
use crate::jsa::{FrequencyGrid, JsaOptions, SourceGeometry};
use crate::pump::{DelayedSplit, PumpPulse};
use crate::quantum::DetectorModel;
use crate::units::transmission_to_db;

pub const SCHEMA_VERSION: u32 = 1;

/// Either explicit Taylor coefficients or targets to calibrate them from.
/// With neither, the default targets are calibrated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<DispersionModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<CalibrationTargets>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// s
    pub tau_min: f64,
    pub tau_max: f64,
    pub steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            tau_min: 0.0,
            tau_max: 4e-12,
            steps: 33,
        }
    }
}

/// Rectangular signal and idler bands, nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub signal_center_nm: f64,
    pub idler_center_nm: f64,
    pub width_nm: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            signal_center_nm: 1588.0,
            idler_center_nm: 1516.0,
            width_nm: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    /// Total photon-number cutoff of the Fock oracle.
    pub cutoff: usize,
    /// Schmidt modes kept for the unheralded g² oracle.
    pub schmidt_modes: usize,
    /// |tanh r|² used for the unheralded g² comparison.
    pub tanh2: f64,
    /// Heralded g² that fixes the mean pair number of the HOM noise model.
    pub heralded_g2: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_points: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            cutoff: 8,
            schmidt_modes: 3,
            tanh2: 0.05,
            heralded_g2: 0.053,
            mu_min: 1e-3,
            mu_max: 1e-2,
            mu_points: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub herald: DetectorModel,
    pub signal: DetectorModel,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            herald: DetectorModel::threshold(0.126),
            signal: DetectorModel::threshold(0.126),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceSection {
    pub theta_points: usize,
    pub phi_points: usize,
    /// Visibility used for the closed-form reversed-HOM fringe.
    pub reversed_visibility: f64,
    /// Include oracle multiphoton noise in heralded HOM.
    pub multiphoton: bool,
}

impl Default for InterferenceSection {
    fn default() -> Self {
        Self {
            theta_points: 25,
            phi_points: 33,
            reversed_visibility: 0.987,
            multiphoton: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    pub v: f64,
    pub shots: u64,
    /// Independent seeds for the round-trip statistics.
    pub runs: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            v: 0.982,
            shots: 10_000,
            runs: 50,
            max_iterations: 10_000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EfficiencySection {
    pub measured_detected: f64,
    /// Intrinsic efficiency used to solve for the uncharacterised excess loss.
    pub reference_intrinsic: f64,
    /// Filter fraction; taken from the filtered JSI when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_fraction: Option<f64>,
    /// Generation profile; the pump-overlap triangle when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<GenerationProfile>,
    pub budget: LossBudget,
}

impl Default for EfficiencySection {
    fn default() -> Self {
        Self {
            measured_detected: 0.126,
            reference_intrinsic: 0.91,
            filter_fraction: Some(0.99),
            profile: None,
            budget: LossBudget::characterised_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Base seed for all stochastic paths.
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub dispersion: DispersionSection,
    pub pump: PumpPulse,
    pub split: DelayedSplit,
    pub geometry: SourceGeometry,
    pub grid: FrequencyGrid,
    pub jsa: JsaOptions,
    pub sweep: SweepSection,
    pub filter: FilterSection,
    pub oracle: OracleSection,
    pub detectors: DetectorSection,
    pub interference: InterferenceSection,
    pub tomography: TomographySection,
    pub efficiency: EfficiencySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            threads: 0,
            output_dir: None,
            dispersion: DispersionSection::default(),
            pump: PumpPulse::default(),
            split: DelayedSplit::default(),
            geometry: SourceGeometry::default(),
            grid: FrequencyGrid::default(),
            jsa: JsaOptions::default(),
            sweep: SweepSection::default(),
            filter: FilterSection::default(),
            oracle: OracleSection::default(),
            detectors: DetectorSection::default(),
            interference: InterferenceSection::default(),
            tomography: TomographySection::default(),
            efficiency: EfficiencySection::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates TOML. Unknown keys are reported with their
    /// location.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Fully resolved TOML, every field spelled out.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.dispersion.model.is_some() && self.dispersion.targets.is_some() {
            return Err(Error::Config(
                "dispersion: give either `model` or `targets`, not both".into(),
            ));
        }
        if let Some(m) = &self.dispersion.model {
            m.validate()?;
        }
        if let Some(t) = &self.dispersion.targets {
            t.validate()?;
        }
        self.pump.validate()?;
        self.split.validate()?;
        self.geometry.validate()?;
        self.grid.validate()?;
        if self.jsa.quad_nodes < 3 || self.jsa.quad_nodes % 2 == 0 {
            return Err(Error::Config(format!("jsa.quad_nodes must be odd and >= 3, got {}", self.jsa.quad_nodes)));
        }
        let s = &self.sweep;
        if !(s.tau_min >= 0.0 && s.tau_max > s.tau_min) || s.steps < 8 {
            return Err(Error::Config("sweep needs 0 <= tau_min < tau_max and steps >= 8".into()));
        }
        if self.filter.width_nm.is_nan() || self.filter.width_nm <= 0.0 {
            return Err(Error::Config("filter.width_nm must be positive".into()));
        }
        let o = &self.oracle;
        if o.schmidt_modes == 0 || !(0.0..1.0).contains(&o.tanh2) || o.heralded_g2.is_nan() || o.heralded_g2 <= 0.0 {
            return Err(Error::Config("oracle: schmidt_modes >= 1, tanh2 in [0, 1), heralded_g2 > 0".into()));
        }
        if !(o.mu_min > 0.0 && o.mu_max > o.mu_min) || o.mu_points < 2 {
            return Err(Error::Config("oracle: need 0 < mu_min < mu_max and mu_points >= 2".into()));
        }
        self.detectors.herald.validate()?;
        self.detectors.signal.validate()?;
        let i = &self.interference;
        if i.theta_points < 4 || i.phi_points < 4 || !(0.0..=1.0).contains(&i.reversed_visibility) {
            return Err(Error::Config("interference: >= 4 points and visibility in [0, 1]".into()));
        }
        let t = &self.tomography;
        if !(0.0..=1.0).contains(&t.v) || t.shots == 0 || t.runs == 0 {
            return Err(Error::Config("tomography: v in [0, 1], shots >= 1, runs >= 1".into()));
        }
        let e = &self.efficiency;
        e.budget.validate()?;
        for (name, v) in [("measured_detected", e.measured_detected), ("reference_intrinsic", e.reference_intrinsic)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("efficiency.{name} must lie in (0, 1], got {v}")));
            }
        }
        if let Some(f) = e.filter_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("efficiency.filter_fraction must lie in (0, 1], got {f}")));
            }
        }
        Ok(())
    }

    /// Explicit model, or the calibration of the configured (or default) targets.
    pub fn dispersion_model(&self) -> Result<DispersionModel> {
        match (&self.dispersion.model, &self.dispersion.targets) {
            (Some(m), _) => Ok(*m),
            (None, Some(t)) => calibrate(t),
            (None, None) => {
                let t = CalibrationTargets {
                    length: self.geometry.length,
                    ..Default::default()
                };
                calibrate(&t)
            }
        }
    }

    /// Detector efficiency as a budget element, for reports.
    pub fn detector_loss_element(&self) -> Result<LossElement> {
        LossElement::new("detector", transmission_to_db(self.detectors.signal.efficiency))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_default() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn resolved_round_trip() {
        let mut c = RunConfig::default();
        c.jsa.coverage = crate::jsa::CoveragePolicy::lenient();
        c.pump.prefilter_nm = Some(8.0);
        c.efficiency.profile = Some(GenerationProfile::Uniform);
        let text = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let err = RunConfig::from_toml_str("seed = 3\n\n[pump]\nfwhm_nm = 4.5\ncolour = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("colour"), "{msg}");
        assert!(msg.contains("line 5"), "{msg}");
        assert!(err.is_validation());
    }

    #[test]
    fn schema_version_and_ranges_are_checked() {
        assert!(RunConfig::from_toml_str("schema_version = 2").is_err());
        assert!(RunConfig::from_toml_str("[split]\nsplit_ratio = 1.5").is_err());
        assert!(RunConfig::from_toml_str("[tomography]\nv = 1.2").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::from_toml_str("[pump]\nfwhm_nm = 3.0\n[grid]\nn_signal = 64\nn_idler = 64\n").unwrap();
        assert_eq!(c.pump.fwhm_nm, 3.0);
        assert_eq!(c.pump.lambda0_nm, PumpPulse::default().lambda0_nm);
        assert_eq!(c.grid.n_signal, 64);
        assert_eq!(c.grid.signal_range_nm, FrequencyGrid::default().signal_range_nm);
    }

    #[test]
    fn explicit_model_and_targets_are_exclusive() {
        let m = RunConfig::default().dispersion_model().unwrap();
        let mut c = RunConfig::default();
        c.dispersion.model = Some(m);
        let text = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.dispersion_model().unwrap(), m);
        c.dispersion.targets = Some(CalibrationTargets::default());
        assert!(c.validate().is_err());
    }
}
