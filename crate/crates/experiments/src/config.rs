//! Scenario configuration and named presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSpec {
    Isotropic,
    /// Cluster table (CSV path or `builtin:cdl-b`) and per-end angular spreads.
    Cdl { path: String, asd_deg: f64, asa_deg: f64 },
}

impl SpectrumSpec {
    pub fn label(&self) -> &'static str {
        match self {
            SpectrumSpec::Isotropic => "isotropic",
            SpectrumSpec::Cdl { .. } => "cdl",
        }
    }
}

/// Element patterns, applied at both link ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSpec {
    Uniform,
    Dipole,
    File { path: String },
}

impl PatternSpec {
    pub fn label(&self) -> &'static str {
        match self {
            PatternSpec::Uniform => "uniform",
            PatternSpec::Dipole => "dipole",
            PatternSpec::File { .. } => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EfficiencySpec {
    RelativeEta { value: f64 },
    Hannan,
    /// One S-parameter file per entry of `spacing_list`, for each end.
    Sparams { bs_paths: Vec<String>, ue_paths: Vec<String> },
}

impl EfficiencySpec {
    pub fn label(&self) -> String {
        match self {
            EfficiencySpec::RelativeEta { value } => format!("eta={value}"),
            EfficiencySpec::Hannan => "hannan".to_string(),
            EfficiencySpec::Sparams { .. } => "sparams".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_ghz: f64,
    /// `[x, y]` in wavelengths.
    pub bs_aperture: [f64; 2],
    pub ue_aperture: [f64; 2],
    /// Element spacings in wavelengths, same on both axes and both ends.
    pub spacing_list: Vec<f64>,
    pub spectrum_spec: SpectrumSpec,
    pub pattern_spec: PatternSpec,
    pub efficiency_spec: EfficiencySpec,
    pub snr_db: f64,
    pub realizations: usize,
    /// 1 for single-user links.
    pub users: usize,
    pub seed: u64,
    /// Multi-user only: draw fresh cluster arrival azimuths per user instead
    /// of rotating the table.
    #[serde(default)]
    pub randomize_cluster_azimuths: bool,
}

pub const PRESETS: [&str; 5] = ["fig3-isotropic", "fig3-cdlb", "fig3-hannan", "fig3-dipole", "fig4-multiuser"];

fn base() -> ScenarioConfig {
    ScenarioConfig {
        carrier_ghz: 3.5,
        bs_aperture: [4.0, 4.0],
        ue_aperture: [1.0, 1.0],
        spacing_list: vec![0.5, 0.25, 0.125],
        spectrum_spec: SpectrumSpec::Isotropic,
        pattern_spec: PatternSpec::Uniform,
        efficiency_spec: EfficiencySpec::RelativeEta { value: 1.0 },
        snr_db: 0.0,
        realizations: 1000,
        users: 1,
        seed: 0,
        randomize_cluster_azimuths: false,
    }
}

fn builtin_cdl() -> SpectrumSpec {
    SpectrumSpec::Cdl {
        path: "builtin:cdl-b".to_string(),
        asd_deg: 10.0,
        asa_deg: 20.0,
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let mut c = base();
    match name {
        "fig3-isotropic" => {}
        "fig3-cdlb" => c.spectrum_spec = builtin_cdl(),
        "fig3-hannan" => c.efficiency_spec = EfficiencySpec::Hannan,
        "fig3-dipole" => c.pattern_spec = PatternSpec::Dipole,
        "fig4-multiuser" => {
            c.spectrum_spec = builtin_cdl();
            c.users = 10;
        }
        other => return Err(ExperimentError::UnknownPreset(other.to_string())),
    }
    Ok(c)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Free-space wavelength in metres.
    pub fn wavelength_m(&self) -> f64 {
        299_792_458.0 / (self.carrier_ghz * 1e9)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if !(self.carrier_ghz > 0.0 && self.carrier_ghz.is_finite()) {
            return bad(format!("carrier_ghz must be positive, got {}", self.carrier_ghz));
        }
        if self.realizations < 1 {
            return bad("realizations must be at least 1".into());
        }
        if self.users < 1 {
            return bad("users must be at least 1".into());
        }
        if self.spacing_list.is_empty() {
            return bad("spacing_list is empty".into());
        }
        if !self.snr_db.is_finite() {
            return bad(format!("snr_db must be finite, got {}", self.snr_db));
        }
        for &d in &self.spacing_list {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("spacing {d} must be positive"));
            }
            for a in self.bs_aperture.iter().chain(&self.ue_aperture) {
                if !(*a > 0.0 && a.is_finite()) {
                    return bad(format!("aperture {a} must be positive"));
                }
                let ratio = a / d;
                if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                    return bad(format!("spacing {d} does not divide aperture {a}"));
                }
            }
        }
        match &self.efficiency_spec {
            EfficiencySpec::RelativeEta { value } if !(0.0..=1.0).contains(value) => {
                return bad(format!("relative efficiency {value} not in [0, 1]"));
            }
            EfficiencySpec::Sparams { bs_paths, ue_paths }
                if bs_paths.len() != self.spacing_list.len() || ue_paths.len() != self.spacing_list.len() =>
            {
                return bad("sparams needs one bs and one ue file per spacing".into());
            }
            _ => {}
        }
        Ok(())
    }
}
