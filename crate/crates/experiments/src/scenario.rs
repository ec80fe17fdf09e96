//! Loads a configuration's input files and builds synthesis plans.

use std::path::Path;

use holo_core::{
    build_coupling_profile, derive_key, load_pattern_file, spectra_from_cdl, AngularPowerSpectrum, ArrayGeometry,
    CdlClusterRow, CdlTable, CouplingProfile, EfficiencyMode, KeyedStream, PatternSource, SParameterMatrix,
    SpectralLattice, SynthesisPlan, UserDrop,
};

use crate::config::{EfficiencySpec, PatternSpec, ScenarioConfig, SpectrumSpec};
use crate::error::Result;

const CLUSTER_DOMAIN: u64 = 0x636c_7573; // "clus"

/// A configuration with its files loaded and its spectral lattices integrated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub bs_spectrum: AngularPowerSpectrum,
    pub ue_spectrum: AngularPowerSpectrum,
    pub bs_lattice: SpectralLattice,
    pub ue_lattice: SpectralLattice,
    cdl: Option<(Vec<CdlClusterRow>, f64, f64)>,
    patterns: PatternSource,
    sparams: Option<(Vec<SParameterMatrix>, Vec<SParameterMatrix>)>,
}

/// Everything that varies with the element spacing.
#[derive(Debug, Clone)]
pub struct SpacingSetup {
    pub spacing: f64,
    pub bs_geometry: ArrayGeometry,
    pub ue_geometry: ArrayGeometry,
    pub bs_coupling: CouplingProfile,
    pub ue_coupling: CouplingProfile,
}

impl Scenario {
    pub fn prepare(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let (bs_spectrum, ue_spectrum, cdl) = match &config.spectrum_spec {
            SpectrumSpec::Isotropic => (AngularPowerSpectrum::Isotropic, AngularPowerSpectrum::Isotropic, None),
            SpectrumSpec::Cdl { path, asd_deg, asa_deg } => {
                let table = CdlTable::load(Path::new(path))?;
                let (bs, ue) = spectra_from_cdl(&table.rows, *asd_deg, *asa_deg)?;
                (bs, ue, Some((table.rows, *asd_deg, *asa_deg)))
            }
        };
        let patterns = match &config.pattern_spec {
            PatternSpec::Uniform => PatternSource::Uniform,
            PatternSpec::Dipole => PatternSource::AnalyticDipole,
            PatternSpec::File { path } => PatternSource::Patterns(load_pattern_file(Path::new(path))?),
        };
        let sparams = match &config.efficiency_spec {
            EfficiencySpec::Sparams { bs_paths, ue_paths } => {
                let load = |paths: &[String]| -> Result<Vec<SParameterMatrix>> {
                    paths.iter().map(|p| Ok(SParameterMatrix::load(Path::new(p))?)).collect()
                };
                Some((load(bs_paths)?, load(ue_paths)?))
            }
            _ => None,
        };
        let [bx, by] = config.bs_aperture;
        let [ux, uy] = config.ue_aperture;
        Ok(Self {
            config: config.clone(),
            bs_lattice: SpectralLattice::compute(bx, by, &bs_spectrum)?,
            ue_lattice: SpectralLattice::compute(ux, uy, &ue_spectrum)?,
            bs_spectrum,
            ue_spectrum,
            cdl,
            patterns,
            sparams,
        })
    }

    /// Geometries and coupling for entry `k` of the spacing list.
    pub fn spacing_setup(&self, k: usize) -> Result<SpacingSetup> {
        let spacing = self.config.spacing_list[k];
        let [bx, by] = self.config.bs_aperture;
        let [ux, uy] = self.config.ue_aperture;
        let bs_geometry = holo_core::build_planar_array(bx, by, spacing, spacing)?;
        let ue_geometry = holo_core::build_planar_array(ux, uy, spacing, spacing)?;
        let (bs_mode, ue_mode) = match (&self.config.efficiency_spec, &self.sparams) {
            (EfficiencySpec::RelativeEta { value }, _) => {
                (EfficiencyMode::RelativeEta(*value), EfficiencyMode::RelativeEta(*value))
            }
            (EfficiencySpec::Hannan, _) => (EfficiencyMode::HannanLimited, EfficiencyMode::HannanLimited),
            (EfficiencySpec::Sparams { .. }, Some((bs, ue))) => {
                (EfficiencyMode::FromSParams(bs[k].clone()), EfficiencyMode::FromSParams(ue[k].clone()))
            }
            (EfficiencySpec::Sparams { .. }, None) => unreachable!("S-parameters are loaded in prepare"),
        };
        let bs_coupling = build_coupling_profile(&bs_geometry, self.patterns.clone(), &bs_mode)?;
        let ue_coupling = build_coupling_profile(&ue_geometry, self.patterns.clone(), &ue_mode)?;
        Ok(SpacingSetup {
            spacing,
            bs_geometry,
            ue_geometry,
            bs_coupling,
            ue_coupling,
        })
    }

    /// Plan for the nominal (unrotated) link at one spacing.
    pub fn plan(&self, setup: &SpacingSetup) -> Result<SynthesisPlan> {
        self.plan_with_ue_lattice(setup, self.ue_lattice.clone())
    }

    pub fn plan_with_ue_lattice(&self, setup: &SpacingSetup, ue_lattice: SpectralLattice) -> Result<SynthesisPlan> {
        Ok(SynthesisPlan::from_lattices(
            &setup.bs_geometry,
            &setup.ue_geometry,
            self.bs_lattice.clone(),
            ue_lattice,
            &setup.bs_coupling,
            &setup.ue_coupling,
        )?)
    }

    /// Arrival spectrum seen by a dropped user.
    pub fn user_spectrum(&self, user: &UserDrop, user_key: u64) -> Result<AngularPowerSpectrum> {
        match (&self.cdl, self.config.randomize_cluster_azimuths) {
            (Some((rows, asd, asa)), true) => {
                let mut stream = KeyedStream::new(derive_key(user_key, CLUSTER_DOMAIN, 0), 0);
                let rows: Vec<CdlClusterRow> = rows
                    .iter()
                    .map(|r| CdlClusterRow {
                        aoa_deg: stream.uniform_in(-180.0, 180.0),
                        ..*r
                    })
                    .collect();
                Ok(spectra_from_cdl(&rows, *asd, *asa)?.1)
            }
            _ => Ok(self.ue_spectrum.rotated_azimuth(user.orientation_deg.to_radians())),
        }
    }

    /// UE lattice for a dropped user; isotropic spectra need no re-integration.
    pub fn user_lattice(&self, user: &UserDrop, user_key: u64) -> Result<SpectralLattice> {
        if self.ue_spectrum.is_isotropic() {
            return Ok(self.ue_lattice.clone());
        }
        let spectrum = self.user_spectrum(user, user_key)?;
        let [ux, uy] = self.config.ue_aperture;
        Ok(SpectralLattice::compute(ux, uy, &spectrum)?)
    }
}
