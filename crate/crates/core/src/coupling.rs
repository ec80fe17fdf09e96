//! Mutual-coupling non-idealities: embedded element patterns and element
//! efficiencies.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;

/// Hannan limit at half-wavelength spacing, the reference for relative efficiency.
pub const HALF_WAVE_EFFICIENCY: f64 = PI / 4.0;

/// Tolerance on S-parameter row power sums above one.
const PASSIVITY_TOLERANCE: f64 = 1e-9;

/// Grid used to power-normalize sampled patterns on load.
const NORMALIZATION_GRID: (usize, usize) = (256, 512);

/// Complex far-field gain sampled on an (elevation, azimuth) grid in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedPattern {
    elevations_deg: Vec<f64>,
    azimuths_deg: Vec<f64>,
    /// Row-major: elevation outer, azimuth inner.
    samples: Vec<Complex64>,
}

impl GriddedPattern {
    /// Validates the grid: elevations strictly increasing and covering
    /// `[0, 90]` within `[0, 180]`; azimuths strictly increasing within
    /// `[-180, 180)`.
    pub fn new(elevations_deg: Vec<f64>, azimuths_deg: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if elevations_deg.len() < 2 || !increasing(&elevations_deg) {
            return Err(Error::InvalidInput("pattern elevations must be strictly increasing".into()));
        }
        if elevations_deg[0] > 0.0 || *elevations_deg.last().unwrap() < 90.0 {
            return Err(Error::InvalidInput("pattern elevations must cover [0, 90] degrees".into()));
        }
        if elevations_deg[0] < 0.0 || *elevations_deg.last().unwrap() > 180.0 {
            return Err(Error::InvalidInput("pattern elevations must lie in [0, 180] degrees".into()));
        }
        if azimuths_deg.is_empty() || !increasing(&azimuths_deg) {
            return Err(Error::InvalidInput("pattern azimuths must be strictly increasing".into()));
        }
        if azimuths_deg[0] < -180.0 || *azimuths_deg.last().unwrap() >= 180.0 {
            return Err(Error::InvalidInput("pattern azimuths must lie in [-180, 180) degrees".into()));
        }
        if samples.len() != elevations_deg.len() * azimuths_deg.len() {
            return Err(Error::DimensionMismatch {
                expected: elevations_deg.len() * azimuths_deg.len(),
                got: samples.len(),
            });
        }
        if samples.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("pattern samples must be finite".into()));
        }
        Ok(Self {
            elevations_deg,
            azimuths_deg,
            samples,
        })
    }

    pub fn elevations_deg(&self) -> &[f64] {
        &self.elevations_deg
    }

    pub fn azimuths_deg(&self) -> &[f64] {
        &self.azimuths_deg
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    fn sample(&self, i: usize, j: usize) -> Complex64 {
        self.samples[i * self.azimuths_deg.len() + j]
    }

    /// Bilinear interpolation; zero outside the elevation coverage.
    pub fn gain(&self, elevation: f64, azimuth: f64) -> Complex64 {
        let theta = elevation.to_degrees();
        let els = &self.elevations_deg;
        if !(theta >= els[0] && theta <= *els.last().unwrap()) {
            return Complex64::new(0.0, 0.0);
        }
        let i = match els.partition_point(|&e| e <= theta) {
            0 => 0,
            k if k >= els.len() => els.len() - 2,
            k => k - 1,
        };
        let ti = (theta - els[i]) / (els[i + 1] - els[i]);

        let azs = &self.azimuths_deg;
        let first = azs[0];
        let phi = first + (azimuth.to_degrees() - first).rem_euclid(360.0);
        let na = azs.len();
        let j = azs.partition_point(|&a| a <= phi).saturating_sub(1);
        let (j1, next) = if j + 1 < na { (j + 1, azs[j + 1]) } else { (0, first + 360.0) };
        let span = next - azs[j];
        let tj = if span > 0.0 { (phi - azs[j]) / span } else { 0.0 };

        let a = self.sample(i, j) * (1.0 - tj) + self.sample(i, j1) * tj;
        let b = self.sample(i + 1, j) * (1.0 - tj) + self.sample(i + 1, j1) * tj;
        a * (1.0 - ti) + b * ti
    }

    fn scaled(mut self, factor: f64) -> Self {
        for z in &mut self.samples {
            *z *= factor;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementPattern {
    Uniform,
    /// `√(3/2) sin θ`, power-normalized over the sphere.
    AnalyticDipole,
    Gridded(GriddedPattern),
}

impl ElementPattern {
    pub fn gain(&self, elevation: f64, azimuth: f64) -> Complex64 {
        match self {
            ElementPattern::Uniform => Complex64::new(1.0, 0.0),
            ElementPattern::AnalyticDipole => Complex64::new(1.5f64.sqrt() * elevation.sin(), 0.0),
            ElementPattern::Gridded(g) => g.gain(elevation, azimuth),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ElementPattern::Uniform => "uniform",
            ElementPattern::AnalyticDipole => "dipole",
            ElementPattern::Gridded(_) => "gridded",
        }
    }

    /// `(1/4π) ∫ |F|² dΩ` sampled at the centers of an `n_el × n_az` grid.
    pub fn power(&self, n_el: usize, n_az: usize) -> f64 {
        let dt = PI / n_el as f64;
        let dp = 2.0 * PI / n_az as f64;
        let mut total = 0.0;
        for i in 0..n_el {
            let theta = (i as f64 + 0.5) * dt;
            let mut ring = 0.0;
            for j in 0..n_az {
                let phi = -PI + (j as f64 + 0.5) * dp;
                ring += self.gain(theta, phi).norm_sqr();
            }
            // exact solid angle of the elevation band
            total += ring * ((theta - 0.5 * dt).cos() - (theta + 0.5 * dt).cos());
        }
        total * dp / (4.0 * PI)
    }
}

/// Gain of element `element_index`; a single pattern is shared by all elements.
pub fn pattern_gain(patterns: &[ElementPattern], element_index: usize, elevation: f64, azimuth: f64) -> Complex64 {
    let pattern = if patterns.len() == 1 {
        &patterns[0]
    } else {
        &patterns[element_index]
    };
    pattern.gain(elevation, azimuth)
}

#[derive(Debug, Deserialize)]
struct PatternRecord {
    element_index: usize,
    theta_deg: f64,
    phi_deg: f64,
    re: f64,
    im: f64,
}

const PATTERN_HEADER: [&str; 5] = ["element_index", "theta_deg", "phi_deg", "re", "im"];
const SPARAM_HEADER: [&str; 4] = ["row", "col", "re", "im"];

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn reader<R: std::io::Read>(
    input: R,
    header: &[&str],
    kind: &'static str,
    path: &Path,
) -> Result<csv::Reader<R>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let found = rdr
        .headers()
        .map_err(|e| Error::malformed(kind, path, e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::malformed(kind, path, format!("expected header {}", header.join(","))));
    }
    Ok(rdr)
}

/// Loads per-element sampled patterns, renormalized to unit average power.
///
/// Element indices must run contiguously from zero; each element's samples
/// must form a full elevation × azimuth grid.
pub fn load_pattern_file(path: &Path) -> Result<Vec<ElementPattern>> {
    let kind = "pattern";
    let mut rdr = reader(open(path)?, &PATTERN_HEADER, kind, path)?;
    let mut by_element: BTreeMap<usize, Vec<PatternRecord>> = BTreeMap::new();
    for rec in rdr.deserialize::<PatternRecord>() {
        let rec = rec.map_err(|e| Error::malformed(kind, path, e.to_string()))?;
        by_element.entry(rec.element_index).or_default().push(rec);
    }
    if by_element.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if by_element.keys().copied().ne(0..by_element.len()) {
        return Err(Error::malformed(kind, path, "element indices must run from 0 without gaps"));
    }

    let mut patterns = Vec::with_capacity(by_element.len());
    for (element, records) in by_element {
        let malformed = |reason: String| Error::malformed(kind, path, format!("element {element}: {reason}"));
        let mut thetas: Vec<f64> = records.iter().map(|r| r.theta_deg).collect();
        let mut phis: Vec<f64> = records.iter().map(|r| r.phi_deg).collect();
        for v in [&mut thetas, &mut phis] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(malformed("non-finite angle".into()));
            }
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let (ne, na) = (thetas.len(), phis.len());
        if records.len() != ne * na {
            return Err(malformed(format!(
                "{} samples do not form the full {ne} x {na} grid",
                records.len()
            )));
        }
        let mut samples = vec![None; ne * na];
        for r in &records {
            let i = thetas.binary_search_by(|t| t.total_cmp(&r.theta_deg)).unwrap();
            let j = phis.binary_search_by(|p| p.total_cmp(&r.phi_deg)).unwrap();
            if samples[i * na + j].replace(Complex64::new(r.re, r.im)).is_some() {
                return Err(malformed(format!(
                    "duplicate sample at ({}, {})",
                    r.theta_deg, r.phi_deg
                )));
            }
        }
        let samples: Vec<Complex64> = samples.into_iter().map(|s| s.unwrap()).collect();
        let grid = GriddedPattern::new(thetas, phis, samples).map_err(|e| malformed(e.to_string()))?;
        let power = ElementPattern::Gridded(grid.clone()).power(NORMALIZATION_GRID.0, NORMALIZATION_GRID.1);
        if power.is_nan() || power <= 0.0 {
            return Err(malformed("pattern carries no power".into()));
        }
        patterns.push(ElementPattern::Gridded(grid.scaled(1.0 / power.sqrt())));
    }
    Ok(patterns)
}

/// Square scattering matrix of an array's ports.
#[derive(Debug, Clone, PartialEq)]
pub struct SParameterMatrix {
    entries: DMatrix<Complex64>,
}

impl SParameterMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Reads `row,col,re,im` records; all `N²` entries must be present once.
    pub fn load(path: &Path) -> Result<Self> {
        let kind = "S-parameter";
        let mut rdr = reader(open(path)?, &SPARAM_HEADER, kind, path)?;
        let mut records = Vec::new();
        for rec in rdr.deserialize::<(usize, usize, f64, f64)>() {
            records.push(rec.map_err(|e| Error::malformed(kind, path, e.to_string()))?);
        }
        if records.is_empty() {
            return Err(Error::EmptyFile(path.to_path_buf()));
        }
        let n = records.iter().map(|r| r.0.max(r.1)).max().unwrap() + 1;
        if records.len() != n * n {
            return Err(Error::malformed(
                kind,
                path,
                format!("{} entries for a {n} x {n} matrix", records.len()),
            ));
        }
        let mut seen = vec![false; n * n];
        let mut entries = DMatrix::zeros(n, n);
        for (r, c, re, im) in records {
            if std::mem::replace(&mut seen[r * n + c], true) {
                return Err(Error::malformed(kind, path, format!("duplicate entry ({r}, {c})")));
            }
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::malformed(kind, path, format!("non-finite entry ({r}, {c})")));
            }
            entries[(r, c)] = Complex64::new(re, im);
        }
        Ok(Self { entries })
    }
}

/// `e_p = 1 − Σ_q |S_pq|²`.
pub fn efficiency_from_sparams(s: &SParameterMatrix) -> Result<Vec<f64>> {
    s.entries
        .row_iter()
        .enumerate()
        .map(|(row, r)| {
            let power: f64 = r.iter().map(|z| z.norm_sqr()).sum();
            if power > 1.0 + PASSIVITY_TOLERANCE {
                return Err(Error::NonPassive { row, power });
            }
            Ok((1.0 - power).clamp(0.0, 1.0))
        })
        .collect()
}

/// Maximum element efficiency in a dense array, `min(1, π Δx Δy)` (spacings in wavelengths).
pub fn hannan_limit(spacing_x: f64, spacing_y: f64) -> f64 {
    (PI * spacing_x * spacing_y).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum EfficiencyMode {
    /// Every element at `η` times the half-wavelength Hannan limit; `η ∈ [0, 1]`.
    RelativeEta(f64),
    /// Every element at the Hannan limit of the array's spacing.
    HannanLimited,
    FromSParams(SParameterMatrix),
}

impl EfficiencyMode {
    pub fn label(&self) -> String {
        match self {
            EfficiencyMode::RelativeEta(eta) => format!("eta={eta}"),
            EfficiencyMode::HannanLimited => "hannan".to_string(),
            EfficiencyMode::FromSParams(_) => "sparams".to_string(),
        }
    }
}

/// Where element patterns come from when building a profile.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternSource {
    Uniform,
    AnalyticDipole,
    /// One shared pattern or one per element.
    Patterns(Vec<ElementPattern>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProfile {
    /// One shared pattern, or one per element.
    pub patterns: Vec<ElementPattern>,
    pub efficiencies: Vec<f64>,
    pub relative_efficiencies: Vec<f64>,
}

impl CouplingProfile {
    /// Uniform patterns and lossless elements.
    pub fn ideal(n: usize) -> Self {
        Self {
            patterns: vec![ElementPattern::Uniform],
            efficiencies: vec![1.0; n],
            relative_efficiencies: vec![1.0 / HALF_WAVE_EFFICIENCY; n],
        }
    }

    pub fn len(&self) -> usize {
        self.efficiencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.efficiencies.is_empty()
    }

    pub fn gain(&self, element_index: usize, elevation: f64, azimuth: f64) -> Complex64 {
        pattern_gain(&self.patterns, element_index, elevation, azimuth)
    }

    /// Amplitude factors `√e_p`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.efficiencies.iter().map(|e| e.sqrt()).collect()
    }

    pub fn uses_uniform_patterns(&self) -> bool {
        self.patterns.iter().all(|p| matches!(p, ElementPattern::Uniform))
    }
}

pub fn build_coupling_profile(
    geometry: &ArrayGeometry,
    patterns: PatternSource,
    mode: &EfficiencyMode,
) -> Result<CouplingProfile> {
    let n = geometry.len();
    let patterns = match patterns {
        PatternSource::Uniform => vec![ElementPattern::Uniform],
        PatternSource::AnalyticDipole => vec![ElementPattern::AnalyticDipole],
        PatternSource::Patterns(p) => p,
    };
    if patterns.len() != 1 && patterns.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: patterns.len(),
        });
    }
    let efficiencies = match mode {
        EfficiencyMode::RelativeEta(eta) => {
            if !(0.0..=1.0).contains(eta) {
                return Err(Error::InvalidInput(format!("relative efficiency {eta} not in [0, 1]")));
            }
            vec![eta * HALF_WAVE_EFFICIENCY; n]
        }
        EfficiencyMode::HannanLimited => vec![hannan_limit(geometry.spacing_x, geometry.spacing_y); n],
        EfficiencyMode::FromSParams(s) => {
            if s.order() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.order(),
                });
            }
            efficiency_from_sparams(s)?
        }
    };
    let relative_efficiencies = efficiencies.iter().map(|e| e / HALF_WAVE_EFFICIENCY).collect();
    Ok(CouplingProfile {
        patterns,
        efficiencies,
        relative_efficiencies,
    })
}

/// Diagonal matrix of amplitude factors `√e_p`.
pub fn efficiency_amplitude_matrix(profile: &CouplingProfile) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(profile.amplitudes()))
}
