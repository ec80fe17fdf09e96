//! Angular power spectra: isotropic fields and von Mises-Fisher mixtures,
//! including construction from clustered-delay-line angle tables.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// Below this concentration the density is taken as the uniform limit `1/4π`.
const ISOTROPIC_CONCENTRATION: f64 = 1e-6;

/// Upper bound (exclusive, degrees) of the small-spread concentration formula.
pub const MAX_SPREAD_DEG: f64 = 21.0;

const SPREAD_CONSTANT: f64 = 212.9;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Unit vector for the given elevation (from +z) and azimuth (from +x).
pub fn direction(elevation: f64, azimuth: f64) -> [f64; 3] {
    let (st, ct) = elevation.sin_cos();
    let (sp, cp) = azimuth.sin_cos();
    [st * cp, st * sp, ct]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfComponent {
    pub weight: f64,
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
    pub concentration: f64,
}

impl VmfComponent {
    pub fn new(weight: f64, mean_azimuth: f64, mean_elevation: f64, concentration: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("VMF weight {weight} not in (0, 1]")));
        }
        if !(concentration >= 0.0 && concentration.is_finite()) {
            return Err(Error::InvalidInput(format!("VMF concentration {concentration} < 0")));
        }
        if !(0.0..=PI).contains(&mean_elevation) {
            return Err(Error::InvalidInput(format!(
                "VMF mean elevation {mean_elevation} not in [0, pi]"
            )));
        }
        Ok(Self {
            weight,
            mean_azimuth: wrap_angle(mean_azimuth),
            mean_elevation,
            concentration,
        })
    }

    pub fn mean_direction(&self) -> [f64; 3] {
        direction(self.mean_elevation, self.mean_azimuth)
    }

    /// Density at a point given the cosine of its angle to the mean direction.
    ///
    /// Uses `α / (2π (1 - e^{-2α})) · e^{α (cos γ - 1)}`, which equals
    /// `α / (4π sinh α) · e^{α cos γ}` without overflowing for large α.
    pub fn density_from_cosine(&self, cos_angle: f64) -> f64 {
        let a = self.concentration;
        if a < ISOTROPIC_CONCENTRATION {
            return 1.0 / (4.0 * PI);
        }
        a / (2.0 * PI * -(-2.0 * a).exp_m1()) * (a * (cos_angle - 1.0)).exp()
    }
}

/// VMF probability density per steradian at `(elevation, azimuth)`.
pub fn vmf_density(component: &VmfComponent, elevation: f64, azimuth: f64) -> f64 {
    let cos_angle = elevation.sin()
        * component.mean_elevation.sin()
        * (azimuth - component.mean_azimuth).cos()
        + elevation.cos() * component.mean_elevation.cos();
    component.density_from_cosine(cos_angle)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AngularPowerSpectrum {
    /// `A² ≡ 1` over all directions.
    Isotropic,
    VmfMixture(Vec<VmfComponent>),
}

impl AngularPowerSpectrum {
    /// Validated mixture; weights must sum to one within 1e-9.
    pub fn vmf_mixture(components: Vec<VmfComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyTable);
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("VMF weights sum to {total}, expected 1")));
        }
        Ok(Self::VmfMixture(components))
    }

    pub fn components(&self) -> &[VmfComponent] {
        match self {
            Self::Isotropic => &[],
            Self::VmfMixture(c) => c,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self, Self::Isotropic)
    }

    /// `A²` along a unit direction vector.
    pub fn value_at(&self, dir: [f64; 3]) -> f64 {
        match self {
            Self::Isotropic => 1.0,
            Self::VmfMixture(components) => components
                .iter()
                .map(|c| {
                    let m = c.mean_direction();
                    c.weight * c.density_from_cosine(m[0] * dir[0] + m[1] * dir[1] + m[2] * dir[2])
                })
                .sum(),
        }
    }

    /// Rotates every component about the array normal by `delta` radians.
    pub fn rotated_azimuth(&self, delta: f64) -> Self {
        match self {
            Self::Isotropic => Self::Isotropic,
            Self::VmfMixture(components) => Self::VmfMixture(
                components
                    .iter()
                    .map(|c| VmfComponent {
                        mean_azimuth: wrap_angle(c.mean_azimuth + delta),
                        ..*c
                    })
                    .collect(),
            ),
        }
    }
}

/// `A²(elevation, azimuth)`.
pub fn spectrum_value(spectrum: &AngularPowerSpectrum, elevation: f64, azimuth: f64) -> f64 {
    match spectrum {
        AngularPowerSpectrum::Isotropic => 1.0,
        AngularPowerSpectrum::VmfMixture(components) => components
            .iter()
            .map(|c| c.weight * vmf_density(c, elevation, azimuth))
            .sum(),
    }
}

/// Concentration for a small angular spread: `α = 212.9² / δ²` (δ in degrees).
pub fn concentration_from_spread(spread_deg: f64) -> Result<f64> {
    if !(spread_deg > 0.0 && spread_deg < MAX_SPREAD_DEG) {
        return Err(Error::SpreadOutOfRange(spread_deg));
    }
    Ok(SPREAD_CONSTANT * SPREAD_CONSTANT / (spread_deg * spread_deg))
}

/// One cluster of a clustered-delay-line table (angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CdlClusterRow {
    pub cluster_id: i64,
    pub power_db: f64,
    pub aod_deg: f64,
    pub zod_deg: f64,
    pub aoa_deg: f64,
    pub zoa_deg: f64,
}

impl CdlClusterRow {
    fn validate(&self) -> Result<()> {
        let angles = [self.aod_deg, self.zod_deg, self.aoa_deg, self.zoa_deg];
        if !self.power_db.is_finite() || angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "cluster {} has non-finite fields",
                self.cluster_id
            )));
        }
        for z in [self.zod_deg, self.zoa_deg] {
            if !(0.0..=180.0).contains(&z) {
                return Err(Error::InvalidInput(format!(
                    "cluster {} zenith {z} outside [0, 180]",
                    self.cluster_id
                )));
            }
        }
        Ok(())
    }
}

/// Builds the departure (BS) and arrival (UE) spectra from a cluster table.
///
/// Each cluster contributes one component per end, weighted by its linear
/// power; all components at one end share the concentration derived from
/// that end's spread.
pub fn spectra_from_cdl(
    rows: &[CdlClusterRow],
    asd_deg: f64,
    asa_deg: f64,
) -> Result<(AngularPowerSpectrum, AngularPowerSpectrum)> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let bs_alpha = concentration_from_spread(asd_deg)?;
    let ue_alpha = concentration_from_spread(asa_deg)?;
    for r in rows {
        r.validate()?;
    }

    let linear: Vec<f64> = rows.iter().map(|r| 10f64.powf(r.power_db / 10.0)).collect();
    let total: f64 = linear.iter().sum();

    let mut bs = Vec::with_capacity(rows.len());
    let mut ue = Vec::with_capacity(rows.len());
    for (r, p) in rows.iter().zip(&linear) {
        let w = p / total;
        bs.push(VmfComponent::new(
            w,
            r.aod_deg.to_radians(),
            r.zod_deg.to_radians(),
            bs_alpha,
        )?);
        ue.push(VmfComponent::new(
            w,
            r.aoa_deg.to_radians(),
            r.zoa_deg.to_radians(),
            ue_alpha,
        )?);
    }
    Ok((
        AngularPowerSpectrum::VmfMixture(bs),
        AngularPowerSpectrum::VmfMixture(ue),
    ))
}

/// A cluster table plus the per-table spreads from its sidecar, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct CdlTable {
    pub rows: Vec<CdlClusterRow>,
    pub asd_deg: Option<f64>,
    pub asa_deg: Option<f64>,
}

#[derive(Deserialize)]
struct Sidecar {
    asd_deg: Option<f64>,
    asa_deg: Option<f64>,
}

const CDL_HEADER: [&str; 6] = ["cluster_id", "power_db", "aod_deg", "zod_deg", "aoa_deg", "zoa_deg"];

const BUILTIN_CDL_B: &str = include_str!("../data/cdl_b.csv");
const BUILTIN_CDL_B_META: &str = include_str!("../data/cdl_b.json");

impl CdlTable {
    /// Names accepted by [`CdlTable::builtin`].
    pub const BUILTINS: [&'static str; 1] = ["cdl-b"];

    pub fn builtin(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "cdl-b" => {
                let label = PathBuf::from("builtin:cdl-b");
                let rows = parse_cdl_csv(BUILTIN_CDL_B.as_bytes(), &label).ok()?;
                let meta: Sidecar = serde_json::from_str(BUILTIN_CDL_B_META).ok()?;
                Some(Self {
                    rows,
                    asd_deg: meta.asd_deg,
                    asa_deg: meta.asa_deg,
                })
            }
            _ => None,
        }
    }

    /// Loads `path` and, when present, the sidecar `path` with a `.json` extension.
    ///
    /// Paths of the form `builtin:<name>` resolve to the shipped tables.
    pub fn load(path: &Path) -> Result<Self> {
        if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("builtin:")) {
            return Self::builtin(name)
                .ok_or_else(|| Error::malformed("CDL", path, format!("unknown builtin table {name}")));
        }
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let rows = parse_cdl_csv(file, path)?;

        let sidecar = path.with_extension("json");
        let (asd_deg, asa_deg) = match std::fs::read_to_string(&sidecar) {
            Ok(text) => {
                let meta: Sidecar = serde_json::from_str(&text)
                    .map_err(|e| Error::malformed("CDL sidecar", &sidecar, e.to_string()))?;
                (meta.asd_deg, meta.asa_deg)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (None, None),
            Err(source) => return Err(Error::Io { path: sidecar, source }),
        };
        Ok(Self { rows, asd_deg, asa_deg })
    }
}

fn parse_cdl_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<CdlClusterRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::malformed("CDL", path, e.to_string()))?
        .clone();
    if headers.iter().ne(CDL_HEADER.iter().copied()) {
        return Err(Error::malformed(
            "CDL",
            path,
            format!("expected header {}", CDL_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<CdlClusterRow>() {
        let row = rec.map_err(|e| Error::malformed("CDL", path, e.to_string()))?;
        row.validate()
            .map_err(|e| Error::malformed("CDL", path, e.to_string()))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vmf(alpha: f64, el: f64, az: f64) -> VmfComponent {
        VmfComponent::new(1.0, az, el, alpha).unwrap()
    }

    #[test]
    fn density_values() {
        let iso = vmf(0.0, 0.7, 0.2);
        assert_relative_eq!(vmf_density(&iso, 2.0, -1.0), 0.079_577_471_545_947_67, max_relative = 1e-12);

        let c = vmf(1.0, 0.7, 0.2);
        // e / (4π sinh 1) and e^-1 / (4π sinh 1)
        assert_relative_eq!(vmf_density(&c, 0.7, 0.2), 0.184_065_499_616_596, max_relative = 1e-12);
        assert_relative_eq!(
            vmf_density(&c, PI - 0.7, 0.2 + PI),
            0.024_910_556_524_700_64,
            max_relative = 1e-10
        );
    }

    #[test]
    fn large_concentration_does_not_overflow() {
        let c = vmf(1.0e4, 1.0, 0.0);
        let peak = vmf_density(&c, 1.0, 0.0);
        assert_relative_eq!(peak, 1.0e4 / (2.0 * PI), max_relative = 1e-12);
        assert_eq!(vmf_density(&c, 2.0, 0.0), 0.0);
    }

    fn sphere_integral(f: impl Fn(f64, f64) -> f64) -> f64 {
        let (x, w) = crate::quadrature::gauss_legendre(256);
        let mut total = 0.0;
        for (xt, wt) in x.iter().zip(w.iter()) {
            let theta = (xt + 1.0) * PI / 2.0;
            for (xp, wp) in x.iter().zip(w.iter()) {
                let phi = xp * PI;
                total += wt * PI / 2.0 * wp * PI * f(theta, phi) * theta.sin();
            }
        }
        total
    }

    #[test]
    fn density_integrates_to_one() {
        for alpha in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let c = vmf(alpha, 1.0, 0.5);
            let total = sphere_integral(|t, p| vmf_density(&c, t, p));
            assert!((total - 1.0).abs() < 1e-3, "alpha {alpha}: {total}");
        }
        let mix = AngularPowerSpectrum::vmf_mixture(vec![
            VmfComponent::new(0.3, 0.1, 0.4, 50.0).unwrap(),
            VmfComponent::new(0.7, -2.0, 2.0, 5.0).unwrap(),
        ])
        .unwrap();
        let total = sphere_integral(|t, p| spectrum_value(&mix, t, p));
        assert!((total - 1.0).abs() < 1e-3);
        let iso = sphere_integral(|t, p| spectrum_value(&AngularPowerSpectrum::Isotropic, t, p));
        assert_relative_eq!(iso, 4.0 * PI, max_relative = 1e-9);
    }

    #[test]
    fn mixtures() {
        let c = VmfComponent::new(1.0, 0.3, 1.1, 7.0).unwrap();
        let single = AngularPowerSpectrum::vmf_mixture(vec![c]).unwrap();
        assert_eq!(spectrum_value(&single, 0.9, -0.4), vmf_density(&c, 0.9, -0.4));

        let half = VmfComponent { weight: 0.5, ..c };
        let twin = AngularPowerSpectrum::vmf_mixture(vec![half, half]).unwrap();
        assert_relative_eq!(
            spectrum_value(&twin, 0.9, -0.4),
            vmf_density(&c, 0.9, -0.4),
            max_relative = 1e-14
        );
        assert_eq!(spectrum_value(&AngularPowerSpectrum::Isotropic, 0.3, 2.0), 1.0);

        let unnormalized = VmfComponent { weight: 0.4, ..c };
        assert!(AngularPowerSpectrum::vmf_mixture(vec![unnormalized]).is_err());
    }

    #[test]
    fn value_at_matches_angle_form() {
        let mix = AngularPowerSpectrum::vmf_mixture(vec![
            VmfComponent::new(0.25, 2.5, 0.4, 30.0).unwrap(),
            VmfComponent::new(0.75, -1.0, 1.9, 3.0).unwrap(),
        ])
        .unwrap();
        for &(t, p) in &[(0.1, 0.2), (1.2, -3.0), (2.9, 1.0)] {
            assert_relative_eq!(
                mix.value_at(direction(t, p)),
                spectrum_value(&mix, t, p),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn spread_to_concentration() {
        assert_relative_eq!(concentration_from_spread(2.129).unwrap(), 10_000.0, max_relative = 1e-12);
        assert_relative_eq!(concentration_from_spread(10.0).unwrap(), 453.2641, max_relative = 1e-12);
        assert!(matches!(concentration_from_spread(21.29), Err(Error::SpreadOutOfRange(_))));
        assert!(matches!(concentration_from_spread(21.0), Err(Error::SpreadOutOfRange(_))));
        assert!(matches!(concentration_from_spread(0.0), Err(Error::SpreadOutOfRange(_))));
        assert!(matches!(concentration_from_spread(-3.0), Err(Error::SpreadOutOfRange(_))));
    }

    #[test]
    fn builtin_cdl_b() {
        let table = CdlTable::builtin("cdl-b").unwrap();
        assert_eq!(table.rows.len(), 23);
        assert_eq!(table.asd_deg, Some(10.0));
        let (bs, ue) = spectra_from_cdl(&table.rows, 10.0, 20.0).unwrap();
        assert_eq!(bs.components().len(), 23);
        assert_eq!(ue.components().len(), 23);
        for s in [&bs, &ue] {
            let total: f64 = s.components().iter().map(|c| c.weight).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert_relative_eq!(bs.components()[0].concentration, 453.2641, max_relative = 1e-12);
        assert_relative_eq!(ue.components()[0].mean_azimuth, (-173.3f64).to_radians());
        // the table's nominal arrival spread is outside the VMF validity range
        assert!(matches!(
            spectra_from_cdl(&table.rows, 10.0, table.asa_deg.unwrap()),
            Err(Error::SpreadOutOfRange(_))
        ));
    }

    #[test]
    fn degenerate_table() {
        let row = CdlClusterRow {
            cluster_id: 1,
            power_db: 0.0,
            aod_deg: 30.0,
            zod_deg: 90.0,
            aoa_deg: -45.0,
            zoa_deg: 60.0,
        };
        let (bs, ue) = spectra_from_cdl(&[row], 5.0, 5.0).unwrap();
        assert_eq!(bs.components()[0].weight, 1.0);
        assert_relative_eq!(bs.components()[0].mean_azimuth, 30f64.to_radians());
        assert_relative_eq!(ue.components()[0].mean_elevation, 60f64.to_radians());
        assert!(matches!(spectra_from_cdl(&[], 5.0, 5.0), Err(Error::EmptyTable)));
    }

    #[test]
    fn load_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("t.csv");
        std::fs::write(
            &csv_path,
            "cluster_id,power_db,aod_deg,zod_deg,aoa_deg,zoa_deg\n1,0,10,90,20,80\n2,-3,-10,95,-20,85\n",
        )
        .unwrap();
        let t = CdlTable::load(&csv_path).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.asd_deg, None);

        std::fs::write(dir.path().join("t.json"), r#"{"asd_deg": 4.0, "asa_deg": 6.5}"#).unwrap();
        let t = CdlTable::load(&csv_path).unwrap();
        assert_eq!((t.asd_deg, t.asa_deg), (Some(4.0), Some(6.5)));

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "id,power\n1,0\n").unwrap();
        assert!(matches!(CdlTable::load(&bad), Err(Error::MalformedFile { .. })));
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, CDL_HEADER.join(",") + "\n").unwrap();
        assert!(matches!(CdlTable::load(&empty), Err(Error::EmptyFile(_))));
        assert!(CdlTable::load(Path::new("builtin:cdl-b")).is_ok());
    }

    proptest! {
        #[test]
        fn rotation_invariance(
            alpha in 0.0f64..500.0,
            el in 0.0f64..PI,
            az in -PI..PI,
            qel in 0.0f64..PI,
            qaz in -PI..PI,
            shift in -PI..PI,
        ) {
            let c = vmf(alpha, el, az);
            let rotated = VmfComponent { mean_azimuth: wrap_angle(az + shift), ..c };
            let a = vmf_density(&c, qel, qaz);
            let b = vmf_density(&rotated, qel, qaz + shift);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn spectrum_nonnegative(el in 0.0f64..PI, az in -PI..PI, alpha in 0.0f64..2000.0) {
            let s = AngularPowerSpectrum::vmf_mixture(vec![
                VmfComponent::new(0.6, 1.0, 2.0, alpha).unwrap(),
                VmfComponent::new(0.4, -1.0, 0.5, alpha / 3.0).unwrap(),
            ]).unwrap();
            prop_assert!(spectrum_value(&s, el, az) >= 0.0);
        }

        #[test]
        fn concentration_decreasing(a in 0.01f64..20.9, b in 0.01f64..20.9) {
            prop_assume!(a < b);
            prop_assert!(concentration_from_spread(a).unwrap() > concentration_from_spread(b).unwrap());
        }
    }
}
