//! Channel synthesis: `H = √(N_R N_S) Γ_R Ψ_R H_a Ψ_S^H Γ_S` with
//! independent `H_a[l, m] ~ CN(0, σ²(l, m))`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::coupling::CouplingProfile;
use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::lattice::{
    build_variance_table, harmonic_angles, harmonic_vector, LatticeTiling, LinkEnd, SpectralLattice, VarianceTable,
};
use crate::quadrature::QuadratureRule;
use crate::rng::KeyedStream;
use crate::spectrum::AngularPowerSpectrum;

/// Everything needed to draw channel realizations for one configuration.
#[derive(Debug, Clone)]
pub struct SynthesisPlan {
    pub bs_geometry: ArrayGeometry,
    pub ue_geometry: ArrayGeometry,
    /// `N_S × n_S` pattern-modified transmit harmonics.
    pub bs_basis: DMatrix<Complex64>,
    /// `N_R × n_R` pattern-modified receive harmonics.
    pub ue_basis: DMatrix<Complex64>,
    pub variance_table: VarianceTable,
    /// Diagonal of `Γ_S` (amplitudes `√e_p`).
    pub bs_amplitude: Vec<f64>,
    /// Diagonal of `Γ_R`.
    pub ue_amplitude: Vec<f64>,
    /// `√(N_R N_S) Γ_R Ψ_R`.
    left: DMatrix<Complex64>,
    /// `Ψ_S^H Γ_S`.
    right: DMatrix<Complex64>,
    /// `σ(l, m)`, row-major in `(l, m)`.
    std_devs: Vec<f64>,
}

/// Harmonic vectors with each element scaled by its pattern gain at the
/// harmonic's propagation angle.
pub fn modified_basis(
    lattice: &SpectralLattice,
    geometry: &ArrayGeometry,
    coupling: &CouplingProfile,
    end: LinkEnd,
) -> Result<DMatrix<Complex64>> {
    let mut basis = DMatrix::zeros(geometry.len(), lattice.len());
    let uniform = coupling.uses_uniform_patterns();
    for (k, &h) in lattice.indices.iter().enumerate() {
        let mut column = harmonic_vector(h, geometry, end)?;
        if !uniform {
            let (elevation, azimuth) = harmonic_angles(h, lattice.aperture_x, lattice.aperture_y)?;
            for (p, z) in column.iter_mut().enumerate() {
                *z *= coupling.gain(p, elevation, azimuth);
            }
        }
        basis.set_column(k, &column);
    }
    Ok(basis)
}

fn check_apertures(lattice: &SpectralLattice, geometry: &ArrayGeometry) -> Result<()> {
    if lattice.aperture_x != geometry.aperture_x || lattice.aperture_y != geometry.aperture_y {
        return Err(Error::InvalidInput(format!(
            "lattice aperture {}x{} does not match array aperture {}x{}",
            lattice.aperture_x, lattice.aperture_y, geometry.aperture_x, geometry.aperture_y
        )));
    }
    Ok(())
}

fn check_coupling(coupling: &CouplingProfile, geometry: &ArrayGeometry) -> Result<()> {
    if coupling.len() != geometry.len() {
        return Err(Error::DimensionMismatch {
            expected: geometry.len(),
            got: coupling.len(),
        });
    }
    Ok(())
}

/// Builds a plan, integrating both spectra over their lattices.
pub fn build_plan(
    bs_geometry: &ArrayGeometry,
    ue_geometry: &ArrayGeometry,
    bs_spectrum: &AngularPowerSpectrum,
    ue_spectrum: &AngularPowerSpectrum,
    bs_coupling: &CouplingProfile,
    ue_coupling: &CouplingProfile,
) -> Result<SynthesisPlan> {
    let bs_lattice = LatticeTiling::new(bs_geometry.aperture_x, bs_geometry.aperture_y)?
        .integrate(bs_spectrum, QuadratureRule::Adaptive)?;
    let ue_lattice = LatticeTiling::new(ue_geometry.aperture_x, ue_geometry.aperture_y)?
        .integrate(ue_spectrum, QuadratureRule::Adaptive)?;
    SynthesisPlan::from_lattices(bs_geometry, ue_geometry, bs_lattice, ue_lattice, bs_coupling, ue_coupling)
}

impl SynthesisPlan {
    /// Builds a plan from precomputed lattices, which depend only on aperture
    /// and spectrum and can be shared across spacings.
    pub fn from_lattices(
        bs_geometry: &ArrayGeometry,
        ue_geometry: &ArrayGeometry,
        bs_lattice: SpectralLattice,
        ue_lattice: SpectralLattice,
        bs_coupling: &CouplingProfile,
        ue_coupling: &CouplingProfile,
    ) -> Result<Self> {
        check_apertures(&bs_lattice, bs_geometry)?;
        check_apertures(&ue_lattice, ue_geometry)?;
        check_coupling(bs_coupling, bs_geometry)?;
        check_coupling(ue_coupling, ue_geometry)?;

        let bs_basis = modified_basis(&bs_lattice, bs_geometry, bs_coupling, LinkEnd::Transmit)?;
        let ue_basis = modified_basis(&ue_lattice, ue_geometry, ue_coupling, LinkEnd::Receive)?;
        let variance_table = build_variance_table(bs_lattice, ue_lattice)?;
        let bs_amplitude = bs_coupling.amplitudes();
        let ue_amplitude = ue_coupling.amplitudes();

        let prefactor = ((bs_geometry.len() * ue_geometry.len()) as f64).sqrt();
        let mut left = ue_basis.clone();
        for (p, mut row) in left.row_iter_mut().enumerate() {
            row *= Complex64::new(prefactor * ue_amplitude[p], 0.0);
        }
        let mut right = bs_basis.adjoint();
        for (p, mut col) in right.column_iter_mut().enumerate() {
            col *= Complex64::new(bs_amplitude[p], 0.0);
        }

        let (n_r, n_s) = (variance_table.ue_lattice.len(), variance_table.bs_lattice.len());
        let mut std_devs = Vec::with_capacity(n_r * n_s);
        for l in 0..n_r {
            for m in 0..n_s {
                std_devs.push(variance_table.variance(l, m).sqrt());
            }
        }

        Ok(Self {
            bs_geometry: bs_geometry.clone(),
            ue_geometry: ue_geometry.clone(),
            bs_basis,
            ue_basis,
            variance_table,
            bs_amplitude,
            ue_amplitude,
            left,
            right,
            std_devs,
        })
    }

    /// `(N_R, N_S)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.ue_geometry.len(), self.bs_geometry.len())
    }

    /// `(n_R, n_S)` harmonic counts.
    pub fn harmonic_counts(&self) -> (usize, usize) {
        (self.ue_basis.ncols(), self.bs_basis.ncols())
    }

    /// Draws the angular-domain coefficients `H_a` (`n_R × n_S`).
    pub fn sample_coefficients(&self, seed: u64, realization_index: u64) -> DMatrix<Complex64> {
        let (n_r, n_s) = self.harmonic_counts();
        let mut stream = KeyedStream::new(seed, realization_index);
        // entry (l, m) is draw l·n_S + m of the stream
        let mut h_a = DMatrix::zeros(n_r, n_s);
        for l in 0..n_r {
            for m in 0..n_s {
                h_a[(l, m)] = stream.complex_gaussian() * self.std_devs[l * n_s + m];
            }
        }
        h_a
    }

    /// Closed-form `E‖H‖_F²`.
    pub fn expected_frobenius(&self) -> f64 {
        let (big_r, big_s) = self.shape();
        let column_power = |basis: &DMatrix<Complex64>, amp: &[f64]| -> Vec<f64> {
            basis
                .column_iter()
                .map(|c| c.iter().zip(amp).map(|(z, a)| a * a * z.norm_sqr()).sum())
                .collect()
        };
        let ue = column_power(&self.ue_basis, &self.ue_amplitude);
        let bs = column_power(&self.bs_basis, &self.bs_amplitude);
        let mut total = 0.0;
        for (l, pl) in ue.iter().enumerate() {
            for (m, pm) in bs.iter().enumerate() {
                total += self.variance_table.variance(l, m) * pl * pm;
            }
        }
        (big_r * big_s) as f64 * total
    }
}

/// One channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `N_R × N_S`.
    pub matrix: DMatrix<Complex64>,
    pub realization_index: u64,
    pub seed: u64,
}

/// Draws realization `realization_index` of the plan's channel for `seed`.
pub fn sample_channel(plan: &SynthesisPlan, seed: u64, realization_index: u64) -> ChannelRealization {
    let h_a = plan.sample_coefficients(seed, realization_index);
    let matrix = &plan.left * h_a * &plan.right;
    ChannelRealization {
        matrix,
        realization_index,
        seed,
    }
}

/// Free-function form of [`SynthesisPlan::expected_frobenius`].
pub fn expected_frobenius(plan: &SynthesisPlan) -> f64 {
    plan.expected_frobenius()
}
