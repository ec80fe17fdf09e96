//! Holographic MIMO channel synthesis and capacity evaluation.
//!
//! Lengths are expressed in wavelengths and angles in radians unless a name
//! says otherwise (`_deg`).

pub mod capacity;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod lattice;
pub mod quadrature;
pub mod rng;
pub mod spectrum;
pub mod synth;

pub use coupling::{
    build_coupling_profile, efficiency_amplitude_matrix, efficiency_from_sparams, hannan_limit,
    load_pattern_file, pattern_gain, CouplingProfile, EfficiencyMode, ElementPattern, GriddedPattern,
    PatternSource, SParameterMatrix,
};
pub use error::{Error, Result};
pub use geometry::{build_planar_array, element_position, ArrayGeometry};
pub use lattice::{
    build_variance_table, enumerate_lattice, harmonic_angles, harmonic_matrix, harmonic_vector,
    marginal_integral, HarmonicIndex, LatticeTiling, LinkEnd, SpectralLattice, VarianceTable,
};
pub use quadrature::QuadratureRule;
pub use spectrum::{
    concentration_from_spread, spectra_from_cdl, spectrum_value, vmf_density, AngularPowerSpectrum,
    CdlClusterRow, CdlTable, VmfComponent,
};
pub use capacity::{drop_users, mu_sum_capacity, su_capacity, uma_pathloss_delta_db, waterfill, CapacityReport, PowerAllocation, UserDrop};
pub use rng::{derive_key, splitmix64, KeyedStream};
pub use synth::{build_plan, expected_frobenius, modified_basis, sample_channel, ChannelRealization, SynthesisPlan};
