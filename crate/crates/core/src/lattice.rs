//! Plane-wave lattice: admissible Fourier harmonics of an aperture, their
//! propagation angles, per-harmonic spectral integrals and basis vectors.
//!
//! Each harmonic `(ix, iy)` owns a region of the visible hemisphere, described
//! in direction cosines `(u, v)`. The region is the cell
//! `[ix/Lx, (ix+1)/Lx) × [iy/Ly, (iy+1)/Ly)` clipped to the unit disk. Cells
//! anchored at indices outside the lattice ellipse still cover part of the
//! disk near its rim; those parts go to the nearest harmonic in `(u, v)`, so
//! the regions of a lattice tile the hemisphere exactly once.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::quadrature::{QuadratureRule, SphericalRegion};
use crate::spectrum::AngularPowerSpectrum;

const ELLIPSE_TOLERANCE: f64 = 1e-12;
const ZENITH: [f64; 3] = [0.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HarmonicIndex {
    pub ix: i64,
    pub iy: i64,
}

impl HarmonicIndex {
    pub const fn new(ix: i64, iy: i64) -> Self {
        Self { ix, iy }
    }

    /// Direction cosines `(ix/Lx, iy/Ly)` of the harmonic.
    pub fn direction_cosines(&self, aperture_x: f64, aperture_y: f64) -> (f64, f64) {
        (self.ix as f64 / aperture_x, self.iy as f64 / aperture_y)
    }

    pub fn in_ellipse(&self, aperture_x: f64, aperture_y: f64) -> bool {
        let (u, v) = self.direction_cosines(aperture_x, aperture_y);
        u * u + v * v <= 1.0 + ELLIPSE_TOLERANCE
    }
}

/// Transmit (departure) or receive (arrival) side of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkEnd {
    Transmit,
    Receive,
}

impl LinkEnd {
    fn phase_sign(self) -> f64 {
        match self {
            LinkEnd::Transmit => -1.0,
            LinkEnd::Receive => 1.0,
        }
    }
}

/// All harmonics inside the lattice ellipse, sorted by `(ix, iy)`.
///
/// Non-positive or non-finite apertures admit no harmonics.
pub fn enumerate_lattice(aperture_x: f64, aperture_y: f64) -> Vec<HarmonicIndex> {
    if !(aperture_x > 0.0 && aperture_y > 0.0 && aperture_x.is_finite() && aperture_y.is_finite()) {
        return Vec::new();
    }
    let rx = aperture_x.floor() as i64;
    let ry = aperture_y.floor() as i64;
    let mut out = Vec::new();
    for ix in -rx..=rx {
        for iy in -ry..=ry {
            let h = HarmonicIndex::new(ix, iy);
            if h.in_ellipse(aperture_x, aperture_y) {
                out.push(h);
            }
        }
    }
    out
}

/// `(elevation, azimuth)` of the plane wave associated with a harmonic.
pub fn harmonic_angles(index: HarmonicIndex, aperture_x: f64, aperture_y: f64) -> Result<(f64, f64)> {
    if !index.in_ellipse(aperture_x, aperture_y) {
        return Err(Error::IndexOutsideEllipse {
            ix: index.ix,
            iy: index.iy,
        });
    }
    let (u, v) = index.direction_cosines(aperture_x, aperture_y);
    let elevation = (1.0 - u * u - v * v).max(0.0).sqrt().acos();
    let azimuth = if u == 0.0 && v == 0.0 { 0.0 } else { v.atan2(u) };
    Ok((elevation, azimuth))
}

/// Unit-norm array response of a harmonic:
/// `exp(∓j 2π (ix x / Lx + iy y / Ly)) / √N`, `−` at the transmit end.
pub fn harmonic_vector(
    index: HarmonicIndex,
    geometry: &ArrayGeometry,
    end: LinkEnd,
) -> Result<DVector<Complex64>> {
    if !index.in_ellipse(geometry.aperture_x, geometry.aperture_y) {
        return Err(Error::IndexOutsideEllipse {
            ix: index.ix,
            iy: index.iy,
        });
    }
    let norm = 1.0 / (geometry.len() as f64).sqrt();
    let kx = 2.0 * PI * index.ix as f64 / geometry.aperture_x;
    let ky = 2.0 * PI * index.iy as f64 / geometry.aperture_y;
    let sign = end.phase_sign();
    Ok(DVector::from_iterator(
        geometry.len(),
        geometry
            .elements()
            .iter()
            .map(|p| Complex64::from_polar(norm, sign * (kx * p[0] + ky * p[1]))),
    ))
}

/// Columns are the harmonic vectors of `indices`, in order.
pub fn harmonic_matrix(
    indices: &[HarmonicIndex],
    geometry: &ArrayGeometry,
    end: LinkEnd,
) -> Result<DMatrix<Complex64>> {
    let mut m = DMatrix::zeros(geometry.len(), indices.len());
    for (k, &h) in indices.iter().enumerate() {
        m.set_column(k, &harmonic_vector(h, geometry, end)?);
    }
    Ok(m)
}

type Polygon = Vec<[f64; 2]>;

/// Keeps the part of a convex polygon with `a·x ≤ b`.
fn clip(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Polygon {
    let side = |p: &[f64; 2]| a[0] * p[0] + a[1] * p[1] - b;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (k, p) in poly.iter().enumerate() {
        let q = &poly[(k + 1) % poly.len()];
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(*p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn area(poly: &[[f64; 2]]) -> f64 {
    let mut s = 0.0;
    for (k, p) in poly.iter().enumerate() {
        let q = poly[(k + 1) % poly.len()];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

/// Whether a convex polygon (counter-clockwise) meets the open unit disk.
fn meets_open_disk(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = true;
    let mut nearest = f64::INFINITY;
    for k in 0..n {
        let p = poly[k];
        let q = poly[(k + 1) % n];
        let d = [q[0] - p[0], q[1] - p[1]];
        // origin strictly left of every edge means it is inside
        if d[0] * (-p[1]) - d[1] * (-p[0]) < 0.0 {
            inside = false;
        }
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (-(p[0] * d[0] + p[1] * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = [p[0] + t * d[0], p[1] + t * d[1]];
        nearest = nearest.min(c[0].hypot(c[1]));
    }
    inside || nearest < 1.0 - 1e-12
}

fn cell(ix: i64, iy: i64, aperture_x: f64, aperture_y: f64) -> Polygon {
    let (x0, x1) = (ix as f64 / aperture_x, (ix + 1) as f64 / aperture_x);
    let (y0, y1) = (iy as f64 / aperture_y, (iy + 1) as f64 / aperture_y);
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

/// Hemisphere regions owned by each harmonic of an aperture.
///
/// Building the tiling is independent of the spectrum, so one tiling can be
/// reused for every spectrum integrated over the same aperture.
#[derive(Debug, Clone)]
pub struct LatticeTiling {
    pub aperture_x: f64,
    pub aperture_y: f64,
    indices: Vec<HarmonicIndex>,
    pieces: Vec<Vec<SphericalRegion>>,
    spill_counts: Vec<usize>,
}

impl LatticeTiling {
    pub fn new(aperture_x: f64, aperture_y: f64) -> Result<Self> {
        if !(aperture_x > 0.0 && aperture_x.is_finite()) {
            return Err(Error::NonPositiveInput("aperture_x"));
        }
        if !(aperture_y > 0.0 && aperture_y.is_finite()) {
            return Err(Error::NonPositiveInput("aperture_y"));
        }
        let indices = enumerate_lattice(aperture_x, aperture_y);
        let members: HashSet<HarmonicIndex> = indices.iter().copied().collect();
        let points: Vec<(f64, f64)> = indices
            .iter()
            .map(|h| h.direction_cosines(aperture_x, aperture_y))
            .collect();

        let mut pieces: Vec<Vec<SphericalRegion>> = vec![Vec::new(); indices.len()];
        let mut spill_counts = vec![0; indices.len()];
        for (k, h) in indices.iter().enumerate() {
            let own = cell(h.ix, h.iy, aperture_x, aperture_y);
            if meets_open_disk(&own) {
                pieces[k].push(SphericalRegion::from_polygon(&own));
            }
        }

        let rx = aperture_x.ceil() as i64 + 1;
        let ry = aperture_y.ceil() as i64 + 1;
        for ax in -rx..=rx {
            for ay in -ry..=ry {
                if members.contains(&HarmonicIndex::new(ax, ay)) {
                    continue;
                }
                let outer = cell(ax, ay, aperture_x, aperture_y);
                if !meets_open_disk(&outer) {
                    continue;
                }
                for (k, &(tu, tv)) in points.iter().enumerate() {
                    let mut poly = outer.clone();
                    for (j, &(qu, qv)) in points.iter().enumerate() {
                        if j == k {
                            continue;
                        }
                        let a = [2.0 * (qu - tu), 2.0 * (qv - tv)];
                        let b = qu * qu + qv * qv - tu * tu - tv * tv;
                        poly = clip(&poly, a, b);
                        if poly.len() < 3 {
                            break;
                        }
                    }
                    if poly.len() >= 3 && area(&poly) > 1e-14 && meets_open_disk(&poly) {
                        pieces[k].push(SphericalRegion::from_polygon(&poly));
                        spill_counts[k] += 1;
                    }
                }
            }
        }

        Ok(Self {
            aperture_x,
            aperture_y,
            indices,
            pieces,
            spill_counts,
        })
    }

    pub fn indices(&self) -> &[HarmonicIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of rim pieces a harmonic receives from cells outside the ellipse.
    pub fn spillover_pieces(&self, index: HarmonicIndex) -> Option<usize> {
        self.position(index).map(|k| self.spill_counts[k])
    }

    fn position(&self, index: HarmonicIndex) -> Option<usize> {
        self.indices.binary_search(&index).ok()
    }

    /// Spectrum-weighted solid angle `∫ A² dΩ` over the region of one harmonic.
    pub fn integral(
        &self,
        index: HarmonicIndex,
        spectrum: &AngularPowerSpectrum,
        rule: QuadratureRule,
    ) -> Result<f64> {
        let k = self.position(index).ok_or(Error::IndexOutsideEllipse {
            ix: index.ix,
            iy: index.iy,
        })?;
        self.integral_at(k, spectrum, rule)
    }

    fn integral_at(&self, k: usize, spectrum: &AngularPowerSpectrum, rule: QuadratureRule) -> Result<f64> {
        let mut total = 0.0;
        for region in &self.pieces[k] {
            total += match spectrum {
                AngularPowerSpectrum::Isotropic => 4.0 * PI * region.vmf_mass(ZENITH, 0.0, rule)?,
                AngularPowerSpectrum::VmfMixture(components) => {
                    let mut s = 0.0;
                    for c in components {
                        s += c.weight * region.vmf_mass(c.mean_direction(), c.concentration, rule)?;
                    }
                    s
                }
            };
        }
        Ok(total)
    }

    /// Integrates `spectrum` over every harmonic region.
    pub fn integrate(&self, spectrum: &AngularPowerSpectrum, rule: QuadratureRule) -> Result<SpectralLattice> {
        let marginal_integrals = (0..self.len())
            .map(|k| self.integral_at(k, spectrum, rule))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralLattice {
            aperture_x: self.aperture_x,
            aperture_y: self.aperture_y,
            indices: self.indices.clone(),
            marginal_integrals,
        })
    }
}

/// Spectrum-weighted solid angle of one harmonic's region.
pub fn marginal_integral(
    index: HarmonicIndex,
    spectrum: &AngularPowerSpectrum,
    aperture_x: f64,
    aperture_y: f64,
) -> Result<f64> {
    if !index.in_ellipse(aperture_x, aperture_y) {
        return Err(Error::IndexOutsideEllipse {
            ix: index.ix,
            iy: index.iy,
        });
    }
    LatticeTiling::new(aperture_x, aperture_y)?.integral(index, spectrum, QuadratureRule::Adaptive)
}

/// Harmonics of one aperture with their spectral integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLattice {
    pub aperture_x: f64,
    pub aperture_y: f64,
    pub indices: Vec<HarmonicIndex>,
    pub marginal_integrals: Vec<f64>,
}

impl SpectralLattice {
    pub fn compute(aperture_x: f64, aperture_y: f64, spectrum: &AngularPowerSpectrum) -> Result<Self> {
        LatticeTiling::new(aperture_x, aperture_y)?.integrate(spectrum, QuadratureRule::Adaptive)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.marginal_integrals.iter().sum()
    }
}

/// Separable variances `σ²(l, m) = scale · I_R(l) · I_S(m)` with `Σ σ² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTable {
    pub bs_lattice: SpectralLattice,
    pub ue_lattice: SpectralLattice,
    pub scale: f64,
}

impl VarianceTable {
    /// Variance of the coefficient pairing UE harmonic `l` with BS harmonic `m`.
    pub fn variance(&self, l: usize, m: usize) -> f64 {
        self.scale * self.ue_lattice.marginal_integrals[l] * self.bs_lattice.marginal_integrals[m]
    }

    /// Number of `(l, m)` pairs.
    pub fn len(&self) -> usize {
        self.ue_lattice.len() * self.bs_lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_variance_table(bs_lattice: SpectralLattice, ue_lattice: SpectralLattice) -> Result<VarianceTable> {
    for lattice in [&bs_lattice, &ue_lattice] {
        if lattice.marginal_integrals.len() != lattice.indices.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.indices.len(),
                got: lattice.marginal_integrals.len(),
            });
        }
        if lattice.marginal_integrals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput("marginal integrals must be finite and non-negative".into()));
        }
    }
    let product = bs_lattice.total() * ue_lattice.total();
    if product.is_nan() || product <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(VarianceTable {
        bs_lattice,
        ue_lattice,
        scale: 1.0 / product,
    })
}
