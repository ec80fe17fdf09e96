//! Gauss-Legendre rules and VMF mass over convex spherical regions.
//!
//! A region is the part of the unit sphere satisfying a set of linear
//! constraints `g·x ≤ c`. The mass of a VMF component over such a region is
//! computed in polar coordinates around the component mean: the density
//! depends only on the polar angle γ, so the integral reduces to one dimension
//! over the arc measure `m(γ)` of the circle at angle γ that lies inside the
//! region. That arc measure is exact (an intersection of arcs); only the
//! one-dimensional integral is discretized, piecewise between the angles where
//! `m` is not smooth.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
const MIN_LEVEL_NODES: usize = 8;
const LEVELS: usize = 7; // 8 .. 512 nodes
const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-15;
/// Bands farther out than `α w` = this are skipped.
const NEGLIGIBLE_EXPONENT: f64 = 45.0;

/// Best-effort results coarser than this fail with `QuadratureNotConverged`.
const ACCEPT_TOL: f64 = 1e-3;
const ISOTROPIC_CONCENTRATION: f64 = 1e-6;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[0, 1]`, cached per refinement level.
fn unit_rule(level: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: [OnceLock<(Vec<f64>, Vec<f64>)>; LEVELS] = [const { OnceLock::new() }; LEVELS];
    RULES[level].get_or_init(|| unit_rule_uncached(MIN_LEVEL_NODES << level))
}

fn unit_rule_uncached(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|xi| 0.5 * (xi + 1.0)).collect(),
        w.iter().map(|wi| 0.5 * wi).collect(),
    )
}

/// How the one-dimensional integrals are discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureRule {
    /// Per-segment node doubling from 8 to 512 until relative change < 1e-10.
    #[default]
    Adaptive,
    /// Exactly this many Gauss-Legendre nodes per segment.
    Fixed(usize),
}

/// Half-space `g·x ≤ c` in R³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Constraint {
    pub g: [f64; 3],
    pub c: f64,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / dot(a, a).sqrt())
}

/// Convex region of the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalRegion {
    constraints: Vec<Constraint>,
}

impl SphericalRegion {
    /// Upper-hemisphere directions whose direction cosines `(u, v)` fall in a
    /// convex polygon given counter-clockwise.
    pub fn from_polygon(vertices: &[[f64; 2]]) -> Self {
        let mut constraints = vec![Constraint {
            g: [0.0, 0.0, -1.0],
            c: 0.0,
        }];
        for (k, p) in vertices.iter().enumerate() {
            let q = vertices[(k + 1) % vertices.len()];
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let len = dx.hypot(dy);
            if len == 0.0 {
                continue;
            }
            // interior lies to the left of p -> q
            constraints.push(Constraint {
                g: [dy / len, -dx / len, 0.0],
                c: (dy * p[0] - dx * p[1]) / len,
            });
        }
        Self { constraints }
    }

    fn contains(&self, x: [f64; 3], tol: f64) -> bool {
        self.constraints.iter().all(|k| dot(k.g, x) <= k.c + tol)
    }

    /// Probability mass of a VMF component (mean `mean`, concentration `alpha`)
    /// inside the region. With `alpha = 0` this is the solid angle over 4π.
    pub fn vmf_mass(&self, mean: [f64; 3], alpha: f64, rule: QuadratureRule) -> Result<f64> {
        let polar = PolarFrame::new(mean, alpha, &self.constraints);
        let breaks = polar.breakpoints(self);

        let mut total = 0.0;
        let mut error = 0.0;
        let mut scratch = ArcScratch::default();
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            // the whole sphere beyond w = a holds at most e^{-αa} of the mass
            if polar.alpha * a > NEGLIGIBLE_EXPONENT {
                break;
            }
            let (value, diff) = match rule {
                QuadratureRule::Fixed(n) => (polar.segment(a, b, &unit_rule_uncached(n), &mut scratch), 0.0),
                QuadratureRule::Adaptive => polar.segment_adaptive(a, b, &mut scratch),
            };
            total += value;
            error += diff;
        }
        let norm = TWO_PI * polar.y_max;
        let (total, error) = (total / norm, error / norm);
        if error > ACCEPT_TOL * total + 1e-15 {
            return Err(Error::QuadratureNotConverged(error / total.max(f64::MIN_POSITIVE)));
        }
        Ok(total)
    }
}

#[derive(Default)]
struct ArcScratch {
    current: Vec<(f64, f64)>,
    next: Vec<(f64, f64)>,
}

/// A constraint expressed in the polar frame of a VMF mean:
/// `g·x = A cos γ + B sin γ cos(β - β0)`.
struct PolarConstraint {
    a: f64,
    b: f64,
    beta0: f64,
    c: f64,
}

struct PolarFrame {
    mean: [f64; 3],
    alpha: f64,
    /// Upper limit of the integration variable `y = 1 - e^{-α w}` (or `w` if isotropic).
    y_max: f64,
    constraints: Vec<PolarConstraint>,
}

impl PolarFrame {
    fn new(mean: [f64; 3], alpha: f64, constraints: &[Constraint]) -> Self {
        let mean = normalize(mean);
        let helper = if mean[0].abs() < 0.6 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let e1 = normalize(cross(helper, mean));
        let e2 = cross(mean, e1);
        let polar = constraints
            .iter()
            .map(|k| {
                let (ga, gb) = (dot(k.g, e1), dot(k.g, e2));
                PolarConstraint {
                    a: dot(k.g, mean),
                    b: ga.hypot(gb),
                    beta0: gb.atan2(ga),
                    c: k.c,
                }
            })
            .collect();
        let isotropic = alpha < ISOTROPIC_CONCENTRATION;
        Self {
            mean,
            alpha: if isotropic { 0.0 } else { alpha },
            y_max: if isotropic { 2.0 } else { -(-2.0 * alpha).exp_m1() },
            constraints: polar,
        }
    }

    /// Values of `w = 1 - cos γ` where `m` can lose smoothness, sorted.
    fn breakpoints(&self, region: &SphericalRegion) -> Vec<f64> {
        let mut ws = vec![0.0, 2.0];

        // tangency of each constraint's boundary circle with the polar circle
        for k in &self.constraints {
            let r = k.a.hypot(k.b);
            if r == 0.0 || (k.c / r).abs() > 1.0 {
                continue;
            }
            let phi = k.b.atan2(k.a);
            let half = (k.c / r).acos();
            for base in [phi + half, phi - half, -phi + half, -phi - half] {
                for gamma in [base - TWO_PI, base, base + TWO_PI] {
                    if (0.0..=PI).contains(&gamma) {
                        ws.push(1.0 - gamma.cos());
                    }
                }
            }
        }

        // region vertices: pairwise boundary intersections that satisfy all constraints
        let cs = &region.constraints;
        for i in 0..cs.len() {
            for j in i + 1..cs.len() {
                for x in plane_pair_on_sphere(cs[i], cs[j]) {
                    if region.contains(x, 1e-12) {
                        ws.push((1.0 - dot(self.mean, x)).clamp(0.0, 2.0));
                    }
                }
            }
        }

        ws.sort_by(f64::total_cmp);
        ws.dedup();
        ws
    }

    /// Measure of the polar circle at `w = 1 - cos γ` inside the region.
    fn arc_measure(&self, w: f64, scratch: &mut ArcScratch) -> f64 {
        let cos_g = 1.0 - w;
        let sin_g = (w * (2.0 - w)).max(0.0).sqrt();
        let current = &mut scratch.current;
        let next = &mut scratch.next;
        current.clear();
        let mut full = true;
        let mut anchor = 0.0;
        for k in &self.constraints {
            let slack = k.c - k.a * cos_g;
            let reach = k.b * sin_g;
            if reach <= 1e-300 || slack >= reach {
                if slack < 0.0 && reach <= 1e-300 {
                    return 0.0;
                }
                continue;
            }
            if slack <= -reach {
                return 0.0;
            }
            // allowed: cos(β - β0) ≤ slack/reach, an arc centered opposite β0
            let half = PI - (slack / reach).acos();
            let center = k.beta0 + PI;
            if full {
                full = false;
                anchor = center;
                current.push((center - half, center + half));
                continue;
            }
            let mut shifted = center + TWO_PI * ((anchor - center) / TWO_PI).round();
            shifted -= TWO_PI;
            next.clear();
            for _ in 0..3 {
                let (lo, hi) = (shifted - half, shifted + half);
                for &(s, e) in current.iter() {
                    let (a, b) = (s.max(lo), e.min(hi));
                    if b > a {
                        next.push((a, b));
                    }
                }
                shifted += TWO_PI;
            }
            std::mem::swap(current, next);
            if current.is_empty() {
                return 0.0;
            }
        }
        if full {
            TWO_PI
        } else {
            current.iter().map(|(s, e)| e - s).sum::<f64>().min(TWO_PI)
        }
    }

    /// `∫ m dy` over `w ∈ [wa, wb]`, where `y = 1 - e^{-α w}` (or `y = w` if
    /// isotropic), using the smoothstep substitution `t = t0 + (t1 - t0)(3s² - 2s³)`.
    ///
    /// Far from the mean, `y` is close to one and loses relative precision, so
    /// such segments are parametrized by `1 - y = e^{-α w}` instead.
    fn segment(&self, wa: f64, wb: f64, rule: &(Vec<f64>, Vec<f64>), scratch: &mut ArcScratch) -> f64 {
        let alpha = self.alpha;
        let (t0, t1): (f64, f64);
        let w_of: &dyn Fn(f64) -> f64;
        let from_y = |y: f64| (-(-y).ln_1p() / alpha).min(2.0);
        let from_z = |z: f64| (-z.ln() / alpha).min(2.0);
        let identity = |w: f64| w;
        if alpha == 0.0 {
            (t0, t1) = (wa, wb);
            w_of = &identity;
        } else if alpha * wa < std::f64::consts::LN_2 {
            (t0, t1) = (-(-alpha * wa).exp_m1(), -(-alpha * wb).exp_m1());
            w_of = &from_y;
        } else {
            (t0, t1) = ((-alpha * wa).exp(), (-alpha * wb).exp());
            w_of = &from_z;
        }
        let h = t1 - t0;
        let sum: f64 = rule
            .0
            .iter()
            .zip(&rule.1)
            .map(|(&s, &wt)| {
                let t = t0 + h * s * s * (3.0 - 2.0 * s);
                let jac = 6.0 * s * (1.0 - s);
                wt * jac * self.arc_measure(w_of(t).clamp(wa, wb), scratch)
            })
            .sum();
        sum * h.abs()
    }

    /// Node doubling until converged; returns the value and the last absolute change.
    fn segment_adaptive(&self, wa: f64, wb: f64, scratch: &mut ArcScratch) -> (f64, f64) {
        let mut prev = self.segment(wa, wb, unit_rule(0), scratch);
        let mut diff = f64::INFINITY;
        for level in 1..LEVELS {
            let cur = self.segment(wa, wb, unit_rule(level), scratch);
            diff = (cur - prev).abs();
            if diff <= REL_TOL * cur.abs() + ABS_TOL * TWO_PI * self.segment_width(wa, wb) {
                return (cur, 0.0);
            }
            prev = cur;
        }
        (prev, diff)
    }

    /// Width of `[wa, wb]` in the integration variable `y`.
    fn segment_width(&self, wa: f64, wb: f64) -> f64 {
        if self.alpha == 0.0 {
            wb - wa
        } else {
            (-self.alpha * wa).exp() - (-self.alpha * wb).exp()
        }
    }
}

/// Points of the unit sphere on both constraint boundaries.
fn plane_pair_on_sphere(p: Constraint, q: Constraint) -> Vec<[f64; 3]> {
    let d = cross(p.g, q.g);
    let dd = dot(d, d);
    if dd < 1e-24 {
        return Vec::new();
    }
    let (gpp, gqq, gpq) = (dot(p.g, p.g), dot(q.g, q.g), dot(p.g, q.g));
    let det = gpp * gqq - gpq * gpq;
    let base = add(
        scale(p.g, (p.c * gqq - q.c * gpq) / det),
        scale(q.g, (q.c * gpp - p.c * gpq) / det),
    );
    let rem = 1.0 - dot(base, base);
    if rem < 0.0 {
        return Vec::new();
    }
    let t = rem.sqrt();
    let dir = scale(d, 1.0 / dd.sqrt());
    vec![add(base, scale(dir, t)), add(base, scale(dir, -t))]
}
