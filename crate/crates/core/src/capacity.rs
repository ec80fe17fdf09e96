//! Single-user water-filling capacity, multi-user downlink sum capacity and
//! user drops with relative pathloss.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{derive_key, KeyedStream};

/// Stop iterating once the sum rate changes by less than this (bits/s/Hz).
pub const MU_TOLERANCE_BITS: f64 = 1e-6;
pub const MU_MAX_ITERATIONS: usize = 1000;

/// Singular values below this count as zero.
const ZERO_SINGULAR_VALUE: f64 = 1e-300;
/// Eigenvalues below this fraction of the largest are dropped when compressing.
const RANK_TOLERANCE: f64 = 1e-13;

const DROP_DOMAIN: u64 = 0x6472_6f70; // "drop"

/// Per-mode transmit powers of a water-filling solution.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub water_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub value_bits: f64,
    /// One allocation per user (a single entry for point-to-point links).
    pub allocations: Vec<PowerAllocation>,
    pub iterations: usize,
    pub converged: bool,
    /// Sum rate after each iteration, starting from the all-zero covariance.
    pub rate_trace: Vec<f64>,
}

fn validate_gains(gains: &[f64]) -> Result<()> {
    if gains.is_empty() {
        return Err(Error::EmptyGains);
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::InvalidInput(format!("gain {g} must be finite and non-negative")));
    }
    Ok(())
}

/// Water-filling over parallel channels with gains `g_i`: `p_i = (μ − 1/g_i)⁺`,
/// `Σ p_i = total_power`. Returns the allocation and `Σ log2(1 + p_i g_i)`.
///
/// The water level comes from an exact active-set search over the gains in
/// descending order. Zero gains are never active.
pub fn waterfill(gains: &[f64], total_power: f64) -> Result<(PowerAllocation, f64)> {
    validate_gains(gains)?;
    if !(total_power > 0.0 && total_power.is_finite()) {
        return Err(Error::NonPositiveInput("total_power"));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::InvalidInput("no positive gain to allocate power to".into()));
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));

    // the active set is a prefix of the sorted gains; take the largest consistent one
    let mut inverse_sum = 0.0;
    let mut level = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let candidate_sum = inverse_sum + 1.0 / gains[i];
        let candidate = (total_power + candidate_sum) / (k + 1) as f64;
        if candidate <= 1.0 / gains[i] {
            break;
        }
        inverse_sum = candidate_sum;
        level = candidate;
    }

    let powers: Vec<f64> = gains
        .iter()
        .map(|&g| if g > 0.0 { (level - 1.0 / g).max(0.0) } else { 0.0 })
        .collect();
    let capacity = powers.iter().zip(gains).map(|(p, g)| (p * g).ln_1p()).sum::<f64>() / std::f64::consts::LN_2;
    Ok((
        PowerAllocation {
            powers,
            water_level: level,
        },
        capacity,
    ))
}

/// Eigenvalues (descending, clamped at zero) and eigenvectors of a Hermitian matrix.
fn hermitian_eigen(m: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    (values, vectors)
}

/// Squared singular values of `h`, from the smaller Gram matrix.
pub fn squared_singular_values(h: &DMatrix<Complex64>) -> Vec<f64> {
    let gram = if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    };
    hermitian_eigen(gram).0
}

/// Point-to-point capacity with unit noise per receive element and total
/// transmit power `10^(snr_db/10)`.
pub fn su_capacity(h: &DMatrix<Complex64>, snr_db: f64) -> Result<CapacityReport> {
    if h.is_empty() || h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidInput("channel must be non-empty and finite".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("snr_db {snr_db} must be finite")));
    }
    let gains = squared_singular_values(h);
    if gains.iter().all(|&g| g.sqrt() < ZERO_SINGULAR_VALUE) {
        return Err(Error::ZeroChannel);
    }
    let (allocation, value_bits) = waterfill(&gains, 10f64.powf(snr_db / 10.0))?;
    Ok(CapacityReport {
        value_bits,
        allocations: vec![allocation],
        iterations: 1,
        converged: true,
        rate_trace: vec![0.0, value_bits],
    })
}

/// Distance-dependent part of the UMa NLOS pathloss relative to 50 m,
/// as an SNR offset in dB: `−39.08 log10(d / 50)`.
pub fn uma_pathloss_delta_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0 && distance_m.is_finite()) {
        return Err(Error::NonPositiveDistance(distance_m));
    }
    Ok(-39.08 * (distance_m / 50.0).log10())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserDrop {
    pub distance_m: f64,
    pub azimuth_deg: f64,
    pub snr_db: f64,
    /// Azimuth rotation of the UE array.
    pub orientation_deg: f64,
}

/// Drops `k` users uniformly in the sector `[−120°, 120°]` at `[25, 100]` m.
/// User `i` depends only on `(seed, i)`.
pub fn drop_users(k: usize, seed: u64) -> Vec<UserDrop> {
    (0..k)
        .map(|i| {
            let mut s = KeyedStream::new(derive_key(seed, DROP_DOMAIN, i as u64), 0);
            let distance_m = s.uniform_in(25.0, 100.0);
            let azimuth_deg = s.uniform_in(-120.0, 120.0);
            let orientation_deg = s.uniform_in(-180.0, 180.0);
            UserDrop {
                distance_m,
                azimuth_deg,
                snr_db: uma_pathloss_delta_db(distance_m).expect("distance is positive"),
                orientation_deg,
            }
        })
        .collect()
}

/// Hermitian positive-definite log-determinant in bits.
fn log2_det(m: DMatrix<Complex64>) -> f64 {
    let chol = Cholesky::new(m).expect("matrix is Hermitian positive definite");
    2.0 * chol.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>() / std::f64::consts::LN_2
}

/// Reduces the dual multiple-access channel to an equivalent one of minimal
/// dimension. User `k`'s uplink channel `H_k^H` is replaced by `G_k` with
/// `G_k Q G_k^H` unitarily similar to `H_k^H Q' H_k` on the relevant subspace.
fn compress(channels: &[DMatrix<Complex64>]) -> Vec<DMatrix<Complex64>> {
    // per user: orthonormal basis U_k of the column space of H_k, W_k = H_k^H U_k
    let mut ws = Vec::with_capacity(channels.len());
    for h in channels {
        let (values, vectors) = hermitian_eigen(h * h.adjoint());
        let top = values.first().copied().unwrap_or(0.0);
        let rank = values.iter().take_while(|&&v| v > RANK_TOLERANCE * top && v > 0.0).count();
        ws.push(h.adjoint() * vectors.columns(0, rank));
    }
    let total: usize = ws.iter().map(|w| w.ncols()).sum();
    if total == 0 {
        return ws.iter().map(|w| DMatrix::zeros(0, w.ncols())).collect();
    }
    let stacked = DMatrix::from_columns(&ws.iter().flat_map(|w| w.column_iter()).collect::<Vec<_>>());
    let (values, vectors) = hermitian_eigen(stacked.adjoint() * &stacked);
    let top = values[0];
    let rank = values.iter().take_while(|&&v| v > RANK_TOLERANCE * top).count();
    let mut z = &stacked * vectors.columns(0, rank);
    for (j, mut col) in z.column_iter_mut().enumerate() {
        col /= Complex64::new(values[j].sqrt(), 0.0);
    }
    ws.iter().map(|w| z.adjoint() * w).collect()
}

/// Downlink sum capacity under a total power budget, via sum-power iterative
/// water-filling on the dual multiple-access channel with averaged updates.
///
/// The reported value is the better of the final averaged covariances and
/// the final water-filling step; `rate_trace` follows the averaged ones.
///
/// `channels[k]` is user `k`'s `N_R,k × N_S` channel with its SNR scaling
/// already applied; noise is unit per receive element.
pub fn mu_sum_capacity(channels: &[DMatrix<Complex64>], total_power: f64) -> Result<CapacityReport> {
    if channels.is_empty() {
        return Err(Error::InvalidInput("at least one user is required".into()));
    }
    let n_s = channels[0].ncols();
    for h in channels {
        if h.ncols() != n_s {
            return Err(Error::DimensionMismatch {
                expected: n_s,
                got: h.ncols(),
            });
        }
        if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidInput("channels must be finite".into()));
        }
    }
    if !(total_power > 0.0 && total_power.is_finite()) {
        return Err(Error::NonPositiveInput("total_power"));
    }

    let g = compress(channels);
    let k_users = g.len();
    let dim = g.iter().map(|m| m.nrows()).max().unwrap_or(0);
    let empty_allocations = || {
        g.iter()
            .map(|m| PowerAllocation {
                powers: vec![0.0; m.ncols()],
                water_level: 0.0,
            })
            .collect::<Vec<_>>()
    };
    if dim == 0 {
        return Ok(CapacityReport {
            value_bits: 0.0,
            allocations: empty_allocations(),
            iterations: 0,
            converged: true,
            rate_trace: vec![0.0],
        });
    }

    let identity = DMatrix::<Complex64>::identity(dim, dim);
    let contribution = |gk: &DMatrix<Complex64>, qk: &DMatrix<Complex64>| gk * qk * gk.adjoint();
    let sum_rate = |q: &[DMatrix<Complex64>]| {
        let mut m = identity.clone();
        for (gk, qk) in g.iter().zip(q) {
            m += contribution(gk, qk);
        }
        log2_det(m)
    };

    let mut q: Vec<DMatrix<Complex64>> = g.iter().map(|m| DMatrix::zeros(m.ncols(), m.ncols())).collect();
    let mut latest = q.clone();
    let mut allocations = empty_allocations();
    let mut rate_trace = vec![0.0];
    let mut converged = false;
    let mut iterations = 0;
    // users whose channel vanished take no part in the averaging
    let active = g.iter().filter(|m| m.ncols() > 0).count() as f64;
    let keep = (active - 1.0) / active;
    let take = 1.0 / active;

    while iterations < MU_MAX_ITERATIONS {
        iterations += 1;
        let mut total = identity.clone();
        let parts: Vec<DMatrix<Complex64>> = g.iter().zip(&q).map(|(gk, qk)| contribution(gk, qk)).collect();
        for p in &parts {
            total += p;
        }

        // effective single-user channels against the other users' interference
        let mut modes = Vec::with_capacity(k_users);
        let mut gains = Vec::new();
        for (k, gk) in g.iter().enumerate() {
            if gk.ncols() == 0 {
                modes.push((Vec::new(), DMatrix::zeros(0, 0)));
                continue;
            }
            let interference = &total - &parts[k];
            let chol = Cholesky::new(interference).expect("interference-plus-noise is positive definite");
            let effective = gk.adjoint() * chol.solve(gk);
            let (values, vectors) = hermitian_eigen(effective);
            gains.extend_from_slice(&values);
            modes.push((values, vectors));
        }
        if gains.iter().all(|&v| v <= 0.0) {
            converged = true;
            break;
        }
        let (joint, _) = waterfill(&gains, total_power)?;

        let mut offset = 0;
        for (k, (values, vectors)) in modes.iter().enumerate() {
            let n = values.len();
            let powers = &joint.powers[offset..offset + n];
            offset += n;
            let d = DVector::from_iterator(n, powers.iter().map(|&p| Complex64::new(p, 0.0)));
            let fresh = vectors * DMatrix::from_diagonal(&d) * vectors.adjoint();
            q[k] = &q[k] * Complex64::new(keep, 0.0) + &fresh * Complex64::new(take, 0.0);
            latest[k] = fresh;
            allocations[k] = PowerAllocation {
                powers: powers.to_vec(),
                water_level: joint.water_level,
            };
        }

        let rate = sum_rate(&q);
        let previous = *rate_trace.last().unwrap();
        rate_trace.push(rate);
        if (rate - previous).abs() < MU_TOLERANCE_BITS {
            converged = true;
            break;
        }
    }

    // the last un-averaged water-filling step is feasible too and often closer
    let value_bits = rate_trace.last().unwrap().max(sum_rate(&latest));
    Ok(CapacityReport {
        value_bits,
        allocations,
        iterations,
        converged,
        rate_trace,
    })
}
