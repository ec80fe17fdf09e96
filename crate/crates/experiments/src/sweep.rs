//! Monte Carlo sweeps over the spacing list.

use holo_core::{derive_key, drop_users, mu_sum_capacity, sample_channel, su_capacity, CapacityReport};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{ExperimentError, Result};
use crate::scenario::{Scenario, SpacingSetup};

const DROP_DOMAIN: u64 = 0x6472_6f70; // "drop"
const USER_DOMAIN: u64 = 0x7573_6572; // "user"
const REALIZATION_DOMAIN: u64 = 0x7265_616c; // "real"

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub spacing_wl: f64,
    pub efficiency_mode: String,
    pub spectrum: String,
    pub pattern: String,
    pub mean_bits: f64,
    pub std_bits: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Realizations whose multi-user solver hit the iteration cap.
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ScenarioConfig,
    pub rows: Vec<SweepRow>,
}

/// Pairwise (cascade) summation; the result depends only on the slice order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&squares) / (n - 1.0)).sqrt())
}

fn row(config: &ScenarioConfig, spacing: f64, capacities: &[f64], not_converged: usize) -> SweepRow {
    let (mean_bits, std_bits) = mean_and_std(capacities);
    SweepRow {
        spacing_wl: spacing,
        efficiency_mode: config.efficiency_spec.label(),
        spectrum: config.spectrum_spec.label().to_string(),
        pattern: config.pattern_spec.label().to_string(),
        mean_bits,
        std_bits,
        realizations: capacities.len(),
        seed: config.seed,
        not_converged,
    }
}

fn setups(scenario: &Scenario) -> Result<Vec<SpacingSetup>> {
    (0..scenario.config.spacing_list.len())
        .map(|k| scenario.spacing_setup(k))
        .collect()
}

pub fn run_single_user_sweep(scenario: &Scenario) -> Result<SweepResult> {
    let config = &scenario.config;
    let mut rows = Vec::with_capacity(config.spacing_list.len());
    for setup in setups(scenario)? {
        let plan = scenario.plan(&setup)?;
        let capacities = (0..config.realizations as u64)
            .into_par_iter()
            .map(|r| {
                let h = sample_channel(&plan, config.seed, r).matrix;
                Ok(su_capacity(&h, config.snr_db)?.value_bits)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row(config, setup.spacing, &capacities, 0));
    }
    Ok(SweepResult {
        config: config.clone(),
        rows,
    })
}

/// Per-user channels of realization `r` at every spacing.
fn multi_user_channels(
    scenario: &Scenario,
    setups: &[SpacingSetup],
    r: u64,
) -> Result<Vec<Vec<DMatrix<Complex64>>>> {
    let config = &scenario.config;
    let drops = drop_users(config.users, derive_key(config.seed, DROP_DOMAIN, r));
    let mut users = Vec::with_capacity(drops.len());
    for (k, user) in drops.iter().enumerate() {
        let user_seed = derive_key(config.seed, USER_DOMAIN, k as u64);
        let lattice = scenario.user_lattice(user, derive_key(user_seed, REALIZATION_DOMAIN, r))?;
        let scale = Complex64::new(10f64.powf((config.snr_db + user.snr_db) / 20.0), 0.0);
        users.push((user_seed, lattice, scale));
    }
    setups
        .iter()
        .map(|setup| {
            users
                .iter()
                .map(|(user_seed, lattice, scale)| {
                    let plan = scenario.plan_with_ue_lattice(setup, lattice.clone())?;
                    Ok(sample_channel(&plan, *user_seed, r).matrix * *scale)
                })
                .collect()
        })
        .collect()
}

/// Multi-user capacity of one realization at entry `k` of the spacing list.
pub fn multi_user_realization(scenario: &Scenario, k: usize, r: u64) -> Result<CapacityReport> {
    let setup = scenario.spacing_setup(k)?;
    let channels = multi_user_channels(scenario, std::slice::from_ref(&setup), r)?;
    Ok(mu_sum_capacity(&channels[0], 1.0)?)
}

/// Single-user capacity of one realization at entry `k` of the spacing list.
pub fn single_user_realization(scenario: &Scenario, k: usize, r: u64) -> Result<CapacityReport> {
    let setup = scenario.spacing_setup(k)?;
    let plan = scenario.plan(&setup)?;
    let h = sample_channel(&plan, scenario.config.seed, r).matrix;
    Ok(su_capacity(&h, scenario.config.snr_db)?)
}

pub fn run_multi_user_sweep(scenario: &Scenario) -> Result<SweepResult> {
    let config = &scenario.config;
    let setups = setups(scenario)?;
    // one entry per realization, each holding (capacity, converged) per spacing
    let per_realization = (0..config.realizations as u64)
        .into_par_iter()
        .map(|r| {
            multi_user_channels(scenario, &setups, r)?
                .iter()
                .map(|channels| {
                    let report = mu_sum_capacity(channels, 1.0)?;
                    Ok((report.value_bits, report.converged))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = setups
        .iter()
        .enumerate()
        .map(|(k, setup)| {
            let capacities: Vec<f64> = per_realization.iter().map(|v| v[k].0).collect();
            let misses = per_realization.iter().filter(|v| !v[k].1).count();
            row(config, setup.spacing, &capacities, misses)
        })
        .collect();
    Ok(SweepResult {
        config: config.clone(),
        rows,
    })
}

/// Runs the sweep the configuration asks for on `jobs` worker threads
/// (all available cores when `None`). Results do not depend on `jobs`.
pub fn run_sweep(config: &ScenarioConfig, jobs: Option<usize>) -> Result<SweepResult> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(ExperimentError::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ExperimentError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let scenario = Scenario::prepare(config)?;
        if config.users == 1 {
            run_single_user_sweep(&scenario)
        } else {
            run_multi_user_sweep(&scenario)
        }
    })
}
