use std::time::Instant;

use holo_core::{
    build_coupling_profile, build_plan, sample_channel, spectra_from_cdl, ArrayGeometry, AngularPowerSpectrum,
    CdlTable, CouplingProfile, EfficiencyMode, PatternSource, SynthesisPlan,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn plan(bs: (f64, f64), ue: (f64, f64), bs_spec: &AngularPowerSpectrum, ue_spec: &AngularPowerSpectrum) -> SynthesisPlan {
    let g_s = ArrayGeometry::square(bs.0, bs.1).unwrap();
    let g_r = ArrayGeometry::square(ue.0, ue.1).unwrap();
    build_plan(
        &g_s,
        &g_r,
        bs_spec,
        ue_spec,
        &CouplingProfile::ideal(g_s.len()),
        &CouplingProfile::ideal(g_r.len()),
    )
    .unwrap()
}

fn cdl_b() -> (AngularPowerSpectrum, AngularPowerSpectrum) {
    let table = CdlTable::builtin("cdl-b").unwrap();
    spectra_from_cdl(&table.rows, 10.0, 20.0).unwrap()
}

#[test]
fn sample_power_matches_expectation() {
    let iso = AngularPowerSpectrum::Isotropic;
    let (bs_cdl, ue_cdl) = cdl_b();
    let cases = [
        (plan((4.0, 0.5), (1.0, 0.5), &iso, &iso), "isotropic, half wavelength"),
        (plan((4.0, 0.25), (1.0, 0.25), &iso, &iso), "isotropic, quarter wavelength"),
        (plan((4.0, 0.25), (1.0, 0.25), &bs_cdl, &ue_cdl), "cdl-b, quarter wavelength"),
    ];
    for (p, label) in &cases {
        let (n_r, n_s) = p.shape();
        let expected = p.expected_frobenius();
        assert!((expected - (n_r * n_s) as f64).abs() < 1e-9 * expected, "{label}: {expected}");
        let draws = 2000;
        let mean = (0..draws)
            .map(|r| sample_channel(p, 11, r).matrix.norm_squared())
            .sum::<f64>()
            / draws as f64;
        let rel = (mean - expected).abs() / expected;
        assert!(rel < 0.05, "{label}: sample mean {mean} vs {expected}");
    }
}

/// `E[H_ij conj(H_kl)]` by direct expansion of the synthesis formula over
/// the plan's bases, amplitudes and variances.
fn implied_covariance(p: &SynthesisPlan, a: (usize, usize), b: (usize, usize)) -> Complex64 {
    let (n_r, n_s) = p.shape();
    let scale = (n_r * n_s) as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for l in 0..p.ue_basis.ncols() {
        for m in 0..p.bs_basis.ncols() {
            let term_a = p.ue_amplitude[a.0] * p.ue_basis[(a.0, l)] * p.bs_amplitude[a.1] * p.bs_basis[(a.1, m)].conj();
            let term_b = p.ue_amplitude[b.0] * p.ue_basis[(b.0, l)] * p.bs_amplitude[b.1] * p.bs_basis[(b.1, m)].conj();
            total += term_a * term_b.conj() * p.variance_table.variance(l, m);
        }
    }
    total * scale
}

#[test]
fn toy_covariance_matches_expansion() {
    let (bs_cdl, ue_cdl) = cdl_b();
    let p = plan((1.0, 0.5), (1.0, 0.5), &bs_cdl, &ue_cdl);
    assert_eq!(p.shape(), (4, 4));
    let draws = 20_000u64;
    let samples: Vec<DMatrix<Complex64>> = (0..draws).map(|r| sample_channel(&p, 5, r).matrix).collect();

    let entries: Vec<(usize, usize)> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
    let mut strong = 0;
    for &a in &entries {
        for &b in &entries {
            let oracle = implied_covariance(&p, a, b);
            let estimate = samples.iter().map(|h| h[a] * h[b].conj()).sum::<Complex64>() / draws as f64;
            let scale = (implied_covariance(&p, a, a).re * implied_covariance(&p, b, b).re).sqrt();
            assert!((estimate - oracle).norm() <= 0.1 * scale, "{a:?},{b:?}: {estimate} vs {oracle}");
            if oracle.norm() >= 0.3 * scale {
                strong += 1;
                assert!((estimate - oracle).norm() <= 0.1 * oracle.norm(), "{a:?},{b:?}: {estimate} vs {oracle}");
            }
        }
    }
    assert!(strong >= 16, "only {strong} well-conditioned pairs");
}

#[test]
fn scaling_amplitudes_scales_channel_exactly() {
    let (bs_cdl, ue_cdl) = cdl_b();
    let g_s = ArrayGeometry::square(4.0, 0.25).unwrap();
    let g_r = ArrayGeometry::square(1.0, 0.25).unwrap();
    let bs = build_coupling_profile(&g_s, PatternSource::AnalyticDipole, &EfficiencyMode::RelativeEta(0.2)).unwrap();
    let ue = build_coupling_profile(&g_r, PatternSource::Uniform, &EfficiencyMode::HannanLimited).unwrap();
    let boosted = |c: &CouplingProfile| CouplingProfile {
        efficiencies: c.efficiencies.iter().map(|e| 4.0 * e).collect(),
        ..c.clone()
    };
    let base = build_plan(&g_s, &g_r, &bs_cdl, &ue_cdl, &bs, &ue).unwrap();
    let scaled = build_plan(&g_s, &g_r, &bs_cdl, &ue_cdl, &boosted(&bs), &boosted(&ue)).unwrap();
    for r in 0..20 {
        let h = sample_channel(&base, 9, r).matrix;
        let h4 = sample_channel(&scaled, 9, r).matrix;
        assert_eq!(h4, h * Complex64::new(4.0, 0.0));
    }
}

#[test]
fn realizations_do_not_depend_on_order() {
    let (bs_cdl, ue_cdl) = cdl_b();
    let p = plan((4.0, 0.5), (1.0, 0.5), &bs_cdl, &ue_cdl);
    let forward: Vec<_> = (0..8).map(|r| sample_channel(&p, 1, r)).collect();
    for r in (0..8).rev() {
        assert_eq!(sample_channel(&p, 1, r), forward[r as usize]);
    }
    assert_ne!(sample_channel(&p, 2, 0).matrix, forward[0].matrix);
}

#[test]
fn cdl_plan_builds_quickly() {
    let (bs_cdl, ue_cdl) = cdl_b();
    let start = Instant::now();
    let p = plan((4.0, 0.125), (1.0, 0.125), &bs_cdl, &ue_cdl);
    assert_eq!(p.shape(), (64, 1024));
    assert_eq!(p.harmonic_counts(), (5, 49));
    assert!(start.elapsed().as_secs_f64() < 10.0, "{:?}", start.elapsed());
}
