use anharmonic::error::Error;
use anharmonic::params::{GridSpec, OscillatorParams};
use anharmonic::spectral::{
    compute_spectrum, discretize_hamiltonian, geometric_masses, rigidity_mass_scan, solve_spectrum, SpectralOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn ground_state(p: &OscillatorParams, half_width: f64, points: usize) -> f64 {
    let h = discretize_hamiltonian(p, &GridSpec::new(half_width, points).unwrap()).unwrap();
    h.eigenvalue(0).unwrap()
}

#[test]
fn harmonic_ground_state_on_coarse_grid() {
    let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 1.0).unwrap().harmonic();
    assert!((ground_state(&p, 10.0, 2000) - 0.5).abs() < 1e-4);
}

#[test]
fn harmonic_ladder_at_default_width() {
    for (m, a) in [(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)] {
        let p = OscillatorParams::new(m, a, 1.0, 1.0, 0.0, 1, 1.0).unwrap().harmonic();
        let half_width = 10.0 * (m * a).powf(-0.25);
        let h = discretize_hamiltonian(&p, &GridSpec::new(half_width, 4000).unwrap()).unwrap();
        let s = compute_spectrum(&h, 8, m).unwrap();
        let omega = (a / m).sqrt();
        for (n, e) in s.eigenvalues.iter().enumerate() {
            assert!((e - (n as f64 + 0.5) * omega).abs() < 1e-4, "m={m} a={a} n={n} e={e}");
        }
    }
}

#[test]
fn three_point_stencil_structure() {
    let p = OscillatorParams::new(1.3, 1.0, 1.0, 1.0, 0.1, 1, 1.0).unwrap();
    let grid = GridSpec::new(2.0, 3).unwrap();
    let h = discretize_hamiltonian(&p, &grid).unwrap();
    let expected = -1.0 / (2.0 * 1.3 * grid.spacing().powi(2));
    assert_eq!(h.dim(), 3);
    assert_eq!(h.off_diagonal(), &[expected, expected]);
    assert_eq!(h.get(0, 1), h.get(1, 0));
    assert_eq!(h.get(0, 2), 0.0);
}

#[test]
fn ground_state_against_refined_extrapolation() {
    let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 1.0).unwrap();
    let (e1, e2, e4) = (ground_state(&p, 8.0, 4000), ground_state(&p, 8.0, 8000), ground_state(&p, 8.0, 16000));
    // second order: successive differences shrink by about four
    assert!((e1 - e2).abs() < 4.0 * (e2 - e4).abs() * 1.01);
    assert!((e1 - e2).abs() > 3.9 * (e2 - e4).abs());
    let oracle = e4 + (e4 - e2) / 3.0;
    assert!((e2 - oracle).abs() < 1e-6, "N=8000: {}", (e2 - oracle).abs());
    // N=4000 sits just above 1e-6 (about 1.2e-6)
    assert!((e1 - oracle).abs() < 1.5e-6, "N=4000: {}", (e1 - oracle).abs());
}

#[test]
fn double_well_levels_match_dense_diagonalization() {
    let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.0, 1, 1.0).unwrap();
    let full = solve_spectrum(&p, &SpectralOptions { levels: 8, points: 2000, half_width: None }).unwrap();
    let half = GridSpec::new(full.grid.half_width, 1000).unwrap();
    let h = discretize_hamiltonian(&p, &half).unwrap();
    let s = compute_spectrum(&h, 8, p.m).unwrap();
    let n = h.dim();
    let dense = DMatrix::from_fn(n, n, |i, j| h.get(i, j));
    let mut eigs: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    for (k, (a, b)) in s.eigenvalues.iter().zip(&eigs).enumerate() {
        assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "level {k}: {a} vs {b}");
    }
    let gaps: Vec<f64> = eigs[..8].windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.iter().all(|&g| g > 0.0));
    let argmin = (0..gaps.len()).min_by(|&i, &j| gaps[i].total_cmp(&gaps[j])).unwrap();
    assert_eq!(s.gap_index, argmin);
    assert_eq!(full.spectrum.gap_index, argmin);
    // tunnelling splitting of the lowest doublet is the smallest gap
    assert_eq!(argmin, 0);
}

#[test]
fn rescaled_model_keeps_a_valid_stencil() {
    let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.0, 1, 1.0).unwrap();
    for lambda in [0.5f64, 2.0, 3.0] {
        let l2 = lambda * lambda;
        let q = OscillatorParams { a: p.a * l2, b1: p.b1 * l2, b2: p.b2 * l2, ..p };
        let grid = GridSpec::new(8.0 / lambda.sqrt(), 500).unwrap();
        let h = discretize_hamiltonian(&q, &grid).unwrap();
        let off = -1.0 / (2.0 * q.m * grid.spacing().powi(2));
        assert!(h.off_diagonal().iter().all(|&x| x == off));
        assert!(h.diagonal().iter().all(|x| x.is_finite()));
        assert!(compute_spectrum(&h, 4, q.m).is_ok());
    }
}

#[test]
fn small_mass_slope_over_three_decades() {
    let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 1.0).unwrap();
    let mut masses = geometric_masses(1e-3, 1.0, 19);
    masses.reverse();
    let scan = rigidity_mass_scan(&p, &masses, &SpectralOptions::default()).unwrap();
    let slope = scan.small_mass_slope.unwrap();
    assert!((-0.38..=-0.28).contains(&slope), "slope {slope}");
    assert_eq!(scan.points[0].m, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn double_well_spectra_are_simple_and_bounded(
        m in 0.2f64..5.0,
        a in 0.3f64..3.0,
        excess in 0.05f64..3.0,
        b2 in 0.1f64..2.0,
    ) {
        let p = OscillatorParams::new(m, a, 0.5 * a + excess, b2, 0.0, 1, 1.0).unwrap();
        match solve_spectrum(&p, &SpectralOptions { levels: 6, points: 1500, half_width: None }) {
            Ok(sol) => {
                let s = sol.spectrum;
                prop_assert!(s.eigenvalues.windows(2).all(|w| w[1] > w[0]));
                let min_gap = s.eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(s.gap, min_gap);
                prop_assert_eq!(s.rigidity, m * min_gap * min_gap);
                prop_assert!(s.rigidity <= p.rigidity_bound(), "R_m {} above {}", s.rigidity, p.rigidity_bound());
            }
            // unresolvable tunnelling splittings must surface as an error
            Err(Error::Degeneracy { gap, tolerance, .. }) => prop_assert!(gap <= tolerance),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}
