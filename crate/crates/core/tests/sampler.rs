use anharmonic::loops::{default_clamp, BoundaryCondition, GaussianLoopFactory, LatticeBox, LoopConfiguration};
use anharmonic::oracle::single_site_moments;
use anharmonic::params::OscillatorParams;
use anharmonic::sampler::{
    metropolis_chain, parallel_chains, Chain, ChainSettings, EstimateReport, MatsubaraObserver, MatsubaraPoint,
    OrderParameterObserver, TestFunction,
};
use anharmonic::stats::batch_means;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn combined(a: &EstimateReport, b: &EstimateReport) -> f64 {
    (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
}

#[test]
fn harmonic_chain_is_stationary_from_an_exact_draw() {
    let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 2.0).unwrap().harmonic();
    let f = GaussianLoopFactory::for_params(&p, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start =
        LoopConfiguration::new(LatticeBox::new(vec![1]).unwrap(), vec![f.sample(&mut rng)], BoundaryCondition::Free)
            .unwrap();
    let (mut one, mut two) = (Vec::new(), Vec::new());
    let mut record = |c: &LoopConfiguration| {
        let x = c.site(0).values();
        one.push(x[3] * x[3]);
        two.push(x[0] * x[5]);
    };
    let settings = ChainSettings { sweeps: 40_000, burn_in: 0, seed: 8, ..ChainSettings::default() };
    metropolis_chain(start, &p, &f, &settings, &mut [&mut record]).unwrap();
    for (series, target) in [(&one, f.covariance(3, 3)), (&two, f.covariance(0, 5))] {
        let (first, second) = series.split_at(series.len() / 2);
        let ((m1, e1), (m2, e2)) = (batch_means(first), batch_means(second));
        assert!((m1 - m2).abs() <= 4.0 * (e1 * e1 + e2 * e2).sqrt(), "{m1}±{e1} vs {m2}±{e2}");
        assert!((m1 - target).abs() <= 4.0 * e1, "{m1}±{e1} vs {target}");
    }
}

#[test]
fn three_slice_moments_match_quadrature() {
    let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.5, 0.0, 1, 2.0).unwrap();
    let exact = single_site_moments(&p, 3, 0.1, 9.0).unwrap();
    let f = GaussianLoopFactory::for_params(&p, 3).unwrap();
    let start =
        LoopConfiguration::uniform(LatticeBox::new(vec![1]).unwrap(), 0.0, 3, 2.0, BoundaryCondition::Free).unwrap();
    let mut moments: [Vec<f64>; 4] = Default::default();
    let mut record = |c: &LoopConfiguration| {
        for (k, series) in moments.iter_mut().enumerate() {
            series.push(c.site(0).values().iter().map(|x| x.powi(k as i32 + 1)).sum::<f64>() / 3.0);
        }
    };
    let settings = ChainSettings { sweeps: 200_000, burn_in: 1_000, seed: 21, ..ChainSettings::default() };
    metropolis_chain(start, &p, &f, &settings, &mut [&mut record]).unwrap();
    let targets = [0.0, exact.second, 0.0, exact.fourth];
    for (k, (series, target)) in moments.iter().zip(targets).enumerate() {
        let (m, e) = batch_means(series);
        assert!((m - target).abs() <= 4.0 * e, "moment {}: {m} ± {e} vs {target}", k + 1);
    }
}

#[test]
fn mirrored_chain_flips_every_sweep() {
    let p = OscillatorParams::new(1.0, 1.0, 2.0, 0.25, 0.5, 2, 2.0).unwrap();
    let f = GaussianLoopFactory::for_params(&p, 8).unwrap();
    let c = default_clamp(&p).unwrap();
    let start = LoopConfiguration::uniform(LatticeBox::new(vec![3, 2]).unwrap(), c, 8, 2.0, BoundaryCondition::PlusClamped(c))
        .unwrap();
    let settings = ChainSettings { seed: 77, ..ChainSettings::default() };
    let mut plus = Chain::new(start.clone(), &p, &f, &settings).unwrap();
    let mut minus = Chain::mirrored_of(&start, &p, &f, &settings).unwrap();
    for _ in 0..200 {
        plus.sweep();
        minus.sweep();
        assert_eq!(minus.configuration(), &plus.configuration().mirrored());
    }
    assert_eq!(plus.counters(), minus.counters());
}

#[test]
fn free_order_parameter_lies_between_the_clamped_ones() {
    let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.3, 2, 2.0).unwrap();
    let f = GaussianLoopFactory::for_params(&p, 12).unwrap();
    let c = default_clamp(&p).unwrap();
    let volume = LatticeBox::new(vec![3, 3]).unwrap();
    let settings = ChainSettings { sweeps: 10_000, burn_in: 500, seed: 31, ..ChainSettings::default() };
    let estimate = |boundary: BoundaryCondition| {
        let start = LoopConfiguration::uniform(volume.clone(), boundary.exterior_value(), 12, 2.0, boundary).unwrap();
        let mut o = OrderParameterObserver::new(4, &start).unwrap();
        let s = metropolis_chain(start, &p, &f, &settings, &mut [&mut o]).unwrap();
        o.report(&s)
    };
    let minus = estimate(BoundaryCondition::MinusClamped(c));
    let free = estimate(BoundaryCondition::Free);
    let plus = estimate(BoundaryCondition::PlusClamped(c));
    assert!(free.outside_bounded_hypothesis);
    assert!(free.value.abs() <= 4.0 * free.std_error, "{} ± {}", free.value, free.std_error);
    assert!(minus.value <= free.value + 2.0 * combined(&minus, &free));
    assert!(free.value <= plus.value + 2.0 * combined(&free, &plus));
    assert!(plus.value > 3.0 * plus.std_error);
}

#[test]
fn harmonic_two_point_function_with_clipped_identity() {
    let p = OscillatorParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 1, 2.0).unwrap().harmonic();
    let f = GaussianLoopFactory::for_params(&p, 16).unwrap();
    let start =
        LoopConfiguration::uniform(LatticeBox::new(vec![1]).unwrap(), 0.0, 16, 2.0, BoundaryCondition::Free).unwrap();
    let clip = 8.0;
    let points = vec![
        MatsubaraPoint { site: 0, slice: 2, function: TestFunction::Clip(clip) },
        MatsubaraPoint { site: 0, slice: 7, function: TestFunction::Clip(clip) },
    ];
    let mut gamma = MatsubaraObserver::new(points, &start).unwrap();
    let mut largest = 0.0f64;
    let mut range = |c: &LoopConfiguration| {
        largest = c.site(0).values().iter().fold(largest, |m, x| m.max(x.abs()));
    };
    let settings = ChainSettings { sweeps: 30_000, burn_in: 200, seed: 12, ..ChainSettings::default() };
    let summary = metropolis_chain(start, &p, &f, &settings, &mut [&mut gamma, &mut range]).unwrap();
    // the clip never engaged, so this is the plain two-point function
    assert!(largest < clip);
    let r = gamma.report(&summary);
    assert!(!r.outside_bounded_hypothesis);
    assert!((r.value - f.covariance(2, 7)).abs() <= 4.0 * r.std_error, "{} ± {}", r.value, r.std_error);
}

#[test]
fn free_boundary_matsubara_symmetries() {
    let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.3, 1, 2.0).unwrap();
    let f = GaussianLoopFactory::for_params(&p, 10).unwrap();
    let start =
        LoopConfiguration::uniform(LatticeBox::new(vec![3]).unwrap(), 0.0, 10, 2.0, BoundaryCondition::Free).unwrap();
    let clip = TestFunction::default_clip(&p);
    let two = vec![
        MatsubaraPoint { site: 0, slice: 1, function: clip.clone() },
        MatsubaraPoint { site: 2, slice: 4, function: clip.clone() },
    ];
    let mut gamma = MatsubaraObserver::new(two, &start).unwrap();
    let mut shifted = gamma.shifted(6, 10);
    let same = vec![MatsubaraPoint { site: 1, slice: 3, function: clip }; 3];
    let mut odd = MatsubaraObserver::new(same, &start).unwrap();
    let settings = ChainSettings { sweeps: 20_000, burn_in: 500, seed: 4, ..ChainSettings::default() };
    let s = metropolis_chain(start, &p, &f, &settings, &mut [&mut gamma, &mut shifted, &mut odd]).unwrap();
    let (g, h) = (gamma.report(&s), shifted.report(&s));
    assert!((g.value - h.value).abs() <= 2.0 * combined(&g, &h), "{} vs {}", g.value, h.value);
    let o = odd.report(&s);
    assert!(o.value.abs() <= 4.0 * o.std_error, "{} ± {}", o.value, o.std_error);
}

#[test]
fn parallel_chains_use_distinct_streams_reproducibly() {
    let p = OscillatorParams::new(1.0, 1.0, 1.5, 0.5, 0.3, 1, 2.0).unwrap();
    let f = GaussianLoopFactory::for_params(&p, 8).unwrap();
    let start =
        LoopConfiguration::uniform(LatticeBox::new(vec![2]).unwrap(), 0.0, 8, 2.0, BoundaryCondition::Free).unwrap();
    let settings = ChainSettings { sweeps: 200, burn_in: 10, seed: 5, ..ChainSettings::default() };
    let run = || {
        parallel_chains(&start, &p, &f, &settings, 3, || OrderParameterObserver::new(0, &start))
            .unwrap()
            .into_iter()
            .map(|(o, s)| (o.series().to_vec(), s.settings.stream))
            .collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert_ne!(a[0].0, a[1].0);
}
