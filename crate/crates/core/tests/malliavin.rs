use spde_density::kernels::{heat_dirichlet_sq_norm, HeatDirichletKernel};
use spde_density::malliavin::*;
use spde_density::solvers::{Drift, InitialData, ModelSpec};

fn nonlinear() -> ModelSpec {
    ModelSpec::heat_dirichlet(16, 0.5, 0.1, 0.5)
        .with_drift(Drift::Atan { a: 3.0 })
        .with_initial(InitialData::SineMode { mode: 1, amplitude: 1.0 })
}

#[test]
fn linear_cross_term_is_the_deterministic_norm() {
    let spec = ModelSpec::heat_dirichlet(64, 0.25, 0.25, 0.5).with_sigma(1.5);
    let sampler = PairSampler::new(&spec, 9).unwrap();
    let norm = sampler.deterministic_norm().expect("constant slope");
    let a = sampler.draw(0).unwrap();
    let b = sampler.draw_with_theta(1, 2.5).unwrap();
    assert_eq!(a.cross, norm);
    assert_eq!(b.cross, norm);
    assert_ne!(a.f, b.f);

    let exact = 1.5 * 1.5 * heat_dirichlet_sq_norm(0.0, 0.25, 0.5, &HeatDirichletKernel::default()).unwrap();
    assert!((norm / exact - 1.0).abs() < 0.02, "{norm} vs {exact}");
}

#[test]
fn zero_shift_reproduces_the_trajectory() {
    let sampler = PairSampler::new(&nonlinear(), 3).unwrap();
    for i in 0..5 {
        let s = sampler.draw_with_theta(i, 0.0).unwrap();
        assert_eq!(s.f, s.f_shift);
        assert!((s.cross - s.norm_sq).abs() <= 1e-12 * s.norm_sq, "{} vs {}", s.cross, s.norm_sq);
    }
}

#[test]
fn heat_cross_terms_are_nonnegative() {
    let samples = PairSampler::new(&nonlinear(), 5).unwrap().draw_many(64).unwrap();
    assert!(samples.iter().all(|s| s.cross >= -1e-10 && s.cross.is_finite()));
    assert!(samples.iter().all(|s| s.theta >= 0.0));
}

#[test]
fn draws_are_reproducible_and_index_addressed() {
    let sampler = PairSampler::new(&nonlinear(), 77).unwrap();
    let many = sampler.draw_many(8).unwrap();
    for (i, s) in many.iter().enumerate() {
        assert_eq!(*s, sampler.draw(i as u64).unwrap());
        assert_eq!(*s, draw_shift_pair(&nonlinear(), 77, i as u64).unwrap());
    }
    let other = PairSampler::new(&nonlinear(), 78).unwrap().draw(0).unwrap();
    assert_ne!(other.f, many[0].f);
}

#[test]
fn stratified_theta_cycles_midpoints() {
    let sampler = PairSampler::new(&nonlinear(), 1).unwrap().with_rule(ThetaRule::Stratified { points: 4 });
    let thetas: Vec<f64> = (0..8).map(|i| sampler.theta(i)).collect();
    for (i, th) in thetas.iter().enumerate() {
        let u = ((i % 4) as f64 + 0.5) / 4.0;
        assert!((th + u.ln()).abs() < 1e-15);
    }
}

#[test]
fn constant_responses_regress_to_a_constant() {
    let f: Vec<f64> = (0..2000).map(|i| ((i * 7919) % 2000) as f64 / 2000.0).collect();
    let c = vec![1.0; f.len()];
    for reg in [Regressor::default(), Regressor::Binning { min_per_bin: 100 }] {
        let g = estimate_g_from(&f, &c, &reg).unwrap();
        assert!(g.g_hat.iter().all(|&v| v == 1.0), "{reg:?}");
        let (lo, hi) = g_bounds_summary(&g, None).unwrap();
        assert_eq!(lo, hi);
    }
}

#[test]
fn estimator_preconditions() {
    let f: Vec<f64> = (0..500).map(|i| i as f64).collect();
    assert!(estimate_g_from(&f, &vec![1.0; 500], &Regressor::default()).is_err());
    let flat = vec![2.0; 2000];
    assert!(estimate_g_from(&flat, &vec![1.0; 2000], &Regressor::default()).is_err());
    let f: Vec<f64> = (0..2000).map(|i| i as f64).collect();
    assert!(estimate_g_from(&f, &vec![1.0; 2000], &Regressor::Binning { min_per_bin: 10 }).is_err());
}

#[test]
fn grid_is_centered_on_the_sample_mean() {
    let f: Vec<f64> = (0..4000).map(|i| ((i as f64) * 0.618).fract() * 2.0 + 3.0).collect();
    let c: Vec<f64> = f.iter().map(|x| 0.5 + 0.1 * x).collect();
    let g = estimate_g_from(&f, &c, &Regressor::default()).unwrap();
    assert_eq!(g.z_grid.len(), 2 * GRID_HALF_WIDTH + 1);
    assert_eq!(g.z_grid[GRID_HALF_WIDTH], g.mean);
    assert_eq!(g.offsets()[GRID_HALF_WIDTH], 0.0);
    assert!(g.g_hat.iter().all(|&v| v >= g.g_min && g.g_min > 0.0));
}

/// Mean of `c` over samples with `F` in `window`, with its standard error.
fn window_mean(samples: &[ShiftPairSample], window: (f64, f64)) -> (f64, f64) {
    let c: Vec<f64> = samples
        .iter()
        .filter(|s| s.f >= window.0 && s.f <= window.1)
        .map(|s| s.cross)
        .collect();
    let n = c.len() as f64;
    let m = c.iter().sum::<f64>() / n;
    let var = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn stratified_and_sampled_theta_agree() {
    let spec = ModelSpec::heat_dirichlet(16, 0.5, 0.25, 0.5)
        .with_drift(Drift::Atan { a: 8.0 })
        .with_initial(InitialData::SineMode { mode: 1, amplitude: 2.0 });
    let sampled = PairSampler::new(&spec, 42).unwrap().draw_many(4000).unwrap();
    let strat = PairSampler::new(&spec, 42)
        .unwrap()
        .with_rule(ThetaRule::Stratified { points: 16 })
        .draw_many(4000)
        .unwrap();
    let g = estimate_g(&sampled, &Regressor::default()).unwrap();
    let (a, sa) = window_mean(&sampled, g.window);
    let (b, sb) = window_mean(&strat, g.window);
    let z = (a - b).abs() / (sa * sa + sb * sb).sqrt();
    assert!(z < 2.0, "{a} vs {b}: {z} standard errors");
}
