use std::f64::consts::PI;

use num_complex::Complex64;
use spde_density::kernels::{
    heat_dirichlet_green, heat_dirichlet_sq_norm, heat_discrete_spectral_integral, wave_ft,
    wave_ft_time_integral, HeatDirichletKernel,
};
use spde_density::noise::{
    mu_weights, sample_noise, sample_white_noise_1d, Increments, NoiseRealization, SpectralMeasure, TorusGrid,
};
use spde_density::solvers::*;

fn heat1d(n_x: usize, ratio: f64, t: f64) -> ModelSpec {
    ModelSpec::heat_dirichlet(n_x, ratio, t, 0.5)
}

fn white_noise(spec: &ModelSpec, seed: u64) -> NoiseRealization {
    let Discretization::Interval { n_x } = spec.discretization else { unreachable!() };
    sample_white_noise_1d(n_x, spec.n_steps(), spec.time_step(), seed).unwrap()
}

fn mode_noise(spec: &ModelSpec, seed: u64) -> NoiseRealization {
    sample_noise(&spec.measure, spec.torus().unwrap(), spec.n_steps(), spec.time_step(), seed).unwrap()
}

#[test]
fn deterministic_sine_mode_decays() {
    let spec = heat1d(64, 0.25, 0.1)
        .with_sigma(0.0)
        .with_initial(InitialData::SineMode { mode: 1, amplitude: 1.0 });
    let r = solve_heat_dirichlet(&spec, &white_noise(&spec, 1)).unwrap();
    let exact = (-PI * PI * 0.1).exp();
    assert!((r.value - exact).abs() < 2e-3, "{} vs {exact}", r.value);
    assert_eq!(r.field[0], 0.0);
    assert_eq!(*r.field.last().unwrap(), 0.0);
    assert_eq!(r.field.len(), 65);
}

#[test]
fn wrong_noise_shape_is_rejected() {
    let spec = heat1d(32, 0.5, 0.05);
    let noise = sample_white_noise_1d(64, spec.n_steps(), spec.time_step(), 3).unwrap();
    assert!(solve_heat_dirichlet(&spec, &noise).is_err());
    assert!(solve_heat_rd(&spec, &white_noise(&spec, 3)).is_err());
}

#[test]
fn tangent_norm_matches_kernel_integral() {
    let kernel = HeatDirichletKernel::default();
    let spec = heat1d(64, 0.25, 0.25);
    let (_, path) = solve_with_path(&spec, &white_noise(&spec, 5)).unwrap();
    let tf = tangent_adjoint_heat(&spec, &path).unwrap();
    let norm = htnorm_tangent(&tf, &SpectralMeasure::white(1)).unwrap();
    let exact = heat_dirichlet_sq_norm(0.0, 0.25, 0.5, &kernel).unwrap();
    assert!((norm / exact - 1.0).abs() < 0.02, "{norm} vs {exact}");

    let tf2 = tangent_adjoint_heat(&spec.clone().with_sigma(2.0), &path).unwrap();
    let norm2 = htnorm_tangent(&tf2, &SpectralMeasure::white(1)).unwrap();
    assert!((norm2 / norm - 4.0).abs() < 1e-12);
}

#[test]
fn adjoint_agrees_with_forward_tangent() {
    let spec = heat1d(32, 0.5, 0.1).with_drift(Drift::Atan { a: 2.0 });
    let (_, path) = solve_with_path(&spec, &white_noise(&spec, 11)).unwrap();
    let tf = tangent_adjoint_heat(&spec, &path).unwrap();
    let TangentField::Cells { n_cells, values, .. } = &tf else { panic!() };
    for &(m, j) in &[(0usize, 3usize), (17, 15), (spec.n_steps() - 1, 15), (40, 20)] {
        let fwd = forward_tangent_heat1d(&spec, &path, m, j).unwrap();
        let adj = values[m * n_cells + j];
        assert!((fwd - adj).abs() < 1e-8 * fwd.abs().max(1.0), "{fwd} vs {adj}");
    }
}

#[test]
fn heat_tangent_is_nonnegative() {
    let spec = heat1d(32, 0.5, 0.2).with_drift(Drift::Tanh { a: 3.0 });
    for seed in 0..4 {
        let (_, path) = solve_with_path(&spec, &white_noise(&spec, seed)).unwrap();
        let tf = tangent_adjoint_heat(&spec, &path).unwrap();
        assert!(tf.min_value() >= -1e-12);
    }
}

#[test]
fn zero_drift_tangent_is_the_green_function() {
    let kernel = HeatDirichletKernel::default();
    let t = 0.1;
    let spec = heat1d(128, 0.25, t);
    let (_, path) = solve_with_path(&spec, &white_noise(&spec, 2)).unwrap();
    let tf = tangent_adjoint_heat(&spec, &path).unwrap();
    let xs = tf.slice_points();
    let mut worst: f64 = 0.0;
    for m in 0..tf.n_slices() {
        let tau = t - tf.slice_time(m);
        if tau < t / 10.0 {
            continue;
        }
        let exact: Vec<f64> = xs.iter().map(|&y| heat_dirichlet_green(tau, 0.5, y, &kernel).unwrap()).collect();
        let peak = exact.iter().cloned().fold(0.0, f64::max);
        for (d, g) in tf.slice(m).iter().zip(&exact) {
            if *g >= 0.01 * peak {
                worst = worst.max((d / g - 1.0).abs());
            }
        }
    }
    assert!(worst < 0.02, "max relative error {worst}");
}

fn riesz_grid() -> (SpectralMeasure, TorusGrid) {
    (SpectralMeasure::riesz(1, 0.5), TorusGrid::new(1, 2.0, 32).unwrap())
}

#[test]
fn heat_rd_zero_drift_norm_is_discrete_integral() {
    let (mu, grid) = riesz_grid();
    let spec = ModelSpec::heat_rd(mu.clone(), grid, 0.01, 0.3);
    let (_, path) = solve_with_path(&spec, &mode_noise(&spec, 4)).unwrap();
    let tf = tangent_adjoint_heat(&spec, &path).unwrap();
    let norm = htnorm_tangent(&tf, &mu).unwrap();
    let w = mu_weights(&mu, &grid).unwrap();
    let xi: Vec<f64> = (0..grid.len()).map(|k| grid.xi_norm(k)).collect();
    let exact = heat_discrete_spectral_integral(0.3, &w, &xi);
    assert!((norm / exact - 1.0).abs() < 1e-10, "{norm} vs {exact}");
}

#[test]
fn heat_rd_linear_ode() {
    let (mu, grid) = riesz_grid();
    let spec = ModelSpec::heat_rd(mu, grid, 1e-3, 0.5)
        .with_sigma(0.0)
        .with_drift(Drift::Linear { lambda: 0.8 })
        .with_initial(InitialData::Constant { value: 2.0 });
    let r = solve_heat_rd(&spec, &mode_noise(&spec, 1)).unwrap();
    let exact = 2.0 * (0.4f64).exp();
    assert!((r.value - exact).abs() < 2e-3);
    assert!(r.field.iter().all(|v| (v - r.value).abs() < 1e-10));
}

/// Central finite difference of `F` along the real part of mode pair `(m, k)`.
fn mode_fd(spec: &ModelSpec, noise: &NoiseRealization, m: usize, k: usize) -> f64 {
    let grid = *spec.torus().unwrap();
    let h = 1e-5;
    let bump = |sign: f64| {
        let mut nz = noise.clone();
        let Increments::Modes { data, .. } = &mut nz.increments else { unreachable!() };
        let n = grid.len();
        data[m * n + k] += Complex64::new(sign * h, 0.0);
        let p = grid.negated(k);
        if p != k {
            data[m * n + p] += Complex64::new(sign * h, 0.0);
        }
        solve(spec, &nz).unwrap().value
    };
    (bump(1.0) - bump(-1.0)) / (2.0 * h)
}

fn check_spectral_adjoint(spec: &ModelSpec) {
    let grid = *spec.torus().unwrap();
    let noise = mode_noise(spec, 9);
    let (_, path) = solve_with_path(spec, &noise).unwrap();
    let tf = tangent_adjoint(spec, &path).unwrap();
    let TangentField::Modes { values, .. } = &tf else { panic!() };
    let n = grid.len();
    for &(m, k) in &[(0usize, 1usize), (5, 3), (spec.n_steps() - 1, 2), (7, 0)] {
        // FD(k) = a_{-k}; dF/d Re c_k (pair perturbed) = a_k + a_{-k} = 2 Re a_k, or a_0
        let a_k = values[m * n + grid.negated(k)];
        let expected = if grid.negated(k) == k { a_k.re } else { 2.0 * a_k.re };
        let fd = mode_fd(spec, &noise, m, k);
        assert!((fd - expected).abs() < 1e-6 * expected.abs().max(1.0), "slice {m} mode {k}: {fd} vs {expected}");
    }
}

#[test]
fn heat_rd_adjoint_matches_finite_differences() {
    let (mu, grid) = riesz_grid();
    let spec = ModelSpec::heat_rd(mu, grid, 0.01, 0.2)
        .with_drift(Drift::Atan { a: 3.0 })
        .with_initial(InitialData::GaussianBump { amplitude: 1.0, width: 0.3 });
    check_spectral_adjoint(&spec);
}

#[test]
fn wave_adjoint_matches_finite_differences() {
    let (mu, grid) = riesz_grid();
    let spec = ModelSpec::wave_rd(mu, grid, 0.01, 0.3)
        .with_drift(Drift::Tanh { a: 2.0 })
        .with_initial(InitialData::GaussianBump { amplitude: 1.0, width: 0.3 });
    check_spectral_adjoint(&spec);
}

#[test]
fn wave_zero_drift_tangent_is_the_fundamental_solution() {
    let (mu, grid) = riesz_grid();
    let t = 0.4;
    let spec = ModelSpec::wave_rd(mu.clone(), grid, 0.005, t).with_sigma(1.5);
    let (_, path) = solve_with_path(&spec, &mode_noise(&spec, 0)).unwrap();
    let tf = tangent_adjoint_wave(&spec, &path).unwrap();
    let TangentField::Modes { values, eval_index, .. } = &tf else { panic!() };
    let n = grid.len();
    let mut worst: f64 = 0.0;
    for m in 0..tf.n_slices() {
        let tau = t - tf.slice_time(m);
        for k in 0..n {
            // undo the evaluation-point phase
            let centered = values[m * n + k] * grid.phase(k, *eval_index);
            let exact = 1.5 * wave_ft(tau, grid.xi_norm(k));
            if exact.abs() > 1e-3 {
                worst = worst.max((centered.re / exact - 1.0).abs());
            }
            assert!(centered.im.abs() < 1e-10);
        }
    }
    assert!(worst < 0.02, "{worst}");

    let norm = htnorm_tangent(&tf, &mu).unwrap();
    let w = mu_weights(&mu, &grid).unwrap();
    let exact: f64 = (0..n).map(|k| 2.25 * w[k] * wave_ft_time_integral(t, grid.xi_norm(k))).sum();
    assert!((norm / exact - 1.0).abs() < 0.02, "{norm} vs {exact}");
}

#[test]
fn free_wave_follows_dalembert() {
    let mu = SpectralMeasure::white(1);
    let grid = TorusGrid::new(1, 4.0, 256).unwrap();
    let t = 1.0;
    let width = 0.3;
    let spec = ModelSpec::wave_rd(mu, grid, 0.01, t)
        .with_sigma(0.0)
        .with_initial(InitialData::GaussianBump { amplitude: 1.0, width });
    let r = solve_wave_rd(&spec, &mode_noise(&spec, 0)).unwrap();
    let bump = |x: f64| (-x * x / (2.0 * width * width)).exp();
    let mut worst: f64 = 0.0;
    for j in 0..grid.len() {
        let x = grid.point(j)[0];
        let exact = 0.5 * (bump(x - t) + bump(x + t));
        worst = worst.max((r.field[j] - exact).abs());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn trajectories_are_deterministic() {
    let spec = heat1d(32, 0.5, 0.1).with_drift(Drift::Atan { a: 1.0 });
    let a = solve(&spec, &white_noise(&spec, 77)).unwrap();
    let b = solve(&spec, &white_noise(&spec, 77)).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.field, b.field);
}
