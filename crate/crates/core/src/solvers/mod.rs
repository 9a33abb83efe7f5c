//! Numerical solvers for the three SPDE models, their Malliavin tangents
//! (computed by exact discrete adjoints) and the `H_T` inner products.
//!
//! The heat equation on `[0, 1]` uses semi-implicit finite differences; the
//! models on `R^d` live on a large periodic box and are integrated mode by
//! mode (exponential Euler for heat, split trigonometric steps for wave).

mod model;
pub(crate) mod scheme;

use num_complex::Complex64;
use serde::Serialize;

pub use model::{Discretization, Drift, InitialData, ModelKind, ModelSpec};

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::noise::{mu_weights, Increments, NoiseRealization, SpectralMeasure, TorusGrid};
use scheme::{Heat1d, HeatRd, PairValues, Replay, Scheme, Wave};

/// `F = u(T, x*)` together with the final field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryResult {
    pub value: f64,
    /// Final field on the grid (boundary nodes included on `[0, 1]`).
    pub field: Vec<f64>,
    pub n_steps: usize,
    pub dt: f64,
}

/// `b'(u)` recorded along a forward path; empty when `b` is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPath {
    pub slopes: Vec<f64>,
    pub width: usize,
}

/// Discrete Malliavin derivative `D_{r,.} F` on every time slice.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentField {
    /// Values on the space-time cells of `[0, 1]`, slice-major.
    Cells { dt: f64, dx: f64, n_cells: usize, values: Vec<f64> },
    /// Fourier transforms `F D_{r,.} F (xi_k)` on the torus, slice-major.
    Modes { dt: f64, grid: TorusGrid, eval_index: usize, values: Vec<Complex64> },
}

impl TangentField {
    pub fn n_slices(&self) -> usize {
        match self {
            TangentField::Cells { n_cells, values, .. } => values.len() / n_cells,
            TangentField::Modes { grid, values, .. } => values.len() / grid.len(),
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            TangentField::Cells { dt, .. } | TangentField::Modes { dt, .. } => *dt,
        }
    }

    /// Representative time `r` of slice `m`: its left end on `[0, 1]` (implicit
    /// steps), its midpoint on the torus.
    pub fn slice_time(&self, m: usize) -> f64 {
        match self {
            TangentField::Cells { dt, .. } => m as f64 * dt,
            TangentField::Modes { dt, .. } => (m as f64 + 0.5) * dt,
        }
    }

    /// Spatial coordinates of the points returned by [`TangentField::slice`]
    /// (first axis only on the torus).
    pub fn slice_points(&self) -> Vec<f64> {
        match self {
            TangentField::Cells { dx, n_cells, .. } => (1..=*n_cells).map(|i| i as f64 * dx).collect(),
            TangentField::Modes { grid, .. } => (0..grid.len()).map(|j| grid.point(j)[0]).collect(),
        }
    }

    /// `D_{r_m, .} F` in physical space.
    pub fn slice(&self, m: usize) -> Vec<f64> {
        match self {
            TangentField::Cells { n_cells, values, .. } => values[m * n_cells..(m + 1) * n_cells].to_vec(),
            TangentField::Modes { grid, values, .. } => {
                let n = grid.len();
                // h_j = (2L)^{-d} sum_k FD(k) e^{2 pi i k.j/n}, with FD(k) = a_{-k}
                let mut buf: Vec<Complex64> = (0..n).map(|k| values[m * n + grid.negated(k)]).collect();
                FftNd::new(grid.n, grid.dim).inverse(&mut buf);
                let c = grid.frequency_cell();
                buf.iter().map(|z| z.re * c).collect()
            }
        }
    }

    /// Smallest value of `D F` over all slices and points.
    pub fn min_value(&self) -> f64 {
        (0..self.n_slices())
            .flat_map(|m| self.slice(m))
            .fold(f64::INFINITY, f64::min)
    }
}

macro_rules! with_scheme {
    ($spec:expr, $s:ident => $body:expr) => {
        match $spec.model {
            ModelKind::HeatDirichlet1d => {
                let $s = Heat1d::new($spec)?;
                $body
            }
            ModelKind::HeatRd => {
                let $s = HeatRd::new($spec)?;
                $body
            }
            ModelKind::WaveRd => {
                let $s = Wave::new($spec)?;
                $body
            }
        }
    };
}

fn check_noise(spec: &ModelSpec, noise: &NoiseRealization) -> Result<()> {
    if noise.n_steps != spec.n_steps() || (noise.dt - spec.time_step()).abs() > 1e-12 * spec.time_step() {
        return Err(Error::ShapeMismatch(format!(
            "noise has {} steps of {}, model needs {} steps of {}",
            noise.n_steps,
            noise.dt,
            spec.n_steps(),
            spec.time_step()
        )));
    }
    match (&noise.increments, &spec.discretization) {
        (Increments::Cells { n_cells, .. }, Discretization::Interval { n_x }) if *n_cells == n_x - 1 => Ok(()),
        (Increments::Modes { grid, .. }, Discretization::Torus(g)) if grid == g => Ok(()),
        _ => Err(Error::ShapeMismatch("noise does not live on the model grid".into())),
    }
}

fn forward<S: Scheme>(s: &S, noise: &NoiseRealization, record: bool) -> Result<(TrajectoryResult, StoredPath)>
where
    for<'a> Replay<'a>: scheme::NoiseSource<S::Noise>,
{
    let (state, slopes) = scheme::run_forward(s, &mut Replay::new(noise), record)?;
    let result = TrajectoryResult {
        value: s.observe(&state),
        field: s.final_field(&state),
        n_steps: s.n_steps(),
        dt: noise.dt,
    };
    Ok((result, StoredPath { slopes, width: if s.constant_slope() { 0 } else { s.path_width() } }))
}

/// Solves any model on a stored noise path and records `b'` along it.
pub fn solve_with_path(spec: &ModelSpec, noise: &NoiseRealization) -> Result<(TrajectoryResult, StoredPath)> {
    check_noise(spec, noise)?;
    with_scheme!(spec, s => forward(&s, noise, true))
}

/// Solves any model on a stored noise path.
pub fn solve(spec: &ModelSpec, noise: &NoiseRealization) -> Result<TrajectoryResult> {
    check_noise(spec, noise)?;
    with_scheme!(spec, s => forward(&s, noise, false).map(|r| r.0))
}

fn expect_model(spec: &ModelSpec, kinds: &[ModelKind]) -> Result<()> {
    if kinds.contains(&spec.model) {
        Ok(())
    } else {
        Err(Error::config("model.model", format!("{:?} not accepted here", spec.model)))
    }
}

/// Heat equation on `[0, 1]` with Dirichlet boundary.
pub fn solve_heat_dirichlet(spec: &ModelSpec, noise: &NoiseRealization) -> Result<TrajectoryResult> {
    expect_model(spec, &[ModelKind::HeatDirichlet1d])?;
    solve(spec, noise)
}

/// Heat equation on `R^d` (periodic box).
pub fn solve_heat_rd(spec: &ModelSpec, noise: &NoiseRealization) -> Result<TrajectoryResult> {
    expect_model(spec, &[ModelKind::HeatRd])?;
    solve(spec, noise)
}

/// Wave equation on `R^d` (periodic box).
pub fn solve_wave_rd(spec: &ModelSpec, noise: &NoiseRealization) -> Result<TrajectoryResult> {
    expect_model(spec, &[ModelKind::WaveRd])?;
    solve(spec, noise)
}

fn check_path(spec: &ModelSpec, path: &StoredPath, width: usize) -> Result<()> {
    let needed = if spec.drift.constant_slope().is_some() { 0 } else { spec.n_steps() * width };
    if path.slopes.len() != needed {
        return Err(Error::ShapeMismatch(format!(
            "stored path has {} slopes, expected {needed}",
            path.slopes.len()
        )));
    }
    Ok(())
}

fn tangent_of<S: Scheme>(s: &S, path: &StoredPath, wrap: impl FnOnce(Vec<S::Noise>) -> TangentField) -> TangentField {
    let len = s.noise_len();
    let mut values = vec![S::Noise::default(); len * s.n_steps()];
    scheme::run_adjoint(s, &path.slopes, |m, g| values[m * len..(m + 1) * len].copy_from_slice(g));
    wrap(values)
}

fn modes_tangent(base: &scheme::Spectral, mut values: Vec<Complex64>) -> TangentField {
    // store F D F (xi_k) = a_{-k}
    let n = base.grid.len();
    for chunk in values.chunks_mut(n) {
        let a = chunk.to_vec();
        for k in 0..n {
            chunk[k] = a[base.grid.negated(k)];
        }
    }
    TangentField::Modes { dt: base.dt, grid: base.grid, eval_index: base.eval_index, values }
}

/// Malliavin derivative of `u(T, x*)` for the heat models, by the discrete adjoint.
pub fn tangent_adjoint_heat(spec: &ModelSpec, path: &StoredPath) -> Result<TangentField> {
    expect_model(spec, &[ModelKind::HeatDirichlet1d, ModelKind::HeatRd])?;
    match spec.model {
        ModelKind::HeatDirichlet1d => {
            let s = Heat1d::new(spec)?;
            check_path(spec, path, s.path_width())?;
            Ok(tangent_of(&s, path, |values| TangentField::Cells {
                dt: s.dt,
                dx: s.dx,
                n_cells: s.n_x - 1,
                values,
            }))
        }
        _ => {
            let s = HeatRd::new(spec)?;
            check_path(spec, path, s.path_width())?;
            Ok(tangent_of(&s, path, |v| modes_tangent(&s.base, v)))
        }
    }
}

/// Malliavin derivative of `u(T, x*)` for the wave model.
pub fn tangent_adjoint_wave(spec: &ModelSpec, path: &StoredPath) -> Result<TangentField> {
    expect_model(spec, &[ModelKind::WaveRd])?;
    let s = Wave::new(spec)?;
    check_path(spec, path, s.path_width())?;
    Ok(tangent_of(&s, path, |v| modes_tangent(&s.base, v)))
}

/// Dispatches to the heat or wave adjoint.
pub fn tangent_adjoint(spec: &ModelSpec, path: &StoredPath) -> Result<TangentField> {
    match spec.model {
        ModelKind::WaveRd => tangent_adjoint_wave(spec, path),
        _ => tangent_adjoint_heat(spec, path),
    }
}

/// Linearized forward propagation of a unit perturbation of noise cell
/// `(m, j)` on `[0, 1]`: an independent check of the adjoint.
pub fn forward_tangent_heat1d(spec: &ModelSpec, path: &StoredPath, m: usize, j: usize) -> Result<f64> {
    expect_model(spec, &[ModelKind::HeatDirichlet1d])?;
    let s = Heat1d::new(spec)?;
    check_path(spec, path, s.path_width())?;
    let n = s.n_x - 1;
    if m >= spec.n_steps() || j >= n {
        return Err(Error::domain(format!("cell ({m}, {j}) outside the grid")));
    }
    let mut delta = vec![0.0; n];
    delta[j] = spec.sigma / s.dx;
    s.solve(&mut delta);
    let constant = spec.drift.constant_slope();
    for step in m + 1..spec.n_steps() {
        for (i, d) in delta.iter_mut().enumerate() {
            let bp = constant.unwrap_or_else(|| path.slopes[step * n + i]);
            *d *= 1.0 + s.dt * bp;
        }
        s.solve(&mut delta);
    }
    Ok(s.obs.iter().map(|&(i, w)| w * delta[i]).sum())
}

fn inner_impl(a: &TangentField, b: &TangentField, mu: &SpectralMeasure) -> Result<f64> {
    match (a, b) {
        (
            TangentField::Cells { dt, dx, n_cells, values },
            TangentField::Cells { dt: dt2, dx: dx2, n_cells: n2, values: v2 },
        ) if dt == dt2 && dx == dx2 && n_cells == n2 && values.len() == v2.len() => {
            Ok(values.iter().zip(v2).map(|(x, y)| x * y).sum::<f64>() * dt * dx)
        }
        (
            TangentField::Modes { dt, grid, values, .. },
            TangentField::Modes { dt: dt2, grid: g2, values: v2, .. },
        ) if dt == dt2 && grid == g2 && values.len() == v2.len() => {
            let w = mu_weights(mu, grid)?;
            let n = grid.len();
            let s: f64 = values
                .iter()
                .zip(v2)
                .enumerate()
                .map(|(i, (x, y))| w[i % n] * (x * y.conj()).re)
                .sum();
            Ok(s * dt)
        }
        _ => Err(Error::ShapeMismatch("tangent fields live on different grids".into())),
    }
}

/// `||D F||^2_{H_T}`. On `[0, 1]` the noise is white and `mu` is ignored.
pub fn htnorm_tangent(tf: &TangentField, mu: &SpectralMeasure) -> Result<f64> {
    inner_impl(tf, tf, mu)
}

/// `<D F, D G>_{H_T}`.
pub fn cross_inner(a: &TangentField, b: &TangentField, mu: &SpectralMeasure) -> Result<f64> {
    inner_impl(a, b, mu)
}

/// Prepared scheme for repeated Mehler shift pairs.
pub(crate) enum PairEngine {
    Heat1d(Heat1d, Option<f64>),
    HeatRd(HeatRd, Option<f64>),
    Wave(Wave, Option<f64>),
}

fn deterministic_norm<S: Scheme>(s: &S) -> Option<f64> {
    s.constant_slope().then(|| scheme::adjoint_norm_sq(s, &[]))
}

impl PairEngine {
    pub(crate) fn new(spec: &ModelSpec) -> Result<Self> {
        Ok(match spec.model {
            ModelKind::HeatDirichlet1d => {
                let s = Heat1d::new(spec)?;
                let n = deterministic_norm(&s);
                PairEngine::Heat1d(s, n)
            }
            ModelKind::HeatRd => {
                let s = HeatRd::new(spec)?;
                let n = deterministic_norm(&s);
                PairEngine::HeatRd(s, n)
            }
            ModelKind::WaveRd => {
                let s = Wave::new(spec)?;
                let n = deterministic_norm(&s);
                PairEngine::Wave(s, n)
            }
        })
    }

    pub(crate) fn pair(&self, seed_w: u64, seed_w_prime: u64, theta: f64) -> Result<PairValues> {
        match self {
            PairEngine::Heat1d(s, n) => scheme::run_pair(s, seed_w, seed_w_prime, theta, *n),
            PairEngine::HeatRd(s, n) => scheme::run_pair(s, seed_w, seed_w_prime, theta, *n),
            PairEngine::Wave(s, n) => scheme::run_pair(s, seed_w, seed_w_prime, theta, *n),
        }
    }

    /// `||D F||^2` when it does not depend on the noise.
    pub(crate) fn deterministic_norm(&self) -> Option<f64> {
        match self {
            PairEngine::Heat1d(_, n) | PairEngine::HeatRd(_, n) | PairEngine::Wave(_, n) => *n,
        }
    }
}
