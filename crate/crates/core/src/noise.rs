//! Spectral measures, periodic noise synthesis, the `H` inner product and
//! the Mehler shift of noise realizations.
//!
//! A spatially homogeneous noise is described by its spectral measure
//! `mu`, with the Fourier convention `F phi(xi) = int e^{-2 pi i x.xi}
//! phi(x) dx`. On the torus `[-L, L)^d` sampled with `n` points per axis
//! the noise increment of one time step is the real field
//! `sum_k c_k e^{2 pi i k.j / n}` whose mode coefficients are independent
//! (up to Hermitian symmetry) with `E|c_k|^2 = w_k dt`, where `w_k` is
//! the `mu`-mass of the frequency cell around `xi_k = k / (2L)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::quadrature::{radial_integral, RadialIntegral, RadialProfile};
use crate::rng;

/// Shape of the spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    /// Lebesgue measure: space-time white noise.
    White,
    /// `mu(dxi) = c |xi|^{epsilon - d} dxi`, the spectral measure of the
    /// Riesz correlation `|x|^{-epsilon}`.
    Riesz { epsilon: f64 },
    /// Radial density given at increasing radii, linearly interpolated and
    /// zero past the last radius.
    Tabulated { radii: Vec<f64>, density: Vec<f64> },
}

/// A radial spectral measure on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    #[serde(flatten)]
    pub kind: MeasureKind,
    pub dim: usize,
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0),
    }
}

fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}

/// Constant `c` with `F(|x|^{-epsilon}) = c |xi|^{epsilon - d}`.
pub fn riesz_constant(d: usize, epsilon: f64) -> f64 {
    let d = d as f64;
    PI.powf(epsilon - d / 2.0) * gamma((d - epsilon) / 2.0) / gamma(epsilon / 2.0)
}

impl SpectralMeasure {
    pub fn white(dim: usize) -> Self {
        Self { kind: MeasureKind::White, dim }
    }

    pub fn riesz(dim: usize, epsilon: f64) -> Self {
        Self { kind: MeasureKind::Riesz { epsilon }, dim }
    }

    pub fn tabulated(dim: usize, radii: Vec<f64>, density: Vec<f64>) -> Self {
        Self { kind: MeasureKind::Tabulated { radii, density }, dim }
    }

    /// Loads a tabulated radial density from a two-column `radius,density`
    /// CSV file (a header row is allowed).
    pub fn from_csv(dim: usize, path: &std::path::Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut radii = Vec::new();
        let mut density = Vec::new();
        for record in reader.records() {
            let record = record?;
            let parse = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok());
            match (parse(0), parse(1)) {
                (Some(r), Some(v)) => {
                    radii.push(r);
                    density.push(v);
                }
                _ if radii.is_empty() => continue,
                _ => return Err(Error::config("measure.path", "malformed row in density table")),
            }
        }
        let m = Self::tabulated(dim, radii, density);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::config("measure.dim", "dimension must be 1, 2 or 3"));
        }
        match &self.kind {
            MeasureKind::White => Ok(()),
            MeasureKind::Riesz { epsilon } => {
                if *epsilon > 0.0 && *epsilon < self.dim as f64 {
                    Ok(())
                } else {
                    Err(Error::config("measure.epsilon", "Riesz exponent must lie in (0, d)"))
                }
            }
            MeasureKind::Tabulated { radii, density } => {
                if radii.len() < 2 || radii.len() != density.len() {
                    return Err(Error::config("measure.radii", "need at least two (radius, density) rows"));
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 0.0 {
                    return Err(Error::config("measure.radii", "radii must be nonnegative and increasing"));
                }
                if density.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::config("measure.density", "density values must be finite and >= 0"));
                }
                Ok(())
            }
        }
    }

    /// Radial density `m(r)` with `mu(dxi) = m(|xi|) dxi`.
    pub fn density(&self, r: f64) -> f64 {
        match &self.kind {
            MeasureKind::White => 1.0,
            MeasureKind::Riesz { epsilon } => {
                riesz_constant(self.dim, *epsilon) * r.powf(epsilon - self.dim as f64)
            }
            MeasureKind::Tabulated { radii, density } => {
                if r <= radii[0] {
                    return density[0];
                }
                let last = radii.len() - 1;
                if r > radii[last] {
                    return 0.0;
                }
                let i = radii.partition_point(|&x| x < r).max(1);
                let t = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                density[i - 1] + t * (density[i] - density[i - 1])
            }
        }
    }

    /// `int h(|xi|) mu(dxi)` for a radial `h` with `h(r) ~ r^origin` at
    /// the origin and `h(r) ~ c r^p` at infinity (`tail = (c, p)`).
    pub fn integrate_radial(
        &self,
        h: impl Fn(f64) -> f64,
        h_origin_exponent: f64,
        h_tail: (f64, f64),
    ) -> RadialIntegral {
        let d = self.dim as f64;
        let area = sphere_area(self.dim);
        let (m_origin, tail, support_end) = match &self.kind {
            MeasureKind::White => (0.0, Some((h_tail.0, d - 1.0 + h_tail.1)), None),
            MeasureKind::Riesz { epsilon } => (
                epsilon - d,
                Some((
                    riesz_constant(self.dim, *epsilon) * h_tail.0,
                    epsilon - 1.0 + h_tail.1,
                )),
                None,
            ),
            MeasureKind::Tabulated { radii, .. } => (0.0, None, Some(*radii.last().unwrap())),
        };
        let profile = RadialProfile {
            origin_exponent: d - 1.0 + m_origin + h_origin_exponent,
            tail,
            support_end,
        };
        match radial_integral(profile, |r| r.powf(d - 1.0) * self.density(r) * h(r)) {
            RadialIntegral::Finite(v) => RadialIntegral::Finite(area * v),
            RadialIntegral::Divergent => RadialIntegral::Divergent,
        }
    }

    /// `mu`-mass of the ball of radius `radius` (finite for every
    /// supported measure since `epsilon < d`).
    fn ball_mass(&self, radius: f64) -> f64 {
        let area = sphere_area(self.dim);
        match &self.kind {
            MeasureKind::White => ball_volume(self.dim) * radius.powi(self.dim as i32),
            MeasureKind::Riesz { epsilon } => {
                riesz_constant(self.dim, *epsilon) * area * radius.powf(*epsilon) / epsilon
            }
            MeasureKind::Tabulated { .. } => {
                ball_volume(self.dim) * radius.powi(self.dim as i32) * self.density(0.0)
            }
        }
    }
}

/// `int (1 + |xi|^2)^{-eta} mu(dxi)`, the quantity bounded by hypothesis
/// `H_eta`. With `eta = 1` this is the existence condition for the heat
/// and wave mild solutions.
pub fn hypothesis_eta(mu: &SpectralMeasure, eta: f64) -> Result<RadialIntegral> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("eta = {eta} outside (0, 1]")));
    }
    Ok(mu.integrate_radial(|r| (1.0 + r * r).powf(-eta), 0.0, (1.0, -2.0 * eta)))
}

/// Periodic grid `[-L, L)^d` with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: usize,
    pub half_len: f64,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, half_len: f64, n: usize) -> Result<Self> {
        let g = Self { dim, half_len, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::config("grid.dim", "dimension must be 1, 2 or 3"));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::config("grid.n", "points per axis must be a power of two >= 8"));
        }
        if !(self.half_len > 0.0 && self.half_len.is_finite()) {
            return Err(Error::config("grid.half_len", "half-period must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_len / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Volume of one frequency cell, `(2L)^{-d}`.
    pub fn frequency_cell(&self) -> f64 {
        (2.0 * self.half_len).powi(-(self.dim as i32))
    }

    fn axis_indices(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    fn signed(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Signed integer wavenumber of a flat mode index, per axis.
    pub fn wavenumber(&self, flat: usize) -> [i64; 3] {
        let idx = self.axis_indices(flat);
        let mut out = [0i64; 3];
        for a in 0..self.dim {
            out[a] = self.signed(idx[a]);
        }
        out
    }

    /// `|xi_k|` for a flat mode index.
    pub fn xi_norm(&self, flat: usize) -> f64 {
        let k = self.wavenumber(flat);
        let s: f64 = k[..self.dim].iter().map(|&v| (v as f64).powi(2)).sum();
        s.sqrt() / (2.0 * self.half_len)
    }

    /// Flat index of the mode `-k` (modulo `n` on each axis).
    pub fn negated(&self, flat: usize) -> usize {
        let idx = self.axis_indices(flat);
        let mut out = 0;
        for a in 0..self.dim {
            out = out * self.n + (self.n - idx[a]) % self.n;
        }
        out
    }

    /// Physical coordinates of a flat grid-point index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.axis_indices(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = -self.half_len + idx[a] as f64 * self.dx();
        }
        x
    }

    /// Flat index of the grid point nearest to `x` (periodically wrapped).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let mut out = 0;
        for a in 0..self.dim {
            let xa = x.get(a).copied().unwrap_or(0.0);
            let j = ((xa + self.half_len) / self.dx()).round() as i64;
            let j = j.rem_euclid(self.n as i64) as usize;
            out = out * self.n + j;
        }
        out
    }

    /// `e^{2 pi i k.j / n}` for flat mode index `k` and grid index `j`.
    pub fn phase(&self, mode: usize, point: usize) -> Complex64 {
        let k = self.axis_indices(mode);
        let j = self.axis_indices(point);
        let mut acc = 0usize;
        for a in 0..self.dim {
            acc = (acc + k[a] * j[a]) % self.n;
        }
        Complex64::from_polar(1.0, 2.0 * PI * acc as f64 / self.n as f64)
    }
}

/// `mu`-weight of each mode of `grid`: `m(|xi_k|) (2L)^{-d}`; the zero mode
/// gets the `mu`-mass of the ball with the volume of one frequency cell.
pub fn mu_weights(mu: &SpectralMeasure, grid: &TorusGrid) -> Result<Vec<f64>> {
    if mu.dim != grid.dim {
        return Err(Error::ShapeMismatch(format!(
            "measure dimension {} vs grid dimension {}",
            mu.dim, grid.dim
        )));
    }
    let cell = grid.frequency_cell();
    let ball_radius = (cell / ball_volume(grid.dim)).powf(1.0 / grid.dim as f64);
    Ok((0..grid.len())
        .map(|k| {
            if k == 0 {
                match mu.kind {
                    MeasureKind::Riesz { .. } => mu.ball_mass(ball_radius),
                    _ => mu.density(0.0) * cell,
                }
            } else {
                mu.density(grid.xi_norm(k)) * cell
            }
        })
        .collect())
}

/// Endless generator of Hermitian mode increments with variance `w_k dt`.
pub struct ModeNoiseStream {
    rng: ChaCha8Rng,
    amplitude: Vec<f64>,
    partner: Vec<usize>,
}

impl ModeNoiseStream {
    pub fn new(weights: &[f64], grid: &TorusGrid, dt: f64, seed: u64) -> Self {
        Self {
            rng: rng::stream(seed),
            amplitude: weights.iter().map(|w| (w * dt).sqrt()).collect(),
            partner: (0..grid.len()).map(|k| grid.negated(k)).collect(),
        }
    }

    pub fn fill(&mut self, out: &mut [Complex64]) {
        for k in 0..out.len() {
            let p = self.partner[k];
            if p == k {
                let z: f64 = self.rng.sample(StandardNormal);
                out[k] = Complex64::new(self.amplitude[k] * z, 0.0);
            } else if k < p {
                let a: f64 = self.rng.sample(StandardNormal);
                let b: f64 = self.rng.sample(StandardNormal);
                let s = self.amplitude[k] * std::f64::consts::FRAC_1_SQRT_2;
                out[k] = Complex64::new(s * a, s * b);
                out[p] = Complex64::new(s * a, -s * b);
            }
        }
    }
}

/// Endless generator of i.i.d. `N(0, dt dx)` cell increments.
pub struct CellNoiseStream {
    rng: ChaCha8Rng,
    sd: f64,
}

impl CellNoiseStream {
    pub fn new(dt: f64, dx: f64, seed: u64) -> Self {
        Self { rng: rng::stream(seed), sd: (dt * dx).sqrt() }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *v = self.sd * z;
        }
    }
}

/// Stored increments of a noise path.
#[derive(Debug, Clone, PartialEq)]
pub enum Increments {
    /// Space-time cells of the `[0, 1]` problem, `n_cells` per step.
    Cells { n_cells: usize, dx: f64, data: Vec<f64> },
    /// Mode coefficients on a torus, `grid.len()` per step.
    Modes { grid: TorusGrid, data: Vec<Complex64> },
}

/// A discretized cylindrical Wiener process over `n_steps` steps of `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    pub increments: Increments,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl NoiseRealization {
    pub fn cell_step(&self, m: usize) -> Option<&[f64]> {
        match &self.increments {
            Increments::Cells { n_cells, data, .. } => Some(&data[m * n_cells..(m + 1) * n_cells]),
            Increments::Modes { .. } => None,
        }
    }

    pub fn mode_step(&self, m: usize) -> Option<&[Complex64]> {
        match &self.increments {
            Increments::Modes { grid, data } => {
                let n = grid.len();
                Some(&data[m * n..(m + 1) * n])
            }
            Increments::Cells { .. } => None,
        }
    }

    /// Real spatial field of step `m` on the torus (imaginary residue is
    /// returned separately so callers can check Hermitian symmetry).
    pub fn spatial_field(&self, m: usize) -> Option<(Vec<f64>, f64)> {
        let Increments::Modes { grid, .. } = &self.increments else {
            return None;
        };
        let mut buf = self.mode_step(m)?.to_vec();
        FftNd::new(grid.n, grid.dim).inverse(&mut buf);
        let max_imag = buf.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        Some((buf.iter().map(|c| c.re).collect(), max_imag))
    }
}

/// Samples `n_steps` mode increments of the noise with spectral measure `mu`.
pub fn sample_noise(
    mu: &SpectralMeasure,
    grid: &TorusGrid,
    n_steps: usize,
    dt: f64,
    seed: u64,
) -> Result<NoiseRealization> {
    if n_steps == 0 || !(dt > 0.0) {
        return Err(Error::domain("need n_steps >= 1 and dt > 0"));
    }
    grid.validate()?;
    let weights = mu_weights(mu, grid)?;
    let mut stream = ModeNoiseStream::new(&weights, grid, dt, seed);
    let n = grid.len();
    let mut data = vec![Complex64::new(0.0, 0.0); n * n_steps];
    for chunk in data.chunks_mut(n) {
        stream.fill(chunk);
    }
    Ok(NoiseRealization {
        increments: Increments::Modes { grid: *grid, data },
        dt,
        n_steps,
        seed,
    })
}

/// Samples the Brownian-sheet increments of the `[0, 1]` problem: one
/// `N(0, dt dx)` variable per interior node cell `[x_i - dx/2, x_i + dx/2]`,
/// `i = 1..n_x-1`, per time step.
pub fn sample_white_noise_1d(n_x: usize, n_steps: usize, dt: f64, seed: u64) -> Result<NoiseRealization> {
    if n_x < 8 || n_steps == 0 || !(dt > 0.0) {
        return Err(Error::domain("need n_x >= 8, n_steps >= 1 and dt > 0"));
    }
    let dx = 1.0 / n_x as f64;
    let n_cells = n_x - 1;
    let mut stream = CellNoiseStream::new(dt, dx, seed);
    let mut data = vec![0.0; n_cells * n_steps];
    for chunk in data.chunks_mut(n_cells) {
        stream.fill(chunk);
    }
    Ok(NoiseRealization {
        increments: Increments::Cells { n_cells, dx, data },
        dt,
        n_steps,
        seed,
    })
}

/// Coefficients of the Mehler shift `e^{-theta} W + sqrt(1 - e^{-2 theta}) W'`.
pub fn mehler_coefficients(theta: f64) -> (f64, f64) {
    let a = (-theta).exp();
    // 1 - e^{-2 theta} without cancellation for small theta
    let b = (-(-2.0 * theta).exp_m1()).max(0.0).sqrt();
    (a, b)
}

/// Mode-wise (or cell-wise) Mehler shift of a noise realization.
pub fn mehler_shift(w: &NoiseRealization, w_prime: &NoiseRealization, theta: f64) -> Result<NoiseRealization> {
    if !(theta >= 0.0) {
        return Err(Error::domain("theta must be >= 0"));
    }
    if w.n_steps != w_prime.n_steps || w.dt != w_prime.dt {
        return Err(Error::ShapeMismatch("step counts or time steps differ".into()));
    }
    let (a, b) = mehler_coefficients(theta);
    let increments = match (&w.increments, &w_prime.increments) {
        (
            Increments::Cells { n_cells, dx, data },
            Increments::Cells { n_cells: n2, dx: dx2, data: data2 },
        ) if n_cells == n2 && dx == dx2 => Increments::Cells {
            n_cells: *n_cells,
            dx: *dx,
            data: data.iter().zip(data2).map(|(x, y)| a * x + b * y).collect(),
        },
        (Increments::Modes { grid, data }, Increments::Modes { grid: g2, data: data2 }) if grid == g2 => {
            Increments::Modes {
                grid: *grid,
                data: data.iter().zip(data2).map(|(x, y)| x * a + y * b).collect(),
            }
        }
        _ => return Err(Error::ShapeMismatch("noise realizations live on different grids".into())),
    };
    Ok(NoiseRealization { increments, dt: w.dt, n_steps: w.n_steps, seed: w.seed })
}

/// A real field on a torus grid, viewed as an element of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HElement {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl HElement {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Discrete Fourier transform `F phi(xi_k) = sum_j phi(x_j) e^{-2 pi i k.j/n} dx^d`
    /// (the constant phase from the grid origin is dropped; it cancels in
    /// every inner product).
    pub fn fourier(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftNd::new(self.grid.n, self.grid.dim).forward(&mut buf);
        let vol = self.grid.cell_volume();
        buf.iter_mut().for_each(|c| *c *= vol);
        buf
    }
}

/// `sum_k Re(a_k conj(b_k)) w_k` for coefficient arrays of the same grid.
pub fn h_inner_modes(a: &[Complex64], b: &[Complex64], weights: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((x, y), w)| (x.re * y.re + x.im * y.im) * w)
        .sum()
}

/// `<phi, psi>_H = sum_k F phi(xi_k) conj(F psi(xi_k)) w_k`.
pub fn h_inner(phi: &HElement, psi: &HElement, mu: &SpectralMeasure, grid: &TorusGrid) -> Result<f64> {
    if phi.grid != *grid || psi.grid != *grid {
        return Err(Error::ShapeMismatch("elements live on different grids".into()));
    }
    let w = mu_weights(mu, grid)?;
    Ok(h_inner_modes(&phi.fourier(), &psi.fourier(), &w))
}
