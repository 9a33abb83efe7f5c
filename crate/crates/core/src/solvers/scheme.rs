//! Step-level forward and adjoint schemes shared by the trajectory, tangent
//! and shift-pair drivers.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::noise::{mu_weights, CellNoiseStream, ModeNoiseStream, NoiseRealization, TorusGrid};

use super::model::{Discretization, Drift, InitialData, ModelKind, ModelSpec};

/// Scalar type of one noise increment.
pub(crate) trait NoiseScalar: Copy + Default + Send + Sync {
    fn combine(a: f64, x: Self, b: f64, y: Self) -> Self;
}

impl NoiseScalar for f64 {
    fn combine(a: f64, x: f64, b: f64, y: f64) -> f64 {
        a * x + b * y
    }
}

impl NoiseScalar for Complex64 {
    fn combine(a: f64, x: Self, b: f64, y: Self) -> Self {
        x * a + y * b
    }
}

pub(crate) trait NoiseSource<T> {
    fn fill(&mut self, out: &mut [T]);
}

impl NoiseSource<f64> for CellNoiseStream {
    fn fill(&mut self, out: &mut [f64]) {
        CellNoiseStream::fill(self, out)
    }
}

impl NoiseSource<Complex64> for ModeNoiseStream {
    fn fill(&mut self, out: &mut [Complex64]) {
        ModeNoiseStream::fill(self, out)
    }
}

/// Replays a stored realization step by step.
pub(crate) struct Replay<'a> {
    noise: &'a NoiseRealization,
    step: usize,
}

impl<'a> Replay<'a> {
    pub(crate) fn new(noise: &'a NoiseRealization) -> Self {
        Self { noise, step: 0 }
    }
}

impl NoiseSource<f64> for Replay<'_> {
    fn fill(&mut self, out: &mut [f64]) {
        out.copy_from_slice(self.noise.cell_step(self.step).expect("cell noise"));
        self.step += 1;
    }
}

impl NoiseSource<Complex64> for Replay<'_> {
    fn fill(&mut self, out: &mut [Complex64]) {
        out.copy_from_slice(self.noise.mode_step(self.step).expect("mode noise"));
        self.step += 1;
    }
}

pub(crate) trait Scheme: Sync {
    type Noise: NoiseScalar;
    type State: Clone + Send;
    type Adjoint: Send;
    type Stream: NoiseSource<Self::Noise>;

    fn noise_len(&self) -> usize;
    fn n_steps(&self) -> usize;
    fn stream(&self, seed: u64) -> Self::Stream;
    /// Whether `b'` is constant (no path needs recording).
    fn constant_slope(&self) -> bool;
    /// Number of `b'` values recorded per step.
    fn path_width(&self) -> usize;

    fn initial_state(&self) -> Self::State;
    /// Advances one step, appending `b'` along the path when `path` is given.
    fn step(&self, s: &mut Self::State, noise: &[Self::Noise], path: Option<&mut Vec<f64>>);
    fn observe(&self, s: &Self::State) -> f64;
    fn state_finite(&self, s: &Self::State) -> bool;
    fn final_field(&self, s: &Self::State) -> Vec<f64>;

    fn initial_adjoint(&self) -> Self::Adjoint;
    /// One backward step over slice `m`: writes `dF/d(noise_m)` into `grad`
    /// and pulls the adjoint back through the step. `slope` is `b'` at step `m`.
    fn adjoint_step(&self, a: &mut Self::Adjoint, slope: Option<&[f64]>, grad: &mut [Self::Noise]);
    /// Contribution of one slice to `<D F, D G>_{H_T}` given noise gradients.
    fn slice_inner(&self, g1: &[Self::Noise], g2: &[Self::Noise]) -> f64;
}

/// Runs the forward scheme, optionally recording `b'` along the path.
pub(crate) fn run_forward<S: Scheme>(
    s: &S,
    src: &mut impl NoiseSource<S::Noise>,
    record: bool,
) -> Result<(S::State, Vec<f64>)> {
    let mut state = s.initial_state();
    let mut noise = vec![S::Noise::default(); s.noise_len()];
    let record = record && !s.constant_slope();
    let mut path = Vec::with_capacity(if record { s.n_steps() * s.path_width() } else { 0 });
    for m in 0..s.n_steps() {
        src.fill(&mut noise);
        s.step(&mut state, &noise, if record { Some(&mut path) } else { None });
        if (m + 1) % 64 == 0 && !s.state_finite(&state) {
            return Err(Error::Instability(format!("non-finite state after step {}", m + 1)));
        }
    }
    if !s.state_finite(&state) {
        return Err(Error::Instability("non-finite state at the final time".into()));
    }
    Ok((state, path))
}

/// Runs the adjoint backward, calling `visit(m, grad_m)` for `m = N-1, ..., 0`.
pub(crate) fn run_adjoint<S: Scheme>(s: &S, path: &[f64], mut visit: impl FnMut(usize, &[S::Noise])) {
    let mut adj = s.initial_adjoint();
    let mut grad = vec![S::Noise::default(); s.noise_len()];
    let w = s.path_width();
    for m in (0..s.n_steps()).rev() {
        let slope = if s.constant_slope() { None } else { Some(&path[m * w..(m + 1) * w]) };
        s.adjoint_step(&mut adj, slope, &mut grad);
        visit(m, &grad);
    }
}

/// `||D F||^2_{H_T}` from the adjoint along one path.
pub(crate) fn adjoint_norm_sq<S: Scheme>(s: &S, path: &[f64]) -> f64 {
    let mut acc = 0.0;
    run_adjoint(s, path, |_, g| acc += s.slice_inner(g, g));
    acc
}

/// Outcome of one Mehler shift pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PairValues {
    pub f: f64,
    pub f_shift: f64,
    pub cross: f64,
    pub norm_sq: f64,
}

/// Runs `F(W)` and `F(e^{-theta} W + sqrt(1 - e^{-2 theta}) W')` in lockstep
/// and returns `<D F, D~F>` and `||D F||^2`. With a constant `b'` the tangent is
/// deterministic and `deterministic_norm` (when given) is reused.
pub(crate) fn run_pair<S: Scheme>(
    s: &S,
    seed_w: u64,
    seed_w_prime: u64,
    theta: f64,
    deterministic_norm: Option<f64>,
) -> Result<PairValues> {
    let (a, b) = crate::noise::mehler_coefficients(theta);
    let mut w_src = s.stream(seed_w);
    let mut wp_src = s.stream(seed_w_prime);
    let len = s.noise_len();
    let mut w = vec![S::Noise::default(); len];
    let mut wp = vec![S::Noise::default(); len];
    let mut shifted = vec![S::Noise::default(); len];
    let record = !s.constant_slope();
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    let mut s1 = s.initial_state();
    let mut s2 = s.initial_state();
    for m in 0..s.n_steps() {
        w_src.fill(&mut w);
        wp_src.fill(&mut wp);
        for ((z, x), y) in shifted.iter_mut().zip(&w).zip(&wp) {
            *z = S::Noise::combine(a, *x, b, *y);
        }
        s.step(&mut s1, &w, if record { Some(&mut p1) } else { None });
        s.step(&mut s2, &shifted, if record { Some(&mut p2) } else { None });
        if (m + 1) % 64 == 0 && !(s.state_finite(&s1) && s.state_finite(&s2)) {
            return Err(Error::Instability(format!("non-finite state after step {}", m + 1)));
        }
    }
    if !(s.state_finite(&s1) && s.state_finite(&s2)) {
        return Err(Error::Instability("non-finite state at the final time".into()));
    }
    let f = s.observe(&s1);
    let f_shift = s.observe(&s2);
    if let (false, Some(norm)) = (record, deterministic_norm) {
        return Ok(PairValues { f, f_shift, cross: norm, norm_sq: norm });
    }
    // both adjoints backward in lockstep
    let mut a1 = s.initial_adjoint();
    let mut a2 = s.initial_adjoint();
    let mut g1 = vec![S::Noise::default(); len];
    let mut g2 = vec![S::Noise::default(); len];
    let width = s.path_width();
    let (mut cross, mut norm_sq) = (0.0, 0.0);
    for m in (0..s.n_steps()).rev() {
        let r = m * width..(m + 1) * width;
        s.adjoint_step(&mut a1, record.then(|| &p1[r.clone()]), &mut g1);
        s.adjoint_step(&mut a2, record.then(|| &p2[r]), &mut g2);
        cross += s.slice_inner(&g1, &g2);
        norm_sq += s.slice_inner(&g1, &g1);
    }
    Ok(PairValues { f, f_shift, cross, norm_sq })
}

// ---------------------------------------------------------------------------
// Heat equation on [0, 1]

/// Semi-implicit finite differences with `n_x - 1` interior unknowns.
pub(crate) struct Heat1d {
    pub(crate) n_x: usize,
    pub(crate) dx: f64,
    pub(crate) dt: f64,
    n_steps: usize,
    sigma: f64,
    drift: Drift,
    slope: Option<f64>,
    u0: Vec<f64>,
    /// Linear interpolation weights of the evaluation point on interior nodes.
    pub(crate) obs: Vec<(usize, f64)>,
    r: f64,
    cp: Vec<f64>,
    inv_denom: Vec<f64>,
}

#[derive(Clone)]
pub(crate) struct Heat1dState {
    pub(crate) u: Vec<f64>,
    rhs: Vec<f64>,
}

pub(crate) struct Heat1dAdjoint {
    lambda: Vec<f64>,
    y: Vec<f64>,
}

impl Heat1d {
    pub(crate) fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let Discretization::Interval { n_x } = spec.discretization else {
            return Err(Error::config("model.grid", "expected an interval grid"));
        };
        let dx = 1.0 / n_x as f64;
        let dt = spec.time_step();
        let m = n_x - 1;
        let r = dt / (dx * dx);
        let diag = 1.0 + 2.0 * r;
        let mut cp = vec![0.0; m];
        let mut denom = vec![0.0; m];
        denom[0] = diag;
        cp[0] = -r / diag;
        for i in 1..m {
            denom[i] = diag + r * cp[i - 1];
            cp[i] = -r / denom[i];
        }
        let p = spec.eval_point[0] / dx;
        let k = p.floor() as usize;
        let frac = p - k as f64;
        let mut obs = Vec::new();
        for (node, w) in [(k, 1.0 - frac), (k + 1, frac)] {
            if w > 1e-14 && node >= 1 && node <= m {
                obs.push((node - 1, w));
            }
        }
        Ok(Self {
            n_x,
            dx,
            dt,
            n_steps: spec.n_steps(),
            sigma: spec.sigma,
            drift: spec.drift,
            slope: spec.drift.constant_slope(),
            u0: (1..n_x).map(|i| spec.initial.eval(&[i as f64 * dx])).collect(),
            obs,
            r,
            cp,
            inv_denom: denom.iter().map(|d| 1.0 / d).collect(),
        })
    }

    /// Solves `(I - dt A) x = d` in place.
    pub(crate) fn solve(&self, d: &mut [f64]) {
        let m = d.len();
        d[0] *= self.inv_denom[0];
        for i in 1..m {
            d[i] = (d[i] + self.r * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..m - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }
}

impl Scheme for Heat1d {
    type Noise = f64;
    type State = Heat1dState;
    type Adjoint = Heat1dAdjoint;
    type Stream = CellNoiseStream;

    fn noise_len(&self) -> usize {
        self.n_x - 1
    }

    fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn stream(&self, seed: u64) -> CellNoiseStream {
        CellNoiseStream::new(self.dt, self.dx, seed)
    }

    fn constant_slope(&self) -> bool {
        self.slope.is_some()
    }

    fn path_width(&self) -> usize {
        self.n_x - 1
    }

    fn initial_state(&self) -> Heat1dState {
        Heat1dState { u: self.u0.clone(), rhs: vec![0.0; self.n_x - 1] }
    }

    fn step(&self, s: &mut Heat1dState, noise: &[f64], path: Option<&mut Vec<f64>>) {
        if let Some(p) = path {
            p.extend(s.u.iter().map(|&u| self.drift.derivative(u)));
        }
        let scale = self.sigma / self.dx;
        for ((r, &u), &xi) in s.rhs.iter_mut().zip(&s.u).zip(noise) {
            *r = u + self.dt * self.drift.value(u) + scale * xi;
        }
        self.solve(&mut s.rhs);
        std::mem::swap(&mut s.u, &mut s.rhs);
    }

    fn observe(&self, s: &Heat1dState) -> f64 {
        self.obs.iter().map(|&(i, w)| w * s.u[i]).sum()
    }

    fn state_finite(&self, s: &Heat1dState) -> bool {
        s.u.iter().all(|v| v.is_finite() && v.abs() < 1e12)
    }

    fn final_field(&self, s: &Heat1dState) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_x + 1);
        out.push(0.0);
        out.extend_from_slice(&s.u);
        out.push(0.0);
        out
    }

    fn initial_adjoint(&self) -> Heat1dAdjoint {
        let mut lambda = vec![0.0; self.n_x - 1];
        for &(i, w) in &self.obs {
            lambda[i] += w;
        }
        Heat1dAdjoint { lambda, y: vec![0.0; self.n_x - 1] }
    }

    fn adjoint_step(&self, a: &mut Heat1dAdjoint, slope: Option<&[f64]>, grad: &mut [f64]) {
        a.y.copy_from_slice(&a.lambda);
        self.solve(&mut a.y);
        let scale = self.sigma / self.dx;
        for (g, &y) in grad.iter_mut().zip(&a.y) {
            *g = scale * y;
        }
        match slope {
            None => {
                let f = 1.0 + self.dt * self.slope.unwrap_or(0.0);
                for (l, &y) in a.lambda.iter_mut().zip(&a.y) {
                    *l = f * y;
                }
            }
            Some(bp) => {
                for ((l, &y), &b) in a.lambda.iter_mut().zip(&a.y).zip(bp) {
                    *l = (1.0 + self.dt * b) * y;
                }
            }
        }
    }

    fn slice_inner(&self, g1: &[f64], g2: &[f64]) -> f64 {
        g1.iter().zip(g2).map(|(a, b)| a * b).sum::<f64>() * self.dt * self.dx
    }
}

// ---------------------------------------------------------------------------
// Spectral schemes on the torus

pub(crate) struct Spectral {
    pub(crate) grid: TorusGrid,
    fft: FftNd,
    pub(crate) weights: Vec<f64>,
    pub(crate) dt: f64,
    n_steps: usize,
    sigma: f64,
    drift: Drift,
    slope: Option<f64>,
    /// Index of the evaluation point and `e^{2 pi i k.j*/n}`.
    pub(crate) eval_index: usize,
    phases: Vec<Complex64>,
    u0: Vec<Complex64>,
    v0: Vec<Complex64>,
}

impl Spectral {
    fn new(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let Discretization::Torus(grid) = spec.discretization else {
            return Err(Error::config("model.grid", "expected a torus grid"));
        };
        let fft = FftNd::new(grid.n, grid.dim);
        let eval_index = grid.nearest_index(&spec.eval_point);
        let transform = |data: &InitialData| -> Vec<Complex64> {
            let mut buf: Vec<Complex64> = (0..grid.len())
                .map(|j| Complex64::new(data.eval(&grid.point(j)[..grid.dim]), 0.0))
                .collect();
            fft.forward(&mut buf);
            let inv = 1.0 / grid.len() as f64;
            buf.iter_mut().for_each(|c| *c *= inv);
            buf
        };
        Ok(Self {
            weights: mu_weights(&spec.measure, &grid)?,
            dt: spec.time_step(),
            n_steps: spec.n_steps(),
            sigma: spec.sigma,
            drift: spec.drift,
            slope: spec.drift.constant_slope(),
            eval_index,
            phases: (0..grid.len()).map(|k| grid.phase(k, eval_index)).collect(),
            u0: transform(&spec.initial),
            v0: transform(&spec.initial_velocity),
            grid,
            fft,
        })
    }

    /// `FFT(b(u)) / N` for `u = IFFT(u_hat)`; records `b'(u)` when asked.
    fn drift_hat(&self, u_hat: &[Complex64], buf: &mut [Complex64], path: Option<&mut Vec<f64>>) {
        buf.copy_from_slice(u_hat);
        self.fft.inverse(buf);
        if let Some(p) = path {
            p.extend(buf.iter().map(|c| self.drift.derivative(c.re)));
        }
        for c in buf.iter_mut() {
            *c = Complex64::new(self.drift.value(c.re), 0.0);
        }
        self.fft.forward(buf);
        let inv = 1.0 / buf.len() as f64;
        buf.iter_mut().for_each(|c| *c *= inv);
    }

    /// Transpose of `x -> FFT(B . IFFT(x)) / N`, i.e. `y -> IFFT(B . FFT(y) / N)`.
    fn drift_transpose(&self, y: &mut [Complex64], slope: &[f64]) {
        self.fft.forward(y);
        let inv = 1.0 / y.len() as f64;
        for (c, &b) in y.iter_mut().zip(slope) {
            *c *= b * inv;
        }
        self.fft.inverse(y);
    }

    fn observe_hat(&self, u_hat: &[Complex64]) -> f64 {
        u_hat.iter().zip(&self.phases).map(|(u, e)| (u * e).re).sum()
    }

    fn physical(&self, u_hat: &[Complex64]) -> Vec<f64> {
        let mut buf = u_hat.to_vec();
        self.fft.inverse(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    fn mode_stream(&self, seed: u64) -> ModeNoiseStream {
        ModeNoiseStream::new(&self.weights, &self.grid, self.dt, seed)
    }

    fn modes_inner(&self, g1: &[Complex64], g2: &[Complex64]) -> f64 {
        let s: f64 = g1
            .iter()
            .zip(g2)
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a * b.conj()).re)
            .sum();
        s * self.dt
    }
}

fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|c| c.is_finite() && c.norm_sqr() < 1e24)
}

/// Heat equation on the torus: exponential Euler per Fourier mode.
pub(crate) struct HeatRd {
    pub(crate) base: Spectral,
    decay: Vec<f64>,
    phi: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Clone)]
pub(crate) struct SpectralState {
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    buf: Vec<Complex64>,
}

pub(crate) struct SpectralAdjoint {
    lu: Vec<Complex64>,
    lv: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl HeatRd {
    pub(crate) fn new(spec: &ModelSpec) -> Result<Self> {
        if spec.model != ModelKind::HeatRd {
            return Err(Error::config("model.model", "expected heat_rd"));
        }
        let base = Spectral::new(spec)?;
        let dt = base.dt;
        let n = base.grid.len();
        let mut decay = vec![1.0; n];
        let mut phi = vec![dt; n];
        let mut q = vec![1.0; n];
        for k in 1..n {
            let lam = 4.0 * std::f64::consts::PI.powi(2) * base.grid.xi_norm(k).powi(2);
            let x = lam * dt;
            decay[k] = (-x).exp();
            phi[k] = -(-x).exp_m1() / lam;
            q[k] = (-(-2.0 * x).exp_m1() / (2.0 * x)).sqrt();
        }
        Ok(Self { base, decay, phi, q })
    }
}

impl Scheme for HeatRd {
    type Noise = Complex64;
    type State = SpectralState;
    type Adjoint = SpectralAdjoint;
    type Stream = ModeNoiseStream;

    fn noise_len(&self) -> usize {
        self.base.grid.len()
    }

    fn n_steps(&self) -> usize {
        self.base.n_steps
    }

    fn stream(&self, seed: u64) -> ModeNoiseStream {
        self.base.mode_stream(seed)
    }

    fn constant_slope(&self) -> bool {
        self.base.slope.is_some()
    }

    fn path_width(&self) -> usize {
        self.base.grid.len()
    }

    fn initial_state(&self) -> SpectralState {
        SpectralState { u: self.base.u0.clone(), v: Vec::new(), buf: vec![Complex64::default(); self.noise_len()] }
    }

    fn step(&self, s: &mut SpectralState, noise: &[Complex64], path: Option<&mut Vec<f64>>) {
        let sigma = self.base.sigma;
        match self.base.slope {
            Some(lam) => {
                for k in 0..s.u.len() {
                    s.u[k] = s.u[k] * (self.decay[k] + self.phi[k] * lam) + noise[k] * (sigma * self.q[k]);
                }
            }
            None => {
                self.base.drift_hat(&s.u, &mut s.buf, path);
                for k in 0..s.u.len() {
                    s.u[k] = s.u[k] * self.decay[k] + s.buf[k] * self.phi[k] + noise[k] * (sigma * self.q[k]);
                }
            }
        }
    }

    fn observe(&self, s: &SpectralState) -> f64 {
        self.base.observe_hat(&s.u)
    }

    fn state_finite(&self, s: &SpectralState) -> bool {
        all_finite(&s.u)
    }

    fn final_field(&self, s: &SpectralState) -> Vec<f64> {
        self.base.physical(&s.u)
    }

    fn initial_adjoint(&self) -> SpectralAdjoint {
        SpectralAdjoint {
            lu: self.base.phases.clone(),
            lv: Vec::new(),
            buf: vec![Complex64::default(); self.noise_len()],
        }
    }

    fn adjoint_step(&self, a: &mut SpectralAdjoint, slope: Option<&[f64]>, grad: &mut [Complex64]) {
        let sigma = self.base.sigma;
        for k in 0..grad.len() {
            grad[k] = a.lu[k] * (sigma * self.q[k]);
        }
        match slope {
            None => {
                let lam = self.base.slope.unwrap_or(0.0);
                for k in 0..a.lu.len() {
                    a.lu[k] *= self.decay[k] + self.phi[k] * lam;
                }
            }
            Some(bp) => {
                for k in 0..a.lu.len() {
                    a.buf[k] = a.lu[k] * self.phi[k];
                }
                self.base.drift_transpose(&mut a.buf, bp);
                for k in 0..a.lu.len() {
                    a.lu[k] = a.lu[k] * self.decay[k] + a.buf[k];
                }
            }
        }
    }

    fn slice_inner(&self, g1: &[Complex64], g2: &[Complex64]) -> f64 {
        self.base.modes_inner(g1, g2)
    }
}

/// Wave equation on the torus: exact half rotations around a drift/noise kick.
pub(crate) struct Wave {
    pub(crate) base: Spectral,
    cos: Vec<f64>,
    /// `sin(omega h) / omega`
    sinc: Vec<f64>,
    /// `-omega sin(omega h)`
    msin: Vec<f64>,
}

impl Wave {
    pub(crate) fn new(spec: &ModelSpec) -> Result<Self> {
        if spec.model != ModelKind::WaveRd {
            return Err(Error::config("model.model", "expected wave_rd"));
        }
        let base = Spectral::new(spec)?;
        let h = 0.5 * base.dt;
        let n = base.grid.len();
        let (mut cos, mut sinc, mut msin) = (vec![1.0; n], vec![h; n], vec![0.0; n]);
        for k in 1..n {
            let w = 2.0 * std::f64::consts::PI * base.grid.xi_norm(k);
            cos[k] = (w * h).cos();
            sinc[k] = (w * h).sin() / w;
            msin[k] = -w * (w * h).sin();
        }
        Ok(Self { base, cos, sinc, msin })
    }

    fn rotate(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        for k in 0..u.len() {
            let (a, b) = (u[k], v[k]);
            u[k] = a * self.cos[k] + b * self.sinc[k];
            v[k] = a * self.msin[k] + b * self.cos[k];
        }
    }

    fn rotate_transpose(&self, lu: &mut [Complex64], lv: &mut [Complex64]) {
        for k in 0..lu.len() {
            let (a, b) = (lu[k], lv[k]);
            lu[k] = a * self.cos[k] + b * self.msin[k];
            lv[k] = a * self.sinc[k] + b * self.cos[k];
        }
    }
}

impl Scheme for Wave {
    type Noise = Complex64;
    type State = SpectralState;
    type Adjoint = SpectralAdjoint;
    type Stream = ModeNoiseStream;

    fn noise_len(&self) -> usize {
        self.base.grid.len()
    }

    fn n_steps(&self) -> usize {
        self.base.n_steps
    }

    fn stream(&self, seed: u64) -> ModeNoiseStream {
        self.base.mode_stream(seed)
    }

    fn constant_slope(&self) -> bool {
        self.base.slope.is_some()
    }

    fn path_width(&self) -> usize {
        self.base.grid.len()
    }

    fn initial_state(&self) -> SpectralState {
        SpectralState {
            u: self.base.u0.clone(),
            v: self.base.v0.clone(),
            buf: vec![Complex64::default(); self.noise_len()],
        }
    }

    fn step(&self, s: &mut SpectralState, noise: &[Complex64], path: Option<&mut Vec<f64>>) {
        let (dt, sigma) = (self.base.dt, self.base.sigma);
        self.rotate(&mut s.u, &mut s.v);
        match self.base.slope {
            Some(lam) => {
                for k in 0..s.u.len() {
                    s.v[k] += s.u[k] * (dt * lam) + noise[k] * sigma;
                }
            }
            None => {
                self.base.drift_hat(&s.u, &mut s.buf, path);
                for k in 0..s.u.len() {
                    s.v[k] += s.buf[k] * dt + noise[k] * sigma;
                }
            }
        }
        self.rotate(&mut s.u, &mut s.v);
    }

    fn observe(&self, s: &SpectralState) -> f64 {
        self.base.observe_hat(&s.u)
    }

    fn state_finite(&self, s: &SpectralState) -> bool {
        all_finite(&s.u) && all_finite(&s.v)
    }

    fn final_field(&self, s: &SpectralState) -> Vec<f64> {
        self.base.physical(&s.u)
    }

    fn initial_adjoint(&self) -> SpectralAdjoint {
        let n = self.noise_len();
        SpectralAdjoint {
            lu: self.base.phases.clone(),
            lv: vec![Complex64::default(); n],
            buf: vec![Complex64::default(); n],
        }
    }

    fn adjoint_step(&self, a: &mut SpectralAdjoint, slope: Option<&[f64]>, grad: &mut [Complex64]) {
        let (dt, sigma) = (self.base.dt, self.base.sigma);
        self.rotate_transpose(&mut a.lu, &mut a.lv);
        for k in 0..grad.len() {
            grad[k] = a.lv[k] * sigma;
        }
        match slope {
            None => {
                let lam = self.base.slope.unwrap_or(0.0);
                for k in 0..a.lu.len() {
                    a.lu[k] += a.lv[k] * (dt * lam);
                }
            }
            Some(bp) => {
                a.buf.copy_from_slice(&a.lv);
                self.base.drift_transpose(&mut a.buf, bp);
                for k in 0..a.lu.len() {
                    a.lu[k] += a.buf[k] * dt;
                }
            }
        }
        self.rotate_transpose(&mut a.lu, &mut a.lv);
    }

    fn slice_inner(&self, g1: &[Complex64], g2: &[Complex64]) -> f64 {
        self.base.modes_inner(g1, g2)
    }
}
