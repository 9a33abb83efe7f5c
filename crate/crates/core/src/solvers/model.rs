use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{SpectralMeasure, TorusGrid};

/// Which equation is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `u_t - u_xx = b(u) + sigma W'` on `[0, 1]`, Dirichlet boundary.
    HeatDirichlet1d,
    /// `u_t - Laplace u = b(u) + sigma W'` on `R^d`, spatially homogeneous noise.
    HeatRd,
    /// `u_tt - Laplace u = b(u) + sigma W'` on `R^d`, `d <= 3`.
    WaveRd,
}

/// Drift presets with analytic derivative and derivative bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    /// `b(u) = lambda u`
    Linear { lambda: f64 },
    /// `b(u) = atan(a u)`
    Atan { a: f64 },
    /// `b(u) = tanh(a u)`
    Tanh { a: f64 },
}

impl Drift {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Drift::Zero => 0.0,
            Drift::Linear { lambda } => lambda * u,
            Drift::Atan { a } => (a * u).atan(),
            Drift::Tanh { a } => (a * u).tanh(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Drift::Zero => 0.0,
            Drift::Linear { lambda } => lambda,
            Drift::Atan { a } => a / (1.0 + (a * u).powi(2)),
            Drift::Tanh { a } => a / (a * u).cosh().powi(2),
        }
    }

    /// `sup |b'|`.
    pub fn derivative_bound(&self) -> f64 {
        match *self {
            Drift::Zero => 0.0,
            Drift::Linear { lambda } => lambda.abs(),
            Drift::Atan { a } | Drift::Tanh { a } => a.abs(),
        }
    }

    /// The constant slope when `b` is linear (so the tangent is deterministic).
    pub fn constant_slope(&self) -> Option<f64> {
        match *self {
            Drift::Zero => Some(0.0),
            Drift::Linear { lambda } => Some(lambda),
            _ => None,
        }
    }
}

/// Initial data presets (evaluated in physical coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Zero,
    Constant { value: f64 },
    /// `amplitude * sin(mode pi x_1)`
    SineMode { mode: u32, amplitude: f64 },
    /// `amplitude * exp(-|x|^2 / (2 width^2))`
    GaussianBump { amplitude: f64, width: f64 },
}

impl InitialData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            InitialData::Zero => 0.0,
            InitialData::Constant { value } => value,
            InitialData::SineMode { mode, amplitude } => amplitude * (mode as f64 * PI * x[0]).sin(),
            InitialData::GaussianBump { amplitude, width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Spatial discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discretization {
    /// `n_x` intervals of `[0, 1]`.
    Interval { n_x: usize },
    Torus(TorusGrid),
}

/// Full description of one SPDE run up to the evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub drift: Drift,
    pub sigma: f64,
    pub initial: InitialData,
    /// Initial velocity (wave only).
    pub initial_velocity: InitialData,
    pub eval_time: f64,
    pub eval_point: Vec<f64>,
    pub discretization: Discretization,
    /// Requested time step; the effective step divides `eval_time` exactly.
    pub dt: f64,
    /// Spectral measure of the noise (ignored on `[0, 1]`, where the noise is white).
    pub measure: SpectralMeasure,
}

impl ModelSpec {
    /// Heat equation on `[0, 1]` with `dt = dt_ratio * dx^2`.
    pub fn heat_dirichlet(n_x: usize, dt_ratio: f64, eval_time: f64, x: f64) -> Self {
        let dx = 1.0 / n_x as f64;
        Self {
            model: ModelKind::HeatDirichlet1d,
            drift: Drift::Zero,
            sigma: 1.0,
            initial: InitialData::Zero,
            initial_velocity: InitialData::Zero,
            eval_time,
            eval_point: vec![x],
            discretization: Discretization::Interval { n_x },
            dt: dt_ratio * dx * dx,
            measure: SpectralMeasure::white(1),
        }
    }

    pub fn heat_rd(measure: SpectralMeasure, grid: TorusGrid, dt: f64, eval_time: f64) -> Self {
        Self {
            model: ModelKind::HeatRd,
            drift: Drift::Zero,
            sigma: 1.0,
            initial: InitialData::Zero,
            initial_velocity: InitialData::Zero,
            eval_time,
            eval_point: vec![0.0; grid.dim],
            discretization: Discretization::Torus(grid),
            dt,
            measure,
        }
    }

    pub fn wave_rd(measure: SpectralMeasure, grid: TorusGrid, dt: f64, eval_time: f64) -> Self {
        Self { model: ModelKind::WaveRd, ..Self::heat_rd(measure, grid, dt, eval_time) }
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_initial(mut self, initial: InitialData) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_initial_velocity(mut self, v: InitialData) -> Self {
        self.initial_velocity = v;
        self
    }

    pub fn with_eval_time(mut self, t: f64) -> Self {
        self.eval_time = t;
        self
    }

    pub fn n_steps(&self) -> usize {
        ((self.eval_time / self.dt).round() as usize).max(1)
    }

    /// Effective time step `eval_time / n_steps`.
    pub fn time_step(&self) -> f64 {
        self.eval_time / self.n_steps() as f64
    }

    pub fn dim(&self) -> usize {
        match self.discretization {
            Discretization::Interval { .. } => 1,
            Discretization::Torus(g) => g.dim,
        }
    }

    pub fn torus(&self) -> Option<&TorusGrid> {
        match &self.discretization {
            Discretization::Torus(g) => Some(g),
            Discretization::Interval { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("model.sigma", "sigma must be finite and >= 0"));
        }
        if !(self.eval_time > 0.0 && self.eval_time.is_finite()) {
            return Err(Error::config("model.eval_time", "evaluation time must be positive"));
        }
        if !(self.dt > 0.0 && self.dt <= self.eval_time) {
            return Err(Error::config("model.dt", "time step must lie in (0, eval_time]"));
        }
        let dtb = self.time_step() * self.drift.derivative_bound();
        match (self.model, &self.discretization) {
            (ModelKind::HeatDirichlet1d, Discretization::Interval { n_x }) => {
                if *n_x < 8 {
                    return Err(Error::config("model.grid.n", "need at least 8 intervals"));
                }
                let x = self.eval_point.first().copied().unwrap_or(f64::NAN);
                if !(x > 0.0 && x < 1.0) {
                    return Err(Error::config("model.eval_point", "point must lie in (0, 1)"));
                }
                if dtb >= 1.0 {
                    return Err(Error::config(
                        "model.dt",
                        "dt * sup|b'| must be < 1 for the tangent scheme to stay positive",
                    ));
                }
            }
            (ModelKind::HeatRd | ModelKind::WaveRd, Discretization::Torus(g)) => {
                g.validate()?;
                self.measure.validate()?;
                if self.measure.dim != g.dim {
                    return Err(Error::config("measure.dim", "measure and grid dimensions differ"));
                }
                if self.eval_point.len() != g.dim {
                    return Err(Error::config("model.eval_point", "point dimension differs from the grid"));
                }
                if self.model == ModelKind::HeatRd && dtb >= 1.0 {
                    return Err(Error::config("model.dt", "dt * sup|b'| must be < 1"));
                }
            }
            _ => {
                return Err(Error::config(
                    "model.grid",
                    "heat_dirichlet_1d needs an interval grid, heat_rd/wave_rd a torus grid",
                ))
            }
        }
        Ok(())
    }
}
