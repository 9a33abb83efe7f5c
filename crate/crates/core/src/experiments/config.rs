use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Lemma;
use crate::malliavin::{Regressor, ThetaRule};
use crate::noise::{hypothesis_eta, MeasureKind, SpectralMeasure, TorusGrid};
use crate::solvers::{Drift, InitialData, ModelKind, ModelSpec};

/// The experiment catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GaussianOracleHeat1d,
    SandwichHeat1d,
    SandwichHeatRd,
    SandwichWave,
    ScalingHeat1d,
    ScalingHeatRd,
    ScalingWave,
    LemmaChecks,
}

impl ExperimentKind {
    pub fn all() -> [ExperimentKind; 8] {
        use ExperimentKind::*;
        [
            GaussianOracleHeat1d,
            SandwichHeat1d,
            SandwichHeatRd,
            SandwichWave,
            ScalingHeat1d,
            ScalingHeatRd,
            ScalingWave,
            LemmaChecks,
        ]
    }

    pub fn name(&self) -> &'static str {
        use ExperimentKind::*;
        match self {
            GaussianOracleHeat1d => "gaussian-oracle-heat1d",
            SandwichHeat1d => "sandwich-heat1d",
            SandwichHeatRd => "sandwich-heat-rd",
            SandwichWave => "sandwich-wave",
            ScalingHeat1d => "scaling-heat1d",
            ScalingHeatRd => "scaling-heat-rd",
            ScalingWave => "scaling-wave",
            LemmaChecks => "lemma-checks",
        }
    }

    pub fn description(&self) -> &'static str {
        use ExperimentKind::*;
        match self {
            GaussianOracleHeat1d => "linear heat equation on [0,1]: g, density and KS test against the exact normal law",
            SandwichHeat1d => "nonlinear heat equation on [0,1]: KDE between the Gaussian envelopes",
            SandwichHeatRd => "nonlinear heat equation on R^d with Riesz noise: KDE between the envelopes",
            SandwichWave => "nonlinear wave equation on R^d with Riesz noise: KDE between the envelopes",
            ScalingHeat1d => "time scaling of the window extrema of g, heat equation on [0,1]",
            ScalingHeatRd => "time scaling of the window extrema of g, heat equation on R^d",
            ScalingWave => "small-time scaling of the window extrema of g, wave equation",
            LemmaChecks => "deterministic kernel-integral bounds",
        }
    }

    pub fn model(&self) -> Option<ModelKind> {
        use ExperimentKind::*;
        match self {
            GaussianOracleHeat1d | SandwichHeat1d | ScalingHeat1d => Some(ModelKind::HeatDirichlet1d),
            SandwichHeatRd | ScalingHeatRd => Some(ModelKind::HeatRd),
            SandwichWave | ScalingWave => Some(ModelKind::WaveRd),
            LemmaChecks => None,
        }
    }

    pub fn is_scaling(&self) -> bool {
        matches!(self, Self::ScalingHeat1d | Self::ScalingHeatRd | Self::ScalingWave)
    }
}

/// How the time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeStep {
    /// `dt = ratio * dx^2` (interval grid only).
    DxRatio { ratio: f64 },
    Fixed { dt: f64 },
}

/// Model section of a config file; unset fields take the experiment preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: Option<usize>,
    pub drift: Option<Drift>,
    pub sigma: Option<f64>,
    pub initial: Option<InitialData>,
    pub initial_velocity: Option<InitialData>,
    pub eval_point: Option<Vec<f64>>,
    /// Intervals on `[0, 1]`, or points per axis on the torus.
    pub n: Option<usize>,
    pub half_len: Option<f64>,
    pub time_step: Option<TimeStep>,
}

/// A config file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: ModelConfig,
    pub measure: Option<MeasureKind>,
    pub eta: Option<f64>,
    pub t_schedule: Option<Vec<f64>>,
    pub n_trajectories: Option<usize>,
    pub master_seed: Option<u64>,
    pub regressor: Option<Regressor>,
    pub theta_rule: Option<ThetaRule>,
    pub lemmas: Option<Vec<String>>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub dump_samples: Option<bool>,
}

impl ExperimentConfig {
    pub fn preset(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            model: ModelConfig::default(),
            measure: None,
            eta: None,
            t_schedule: None,
            n_trajectories: None,
            master_seed: None,
            regressor: None,
            theta_rule: None,
            lemmas: None,
            output_dir: None,
            jobs: None,
            dump_samples: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config { field: "<document>".into(), message: e.to_string() })
    }
}

/// Every field made explicit; this is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: ExperimentKind,
    pub model: Option<ModelKind>,
    pub dim: usize,
    pub drift: Drift,
    pub sigma: f64,
    pub initial: InitialData,
    pub initial_velocity: InitialData,
    pub eval_point: Vec<f64>,
    pub n: usize,
    pub half_len: f64,
    pub time_step: TimeStep,
    pub measure: SpectralMeasure,
    pub eta: f64,
    pub t_schedule: Vec<f64>,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub regressor: Regressor,
    pub theta_rule: ThetaRule,
    pub lemmas: Vec<String>,
    pub output_dir: PathBuf,
    pub jobs: Option<usize>,
    pub dump_samples: bool,
}

pub const DEFAULT_SEED: u64 = 42;
pub const SCALING_TIMES: [f64; 5] = [0.05, 0.1, 0.2, 0.35, 0.5];
pub const WAVE_SCALING_TIMES: [f64; 8] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];

struct Preset {
    drift: Drift,
    initial: InitialData,
    n: usize,
    time_step: TimeStep,
    t_schedule: Vec<f64>,
    n_trajectories: usize,
}

fn preset(kind: ExperimentKind) -> Preset {
    use ExperimentKind::*;
    let atan = Drift::Atan { a: 1.0 };
    match kind {
        GaussianOracleHeat1d => Preset {
            drift: Drift::Zero,
            initial: InitialData::Zero,
            n: 64,
            time_step: TimeStep::DxRatio { ratio: 0.25 },
            t_schedule: vec![0.25],
            n_trajectories: 20_000,
        },
        SandwichHeat1d => Preset {
            drift: Drift::Atan { a: 8.0 },
            initial: InitialData::SineMode { mode: 1, amplitude: 2.0 },
            n: 32,
            time_step: TimeStep::DxRatio { ratio: 0.5 },
            t_schedule: vec![0.25],
            n_trajectories: 20_000,
        },
        ScalingHeat1d => Preset {
            drift: atan,
            initial: InitialData::Zero,
            n: 32,
            time_step: TimeStep::DxRatio { ratio: 0.5 },
            t_schedule: SCALING_TIMES.to_vec(),
            n_trajectories: 10_000,
        },
        SandwichHeatRd => Preset {
            drift: Drift::Atan { a: 8.0 },
            initial: InitialData::Constant { value: 0.8 },
            n: 64,
            time_step: TimeStep::Fixed { dt: 2e-3 },
            t_schedule: vec![0.25],
            n_trajectories: 20_000,
        },
        ScalingHeatRd => Preset {
            drift: atan,
            initial: InitialData::Zero,
            n: 128,
            time_step: TimeStep::Fixed { dt: 1e-3 },
            t_schedule: SCALING_TIMES.to_vec(),
            n_trajectories: 10_000,
        },
        SandwichWave => Preset {
            drift: Drift::Atan { a: 30.0 },
            initial: InitialData::Constant { value: 0.12 },
            n: 128,
            time_step: TimeStep::Fixed { dt: 2e-3 },
            t_schedule: vec![0.4],
            n_trajectories: 20_000,
        },
        ScalingWave => Preset {
            drift: atan,
            initial: InitialData::Zero,
            n: 128,
            time_step: TimeStep::Fixed { dt: 1e-3 },
            t_schedule: WAVE_SCALING_TIMES.to_vec(),
            n_trajectories: 10_000,
        },
        LemmaChecks => Preset {
            drift: Drift::Zero,
            initial: InitialData::Zero,
            n: 0,
            time_step: TimeStep::Fixed { dt: 0.0 },
            t_schedule: Vec::new(),
            n_trajectories: 0,
        },
    }
}

/// Torus half-period used when none is configured.
pub fn default_half_len(model: ModelKind, t_max: f64) -> f64 {
    match model {
        ModelKind::WaveRd => (2.0 * t_max).max(1.0),
        _ => (4.0 * (2.0 * t_max).sqrt()).max(1.0),
    }
}

impl ExperimentConfig {
    /// Fills in presets and checks every field.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let p = preset(self.experiment);
        let model = self.experiment.model();
        let m = &self.model;
        let dim = m.dim.unwrap_or(1);
        let t_schedule = self.t_schedule.clone().unwrap_or(p.t_schedule);
        let t_max = t_schedule.iter().copied().fold(0.0, f64::max);
        let measure = SpectralMeasure {
            kind: match (&self.measure, model) {
                (Some(k), _) => k.clone(),
                (None, Some(ModelKind::HeatDirichlet1d)) => MeasureKind::White,
                _ => MeasureKind::Riesz { epsilon: 0.5 },
            },
            dim,
        };
        let lemmas = self
            .lemmas
            .clone()
            .unwrap_or_else(|| Lemma::all().iter().map(|l| l.name().to_string()).collect());
        let resolved = ResolvedConfig {
            experiment: self.experiment,
            model,
            dim,
            drift: m.drift.unwrap_or(p.drift),
            sigma: m.sigma.unwrap_or(1.0),
            initial: m.initial.unwrap_or(p.initial),
            initial_velocity: m.initial_velocity.unwrap_or(InitialData::Zero),
            eval_point: m.eval_point.clone().unwrap_or_else(|| match model {
                Some(ModelKind::HeatDirichlet1d) => vec![0.5],
                _ => vec![0.0; dim],
            }),
            n: m.n.unwrap_or(p.n),
            half_len: m.half_len.unwrap_or_else(|| match model {
                Some(ModelKind::HeatDirichlet1d) | None => 0.5,
                Some(kind) => default_half_len(kind, t_max),
            }),
            time_step: m.time_step.unwrap_or(p.time_step),
            measure,
            eta: self.eta.unwrap_or(0.4),
            t_schedule,
            n_trajectories: self.n_trajectories.unwrap_or(p.n_trajectories),
            master_seed: self.master_seed.unwrap_or(DEFAULT_SEED),
            regressor: self.regressor.unwrap_or_default(),
            theta_rule: self.theta_rule.unwrap_or_default(),
            lemmas,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs").join(self.experiment.name())),
            jobs: self.jobs,
            dump_samples: self.dump_samples.unwrap_or(true),
        };
        resolved.check()?;
        Ok(resolved)
    }
}

/// Hypothesis diagnostics of a resolved config.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub warnings: Vec<String>,
    /// `int mu(dxi) / (1 + |xi|^2)`, when it applies.
    pub existence_integral: Option<f64>,
    /// `int mu(dxi) / (1 + |xi|^2)^eta`, `None` when divergent or not applicable.
    pub h_eta_integral: Option<f64>,
}

impl ResolvedConfig {
    fn check(&self) -> Result<()> {
        if self.experiment == ExperimentKind::LemmaChecks {
            for l in &self.lemmas {
                l.parse::<Lemma>()?;
            }
            return Ok(());
        }
        let model = self.model.expect("simulation experiment");
        if self.n_trajectories < crate::malliavin::MIN_SAMPLES {
            return Err(Error::config("n_trajectories", "need at least 1000 trajectories"));
        }
        if self.t_schedule.is_empty() || self.t_schedule.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config("t_schedule", "times must be positive"));
        }
        if self.experiment.is_scaling() && self.t_schedule.len() < 5 {
            return Err(Error::config("t_schedule", "scaling runs need at least 5 times"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("model.sigma", "sigma must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config("eta", "eta must lie in (0, 1]"));
        }
        match model {
            ModelKind::HeatDirichlet1d => {
                if self.dim != 1 {
                    return Err(Error::config("model.dim", "the interval model is one-dimensional"));
                }
                if self.measure.kind != MeasureKind::White {
                    return Err(Error::config("measure", "the interval model is driven by white noise"));
                }
            }
            ModelKind::HeatRd | ModelKind::WaveRd => {
                if !(1..=3).contains(&self.dim) {
                    return Err(Error::config("model.dim", "dimension must be 1, 2 or 3"));
                }
                if matches!(self.time_step, TimeStep::DxRatio { .. }) {
                    return Err(Error::config("model.time_step", "torus models need a fixed time step"));
                }
                self.measure.validate()?;
                if hypothesis_eta(&self.measure, 1.0)?.value().is_none() {
                    return Err(Error::config(
                        "measure",
                        "int mu(dxi) / (1 + |xi|^2) diverges: no function-valued solution exists",
                    ));
                }
            }
        }
        for t in &self.t_schedule {
            self.spec_at(*t)?.validate()?;
        }
        Ok(())
    }

    /// Model specification at evaluation time `t`.
    pub fn spec_at(&self, t: f64) -> Result<ModelSpec> {
        let model = self
            .model
            .ok_or_else(|| Error::config("experiment", "lemma checks do not simulate"))?;
        let spec = match model {
            ModelKind::HeatDirichlet1d => {
                let dx = 1.0 / self.n as f64;
                let dt = match self.time_step {
                    TimeStep::DxRatio { ratio } => ratio * dx * dx,
                    TimeStep::Fixed { dt } => dt,
                };
                let mut s = ModelSpec::heat_dirichlet(self.n, 1.0, t, self.eval_point[0]);
                s.dt = dt;
                s
            }
            ModelKind::HeatRd | ModelKind::WaveRd => {
                let grid = TorusGrid { dim: self.dim, half_len: self.half_len, n: self.n };
                let TimeStep::Fixed { dt } = self.time_step else {
                    return Err(Error::config("model.time_step", "torus models need a fixed time step"));
                };
                let mut s = if model == ModelKind::HeatRd {
                    ModelSpec::heat_rd(self.measure.clone(), grid, dt, t)
                } else {
                    ModelSpec::wave_rd(self.measure.clone(), grid, dt, t)
                };
                s.eval_point = self.eval_point.clone();
                s
            }
        };
        Ok(spec
            .with_drift(self.drift)
            .with_sigma(self.sigma)
            .with_initial(self.initial)
            .with_initial_velocity(self.initial_velocity))
    }

    /// Warnings for runs outside the hypotheses of the density theorems.
    pub fn diagnostics(&self) -> Result<ValidationReport> {
        let mut report = ValidationReport::default();
        let Some(model) = self.model else {
            return Ok(report);
        };
        if model == ModelKind::HeatDirichlet1d {
            return Ok(report);
        }
        report.existence_integral = hypothesis_eta(&self.measure, 1.0)?.value();
        report.h_eta_integral = hypothesis_eta(&self.measure, self.eta)?.value();
        if report.h_eta_integral.is_none() {
            report.warnings.push(format!(
                "int mu(dxi) / (1 + |xi|^2)^eta diverges for eta = {}: the upper exponent is not covered",
                self.eta
            ));
        }
        let t_max = self.t_schedule.iter().copied().fold(0.0, f64::max);
        match model {
            ModelKind::HeatRd if self.eta >= 0.75 => report
                .warnings
                .push(format!("eta = {} is outside (0, 3/4) required by the heat density bounds", self.eta)),
            ModelKind::WaveRd if t_max > 0.5 => report.warnings.push(format!(
                "t = {t_max} may exceed the small-time regime T0 of the wave density bounds"
            )),
            _ => {}
        }
        if let (Some(ModelKind::HeatRd | ModelKind::WaveRd), Some(t)) = (self.model, self.t_schedule.last()) {
            let reach = if model == ModelKind::WaveRd { *t } else { 4.0 * (2.0 * t).sqrt() };
            if reach > self.half_len {
                report.warnings.push(format!(
                    "half-period {} is smaller than the propagation reach {reach:.3}: expect wrap-around",
                    self.half_len
                ));
            }
        }
        Ok(report)
    }
}
