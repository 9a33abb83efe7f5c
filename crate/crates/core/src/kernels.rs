//! Green functions, fundamental solutions and the kernel-norm integrals
//! that drive the density bounds.
//!
//! Fourier convention: `F phi(xi) = int e^{-2 pi i x.xi} phi(x) dx`, so the
//! heat kernel `G_t(x) = (4 pi t)^{-d/2} e^{-|x|^2/4t}` has transform
//! `e^{-4 pi^2 t |xi|^2}` and the wave kernel has transform
//! `sin(2 pi t |xi|) / (2 pi |xi|)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::SpectralMeasure;
use crate::quadrature::RadialIntegral;

/// How the Dirichlet heat kernel on `(0, 1)` is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletRepr {
    /// `2 sum_n e^{-n^2 pi^2 t} sin(n pi x) sin(n pi y)`
    EigenSeries,
    /// `sum_k p_t(x - y + 2k) - p_t(x + y + 2k)`
    ImageMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatDirichletKernel {
    pub truncation_terms: usize,
    pub image_terms: usize,
    pub representation: DirichletRepr,
}

impl Default for HeatDirichletKernel {
    fn default() -> Self {
        Self {
            truncation_terms: 512,
            image_terms: 32,
            representation: DirichletRepr::EigenSeries,
        }
    }
}

impl HeatDirichletKernel {
    pub fn image_method() -> Self {
        Self { representation: DirichletRepr::ImageMethod, ..Self::default() }
    }

    fn eigen(&self, t: f64, x: f64, y: f64) -> f64 {
        let mut sum = 0.0;
        for n in 1..=self.truncation_terms {
            let nf = n as f64;
            let decay = (-nf * nf * PI * PI * t).exp();
            if decay < 1e-16 {
                break;
            }
            sum += decay * (nf * PI * x).sin() * (nf * PI * y).sin();
        }
        2.0 * sum
    }

    fn images(&self, t: f64, x: f64, y: f64) -> f64 {
        let k = self.image_terms as i64;
        let mut sum = 0.0;
        for j in -k..=k {
            let shift = 2.0 * j as f64;
            sum += free_heat_1d(t, x - y + shift) - free_heat_1d(t, x + y + shift);
        }
        sum
    }
}

/// `(4 pi t)^{-1/2} e^{-z^2 / 4t}`.
pub fn free_heat_1d(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// Dirichlet heat kernel `G_t(x, y)` on `(0, 1)` for `u_t = u_xx`.
pub fn heat_dirichlet_green(t: f64, x: f64, y: f64, kernel: &HeatDirichletKernel) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("time t = {t} must be positive")));
    }
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(Error::domain(format!("points ({x}, {y}) must lie in (0, 1)")));
    }
    let g = match kernel.representation {
        DirichletRepr::EigenSeries => kernel.eigen(t, x, y),
        DirichletRepr::ImageMethod => kernel.images(t, x, y),
    };
    Ok(g.max(0.0))
}

/// `int_{t_lo}^{t_hi} int_0^1 G_{t_hi - s}(x, y)^2 dy ds`.
///
/// Uses `sum_n sin^2(n pi x) / (n pi)^2 = x (1 - x) / 2` so only the
/// exponentially decaying part of the eigen series has to be summed.
pub fn heat_dirichlet_sq_norm(t_lo: f64, t_hi: f64, x: f64, kernel: &HeatDirichletKernel) -> Result<f64> {
    if !(t_lo >= 0.0 && t_hi >= t_lo) {
        return Err(Error::domain(format!("invalid interval [{t_lo}, {t_hi}]")));
    }
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("point {x} must lie in (0, 1)")));
    }
    let tau = t_hi - t_lo;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let max_terms = kernel.truncation_terms.max(1 << 20);
    let mut tail = 0.0;
    for n in 1..=max_terms {
        let a = n as f64 * PI;
        let decay = (-2.0 * a * a * tau).exp();
        if decay < 1e-18 {
            break;
        }
        tail += (a * x).sin().powi(2) * decay / (a * a);
    }
    Ok(x * (1.0 - x) / 2.0 - tail)
}

/// Free-space heat kernel on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpaceHeatKernel {
    pub dim: usize,
}

impl FreeSpaceHeatKernel {
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().take(self.dim).map(|v| v * v).sum();
        (-r2 / (4.0 * t)).exp() / (4.0 * PI * t).powf(self.dim as f64 / 2.0)
    }

    pub fn fourier(&self, t: f64, xi_norm: f64) -> f64 {
        (-4.0 * PI * PI * t * xi_norm * xi_norm).exp()
    }
}

/// Fundamental solution of the wave equation in `d = 1, 2, 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveKernel {
    pub dim: usize,
}

impl WaveKernel {
    /// Density of `Gamma^d_t` at distance `r` from the origin; `None` in
    /// `d = 3`, where `Gamma^3_t` is the surface measure of the sphere of
    /// radius `t` divided by `4 pi t`.
    pub fn density(&self, t: f64, r: f64) -> Option<f64> {
        match self.dim {
            1 => Some(if r < t { 0.5 } else { 0.0 }),
            2 => Some(if r < t { 1.0 / (2.0 * PI * (t * t - r * r).sqrt()) } else { 0.0 }),
            _ => None,
        }
    }

    /// Total mass `Gamma^d_t(R^d)`, equal to `t` for `d = 1, 2, 3`.
    pub fn total_mass(&self, t: f64) -> f64 {
        t
    }

    pub fn fourier(&self, t: f64, xi_norm: f64) -> f64 {
        wave_ft(t, xi_norm)
    }
}

/// `sin(2 pi t r) / (2 pi r)`, continuously extended by `t` at `r = 0`.
pub fn wave_ft(t: f64, xi_norm: f64) -> f64 {
    let a = 2.0 * PI * xi_norm;
    if a * t < 1e-8 {
        t * (1.0 - (a * t).powi(2) / 6.0)
    } else {
        (a * t).sin() / a
    }
}

/// `int_0^t |F Gamma_s(xi)|^2 ds = t/(2a^2) - sin(2at)/(4a^3)`, `a = 2 pi |xi|`.
pub fn wave_ft_time_integral(t: f64, xi_norm: f64) -> f64 {
    let a = 2.0 * PI * xi_norm;
    let x = a * t;
    if x < 1e-2 {
        // t^3 (1/3 - x^2/15 + 2x^4/315 - x^6/2835)
        let x2 = x * x;
        t.powi(3) * (1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 315.0 - x2 * x2 * x2 / 2835.0)
    } else {
        t / (2.0 * a * a) - (2.0 * x).sin() / (4.0 * a * a * a)
    }
}

/// `int_0^t Gamma^d_s(R^d) ds = t^2 / 2`.
pub fn wave_mass_integral(d: usize, t: f64) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return Err(Error::domain(format!("wave kernel is a nonnegative measure only for d <= 3, got {d}")));
    }
    if !(t >= 0.0) {
        return Err(Error::domain("time must be >= 0"));
    }
    Ok(t * t / 2.0)
}

fn heat_integrand(t: f64) -> impl Fn(f64) -> f64 {
    let c = 8.0 * PI * PI;
    move |r: f64| {
        let x = c * t * r * r;
        if x < 1e-8 {
            t * (1.0 - x / 2.0)
        } else {
            -(-x).exp_m1() / (c * r * r)
        }
    }
}

/// `int_0^t int |F G_s(xi)|^2 mu(dxi) ds = int mu(dxi) (1 - e^{-8 pi^2 t |xi|^2}) / (8 pi^2 |xi|^2)`.
pub fn heat_rd_spectral_integral(t: f64, mu: &SpectralMeasure) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("time must be >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    match mu.integrate_radial(heat_integrand(t), 0.0, (1.0 / (8.0 * PI * PI), -2.0)) {
        RadialIntegral::Finite(v) => Ok(v),
        RadialIntegral::Divergent => Err(Error::NotIntegrable(
            "int mu(dxi) / (1 + |xi|^2) diverges".into(),
        )),
    }
}

/// Same integral against the grid-truncated measure `sum_k w_k delta_{xi_k}`.
pub fn heat_discrete_spectral_integral(t: f64, weights: &[f64], xi_norms: &[f64]) -> f64 {
    let f = heat_integrand(t);
    weights.iter().zip(xi_norms).map(|(w, &r)| w * f(r)).sum()
}

/// `int_0^t int |F Gamma_s(xi)|^2 mu(dxi) ds`.
pub fn wave_spectral_integral(t: f64, mu: &SpectralMeasure) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("time must be >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    match mu.integrate_radial(
        |r| wave_ft_time_integral(t, r),
        0.0,
        (t / (8.0 * PI * PI), -2.0),
    ) {
        RadialIntegral::Finite(v) => Ok(v),
        RadialIntegral::Divergent => Err(Error::NotIntegrable(
            "int mu(dxi) / (1 + |xi|^2) diverges".into(),
        )),
    }
}

pub fn wave_discrete_spectral_integral(t: f64, weights: &[f64], xi_norms: &[f64]) -> f64 {
    weights
        .iter()
        .zip(xi_norms)
        .map(|(w, &r)| w * wave_ft_time_integral(t, r))
        .sum()
}

/// Kernel estimates that can be checked on a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `c_x sqrt(t) <= int_0^t int G^2 <= sqrt(t) / sqrt(2 pi)` on `[0, 1]`.
    Eq5,
    /// `k1 t <= int_0^t int |FG_s|^2 dmu ds <= k2 t^{1 - eta}`.
    Lemma4,
    /// `c1 (t ^ t^3) / (1 + |xi|^2) <= int_0^t |F Gamma_s(xi)|^2 ds <= c2 (t + t^3) / (1 + |xi|^2)`.
    Lemma5,
    /// `int_0^t int |F Gamma_s|^2 dmu ds <= d3 t^{3 - 2 eta}`.
    Lemma6,
    /// `int_0^t Gamma_s(R^d) ds <= C t^2`.
    Eq53,
    /// `d1 t^3 <= int_0^t int |F Gamma_s|^2 dmu ds <= d2 t` for `t < 1`.
    Eq71,
}

impl std::str::FromStr for Lemma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eq5" => Lemma::Eq5,
            "lemma4" => Lemma::Lemma4,
            "lemma5" => Lemma::Lemma5,
            "lemma6" => Lemma::Lemma6,
            "eq53" => Lemma::Eq53,
            "eq71" => Lemma::Eq71,
            other => return Err(Error::UnknownLemma(other.to_string())),
        })
    }
}

impl Lemma {
    pub fn name(self) -> &'static str {
        match self {
            Lemma::Eq5 => "eq5",
            Lemma::Lemma4 => "lemma4",
            Lemma::Lemma5 => "lemma5",
            Lemma::Lemma6 => "lemma6",
            Lemma::Eq53 => "eq53",
            Lemma::Eq71 => "eq71",
        }
    }

    pub fn all() -> [Lemma; 6] {
        [Lemma::Eq5, Lemma::Lemma4, Lemma::Lemma5, Lemma::Lemma6, Lemma::Eq53, Lemma::Eq71]
    }
}

/// Parameter grid for [`check_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub times: Vec<f64>,
    /// Frequencies `|xi|` (lemma5 only).
    #[serde(default)]
    pub xi_norms: Vec<f64>,
    /// Point in `(0, 1)` (eq5 only).
    #[serde(default = "default_x")]
    pub x: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_measure")]
    pub measure: SpectralMeasure,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
}

fn default_x() -> f64 {
    0.5
}
fn default_eta() -> f64 {
    0.3
}
fn default_measure() -> SpectralMeasure {
    SpectralMeasure::riesz(1, 0.5)
}
fn default_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

impl BoundParams {
    /// Grid used by the `lemma-checks` experiment for each lemma.
    pub fn default_for(lemma: Lemma) -> Self {
        let log_grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
                .collect()
        };
        let base = BoundParams {
            times: vec![],
            xi_norms: vec![],
            x: 0.5,
            eta: 0.3,
            measure: SpectralMeasure::riesz(1, 0.5),
            dims: vec![1, 2, 3],
        };
        match lemma {
            Lemma::Eq5 => BoundParams { times: vec![0.01, 0.05, 0.1, 0.5, 1.0], ..base },
            Lemma::Lemma4 => BoundParams {
                times: (1..=10).map(|i| i as f64 / 10.0).collect(),
                ..base
            },
            Lemma::Lemma5 => {
                let mut xi = vec![0.0];
                xi.extend(log_grid(1e-3, 100.0, 41));
                BoundParams { times: log_grid(0.01, 10.0, 31), xi_norms: xi, ..base }
            }
            Lemma::Lemma6 => BoundParams { times: log_grid(0.01, 1.0, 21), ..base },
            Lemma::Eq53 => BoundParams { times: log_grid(0.01, 10.0, 11), ..base },
            Lemma::Eq71 => BoundParams { times: log_grid(0.01, 0.99, 21), ..base },
        }
    }
}

/// One evaluated grid point of a bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub params: Vec<(String, f64)>,
    pub integral: f64,
    /// Shape of the lower envelope (without its constant).
    pub envelope_lower: f64,
    /// Shape of the upper envelope (without its constant).
    pub envelope_upper: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
}

/// Claimed value of a constant: an explicit number or "exists".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Analytic(f64),
    Empirical,
}

/// Empirical constants of a kernel estimate over a parameter grid.
///
/// `ratio_min` is the smallest `integral / lower shape` (the measured lower
/// constant) and `ratio_max` the largest `integral / upper shape`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lemma: Lemma,
    pub rows: Vec<BoundRow>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub claimed_lower: Claim,
    pub claimed_upper: Claim,
    pub pass: bool,
}

impl BoundReport {
    fn from_rows(lemma: Lemma, rows: Vec<BoundRow>, claimed_lower: Claim, claimed_upper: Claim) -> Self {
        let ratio_min = rows.iter().map(|r| r.ratio_lower).fold(f64::INFINITY, f64::min);
        let ratio_max = rows.iter().map(|r| r.ratio_upper).fold(f64::NEG_INFINITY, f64::max);
        let upper_ok = match claimed_upper {
            Claim::Analytic(c) => ratio_max <= c * (1.0 + 1e-12),
            Claim::Empirical => ratio_max.is_finite(),
        };
        let lower_ok = match claimed_lower {
            Claim::Analytic(c) => ratio_min >= c * (1.0 - 1e-12),
            Claim::Empirical => true,
        };
        let pass = !rows.is_empty() && ratio_min > 0.0 && ratio_min.is_finite() && upper_ok && lower_ok;
        Self { lemma, rows, ratio_min, ratio_max, claimed_lower, claimed_upper, pass }
    }

    /// Ratio between the measured upper and lower constants.
    pub fn spread(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }

    /// CSV rows `lemma,<param names...>,integral,envelope_lower,envelope_upper,ratio_lower,ratio_upper`.
    pub fn write_csv<W: std::io::Write>(&self, out: W, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if with_header {
            w.write_record([
                "lemma", "param1", "value1", "param2", "value2", "integral", "envelope_lower",
                "envelope_upper", "ratio_lower", "ratio_upper",
            ])?;
        }
        for row in &self.rows {
            let mut rec = vec![self.lemma.name().to_string()];
            for i in 0..2 {
                match row.params.get(i) {
                    Some((k, v)) => {
                        rec.push(k.clone());
                        rec.push(format!("{v:e}"));
                    }
                    None => {
                        rec.push(String::new());
                        rec.push(String::new());
                    }
                }
            }
            for v in [row.integral, row.envelope_lower, row.envelope_upper, row.ratio_lower, row.ratio_upper] {
                rec.push(format!("{v:e}"));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lemma": self.lemma.name(),
            "points": self.rows.len(),
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "claimed_lower": self.claimed_lower,
            "claimed_upper": self.claimed_upper,
            "pass": self.pass,
        })
    }
}

fn row(params: Vec<(&str, f64)>, integral: f64, lower: f64, upper: f64) -> BoundRow {
    BoundRow {
        params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        integral,
        envelope_lower: lower,
        envelope_upper: upper,
        ratio_lower: integral / lower,
        ratio_upper: integral / upper,
    }
}

/// Evaluates a kernel estimate over `params` and measures its constants.
pub fn check_bound(lemma: Lemma, params: &BoundParams) -> Result<BoundReport> {
    let mut rows = Vec::new();
    let (claimed_lower, claimed_upper) = match lemma {
        Lemma::Eq5 => {
            let kernel = HeatDirichletKernel::default();
            for &t in &params.times {
                let v = heat_dirichlet_sq_norm(0.0, t, params.x, &kernel)?;
                rows.push(row(vec![("t", t), ("x", params.x)], v, t.sqrt(), t.sqrt()));
            }
            (Claim::Empirical, Claim::Analytic(1.0 / (2.0 * PI).sqrt()))
        }
        Lemma::Lemma4 => {
            for &t in &params.times {
                let v = heat_rd_spectral_integral(t, &params.measure)?;
                rows.push(row(vec![("t", t)], v, t, t.powf(1.0 - params.eta)));
            }
            (Claim::Empirical, Claim::Empirical)
        }
        Lemma::Lemma5 => {
            for &t in &params.times {
                for &r in &params.xi_norms {
                    let v = wave_ft_time_integral(t, r);
                    let damp = 1.0 / (1.0 + r * r);
                    rows.push(row(
                        vec![("t", t), ("xi", r)],
                        v,
                        t.min(t.powi(3)) * damp,
                        (t + t.powi(3)) * damp,
                    ));
                }
            }
            (Claim::Empirical, Claim::Empirical)
        }
        Lemma::Lemma6 => {
            for &t in &params.times {
                let v = wave_spectral_integral(t, &params.measure)?;
                let shape = t.powf(3.0 - 2.0 * params.eta);
                rows.push(row(vec![("t", t)], v, shape, shape));
            }
            (Claim::Empirical, Claim::Empirical)
        }
        Lemma::Eq53 => {
            for &d in &params.dims {
                for &t in &params.times {
                    let v = wave_mass_integral(d, t)?;
                    rows.push(row(vec![("d", d as f64), ("t", t)], v, t * t, t * t));
                }
            }
            (Claim::Empirical, Claim::Analytic(0.5))
        }
        Lemma::Eq71 => {
            for &t in &params.times {
                let v = wave_spectral_integral(t, &params.measure)?;
                rows.push(row(vec![("t", t)], v, t.powi(3), t));
            }
            (Claim::Empirical, Claim::Empirical)
        }
    };
    Ok(BoundReport::from_rows(lemma, rows, claimed_lower, claimed_upper))
}
