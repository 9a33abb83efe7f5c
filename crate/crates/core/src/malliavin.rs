//! Monte Carlo estimation of `g(z) = E[<DF, -DL^{-1}F>_H | F = z]` through
//! Mehler-shifted trajectory pairs and nonparametric regression over `F`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, derived_stream, Purpose};
use crate::solvers::{ModelSpec, PairEngine};

/// One `(F, F~, c)` draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftPairSample {
    pub index: u64,
    pub f: f64,
    pub f_shift: f64,
    pub theta: f64,
    /// `<DF, D~F>_{H_T}`
    pub cross: f64,
    /// `||DF||^2_{H_T}`
    pub norm_sq: f64,
    pub seed_w: u64,
    pub seed_w_prime: u64,
}

/// How `theta` is chosen for each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaRule {
    /// `theta = -ln U` with `U` uniform.
    #[default]
    Sampled,
    /// Cycles through the midpoints of `points` equal strata of `U`.
    Stratified { points: u32 },
}

/// Draws shift pairs for a fixed model; the scheme is set up once.
pub struct PairSampler {
    engine: PairEngine,
    master_seed: u64,
    rule: ThetaRule,
}

impl PairSampler {
    pub fn new(spec: &ModelSpec, master_seed: u64) -> Result<Self> {
        Ok(Self { engine: PairEngine::new(spec)?, master_seed, rule: ThetaRule::Sampled })
    }

    pub fn with_rule(mut self, rule: ThetaRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn theta(&self, index: u64) -> f64 {
        let u = match self.rule {
            ThetaRule::Sampled => {
                let mut rng = derived_stream(self.master_seed, index, Purpose::Theta);
                // in (0, 1]
                1.0 - rng.random::<f64>()
            }
            ThetaRule::Stratified { points } => {
                let p = points.max(1) as u64;
                ((index % p) as f64 + 0.5) / p as f64
            }
        };
        -u.ln()
    }

    pub fn draw(&self, index: u64) -> Result<ShiftPairSample> {
        self.draw_with_theta(index, self.theta(index))
    }

    pub fn draw_with_theta(&self, index: u64, theta: f64) -> Result<ShiftPairSample> {
        if !(theta >= 0.0) {
            return Err(Error::domain("theta must be >= 0"));
        }
        let seed_w = derive_seed(self.master_seed, index, Purpose::Noise);
        let seed_w_prime = derive_seed(self.master_seed, index, Purpose::NoiseCopy);
        let v = self.engine.pair(seed_w, seed_w_prime, theta)?;
        Ok(ShiftPairSample {
            index,
            f: v.f,
            f_shift: v.f_shift,
            theta,
            cross: v.cross,
            norm_sq: v.norm_sq,
            seed_w,
            seed_w_prime,
        })
    }

    /// Draws pairs `0..n` in index order (in parallel when enabled).
    pub fn draw_many(&self, n: usize) -> Result<Vec<ShiftPairSample>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..n as u64).into_par_iter().map(|i| self.draw(i)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n as u64).map(|i| self.draw(i)).collect()
        }
    }

    /// `||DF||^2` when the drift is linear (deterministic tangent).
    pub fn deterministic_norm(&self) -> Option<f64> {
        self.engine.deterministic_norm()
    }
}

/// Single pair `index` of the stream seeded by `master_seed`.
pub fn draw_shift_pair(spec: &ModelSpec, master_seed: u64, index: u64) -> Result<ShiftPairSample> {
    PairSampler::new(spec, master_seed)?.draw(index)
}

/// Conditional-expectation estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regressor {
    /// Gaussian-kernel Nadaraya-Watson; `None` selects Silverman's bandwidth.
    NadarayaWatson { bandwidth: Option<f64> },
    /// Equal-count bins of at least `min_per_bin` samples, interpolated linearly.
    Binning { min_per_bin: usize },
}

impl Default for Regressor {
    fn default() -> Self {
        Regressor::NadarayaWatson { bandwidth: None }
    }
}

/// Regression of `c` on `F` on the grid `m +- 4 s` (spacing `s/50`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GEstimate {
    pub z_grid: Vec<f64>,
    /// Clipped estimate.
    pub g_hat: Vec<f64>,
    /// Estimate before clipping (may dip below zero).
    pub g_raw: Vec<f64>,
    /// Standard error of the raw estimate.
    pub g_se: Vec<f64>,
    /// Samples within one bandwidth (or in the bin) of each grid point.
    pub counts: Vec<usize>,
    pub bandwidth: f64,
    pub n_samples: usize,
    pub g_min: f64,
    pub mean: f64,
    pub std: f64,
    /// `(q_0.05, q_0.95)` of the `F` samples.
    pub window: (f64, f64),
    /// Fraction of grid points in `window` where the raw estimate is negative.
    pub negative_fraction: f64,
}

pub const GRID_HALF_WIDTH: usize = 200;
const GRID_STEPS_PER_STD: f64 = 50.0;

impl GEstimate {
    /// Grid offsets `z - m`, containing an exact zero.
    pub fn offsets(&self) -> Vec<f64> {
        offsets(self.std)
    }

    /// Writes `z,g_hat,g_raw,g_se,count` rows.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["z", "g_hat", "g_raw", "g_se", "count"])?;
        for i in 0..self.z_grid.len() {
            w.write_record([
                self.z_grid[i].to_string(),
                self.g_hat[i].to_string(),
                self.g_raw[i].to_string(),
                self.g_se[i].to_string(),
                self.counts[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn offsets(std: f64) -> Vec<f64> {
    let h = GRID_HALF_WIDTH as i64;
    (-h..=h).map(|i| std * i as f64 / GRID_STEPS_PER_STD).collect()
}

pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Linear-interpolated empirical quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Silverman's rule `0.9 min(s, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: x.len() });
    }
    let (_, s) = mean_std(x);
    let sx = sorted(x);
    let iqr = quantile_sorted(&sx, 0.75) - quantile_sorted(&sx, 0.25);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    if !(spread > 1e-12) {
        return Err(Error::DegenerateSpread(s));
    }
    Ok(0.9 * spread * (x.len() as f64).powf(-0.2))
}

pub const MIN_SAMPLES: usize = 1000;

/// Estimates `g` from shift-pair samples.
pub fn estimate_g(samples: &[ShiftPairSample], regressor: &Regressor) -> Result<GEstimate> {
    let f: Vec<f64> = samples.iter().map(|s| s.f).collect();
    let c: Vec<f64> = samples.iter().map(|s| s.cross).collect();
    estimate_g_from(&f, &c, regressor)
}

/// Same as [`estimate_g`] on bare `(F, c)` columns.
pub fn estimate_g_from(f: &[f64], c: &[f64], regressor: &Regressor) -> Result<GEstimate> {
    if f.len() != c.len() {
        return Err(Error::ShapeMismatch("F and c columns differ in length".into()));
    }
    if f.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: f.len() });
    }
    let (mean, std) = mean_std(f);
    if !(std >= 1e-12) {
        return Err(Error::DegenerateSpread(std));
    }
    let z_grid: Vec<f64> = offsets(std).iter().map(|o| mean + o).collect();
    let (g_raw, g_se, counts, bandwidth) = match *regressor {
        Regressor::NadarayaWatson { bandwidth } => {
            let h = match bandwidth {
                Some(h) if h > 0.0 => h,
                Some(_) => return Err(Error::config("regressor.bandwidth", "bandwidth must be positive")),
                None => silverman_bandwidth(f)?,
            };
            let (g, se, n) = nadaraya_watson(f, c, &z_grid, h);
            (g, se, n, h)
        }
        Regressor::Binning { min_per_bin } => {
            if min_per_bin < 50 {
                return Err(Error::config("regressor.min_per_bin", "need at least 50 samples per bin"));
            }
            binned(f, c, &z_grid, min_per_bin)
        }
    };
    let sf = sorted(f);
    let window = (quantile_sorted(&sf, 0.05), quantile_sorted(&sf, 0.95));
    let in_window: Vec<usize> =
        (0..z_grid.len()).filter(|&i| z_grid[i] >= window.0 && z_grid[i] <= window.1).collect();
    let negative = in_window.iter().filter(|&&i| g_raw[i] < 0.0).count();
    let negative_fraction = negative as f64 / in_window.len().max(1) as f64;
    let positive = sorted(&g_raw.iter().copied().filter(|v| *v > 0.0).collect::<Vec<_>>());
    let q01 = if positive.is_empty() { 0.0 } else { quantile_sorted(&positive, 0.01) };
    let g_min = f64::EPSILON.max(q01);
    Ok(GEstimate {
        g_hat: g_raw.iter().map(|v| v.max(g_min)).collect(),
        z_grid,
        g_raw,
        g_se,
        counts,
        bandwidth,
        n_samples: f.len(),
        g_min,
        mean,
        std,
        window,
        negative_fraction,
    })
}

fn nadaraya_watson(f: &[f64], c: &[f64], z: &[f64], h: f64) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let inv = 1.0 / (2.0 * h * h);
    let mut g = Vec::with_capacity(z.len());
    let mut se = Vec::with_capacity(z.len());
    let mut counts = Vec::with_capacity(z.len());
    let mut logw = vec![0.0; f.len()];
    for &zj in z {
        let mut top = f64::NEG_INFINITY;
        let mut count = 0;
        for (l, &fi) in logw.iter_mut().zip(f) {
            let d = zj - fi;
            *l = -d * d * inv;
            top = top.max(*l);
            if d.abs() <= h {
                count += 1;
            }
        }
        // log-sum-exp shift keeps the far tails finite
        let (mut sw, mut swc) = (0.0, 0.0);
        for (l, &ci) in logw.iter_mut().zip(c) {
            *l = (*l - top).exp();
            sw += *l;
            swc += *l * ci;
        }
        let est = swc / sw;
        let var: f64 = logw.iter().zip(c).map(|(w, ci)| (w * (ci - est)).powi(2)).sum();
        g.push(est);
        se.push(var.sqrt() / sw);
        counts.push(count);
    }
    (g, se, counts)
}

fn binned(f: &[f64], c: &[f64], z: &[f64], min_per_bin: usize) -> (Vec<f64>, Vec<f64>, Vec<usize>, f64) {
    let mut idx: Vec<usize> = (0..f.len()).collect();
    idx.sort_by(|&a, &b| f[a].total_cmp(&f[b]));
    let n_bins = (f.len() / min_per_bin).max(1);
    let mut centers = Vec::with_capacity(n_bins);
    let mut means = Vec::with_capacity(n_bins);
    let mut ses = Vec::with_capacity(n_bins);
    let mut sizes = Vec::with_capacity(n_bins);
    let mut edges = Vec::with_capacity(n_bins + 1);
    for b in 0..n_bins {
        let lo = b * f.len() / n_bins;
        let hi = (b + 1) * f.len() / n_bins;
        let members = &idx[lo..hi];
        let fx: Vec<f64> = members.iter().map(|&i| f[i]).collect();
        let cx: Vec<f64> = members.iter().map(|&i| c[i]).collect();
        let (fm, _) = mean_std(&fx);
        let (cm, cs) = mean_std(&cx);
        centers.push(fm);
        means.push(cm);
        ses.push(cs / (cx.len() as f64).sqrt());
        sizes.push(cx.len());
        edges.push(f[members[0]]);
    }
    let mut width = 0.0;
    for w in centers.windows(2) {
        width += w[1] - w[0];
    }
    let width = width / (centers.len().max(2) - 1) as f64;
    let mut g = Vec::with_capacity(z.len());
    let mut se = Vec::with_capacity(z.len());
    let mut counts = Vec::with_capacity(z.len());
    for &zj in z {
        let k = centers.partition_point(|&x| x < zj);
        let (v, s) = if k == 0 {
            (means[0], ses[0])
        } else if k == centers.len() {
            (means[k - 1], ses[k - 1])
        } else {
            let a = (zj - centers[k - 1]) / (centers[k] - centers[k - 1]);
            (
                means[k - 1] + a * (means[k] - means[k - 1]),
                ses[k - 1].max(ses[k]),
            )
        };
        g.push(v);
        se.push(s);
        let bin = edges.partition_point(|&e| e <= zj).saturating_sub(1);
        counts.push(sizes[bin]);
    }
    (g, se, counts, width)
}

/// Min and max of `g_hat` over grid points in `window` (default: the
/// central 90% of the `F` samples).
pub fn g_bounds_summary(g: &GEstimate, window: Option<(f64, f64)>) -> Result<(f64, f64)> {
    let (lo, hi) = window.unwrap_or(g.window);
    let vals: Vec<f64> = g
        .z_grid
        .iter()
        .zip(&g.g_hat)
        .filter(|(z, _)| **z >= lo && **z <= hi)
        .map(|(_, v)| *v)
        .collect();
    if vals.is_empty() {
        return Err(Error::domain(format!("no grid point inside the window [{lo}, {hi}]")));
    }
    Ok((
        vals.iter().copied().fold(f64::INFINITY, f64::min),
        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ))
}
