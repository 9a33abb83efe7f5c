//! Density reconstruction from `g`, Gaussian envelopes, kernel density
//! estimates and the scaling fits of `g` against time.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::malliavin::{mean_std, silverman_bandwidth, GEstimate, MIN_SAMPLES};

/// `rho(z) = E|F| / (2 g(z)) exp(-int_0^z y / g(y) dy)` on a grid of centered
/// values containing `0`, by cumulative trapezoids outward from `0`.
pub fn nv_density(z: &[f64], g: &[f64], e_abs_f: f64) -> Result<Vec<f64>> {
    if z.len() != g.len() || z.is_empty() {
        return Err(Error::ShapeMismatch("z and g differ in length".into()));
    }
    if !(e_abs_f > 0.0) {
        return Err(Error::domain("E|F| must be positive"));
    }
    if let Some(bad) = g.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::domain(format!("g({}) = {} is not positive", z[bad], g[bad])));
    }
    let span = z[z.len() - 1] - z[0];
    let zero = z
        .iter()
        .position(|v| v.abs() <= 1e-12 * span.abs().max(1e-300))
        .ok_or_else(|| Error::domain("grid does not contain 0"))?;
    let h = |i: usize| z[i] / g[i];
    let mut integral = vec![0.0; z.len()];
    for i in zero + 1..z.len() {
        integral[i] = integral[i - 1] + 0.5 * (z[i] - z[i - 1]) * (h(i) + h(i - 1));
    }
    for i in (0..zero).rev() {
        integral[i] = integral[i + 1] - 0.5 * (z[i + 1] - z[i]) * (h(i) + h(i + 1));
    }
    Ok((0..z.len()).map(|i| e_abs_f / (2.0 * g[i]) * (-integral[i]).exp()).collect())
}

/// Lower and upper Gaussian envelopes
/// `E|F|/(2 c2) exp(-(z-m)^2/(2 c1))` and `E|F|/(2 c1) exp(-(z-m)^2/(2 c2))`.
pub fn gaussian_envelopes(e_abs_f: f64, c1: f64, c2: f64, m: f64, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(c1 > 0.0 && c1 <= c2) {
        return Err(Error::domain(format!("need 0 < c1 <= c2, got c1 = {c1}, c2 = {c2}")));
    }
    if !(e_abs_f > 0.0) {
        return Err(Error::domain("E|F| must be positive"));
    }
    let lower = z.iter().map(|x| e_abs_f / (2.0 * c2) * (-(x - m).powi(2) / (2.0 * c1)).exp()).collect();
    let upper = z.iter().map(|x| e_abs_f / (2.0 * c1) * (-(x - m).powi(2) / (2.0 * c2)).exp()).collect();
    Ok((lower, upper))
}

/// Gaussian kernel density estimate on `z` with its pointwise standard error.
pub fn kde_with_se(samples: &[f64], bandwidth: Option<f64>, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: samples.len() });
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(Error::domain("bandwidth must be positive")),
        None => silverman_bandwidth(samples)?,
    };
    let n = samples.len() as f64;
    let norm = 1.0 / (n * h * (2.0 * PI).sqrt());
    let rough = 1.0 / (2.0 * PI.sqrt());
    let mut rho = Vec::with_capacity(z.len());
    let mut se = Vec::with_capacity(z.len());
    for &x in z {
        let s: f64 = samples.iter().map(|v| (-((x - v) / h).powi(2) / 2.0).exp()).sum();
        let r = s * norm;
        rho.push(r);
        se.push((r * rough / (n * h)).sqrt());
    }
    Ok((rho, se, h))
}

/// Gaussian kernel density estimate (Silverman bandwidth when `None`).
pub fn kde(samples: &[f64], bandwidth: Option<f64>, z: &[f64]) -> Result<Vec<f64>> {
    kde_with_se(samples, bandwidth, z).map(|r| r.0)
}

/// Outcome of a pointwise envelope comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichVerdict {
    pub pass: bool,
    pub n_points: usize,
    pub violations_lower: usize,
    pub violations_upper: usize,
    /// `max (lower - rho)` over the window; positive means a violation.
    pub worst_lower_margin: f64,
    /// `max (rho - upper)` over the window; positive means a violation.
    pub worst_upper_margin: f64,
    /// `min rho / lower` and `max rho / upper` over the window.
    pub min_ratio_lower: f64,
    pub max_ratio_upper: f64,
}

/// Checks `lower <= rho <= upper` at every grid point inside `window`.
pub fn verify_sandwich(z: &[f64], rho: &[f64], lower: &[f64], upper: &[f64], window: (f64, f64)) -> SandwichVerdict {
    let mut v = SandwichVerdict {
        pass: true,
        n_points: 0,
        violations_lower: 0,
        violations_upper: 0,
        worst_lower_margin: f64::NEG_INFINITY,
        worst_upper_margin: f64::NEG_INFINITY,
        min_ratio_lower: f64::INFINITY,
        max_ratio_upper: 0.0,
    };
    for i in 0..z.len() {
        if z[i] < window.0 || z[i] > window.1 {
            continue;
        }
        v.n_points += 1;
        let lm = lower[i] - rho[i];
        let um = rho[i] - upper[i];
        v.worst_lower_margin = v.worst_lower_margin.max(lm);
        v.worst_upper_margin = v.worst_upper_margin.max(um);
        v.min_ratio_lower = v.min_ratio_lower.min(rho[i] / lower[i]);
        v.max_ratio_upper = v.max_ratio_upper.max(rho[i] / upper[i]);
        if lm > 0.0 {
            v.violations_lower += 1;
        }
        if um > 0.0 {
            v.violations_upper += 1;
        }
    }
    v.pass = v.n_points > 0 && v.violations_lower == 0 && v.violations_upper == 0;
    v
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, se(b))`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::domain("need at least two (x, y) pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::domain("x values are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, intercept, se))
}

/// Admissible slope intervals for `log g_lo` and `log g_hi` against `log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBand {
    pub lo_min: f64,
    pub lo_max: f64,
    pub hi_min: f64,
    pub hi_max: f64,
}

impl SlopeBand {
    pub fn both(min: f64, max: f64) -> Self {
        Self { lo_min: min, lo_max: max, hi_min: min, hi_max: max }
    }

    fn admits(&self, lo: f64, hi: f64) -> bool {
        lo >= self.lo_min && lo <= self.lo_max && hi >= self.hi_min && hi <= self.hi_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub t_values: Vec<f64>,
    pub g_lo: Vec<f64>,
    pub g_hi: Vec<f64>,
    pub slope_lo: f64,
    pub se_lo: f64,
    pub slope_hi: f64,
    pub se_hi: f64,
    pub band: Option<SlopeBand>,
    pub pass: bool,
}

impl ScalingReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "g_lo", "g_hi"])?;
        for i in 0..self.t_values.len() {
            w.write_record([self.t_values[i].to_string(), self.g_lo[i].to_string(), self.g_hi[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "slope_lo": self.slope_lo,
            "se_lo": self.se_lo,
            "slope_hi": self.slope_hi,
            "se_hi": self.se_hi,
            "band": self.band,
            "pass": self.pass,
        })
    }
}

/// Log-log slopes of `(t, g_lo, g_hi)` runs, compared with `band` when given.
pub fn scaling_fit(runs: &[(f64, f64, f64)], band: Option<SlopeBand>) -> Result<ScalingReport> {
    if runs.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: runs.len() });
    }
    if runs.iter().any(|r| !(r.0 > 0.0 && r.1 > 0.0 && r.2 > 0.0)) {
        return Err(Error::domain("t, g_lo and g_hi must be positive"));
    }
    let lt: Vec<f64> = runs.iter().map(|r| r.0.ln()).collect();
    let (slope_lo, _, se_lo) = ols(&lt, &runs.iter().map(|r| r.1.ln()).collect::<Vec<_>>())?;
    let (slope_hi, _, se_hi) = ols(&lt, &runs.iter().map(|r| r.2.ln()).collect::<Vec<_>>())?;
    Ok(ScalingReport {
        t_values: runs.iter().map(|r| r.0).collect(),
        g_lo: runs.iter().map(|r| r.1).collect(),
        g_hi: runs.iter().map(|r| r.2).collect(),
        slope_lo,
        se_lo,
        slope_hi,
        se_hi,
        band,
        pass: band.is_none_or(|b| b.admits(slope_lo, slope_hi)),
    })
}

/// One-sample Kolmogorov-Smirnov test against `N(mean, sd^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Asymptotic critical value of the statistic at level 1%.
    pub critical_1pct: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov tail `P(sqrt(n) D > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_test_normal(samples: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let normal = Normal::new(mean, sd).map_err(|e| Error::domain(e.to_string()))?;
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = normal.cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
    let critical_1pct = 1.6276 / sn;
    Ok(KsResult { statistic: d, p_value, critical_1pct, pass: p_value > 0.01 })
}

/// Reconstructed and empirical densities with their envelopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub z_grid: Vec<f64>,
    pub rho_nv: Vec<f64>,
    pub rho_kde: Vec<f64>,
    pub kde_se: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mean: f64,
    pub e_abs_f: f64,
    pub c1: f64,
    pub c2: f64,
    pub window: (f64, f64),
    /// `|int rho_nv - 1|` over the grid.
    pub normalization_defect: f64,
    pub sandwich_kde: SandwichVerdict,
    pub sandwich_nv: SandwichVerdict,
    /// Largest `|rho_nv - rho_kde| / se_kde` on the window.
    pub kde_nv_max_z: f64,
    /// Whether the envelopes with the constants' roles exchanged in the
    /// prefactors (`1/(2 c1)` below, `1/(2 c2)` above) are ordered on the window.
    pub swapped_orientation_ordered: bool,
}

fn trapezoid_sum(z: &[f64], y: &[f64]) -> f64 {
    z.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Builds the density report of samples `f` given the estimate `g` and the
/// envelope constants `(c1, c2)` (typically the window extrema of `g`).
pub fn density_report(f: &[f64], g: &GEstimate, c1: f64, c2: f64) -> Result<DensityReport> {
    let (mean, _) = mean_std(f);
    let e_abs_f = f.iter().map(|v| (v - mean).abs()).sum::<f64>() / f.len() as f64;
    let offsets = g.offsets();
    let rho_nv = nv_density(&offsets, &g.g_hat, e_abs_f)?;
    let (rho_kde, kde_se, _) = kde_with_se(f, None, &g.z_grid)?;
    let (lower, upper) = gaussian_envelopes(e_abs_f, c1, c2, mean, &g.z_grid)?;
    let window = g.window;
    let sandwich_kde = verify_sandwich(&g.z_grid, &rho_kde, &lower, &upper, window);
    let sandwich_nv = verify_sandwich(&g.z_grid, &rho_nv, &lower, &upper, window);
    let mut kde_nv_max_z: f64 = 0.0;
    let mut swapped_orientation_ordered = true;
    for i in 0..g.z_grid.len() {
        if g.z_grid[i] < window.0 || g.z_grid[i] > window.1 {
            continue;
        }
        kde_nv_max_z = kde_nv_max_z.max((rho_nv[i] - rho_kde[i]).abs() / kde_se[i]);
        let d2 = (g.z_grid[i] - mean).powi(2);
        let alt_lower = e_abs_f / (2.0 * c1) * (-d2 / (2.0 * c1)).exp();
        let alt_upper = e_abs_f / (2.0 * c2) * (-d2 / (2.0 * c2)).exp();
        swapped_orientation_ordered &= alt_lower <= alt_upper;
    }
    Ok(DensityReport {
        normalization_defect: (trapezoid_sum(&g.z_grid, &rho_nv) - 1.0).abs(),
        z_grid: g.z_grid.clone(),
        rho_nv,
        rho_kde,
        kde_se,
        lower,
        upper,
        mean,
        e_abs_f,
        c1,
        c2,
        window,
        sandwich_kde,
        sandwich_nv,
        kde_nv_max_z,
        swapped_orientation_ordered,
    })
}

impl DensityReport {
    /// Writes `z,rho_nv,rho_kde,env_lo,env_hi` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["z", "rho_nv", "rho_kde", "env_lo", "env_hi"])?;
        for i in 0..self.z_grid.len() {
            w.write_record([
                self.z_grid[i].to_string(),
                self.rho_nv[i].to_string(),
                self.rho_kde[i].to_string(),
                self.lower[i].to_string(),
                self.upper[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mean": self.mean,
            "e_abs_f": self.e_abs_f,
            "c1": self.c1,
            "c2": self.c2,
            "window": [self.window.0, self.window.1],
            "normalization_defect": self.normalization_defect,
            "sandwich_kde": self.sandwich_kde,
            "sandwich_nv": self.sandwich_nv,
            "kde_nv_max_z": self.kde_nv_max_z,
            "swapped_orientation_ordered": self.swapped_orientation_ordered,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use statrs::distribution::Continuous;

    fn normal_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn constant_g_gives_the_gaussian() {
        let v: f64 = 0.7;
        let n = (8.0 * v.sqrt() / 1e-3).round() as i64;
        let z: Vec<f64> = (-n / 2..=n / 2).map(|i| i as f64 * 1e-3).collect();
        let g = vec![v; z.len()];
        let rho = nv_density(&z, &g, (2.0 * v / PI).sqrt()).unwrap();
        let exact = Normal::new(0.0, v.sqrt()).unwrap();
        for (x, r) in z.iter().zip(&rho) {
            assert!((r - exact.pdf(*x)).abs() < 1e-10);
        }
    }

    #[test]
    fn even_g_gives_even_density() {
        let z: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.03).collect();
        let g: Vec<f64> = z.iter().map(|x| 1.0 + 0.3 * x * x).collect();
        let rho = nv_density(&z, &g, 0.5).unwrap();
        for i in 0..z.len() {
            assert!((rho[i] - rho[z.len() - 1 - i]).abs() <= 1e-15 * rho[i]);
        }
    }

    #[test]
    fn nv_density_domain_errors() {
        let z = vec![-1.0, 0.0, 1.0];
        assert!(nv_density(&z, &[1.0, 0.0, 1.0], 1.0).is_err());
        assert!(nv_density(&[0.5, 1.0, 1.5], &[1.0; 3], 1.0).is_err());
    }

    #[test]
    fn envelopes_collapse_and_order() {
        let v = 1.3;
        let z: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.1).collect();
        let e = (2.0 * v / PI).sqrt();
        let (lo, hi) = gaussian_envelopes(e, v, v, 0.0, &z).unwrap();
        let exact = Normal::new(0.0, v.sqrt()).unwrap();
        for i in 0..z.len() {
            assert!((lo[i] - exact.pdf(z[i])).abs() < 1e-14);
            assert!((hi[i] - lo[i]).abs() < 1e-14);
        }
        let (lo, hi) = gaussian_envelopes(e, 0.9 * v, 1.1 * v, 0.0, &z).unwrap();
        for i in 0..z.len() {
            assert!(lo[i] <= hi[i]);
            if z[i].abs() <= 3.0 * v.sqrt() {
                let p = exact.pdf(z[i]);
                assert!(lo[i] <= p && p <= hi[i]);
            }
        }
        assert!(gaussian_envelopes(e, 2.0, 1.0, 0.0, &z).is_err());
    }

    #[test]
    fn kde_of_normal_samples() {
        let x = normal_samples(100_000, 7);
        let z: Vec<f64> = (-300..=300).map(|i| i as f64 * 0.01).collect();
        let rho = kde(&x, None, &z).unwrap();
        let exact = Normal::new(0.0, 1.0).unwrap();
        let worst = z.iter().zip(&rho).map(|(a, r)| (r - exact.pdf(*a)).abs()).fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
        let zz: Vec<f64> = (-600..=600).map(|i| i as f64 * 0.01).collect();
        let mass = trapezoid_sum(&zz, &kde(&x, None, &zz).unwrap());
        assert!((mass - 1.0).abs() < 0.01);
        assert!(kde(&vec![1.0; 2000], None, &z).is_err());
    }

    #[test]
    fn sandwich_margins() {
        let z = vec![-1.0, 0.0, 1.0];
        let v = verify_sandwich(&z, &[1.0, 2.0, 1.0], &[0.5, 1.0, 0.5], &[2.0, 3.0, 2.0], (-2.0, 2.0));
        assert!(v.pass && v.worst_lower_margin < 0.0);
        let v = verify_sandwich(&z, &[1.0, 4.0, 1.0], &[0.5, 1.0, 0.5], &[2.0, 3.0, 2.0], (-2.0, 2.0));
        assert!(!v.pass && v.violations_upper == 1 && (v.worst_upper_margin - 1.0).abs() < 1e-15);
        let v = verify_sandwich(&z, &[1.0, 4.0, 1.0], &[0.5, 1.0, 0.5], &[2.0, 3.0, 2.0], (0.5, 2.0));
        assert!(v.pass);
    }

    #[test]
    fn scaling_fit_of_power_law() {
        let runs: Vec<(f64, f64, f64)> =
            [0.05, 0.1, 0.2, 0.35, 0.5].iter().map(|&t: &f64| (t, 3.0 * t.sqrt(), 5.0 * t.powf(0.75))).collect();
        let r = scaling_fit(&runs, Some(SlopeBand::both(0.4, 0.6))).unwrap();
        assert!((r.slope_lo - 0.5).abs() < 1e-12);
        assert!((r.slope_hi - 0.75).abs() < 1e-12);
        assert!(r.se_lo < 1e-10);
        assert!(!r.pass);
        assert!(scaling_fit(&runs[..4], None).is_err());
    }

    #[test]
    fn ks_accepts_normal_and_rejects_shifted() {
        let x = normal_samples(20_000, 9);
        let ok = ks_test_normal(&x, 0.0, 1.0).unwrap();
        assert!(ok.pass && ok.statistic < ok.critical_1pct);
        let bad = ks_test_normal(&x, 0.1, 1.0).unwrap();
        assert!(!bad.pass && bad.statistic > bad.critical_1pct);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-4);
    }
}
