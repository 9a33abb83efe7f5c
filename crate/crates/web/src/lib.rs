//! Browser bindings: a heat-kernel profile, a sampled noise slice and a small
//! Monte Carlo density reconstruction against its Gaussian envelopes.

use spde_density::density::density_report;
use spde_density::kernels::{heat_dirichlet_green, HeatDirichletKernel};
use spde_density::malliavin::{estimate_g, g_bounds_summary, PairSampler, Regressor};
use spde_density::noise::{sample_noise, SpectralMeasure, TorusGrid};
use spde_density::solvers::{Drift, InitialData, ModelSpec};
use wasm_bindgen::prelude::*;

/// `y -> G_t(x, y)` at the `n + 1` nodes of `[0, 1]`.
pub fn green_profile(t: f64, x: f64, n: usize) -> spde_density::Result<Vec<f64>> {
    let kernel = HeatDirichletKernel::default();
    (0..=n)
        .map(|i| match i {
            0 => Ok(0.0),
            i if i == n => Ok(0.0),
            i => heat_dirichlet_green(t, x, i as f64 / n as f64, &kernel),
        })
        .collect()
}

/// One unit-time increment of Riesz noise on `[-half_len, half_len)`.
pub fn noise_slice(epsilon: f64, n: usize, half_len: f64, seed: u64) -> spde_density::Result<Vec<f64>> {
    let grid = TorusGrid::new(1, half_len, n)?;
    let noise = sample_noise(&SpectralMeasure::riesz(1, epsilon), &grid, 1, 1.0, seed)?;
    Ok(noise.spatial_field(0).map(|(field, _)| field).unwrap_or_default())
}

/// Density of `u(0.25, 0.5)` for the heat equation on `[0, 1]` with drift
/// `atan(a u)`, reconstructed from `pairs` shift pairs.
#[wasm_bindgen]
pub struct DensityDemo {
    z: Vec<f64>,
    rho_nv: Vec<f64>,
    rho_kde: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    g_lo: f64,
    g_hi: f64,
    window: (f64, f64),
    pass: bool,
}

impl DensityDemo {
    pub fn compute(a: f64, sigma: f64, amplitude: f64, pairs: usize, seed: u64) -> spde_density::Result<Self> {
        let spec = ModelSpec::heat_dirichlet(16, 0.5, 0.25, 0.5)
            .with_drift(Drift::Atan { a })
            .with_sigma(sigma)
            .with_initial(InitialData::SineMode { mode: 1, amplitude });
        spec.validate()?;
        let samples = PairSampler::new(&spec, seed)?.draw_many(pairs)?;
        let g = estimate_g(&samples, &Regressor::default())?;
        let (g_lo, g_hi) = g_bounds_summary(&g, None)?;
        let f: Vec<f64> = samples.iter().map(|s| s.f).collect();
        let r = density_report(&f, &g, g_lo, g_hi)?;
        Ok(Self {
            z: r.z_grid,
            rho_nv: r.rho_nv,
            rho_kde: r.rho_kde,
            lower: r.lower,
            upper: r.upper,
            g_lo,
            g_hi,
            window: r.window,
            pass: r.sandwich_kde.pass,
        })
    }
}

#[wasm_bindgen]
impl DensityDemo {
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }
    pub fn rho_nv(&self) -> Vec<f64> {
        self.rho_nv.clone()
    }
    pub fn rho_kde(&self) -> Vec<f64> {
        self.rho_kde.clone()
    }
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }
    pub fn g_lo(&self) -> f64 {
        self.g_lo
    }
    pub fn g_hi(&self) -> f64 {
        self.g_hi
    }
    pub fn window_lo(&self) -> f64 {
        self.window.0
    }
    pub fn window_hi(&self) -> f64 {
        self.window.1
    }
    /// Whether the KDE stays between the envelopes on the window.
    pub fn pass(&self) -> bool {
        self.pass
    }
}

fn js_err(e: spde_density::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = greenProfile)]
pub fn green_profile_js(t: f64, x: f64, n: usize) -> Result<Vec<f64>, JsError> {
    green_profile(t, x, n).map_err(js_err)
}

#[wasm_bindgen(js_name = noiseSlice)]
pub fn noise_slice_js(epsilon: f64, n: usize, half_len: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    noise_slice(epsilon, n, half_len, seed as u64).map_err(js_err)
}

#[wasm_bindgen(js_name = densityDemo)]
pub fn density_demo_js(a: f64, sigma: f64, amplitude: f64, pairs: usize, seed: u32) -> Result<DensityDemo, JsError> {
    DensityDemo::compute(a, sigma, amplitude, pairs, seed as u64).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn green_profile_vanishes_on_the_boundary() {
        let g = green_profile(0.05, 0.5, 40).unwrap();
        assert_eq!(g.len(), 41);
        assert!(g[0].abs() < 1e-12 && g[40].abs() < 1e-12);
        assert!(g[20] > g[10] && g[10] > 0.0);
    }

    #[test]
    fn noise_slice_is_seeded() {
        let a = noise_slice(0.5, 64, 2.0, 1).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, noise_slice(0.5, 64, 2.0, 1).unwrap());
        assert_ne!(a, noise_slice(0.5, 64, 2.0, 2).unwrap());
    }

    #[test]
    fn density_demo_produces_ordered_envelopes() {
        let d = DensityDemo::compute(8.0, 1.0, 2.0, 1000, 3).unwrap();
        assert!(d.g_lo() > 0.0 && d.g_lo() <= d.g_hi());
        assert!(d.lower().iter().zip(d.upper()).all(|(l, u)| *l <= u));
        let dz = d.z()[1] - d.z()[0];
        let mass: f64 = d.rho_nv().iter().sum::<f64>() * dz;
        assert!((mass - 1.0).abs() < 0.05, "{mass}");
        assert!(DensityDemo::compute(8.0, 1.0, 2.0, 10, 3).is_err());
    }
}
