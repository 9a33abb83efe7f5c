//! Gauss-Legendre rules and the radial integrator used for integrals
//! against spectral measures.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed Gauss-Legendre rule, reusable across panels.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule on `n_panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, n_panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n_panels as f64;
        (0..n_panels)
            .map(|i| {
                let lo = a + i as f64 * h;
                self.integrate(lo, lo + h, &f)
            })
            .sum()
    }
}

/// Composite trapezoid rule on `n` equal subintervals.
pub fn trapezoid(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// Behaviour of a radial integrand near the origin and at infinity.
///
/// The integrand is `f(r) ~ c0 r^origin_exponent` as `r -> 0` and
/// `f(r) ~ tail_coefficient r^tail_exponent` as `r -> inf`; a `None`
/// tail means the integrand vanishes beyond `support_end`.
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile {
    pub origin_exponent: f64,
    pub tail: Option<(f64, f64)>,
    pub support_end: Option<f64>,
}

/// Outcome of a radial integral that may diverge at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialIntegral {
    Finite(f64),
    Divergent,
}

impl RadialIntegral {
    pub fn value(self) -> Option<f64> {
        match self {
            RadialIntegral::Finite(v) => Some(v),
            RadialIntegral::Divergent => None,
        }
    }
}

const R_LOW: f64 = 1e-4;
const R_HIGH: f64 = 1e7;

/// Integrates `f` over `(0, inf)`.
///
/// `(0, R_LOW)` is handled with the substitution `r = R_LOW u^q`, chosen so
/// the transformed integrand vanishes at `u = 0`; `(R_LOW, R_HIGH)` with
/// Gauss panels of geometric width; the rest with the analytic power tail.
pub fn radial_integral(profile: RadialProfile, f: impl Fn(f64) -> f64) -> RadialIntegral {
    if let Some((_, p)) = profile.tail {
        if profile.support_end.is_none() && p >= -1.0 {
            return RadialIntegral::Divergent;
        }
    }
    let rule = GaussRule::new(24);
    let end = profile.support_end.unwrap_or(f64::INFINITY);

    let alpha = profile.origin_exponent;
    assert!(alpha > -1.0, "radial integrand not integrable at the origin");
    let q = (2.0 / (alpha + 1.0)).max(1.0);
    let low_end = R_LOW.min(end);
    let low = rule.composite(0.0, 1.0, 4, |u| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = low_end * u.powf(q);
        f(r) * low_end * q * u.powf(q - 1.0)
    });

    let mut total = low;
    let mut a = low_end;
    let stop = R_HIGH.min(end);
    // four panels per octave
    let ratio = 2f64.powf(0.25);
    while a < stop {
        let b = (a * ratio).min(stop);
        total += rule.integrate(a, b, &f);
        a = b;
    }
    if end.is_infinite() {
        if let Some((c, p)) = profile.tail {
            total += c * R_HIGH.powf(p + 1.0) / (-(p + 1.0));
        }
    }
    RadialIntegral::Finite(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let rule = GaussRule::new(10);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9 * v);
        let (_, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn radial_integral_of_power_laws() {
        // int_0^inf r^{-1/2} / (1 + r^2) dr = pi / (2 cos(pi/4)) = pi/sqrt(2)
        let prof = RadialProfile {
            origin_exponent: -0.5,
            tail: Some((1.0, -2.5)),
            support_end: None,
        };
        let v = radial_integral(prof, |r| r.powf(-0.5) / (1.0 + r * r))
            .value()
            .unwrap();
        assert!((v - PI / 2f64.sqrt()).abs() < 1e-9, "{v}");
        let div = RadialProfile {
            origin_exponent: 0.0,
            tail: Some((1.0, -0.8)),
            support_end: None,
        };
        assert_eq!(radial_integral(div, |r| r.powf(-0.8)), RadialIntegral::Divergent);
    }
}
