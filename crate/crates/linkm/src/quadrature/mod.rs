//! Shared numerical-integration engine.
//!
//! Deterministic rules (trapezoidal on the circle, spectral antiderivatives)
//! live here; importance-sampled Monte Carlo over ℝ³ and ℝ³×ℝ³ is in [`mc`],
//! counter-based random streams in [`rng`].

pub mod mc;
pub mod rng;

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// A numeric integration result. For Monte Carlo estimates `stderr` is the
/// sample standard error; for deterministic rules it is the magnitude of the
/// last refinement delta.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub n_excluded_singular: u64,
    pub converged: bool,
    pub seed: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0, n_samples: 0, n_excluded_singular: 0, converged: true, seed: 0 }
    }

    pub fn exact_zero() -> Self {
        Self::exact(0.0)
    }

    /// Sum with variances added in quadrature (independent streams).
    pub fn add(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            stderr: self.stderr.hypot(other.stderr),
            n_samples: self.n_samples + other.n_samples,
            n_excluded_singular: self.n_excluded_singular + other.n_excluded_singular,
            converged: self.converged && other.converged,
            seed: self.seed,
        }
    }

    pub fn scale(self, k: f64) -> Estimate {
        Estimate { value: k * self.value, stderr: k.abs() * self.stderr, ..self }
    }

    /// Product of two independent estimates, with first-order error propagation.
    pub fn mul(self, other: Estimate) -> Estimate {
        let stderr = ((self.stderr * other.value).powi(2)
            + (other.stderr * self.value).powi(2)
            + (self.stderr * other.stderr).powi(2))
        .sqrt();
        Estimate {
            value: self.value * other.value,
            stderr,
            n_samples: self.n_samples + other.n_samples,
            n_excluded_singular: self.n_excluded_singular + other.n_excluded_singular,
            converged: self.converged && other.converged,
            seed: self.seed,
        }
    }

    /// |a - b| measured in units of the combined standard error.
    pub fn sigma_distance(self, other: Estimate) -> f64 {
        let denom = self.stderr.hypot(other.stderr);
        if denom == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value).abs() / denom
        }
    }
}

/// Plain trapezoidal (= rectangle) rule for a 2π-periodic integrand at `n`
/// uniform nodes; spectrally accurate for smooth periodic functions.
pub fn trapezoid_periodic<F: FnMut(f64) -> f64>(mut f: F, n: usize) -> f64 {
    let h = TAU / n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        acc += f(k as f64 * h);
    }
    acc * h
}

/// Trapezoidal rule with node doubling until successive values differ by less
/// than `tol` (or the node cap is reached, which flags non-convergence).
pub fn periodic_integral<F: FnMut(f64) -> f64>(
    mut f: F,
    tol: f64,
    start_order: usize,
    max_order: usize,
) -> Estimate {
    let mut n = start_order.max(4);
    let mut prev = trapezoid_periodic(&mut f, n);
    let mut evals = n as u64;
    loop {
        n *= 2;
        let cur = trapezoid_periodic(&mut f, n);
        evals += n as u64;
        let delta = (cur - prev).abs();
        if delta <= tol {
            return Estimate {
                value: cur,
                stderr: delta,
                n_samples: evals,
                n_excluded_singular: 0,
                converged: true,
                seed: 0,
            };
        }
        if n >= max_order {
            return Estimate {
                value: cur,
                stderr: delta,
                n_samples: evals,
                n_excluded_singular: 0,
                converged: false,
                seed: 0,
            };
        }
        prev = cur;
    }
}

/// Like [`periodic_integral`] but with the default 512-node start order.
pub fn periodic_integral_default<F: FnMut(f64) -> f64>(f: F, tol: f64) -> Estimate {
    periodic_integral(f, tol, 512, 1 << 17)
}

/// Cumulative integral of a periodic function sampled at `n` uniform nodes,
/// evaluated to spectral accuracy through the discrete Fourier series.
///
/// Input: samples `a[k] = a(2πk/n)`. Output: `F[k] = ∫₀^{t_k} a dt` for
/// k = 0..n, plus the full-period integral as `F[n]` (the lift over one
/// extra period is `F[k] + F[n]`).
///
/// The mean of `a` contributes the linear part; every nonzero mode is
/// antidifferentiated exactly. Direct O(n²) DFT; n is a few thousand at most.
pub fn spectral_cumulative(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    assert!(n >= 4, "need at least 4 samples");
    let h = TAU / n as f64;
    let mean: f64 = a.iter().sum::<f64>() / n as f64;

    // Fourier coefficients of the zero-mean part: a(t) - mean =
    // Σ_{m=1}^{n/2} [α_m cos(mt) + β_m sin(mt)] (β at Nyquist is zero).
    let m_max = n / 2;
    let mut alpha = vec![0.0; m_max + 1];
    let mut beta = vec![0.0; m_max + 1];
    for m in 1..=m_max {
        // cos/sin at the nodes via rotation recurrence.
        let (ds, dc) = (m as f64 * h).sin_cos();
        let (mut s, mut c) = (0.0_f64, 1.0_f64);
        let mut sa = 0.0;
        let mut sb = 0.0;
        for &ak in a.iter() {
            sa += ak * c;
            sb += ak * s;
            let c2 = c * dc - s * ds;
            s = s * dc + c * ds;
            c = c2;
        }
        let norm = if m == m_max && n % 2 == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
        alpha[m] = sa * norm;
        beta[m] = sb * norm;
    }

    // Antiderivative: mean·t + Σ [α_m sin(mt) - β_m (cos(mt) - 1)]/m, zero at t=0.
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * h;
        let mut v = mean * t;
        // e^{imt} by recurrence over m at fixed t, starting at m=1.
        let (base_s, base_c) = t.sin_cos();
        let (mut s, mut c) = (base_s, base_c);
        for m in 1..=m_max {
            v += (alpha[m] * s - beta[m] * (c - 1.0)) / m as f64;
            let c2 = c * base_c - s * base_s;
            s = s * base_c + c * base_s;
            c = c2;
        }
        out.push(v);
    }
    out
}

/// Doubling refinement driver for quantities computed on a dyadic grid:
/// recompute with `f(n)` at doubled n until the change is below `tol`.
/// Returns (value at finest grid, last delta, final n, converged).
pub fn refine_doubling<F: FnMut(usize) -> f64>(
    mut f: F,
    start: usize,
    cap: usize,
    tol: f64,
) -> (f64, f64, usize, bool) {
    let mut n = start;
    let mut prev = f(n);
    loop {
        n *= 2;
        let cur = f(n);
        let delta = (cur - prev).abs();
        if delta <= tol {
            return (cur, delta, n, true);
        }
        if n >= cap {
            return (cur, delta, n, false);
        }
        prev = cur;
    }
}

/// Convergence failure helper used by callers that require a converged rule.
pub fn require_converged(e: Estimate, what: &str) -> Result<Estimate> {
    if e.converged {
        Ok(e)
    } else {
        Err(Error::NotConverged(format!("{what} (last delta {:.3e})", e.stderr)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_sin_is_zero() {
        let v = trapezoid_periodic(|t| t.sin(), 64);
        assert!(v.abs() < 1e-14, "{v}");
    }

    #[test]
    fn trapezoid_constant_is_tau() {
        let v = trapezoid_periodic(|_| 1.0, 32);
        assert!((v - TAU).abs() < 1e-13);
    }

    #[test]
    fn periodic_integral_oracle() {
        // ∫₀^{2π} exp(sin t) cos t dt = [exp(sin t)] = 0, and
        // ∫₀^{2π} 1/(2+cos t) dt = 2π/√3 (standard closed forms).
        let e = periodic_integral(|t| t.sin().exp() * t.cos(), 1e-12, 8, 1 << 14);
        assert!(e.converged && e.value.abs() < 1e-12);
        let e2 = periodic_integral(|t| 1.0 / (2.0 + t.cos()), 1e-12, 8, 1 << 14);
        let exact = TAU / 3.0_f64.sqrt();
        assert!(e2.converged && (e2.value - exact).abs() < 1e-11, "{}", e2.value);
    }

    #[test]
    fn periodic_integral_cap_flags() {
        // Kinked integrand: trapezoid converges only O(h²), so the deltas
        // stay far above 1e-15 at the node cap.
        let e = periodic_integral(|t| (t / 2.0).sin().abs(), 1e-15, 8, 64);
        assert!(!e.converged);
    }

    #[test]
    fn spectral_cumulative_matches_closed_form() {
        // a(t) = 2 + cos t + 3 sin 2t; F(t) = 2t + sin t - (3/2)(cos 2t - 1).
        let n = 64;
        let a: Vec<f64> = (0..n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                2.0 + t.cos() + 3.0 * (2.0 * t).sin()
            })
            .collect();
        let cum = spectral_cumulative(&a);
        for k in 0..=n {
            let t = TAU * k as f64 / n as f64;
            let exact = 2.0 * t + t.sin() - 1.5 * ((2.0 * t).cos() - 1.0);
            assert!((cum[k] - exact).abs() < 1e-12, "k={k}: {} vs {exact}", cum[k]);
        }
        assert!((cum[n] - 2.0 * TAU).abs() < 1e-12);
    }

    #[test]
    fn spectral_cumulative_smooth_nonpolynomial() {
        // a(t) = exp(cos t): F(2π) = 2π I₀(1); interior values checked
        // against a fine trapezoid lift.
        let n = 256;
        let f = |t: f64| t.cos().exp();
        let a: Vec<f64> = (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect();
        let cum = spectral_cumulative(&a);
        let i0_1 = 1.2660658777520084; // modified Bessel I0(1)
        assert!((cum[n] - TAU * i0_1).abs() < 1e-10);
        // interior spot check by dense trapezoid
        let k = 37;
        let t_end = TAU * k as f64 / n as f64;
        let m = 1 << 16;
        let h = t_end / m as f64;
        let mut acc = 0.5 * (f(0.0) + f(t_end));
        for j in 1..m {
            acc += f(j as f64 * h);
        }
        acc *= h;
        assert!((cum[k] - acc).abs() < 1e-8, "{} vs {acc}", cum[k]);
    }

    #[test]
    fn estimate_algebra() {
        let a = Estimate { value: 1.0, stderr: 0.3, n_samples: 10, n_excluded_singular: 0, converged: true, seed: 1 };
        let b = Estimate { value: 2.0, stderr: 0.4, n_samples: 5, n_excluded_singular: 1, converged: true, seed: 2 };
        let s = a.add(b);
        assert_eq!(s.value, 3.0);
        assert!((s.stderr - 0.5).abs() < 1e-15);
        assert_eq!(s.n_samples, 15);
        assert_eq!(s.n_excluded_singular, 1);
        let p = a.scale(-2.0);
        assert_eq!(p.value, -2.0);
        assert!((p.stderr - 0.6).abs() < 1e-15);
    }
}
