//! Multivalued circulation potentials along link components and the
//! gauge-fixed periodic scalar potentials built from them.
//!
//! The multivalued potential of source j on component i is the cumulative
//! circulation integral of the j-th curve potential along component i; one
//! circuit increments it by lk(i, j). Weighting the two multivalued
//! potentials on component i with the *rounded integer* linking numbers
//! makes the combination exactly single-valued, and a gauge (marked point or
//! mean zero) fixes the remaining additive constant. Gauge-sensitive
//! quantities are averaged over all marked points, which reproduces the
//! mean-zero gauge for linear functionals.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::curves::Link3;
use crate::error::{Error, Result};
use crate::linking::LinkingMatrix;
use crate::potentials::{CurvePotential, KernelExponent};
use crate::quadrature::spectral_cumulative;

/// Gauge choice for the additive constant of a scalar potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gauge {
    /// φ_i vanishes at the marked parameter value.
    MarkedPoint(f64),
    /// The parameter mean of φ_i vanishes.
    MeanZero,
}

/// Circulation density samples a_j(t_k) = ẋ_i(t_k) · A_j(x_i(t_k)) on a
/// uniform grid along component i.
pub fn circulation_density(
    link: &Link3,
    i: usize,
    j: usize,
    grid: usize,
    exponent: KernelExponent,
) -> Result<Vec<f64>> {
    let pot = CurvePotential::new(link.component(j), grid.max(256), exponent);
    let mut out = Vec::with_capacity(grid);
    for k in 0..grid {
        let t = TAU * k as f64 / grid as f64;
        let (p, d) = link.component(i).eval(t);
        out.push(d.dot(pot.eval(p)?));
    }
    Ok(out)
}

/// Lifted multivalued potential φ_{j,i} on component i, branch with
/// φ(start) = 0. `values[k]` is the lift at t_k = 2πk/grid for k = 0..=grid;
/// the one-circuit increment is `values[grid]`.
#[derive(Clone, Debug)]
pub struct MultivaluedPotential {
    pub component: usize,
    pub source: usize,
    grid: usize,
    values: Vec<f64>,
    pub period_increment: f64,
}

impl MultivaluedPotential {
    pub fn build(
        link: &Link3,
        i: usize,
        j: usize,
        grid: usize,
        exponent: KernelExponent,
    ) -> Result<Self> {
        if i % 3 == j % 3 {
            return Err(Error::InvalidLink("multivalued potential needs i ≠ j".into()));
        }
        let a = circulation_density(link, i % 3, j % 3, grid, exponent)?;
        let values = spectral_cumulative(&a);
        let period_increment = values[grid];
        Ok(MultivaluedPotential { component: i % 3, source: j % 3, grid, values, period_increment })
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Lift at node k, for k in 0..=grid.
    pub fn lifted(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Lift continued past one period: value at t_k + 2π.
    pub fn lifted_next_period(&self, k: usize) -> f64 {
        self.values[k] + self.period_increment
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    /// Periodic part ψ(t) = Φ(t) − p·t/2π, shifted to zero parameter mean.
    pub fn periodic_part_mean_zero(&self) -> Vec<f64> {
        let n = self.grid;
        let p = self.period_increment;
        let mut psi: Vec<f64> = (0..n)
            .map(|k| self.values[k] - p * k as f64 / n as f64)
            .collect();
        let mean = psi.iter().sum::<f64>() / n as f64;
        for v in &mut psi {
            *v -= mean;
        }
        psi
    }
}

/// Single-valued gauge-fixed scalar potential φ_i sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct ScalarPotentialTable {
    pub component: usize,
    grid: usize,
    values: Vec<f64>,
    /// Cached Fourier series of the node values for off-grid evaluation.
    series: (f64, Vec<f64>, Vec<f64>),
    pub gauge: Gauge,
}

impl ScalarPotentialTable {
    /// φ_i = lk(i+2, i) · φ_{i+1,i} − lk(i, i+1) · φ_{i+2,i}, then gauged.
    ///
    /// The rounded-integer weights make the period contributions cancel
    /// exactly: lk(i+2,i)·lk(i,i+1) − lk(i,i+1)·lk(i,i+2) = 0.
    pub fn build(
        link: &Link3,
        lkm: &LinkingMatrix,
        i: usize,
        gauge: Gauge,
        grid: usize,
        exponent: KernelExponent,
    ) -> Result<Self> {
        let i = i % 3;
        if lkm.max_residual > 1e-3 {
            return Err(Error::NonIntegerLinking {
                raw: f64::NAN,
                residual: lkm.max_residual,
            });
        }
        let w_plus = lkm.lk_f(i + 2, i);
        let w_minus = lkm.lk_f(i, i + 1);
        let mut values = vec![0.0; grid];
        // Exact-zero weights short-circuit the quadrature entirely.
        if w_plus != 0.0 {
            let m = MultivaluedPotential::build(link, i, i + 1, grid, exponent)?;
            for k in 0..grid {
                values[k] += w_plus * m.lifted(k);
            }
        }
        if w_minus != 0.0 {
            let m = MultivaluedPotential::build(link, i, i + 2, grid, exponent)?;
            for k in 0..grid {
                values[k] -= w_minus * m.lifted(k);
            }
        }
        match gauge {
            Gauge::MeanZero => {
                let mean = values.iter().sum::<f64>() / grid as f64;
                for v in &mut values {
                    *v -= mean;
                }
            }
            Gauge::MarkedPoint(t) => {
                let at = crate::potentials::resample_at(&values, t);
                for v in &mut values {
                    *v -= at;
                }
            }
        }
        let series = crate::potentials::fourier_series(&values);
        Ok(ScalarPotentialTable { component: i, grid, values, series, gauge })
    }

    /// All three components in the same gauge.
    pub fn build_all(
        link: &Link3,
        lkm: &LinkingMatrix,
        gauge: Gauge,
        grid: usize,
        exponent: KernelExponent,
    ) -> Result<[ScalarPotentialTable; 3]> {
        Ok([
            Self::build(link, lkm, 0, gauge, grid, exponent)?,
            Self::build(link, lkm, 1, gauge, grid, exponent)?,
            Self::build(link, lkm, 2, gauge, grid, exponent)?,
        ])
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_node(&self, k: usize) -> f64 {
        self.values[k % self.grid]
    }

    /// Parameter mean over the grid (the trapezoidal rule on the circle).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid as f64
    }

    /// Trigonometric interpolation at an arbitrary parameter.
    pub fn interpolate(&self, t: f64) -> f64 {
        crate::potentials::series_at(&self.series, t)
    }

    /// Whether every node value is exactly zero (vanishing integer weights).
    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Mismatch between the value at t = 0 and the single-valued continuation
    /// at t = 2π, measured through the lifted construction.
    pub fn single_valuedness_defect(
        link: &Link3,
        lkm: &LinkingMatrix,
        i: usize,
        grid: usize,
        exponent: KernelExponent,
    ) -> Result<f64> {
        let i = i % 3;
        let w_plus = lkm.lk_f(i + 2, i);
        let w_minus = lkm.lk_f(i, i + 1);
        let mut defect = 0.0;
        if w_plus != 0.0 {
            let m = MultivaluedPotential::build(link, i, i + 1, grid, exponent)?;
            defect += w_plus * (m.lifted_next_period(0) - m.lifted(0));
        }
        if w_minus != 0.0 {
            let m = MultivaluedPotential::build(link, i, i + 2, grid, exponent)?;
            defect -= w_minus * (m.lifted_next_period(0) - m.lifted(0));
        }
        Ok(defect.abs())
    }
}

/// Uniform average of a marked-point functional over `grid` marked-point
/// positions s_k = 2πk/grid.
pub fn average_over_marked_points<F: FnMut(f64) -> f64>(mut f: F, grid: usize) -> f64 {
    (0..grid).map(|k| f(TAU * k as f64 / grid as f64)).sum::<f64>() / grid as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{preset, Preset};

    const EXP: KernelExponent = KernelExponent::CubedNorm;

    fn lkm(link: &Link3) -> LinkingMatrix {
        LinkingMatrix::compute(link, 1e-9).unwrap()
    }

    #[test]
    fn unlink_period_increment_tiny() {
        let link = preset(Preset::UnlinkSeparated);
        let m = MultivaluedPotential::build(&link, 0, 1, 256, EXP).unwrap();
        assert!(m.period_increment.abs() < 1e-6, "{}", m.period_increment);
    }

    #[test]
    fn hopf_period_increment_is_lk() {
        let link = preset(Preset::HopfPlusFarCircle);
        let lkm = lkm(&link);
        let m = MultivaluedPotential::build(&link, 0, 1, 512, EXP).unwrap();
        assert!(
            (m.period_increment - lkm.lk_f(0, 1)).abs() < 1e-6,
            "period {} vs lk {}",
            m.period_increment,
            lkm.lk_f(0, 1)
        );
    }

    #[test]
    fn multivalued_period_property_all_nodes() {
        // Lifted φ(t+2π) − φ(t) is the same increment at every node.
        let link = preset(Preset::Chain3);
        let m = MultivaluedPotential::build(&link, 1, 2, 256, EXP).unwrap();
        for k in 0..m.grid() {
            let inc = m.lifted_next_period(k) - m.lifted(k);
            assert!((inc - m.period_increment).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_refinement_changes_little() {
        let link = preset(Preset::HopfPlusFarCircle);
        let coarse = MultivaluedPotential::build(&link, 0, 1, 512, EXP).unwrap();
        let fine = MultivaluedPotential::build(&link, 0, 1, 1024, EXP).unwrap();
        for k in 0..coarse.grid() {
            let d = (coarse.lifted(k) - fine.lifted(2 * k)).abs();
            assert!(d < 1e-8, "node {k}: {d}");
        }
    }

    #[test]
    fn borromean_phi_identically_zero() {
        let link = preset(Preset::Borromean);
        let lkm = lkm(&link);
        for i in 0..3 {
            let t = ScalarPotentialTable::build(&link, &lkm, i, Gauge::MeanZero, 256, EXP).unwrap();
            assert!(t.is_identically_zero());
        }
    }

    #[test]
    fn mean_zero_gauge_mean_is_zero() {
        let link = preset(Preset::Chain3);
        let lkm = lkm(&link);
        for i in 0..3 {
            let t =
                ScalarPotentialTable::build(&link, &lkm, i, Gauge::MeanZero, 1024, EXP).unwrap();
            assert!(t.mean().abs() < 1e-9, "component {i}: mean {}", t.mean());
        }
    }

    #[test]
    fn single_valuedness() {
        let link = preset(Preset::Chain3);
        let lkm = lkm(&link);
        for i in 0..3 {
            let d =
                ScalarPotentialTable::single_valuedness_defect(&link, &lkm, i, 1024, EXP).unwrap();
            assert!(d < 1e-9, "component {i}: defect {d}");
        }
    }

    #[test]
    fn marked_point_gauge_vanishes_at_mark() {
        let link = preset(Preset::HopfPlusFarCircle);
        let lkm = lkm(&link);
        let s = 1.3;
        let t = ScalarPotentialTable::build(&link, &lkm, 0, Gauge::MarkedPoint(s), 512, EXP)
            .unwrap();
        assert!(t.interpolate(s).abs() < 1e-10);
    }

    #[test]
    fn marked_point_average_equals_mean_zero() {
        // Average of pt-gauged φ_i at a fixed node over all marked points
        // equals the mean-zero value, by a direct double-grid computation.
        let link = preset(Preset::Chain3);
        let lkm = lkm(&link);
        let grid = 256;
        let mz = ScalarPotentialTable::build(&link, &lkm, 0, Gauge::MeanZero, grid, EXP).unwrap();
        let probe_node = 37;
        let avg = average_over_marked_points(
            |s| {
                // pt-gauge value at the probe node = mean-zero value there
                // minus the mean-zero value at the mark.
                mz.value_at_node(probe_node) - mz.interpolate(s)
            },
            grid,
        );
        assert!((avg - mz.value_at_node(probe_node)).abs() < 1e-8);
    }

    #[test]
    fn marked_point_average_constant() {
        let v = average_over_marked_points(|_| 4.25, 64);
        assert!((v - 4.25).abs() < 1e-15);
    }

    #[test]
    fn average_refinement_stable() {
        let link = preset(Preset::HopfPlusFarCircle);
        let lkm = lkm(&link);
        let mz = ScalarPotentialTable::build(&link, &lkm, 0, Gauge::MeanZero, 512, EXP).unwrap();
        let f = |s: f64| mz.interpolate(s).powi(2);
        let a = average_over_marked_points(f, 256);
        let b = average_over_marked_points(f, 512);
        assert!((a - b).abs() < 1e-8);
    }
}
