//! Runtime configuration: budgets, tolerances, sampler shape, seeds.
//!
//! Everything a report needs to be reproduced lives here and is echoed into
//! the report verbatim.

use serde::{Deserialize, Serialize};

use crate::potentials::KernelExponent;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Master seed for all counter-based streams.
    pub seed: u64,
    /// Monte Carlo sample budget per volume term.
    pub mc_budget: u64,
    /// Target standard error as a fraction of max(1, |running value|).
    pub target_stderr: f64,
    /// Curve-potential quadrature order used inside Monte Carlo integrands.
    pub potential_order: usize,
    /// Grid size for scalar-potential tables and nested curve rules.
    pub phi_grid: usize,
    /// Tolerance for pairwise linking quadrature.
    pub linking_tol: f64,
    /// near_floor = this factor × curve diameter.
    pub near_floor_factor: f64,
    /// Tube proposal width as a fraction of min_separation.
    pub sigma_tube_factor: f64,
    /// Mixture weight of the tube components (remainder goes to the broad
    /// heavy-tailed component).
    pub tube_weight: f64,
    /// Skip exactly-zero terms (vanishing integer prefactors) before
    /// sampling. Disable to measure the zeros numerically.
    pub short_circuit: bool,
    /// Kernel denominator exponent switch.
    pub kernel: KernelExponent,
    /// Marked-point averaging grid for the gauge-sensitive f-terms.
    pub marked_point_grid: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0x6c_69_6e_6b_6d,
            mc_budget: 200_000,
            target_stderr: 1e-3,
            potential_order: 128,
            phi_grid: 2048,
            linking_tol: 1e-9,
            near_floor_factor: 1e-3,
            sigma_tube_factor: 0.5,
            tube_weight: 0.7,
            short_circuit: true,
            kernel: KernelExponent::CubedNorm,
            marked_point_grid: 512,
        }
    }
}

impl Config {
    pub fn with_seed(seed: u64) -> Self {
        Config { seed, ..Config::default() }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.mc_budget = budget;
        self
    }

    pub fn from_json_str(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        let s = c.to_json_string();
        let back = Config::from_json_str(&s).unwrap();
        assert_eq!(back.seed, c.seed);
        assert_eq!(back.mc_budget, c.mc_budget);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c = Config::from_json_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.phi_grid, Config::default().phi_grid);
    }
}
