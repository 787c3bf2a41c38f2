//! Numerical kernel: complex Bessel `K_ν`, characteristic functions of the
//! approximated per-attempt SINR, and Gil-Pelaez CDF inversion.

pub mod bessel;
pub mod cf;
pub mod inversion;
pub mod quad;
pub mod table;

pub use bessel::{bessel_k, bessel_k_scaled, bessel_k_scaled_seq, BesselError};
pub use cf::{cf_effective, cf_single_attempt, unit_cf, Approximation, CfSpec};
pub use inversion::{
    checked_probabilities, gil_pelaez_cdf, gil_pelaez_cdf_raw, unit_cdf, unit_success_masses, CdfEstimate,
    InversionPath,
};
pub use table::{TableGrid, UnitCdfTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CfError {
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error("invalid CF spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inversion at x = {x} did not converge (error estimate {achieved_error:.3e})")]
    NotConverged { x: f64, achieved_error: f64 },
    #[error("inverted CDF value {value} at x = {x} is outside [0, 1] beyond tolerance")]
    InvariantViolation { x: f64, value: f64 },
}

/// Quadrature settings for the inversion integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Lower integration limit; the integrand is finite or log-singular at 0.
    pub t_min: f64,
    pub t_max_cap: f64,
    /// Truncate once the integrand envelope falls below this.
    pub tail_epsilon: f64,
    /// Absolute tolerance on CDF values.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            t_min: 1e-10,
            t_max_cap: 1e6,
            tail_epsilon: 1e-12,
            abs_tol: 1e-8,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_min > 0.0 && self.t_min < self.t_max_cap) {
            return Err(format!("need 0 < t_min < t_max_cap, got t_min={} t_max_cap={}", self.t_min, self.t_max_cap));
        }
        if !(self.tail_epsilon > 0.0 && self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err("tail_epsilon, abs_tol and rel_tol must be positive".into());
        }
        if self.max_subdivisions < 8 {
            return Err("max_subdivisions must be at least 8".into());
        }
        Ok(())
    }
}
