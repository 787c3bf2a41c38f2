//! Characteristic functions of the single-attempt SINR under the Gaussian and
//! identical-path-loss approximations.
//!
//! Both approximations make each attempt's SINR `c·Y` with `Y ~ Inv-Gamma(ν, 1)`
//! and `c = s / scale`: `ν = 1` for GA, `ν = K` for IPLA. The unit CF is
//!
//! ```text
//! φ_Y(t) = 2 (−jt)^{ν/2} K_ν(2√(−jt)) / (ν−1)!  =  2 (z/2)^ν K_ν(z) / Γ(ν),   z = 2√(−jt)
//! ```
//!
//! and `φ_{cY}(t) = φ_Y(c t)`.

use super::bessel::{bessel_k_scaled_seq, BesselError};
use super::CfError;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approximation {
    /// Interference plus noise as one complex Gaussian of matched variance.
    Ga,
    /// All interferer path losses replaced by their mean.
    Ipla,
}

impl Approximation {
    /// Shape of the inverse-gamma law of one attempt's SINR.
    pub fn shape(self, interferers: u32) -> u32 {
        match self {
            Approximation::Ga => 1,
            Approximation::Ipla => interferers,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Approximation::Ga => "ga",
            Approximation::Ipla => "ipla",
        }
    }
}

impl fmt::Display for Approximation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approximation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(Approximation::Ga),
            "ipla" => Ok(Approximation::Ipla),
            other => Err(format!("unknown approximation `{other}` (expected ga or ipla)")),
        }
    }
}

/// Parameters of the effective-SINR distribution after `attempts` combined
/// transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfSpec {
    pub approx: Approximation,
    /// Desired signal power `s = L⁽⁰⁾|w⁽⁰⁾|²`.
    pub s: f64,
    /// `σ_Z² = ΣL + 1/ρ` for GA, `L̄ = ΣL / K` for IPLA.
    pub scale: f64,
    pub interferers: u32,
    pub attempts: u32,
}

impl CfSpec {
    pub fn ga(s: f64, pathloss_ici: &[f64], rho: f64, attempts: u32) -> Result<Self, CfError> {
        let scale = pathloss_ici.iter().sum::<f64>() + 1.0 / rho;
        CfSpec { approx: Approximation::Ga, s, scale, interferers: pathloss_ici.len() as u32, attempts }.validated()
    }

    pub fn ipla(s: f64, pathloss_ici: &[f64], attempts: u32) -> Result<Self, CfError> {
        let k = pathloss_ici.len();
        let scale = pathloss_ici.iter().sum::<f64>() / k.max(1) as f64;
        CfSpec { approx: Approximation::Ipla, s, scale, interferers: k as u32, attempts }.validated()
    }

    pub fn validated(self) -> Result<Self, CfError> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(CfError::InvalidSpec(format!("desired power must be positive, got {}", self.s)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(CfError::InvalidSpec(format!("scale must be positive, got {}", self.scale)));
        }
        if self.interferers < 1 {
            return Err(CfError::InvalidSpec("at least one interferer is required".into()));
        }
        Ok(self)
    }

    pub fn with_attempts(self, attempts: u32) -> Self {
        CfSpec { attempts, ..self }
    }

    pub fn shape(&self) -> u32 {
        self.approx.shape(self.interferers)
    }

    /// `c = s / scale`: the SINR of one attempt is `c` times a unit inverse-gamma variable.
    pub fn ratio(&self) -> f64 {
        self.s / self.scale
    }
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// CF of `Y ~ Inv-Gamma(shape, 1)` at complex `t` in the closed lower-right
/// quadrant (`Re t >= 0`, `Im t <= 0`, `t != 0`), via the Bessel closed form.
pub fn unit_cf(shape: u32, t: Complex64) -> Result<Complex64, BesselError> {
    debug_assert!(shape >= 1);
    let z = 2.0 * (Complex64::new(0.0, -1.0) * t).sqrt();
    let ks = bessel_k_scaled_seq(shape, z)?;
    let log_phi =
        std::f64::consts::LN_2 - ln_factorial(shape - 1) + (shape as f64) * (z * 0.5).ln() + ks[shape as usize].ln()
            - z;
    Ok(log_phi.exp())
}

/// CF of one attempt's approximated SINR.
pub fn cf_single_attempt(spec: &CfSpec, t: f64) -> Result<Complex64, CfError> {
    if !(t > 0.0) {
        return Err(CfError::InvalidArgument(format!("CF argument must be positive, got {t}")));
    }
    Ok(unit_cf(spec.shape(), Complex64::new(spec.ratio() * t, 0.0))?)
}

/// CF of the combined SINR after `spec.attempts` attempts: the single-attempt CF
/// to the power `attempts` (exactly 1 for zero attempts).
pub fn cf_effective(spec: &CfSpec, t: f64) -> Result<Complex64, CfError> {
    if spec.attempts == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let single = cf_single_attempt(spec, t)?;
    Ok(single.powu(spec.attempts))
}
