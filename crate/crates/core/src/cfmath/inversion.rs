//! Gil-Pelaez inversion of the combined-SINR characteristic function.
//!
//! Everything is done for the unit variable `S_n = Y_1 + … + Y_n` with
//! `Y_i ~ Inv-Gamma(ν, 1)`; a spec with ratio `c` has `F(x) = F_{S_n}(x / c)`.
//!
//! Two integration routes:
//!
//! - **Real axis.** `F(y) = 1/2 − (1/π) ∫₀^∞ Im(e^{−jty} φ(t)^n) / t dt`, truncated at the
//!   first dyadic `T*` where `|φ(T*)| / T* < tail_epsilon`, with panels no wider
//!   than half an oscillation period `π / y`.
//! - **Rotated ray.** The number of periods in `[0, T*]` grows like `y T*`, so for
//!   large `y` the integral is moved onto the ray `t = r e^{−jπ/4}`, where
//!   `e^{−jty}` decays like `e^{−r y / √2}`. The closed form of `φ` continues
//!   analytically into that sector. A reference term `h(t) = 1/(1 − j a t)`
//!   (an exponential law's CF, CDF `1 − e^{−y/a}`) is subtracted first so that
//!   the integrand has no pole at the origin:
//!   `F(y) = 1 − e^{−y/a} − (1/π) ∫₀^∞ Im(e^{−jty}(φ(t)^n − h(t))) / r dr`.
//!
//! The route is picked per call; both are public for cross-checks.

use super::cf::{unit_cf, CfSpec};
use super::quad::{integrate, Integral, Tolerance};
use super::{CfError, QuadratureConfig};
use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Oscillation periods allowed on the real axis before switching to the ray.
const MAX_REAL_AXIS_PERIODS: f64 = 64.0;
const RAY_COS: f64 = FRAC_1_SQRT_2;
const RAY_SIN: f64 = FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionPath {
    Auto,
    RealAxis,
    RotatedRay,
}

/// Raw (unclamped) inversion result for several attempt counts at one point.
#[derive(Debug, Clone)]
pub struct CdfEstimate {
    /// `F_{S_n}(y)` for each requested `n`, in request order.
    pub values: Vec<f64>,
    /// Quadrature error bound on the values (already divided by π).
    pub error: f64,
    pub path: InversionPath,
    pub evaluations: usize,
}

fn ray_point(r: f64) -> Complex64 {
    Complex64::new(r * RAY_COS, -r * RAY_SIN)
}

/// Mean used for the reference exponential: `n · E[Y]` when finite.
fn reference_mean(shape: u32, n: u32) -> f64 {
    if shape >= 2 {
        n as f64 / (shape as f64 - 1.0)
    } else {
        n as f64
    }
}

fn tolerance(q: &QuadratureConfig) -> Tolerance {
    Tolerance { abs_tol: q.abs_tol * PI, rel_tol: q.rel_tol, max_subdivisions: q.max_subdivisions }
}

/// First dyadic point at which `|φ(t)| / t` drops below the tail threshold.
fn real_axis_cutoff(shape: u32, q: &QuadratureConfig) -> Result<f64, CfError> {
    let mut t: f64 = 1.0;
    loop {
        let phi = unit_cf(shape, Complex64::new(t, 0.0))?;
        if phi.norm() / t < q.tail_epsilon || t >= q.t_max_cap {
            return Ok(t.min(q.t_max_cap));
        }
        t *= 2.0;
    }
}

fn ray_cutoff(shape: u32, y: f64, q: &QuadratureConfig) -> Result<f64, CfError> {
    let a = reference_mean(shape, 1);
    // the factor e^{-r y sin} sets the scale, so search upward from 1/y
    let mut r: f64 = (1.0 / y).min(1.0);
    loop {
        let t = ray_point(r);
        let phi = unit_cf(shape, t)?;
        let h = (Complex64::new(1.0, 0.0) - Complex64::new(0.0, a) * t).inv();
        let envelope = (-r * y * RAY_SIN).exp() * (phi.norm() + h.norm()) / r;
        if envelope < q.tail_epsilon || r >= q.t_max_cap {
            return Ok(r.min(q.t_max_cap));
        }
        r *= 2.0;
    }
}

/// Breakpoints: decades from `t_min` up to 1, then panels of at most `width`.
fn breakpoints(t_min: f64, t_max: f64, width: f64, max_panels: usize) -> Vec<f64> {
    let mut b = vec![t_min];
    let mut t = t_min;
    while t * 10.0 < t_max.min(1.0) {
        t *= 10.0;
        b.push(t);
    }
    let start = *b.last().unwrap();
    let span = t_max - start;
    if span > 0.0 {
        let n = ((span / width).ceil() as usize).clamp(1, max_panels.max(1));
        for i in 1..=n {
            b.push(start + span * i as f64 / n as f64);
        }
    }
    b
}

fn check(integral: &Integral, y: f64) -> Result<(), CfError> {
    if !integral.converged || integral.values.iter().any(|v| !v.is_finite()) {
        return Err(CfError::NotConverged { x: y, achieved_error: integral.abs_error / PI });
    }
    Ok(())
}

/// CDF of the unit sum `S_n` at `y` for each `n` in `attempts` (each ≥ 1).
pub fn unit_cdf(
    shape: u32,
    attempts: &[u32],
    y: f64,
    q: &QuadratureConfig,
    path: InversionPath,
) -> Result<CdfEstimate, CfError> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(CfError::InvalidArgument(format!("CDF point must be positive and finite, got {y}")));
    }
    if attempts.contains(&0) {
        return Err(CfError::InvalidArgument("attempt counts must be at least 1".into()));
    }
    let path = match path {
        InversionPath::Auto => {
            let cutoff = real_axis_cutoff(shape, q)?;
            if y * cutoff <= 2.0 * PI * MAX_REAL_AXIS_PERIODS {
                InversionPath::RealAxis
            } else {
                InversionPath::RotatedRay
            }
        }
        p => p,
    };
    match path {
        InversionPath::RealAxis => real_axis_cdf(shape, attempts, y, q),
        _ => ray_cdf(shape, attempts, y, q),
    }
}

fn powers(phi: Complex64, max: u32) -> Vec<Complex64> {
    let mut p = Vec::with_capacity(max as usize + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    p.push(acc);
    for _ in 0..max {
        acc *= phi;
        p.push(acc);
    }
    p
}

fn real_axis_cdf(shape: u32, attempts: &[u32], y: f64, q: &QuadratureConfig) -> Result<CdfEstimate, CfError> {
    let cutoff = real_axis_cutoff(shape, q)?;
    let breaks = breakpoints(q.t_min, cutoff, PI / y, q.max_subdivisions / 2);
    let max_n = *attempts.iter().max().unwrap();
    let mut failure = None;
    let integral = integrate(
        |t, out| {
            let phi = match unit_cf(shape, Complex64::new(t, 0.0)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            let p = powers(phi, max_n);
            let rot = Complex64::from_polar(1.0, -t * y);
            for (slot, &n) in out.iter_mut().zip(attempts) {
                *slot = (rot * p[n as usize]).im / t;
            }
        },
        &breaks,
        attempts.len(),
        tolerance(q),
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    check(&integral, y)?;
    Ok(CdfEstimate {
        values: integral.values.iter().map(|v| 0.5 - v / PI).collect(),
        error: integral.abs_error / PI,
        path: InversionPath::RealAxis,
        evaluations: integral.evaluations,
    })
}

fn ray_cdf(shape: u32, attempts: &[u32], y: f64, q: &QuadratureConfig) -> Result<CdfEstimate, CfError> {
    let cutoff = ray_cutoff(shape, y, q)?;
    let period = 2.0 * PI / (y * RAY_COS);
    let breaks = breakpoints(q.t_min, cutoff, period.min(cutoff / 8.0), q.max_subdivisions / 2);
    let max_n = *attempts.iter().max().unwrap();
    let means: Vec<f64> = attempts.iter().map(|&n| reference_mean(shape, n)).collect();
    let mut failure = None;
    let integral = integrate(
        |r, out| {
            let t = ray_point(r);
            let phi = match unit_cf(shape, t) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            let p = powers(phi, max_n);
            let rot = (Complex64::new(0.0, -y) * t).exp();
            for ((slot, &n), &a) in out.iter_mut().zip(attempts).zip(&means) {
                let h = (Complex64::new(1.0, 0.0) - Complex64::new(0.0, a) * t).inv();
                *slot = (rot * (p[n as usize] - h)).im / r;
            }
        },
        &breaks,
        attempts.len(),
        tolerance(q),
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    check(&integral, y)?;
    Ok(CdfEstimate {
        values: integral.values.iter().zip(&means).map(|(v, &a)| 1.0 - (-y / a).exp() - v / PI).collect(),
        error: integral.abs_error / PI,
        path: InversionPath::RotatedRay,
        evaluations: integral.evaluations,
    })
}

/// `(1/π) ∫₀^∞ Im(e^{−jty}(φ^i − φ^{i−1})) / t dt` for `i = 1..=n_max`, i.e. the
/// per-attempt success masses `P(S_{i−1} ≤ y) − P(S_i ≤ y)` (with `S_0 = 0`),
/// computed as single integrals of CF differences along the rotated ray.
pub fn unit_success_masses(shape: u32, n_max: u32, y: f64, q: &QuadratureConfig) -> Result<Vec<f64>, CfError> {
    if !(y > 0.0) || !y.is_finite() || n_max == 0 {
        return Err(CfError::InvalidArgument(format!("need y > 0 and n_max ≥ 1, got y={y}, n_max={n_max}")));
    }
    // the i = 1 term has |φ⁰| = 1, so the cutoff is set by the exponential factor alone
    let mut cutoff: f64 = (1.0 / y).min(1.0);
    while (-cutoff * y * RAY_SIN).exp() * 2.0 / cutoff >= q.tail_epsilon && cutoff < q.t_max_cap {
        cutoff *= 2.0;
    }
    let cutoff = cutoff.min(q.t_max_cap);
    let period = 2.0 * PI / (y * RAY_COS);
    let breaks = breakpoints(q.t_min, cutoff, period.min(cutoff / 8.0), q.max_subdivisions / 2);
    let mut failure = None;
    let integral = integrate(
        |r, out| {
            let t = ray_point(r);
            let phi = match unit_cf(shape, t) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            let p = powers(phi, n_max);
            let rot = (Complex64::new(0.0, -y) * t).exp();
            for i in 1..=n_max as usize {
                out[i - 1] = (rot * (p[i] - p[i - 1])).im / r;
            }
        },
        &breaks,
        n_max as usize,
        tolerance(q),
    );
    if let Some(e) = failure {
        return Err(e.into());
    }
    check(&integral, y)?;
    Ok(integral.values.iter().map(|v| v / PI).collect())
}

/// Unclamped Gil-Pelaez CDF value `F_{γ(n)}(x)` for the given spec.
pub fn gil_pelaez_cdf_raw(spec: &CfSpec, x: f64, q: &QuadratureConfig) -> Result<CdfEstimate, CfError> {
    let spec = spec.validated()?;
    if spec.attempts == 0 {
        return Err(CfError::InvalidArgument("inversion needs at least one attempt".into()));
    }
    if !(x > 0.0) {
        return Err(CfError::InvalidArgument(format!("CDF point must be positive, got {x}")));
    }
    unit_cdf(spec.shape(), &[spec.attempts], x / spec.ratio(), q, InversionPath::Auto)
}

/// `F_{γ(n)}(x)` clamped to `[0, 1]`. Raw values outside `[−tol, 1 + tol]` are
/// reported as an invariant violation rather than clamped away.
pub fn gil_pelaez_cdf(spec: &CfSpec, x: f64, q: &QuadratureConfig) -> Result<f64, CfError> {
    let est = gil_pelaez_cdf_raw(spec, x, q)?;
    Ok(checked_probabilities(&est, x, q)?[0])
}

/// Clamp every value of an estimate to `[0, 1]` after checking it lies within
/// `[−tol, 1 + tol]`, `tol = 2·abs_tol + error`.
pub fn checked_probabilities(est: &CdfEstimate, x: f64, q: &QuadratureConfig) -> Result<Vec<f64>, CfError> {
    let slack = 2.0 * q.abs_tol + est.error;
    est.values
        .iter()
        .map(|&value| {
            if value < -slack || value > 1.0 + slack {
                Err(CfError::InvariantViolation { x, value })
            } else {
                Ok(value.clamp(0.0, 1.0))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfmath::Approximation;

    fn upper_regularized_gamma_int(k: u32, x: f64) -> f64 {
        // Q(k, x) = e^{-x} Σ_{m<k} x^m / m!
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..k {
            term *= x / m as f64;
            sum += term;
        }
        (-x).exp() * sum
    }

    #[test]
    fn both_paths_match_closed_form_single_attempt() {
        let q = QuadratureConfig::default();
        for &shape in &[1u32, 3, 6] {
            for &y in &[0.05, 0.2, 0.7, 2.0, 9.0] {
                let exact = upper_regularized_gamma_int(shape, 1.0 / y);
                for path in [InversionPath::RealAxis, InversionPath::RotatedRay] {
                    let got = unit_cdf(shape, &[1], y, &q, path).unwrap().values[0];
                    assert!((got - exact).abs() < 1e-7, "shape={shape} y={y} {path:?}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn large_argument_uses_ray() {
        let q = QuadratureConfig::default();
        let est = unit_cdf(1, &[1, 4], 5e4, &q, InversionPath::Auto).unwrap();
        assert_eq!(est.path, InversionPath::RotatedRay);
        assert!((est.values[0] - (-1.0 / 5e4f64).exp()).abs() < 1e-8);
        assert!(est.values[1] < est.values[0]);
    }

    #[test]
    fn success_masses_telescope_cdfs() {
        let q = QuadratureConfig::default();
        for &y in &[0.3, 1.5, 40.0] {
            let cdf = unit_cdf(6, &[1, 2, 3], y, &q, InversionPath::Auto).unwrap().values;
            let masses = unit_success_masses(6, 3, y, &q).unwrap();
            let expected = [1.0 - cdf[0], cdf[0] - cdf[1], cdf[1] - cdf[2]];
            for (m, e) in masses.iter().zip(expected) {
                assert!((m - e).abs() < 1e-7, "y={y}: {m} vs {e}");
            }
        }
    }

    #[test]
    fn clamped_cdf_limits() {
        let q = QuadratureConfig::default();
        let spec = CfSpec { approx: Approximation::Ipla, s: 1.0, scale: 0.2, interferers: 6, attempts: 2 };
        assert!(gil_pelaez_cdf(&spec, 1e-3, &q).unwrap() < 1e-9);
        assert!(gil_pelaez_cdf(&spec, 1e6, &q).unwrap() > 1.0 - 1e-9);
        assert!(gil_pelaez_cdf(&spec, -1.0, &q).is_err());
        assert!(gil_pelaez_cdf(&spec.with_attempts(0), 1.0, &q).is_err());
    }
}
