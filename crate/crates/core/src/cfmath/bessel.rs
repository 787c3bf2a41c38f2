//! Modified Bessel functions of the second kind, integer order, complex argument.
//!
//! Evaluation is split by `|z|`:
//!
//! - `|z| <= 2`: ascending series for `K_0` and `K_1` (digamma form).
//! - `2 < |z| < 20`: the integral `e^z K_ν(z) = ∫₀^∞ exp(−z(cosh u − 1)) cosh(νu) du`,
//!   evaluated by step-halving trapezoid sums. The integrand decays doubly
//!   exponentially, so the trapezoid rule converges geometrically in the step.
//! - `|z| >= 20`: Hankel asymptotic expansion, truncated at the smallest term.
//!
//! Orders above one come from upward recurrence `K_{ν+1} = K_{ν−1} + (2ν/z) K_ν`,
//! which is stable for `K`. Everything is computed exponentially scaled
//! (`e^z K_ν(z)`) and unscaled at the end.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_RADIUS: f64 = 2.0;
const ASYMPTOTIC_RADIUS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BesselError {
    #[error("K_nu(z) requires Re(z) > 0, got z = {0}")]
    Domain(Complex64),
    #[error("K_{nu}(z) is not representable in f64 at z = {z}")]
    OutOfRange { nu: u32, z: Complex64 },
}

/// `K_ν(z)` on the principal branch.
///
/// Fails with [`BesselError::OutOfRange`] when the unscaled value under- or
/// overflows; [`bessel_k_scaled`] covers those arguments.
pub fn bessel_k(nu: u32, z: Complex64) -> Result<Complex64, BesselError> {
    let scaled = bessel_k_scaled(nu, z)?;
    // exp(-z) underflows for Re(z) past ~708
    if z.re > 700.0 {
        return Err(BesselError::OutOfRange { nu, z });
    }
    let value = scaled * (-z).exp();
    if !value.re.is_finite() || !value.im.is_finite() || (value.norm() == 0.0) {
        return Err(BesselError::OutOfRange { nu, z });
    }
    Ok(value)
}

/// `e^z K_ν(z)`.
pub fn bessel_k_scaled(nu: u32, z: Complex64) -> Result<Complex64, BesselError> {
    let seq = bessel_k_scaled_seq(nu, z)?;
    Ok(seq[nu as usize])
}

/// `e^z K_m(z)` for `m = 0..=nu_max`.
pub fn bessel_k_scaled_seq(nu_max: u32, z: Complex64) -> Result<Vec<Complex64>, BesselError> {
    if !(z.re > 0.0) || !z.im.is_finite() || !z.re.is_finite() {
        return Err(BesselError::Domain(z));
    }
    let (k0, k1) = scaled_k0_k1(z);
    let mut out = Vec::with_capacity(nu_max as usize + 1);
    out.push(k0);
    if nu_max >= 1 {
        out.push(k1);
    }
    let two_over_z = 2.0 / z;
    for m in 1..nu_max {
        let next = out[m as usize - 1] + two_over_z * (m as f64) * out[m as usize];
        out.push(next);
    }
    if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(BesselError::OutOfRange { nu: nu_max, z });
    }
    Ok(out)
}

fn scaled_k0_k1(z: Complex64) -> (Complex64, Complex64) {
    let r = z.norm();
    if r <= SERIES_RADIUS {
        let (k0, k1) = series_k0_k1(z);
        let ez = z.exp();
        (k0 * ez, k1 * ez)
    } else if r >= ASYMPTOTIC_RADIUS {
        (asymptotic_scaled(0, z), asymptotic_scaled(1, z))
    } else {
        trapezoid_scaled_k0_k1(z)
    }
}

/// Ascending series, A&S 9.6.13 and 9.6.11 (n = 1).
fn series_k0_k1(z: Complex64) -> (Complex64, Complex64) {
    let half = z * 0.5;
    let q = half * half;
    let log_half = half.ln();

    // K0 = -(ln(z/2) + γ) I0 + Σ_{k≥1} q^k/(k!)² H_k
    // K1 = 1/z + ln(z/2) I1 − (z/4) Σ_{k≥0} (ψ(k+1)+ψ(k+2)) q^k/(k!(k+1)!)
    let mut i0 = Complex64::new(1.0, 0.0);
    let mut k0_tail = Complex64::new(0.0, 0.0);
    let mut i1_sum = Complex64::new(1.0, 0.0);
    // ψ(1) + ψ(2) = -2γ + 1
    let mut k1_tail = Complex64::new(1.0 - 2.0 * EULER_GAMMA, 0.0);

    let mut term0 = Complex64::new(1.0, 0.0); // q^k/(k!)²
    let mut term1 = Complex64::new(1.0, 0.0); // q^k/(k!(k+1)!)
    let mut harmonic = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term0 = term0 * q / (kf * kf);
        term1 = term1 * q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        i0 += term0;
        k0_tail += term0 * harmonic;
        i1_sum += term1;
        // ψ(k+1) + ψ(k+2) = -2γ + 2H_k + 1/(k+1)
        let psi_sum = -2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (kf + 1.0);
        k1_tail += term1 * psi_sum;
        if term0.norm() * (1.0 + harmonic) < 1e-18 * i0.norm() && term1.norm() * (2.0 + 2.0 * harmonic) < 1e-18 {
            break;
        }
    }
    let k0 = -(log_half + EULER_GAMMA) * i0 + k0_tail;
    let i1 = half * i1_sum;
    let k1 = z.inv() + log_half * i1 - half * 0.5 * k1_tail;
    (k0, k1)
}

/// Hankel expansion of `e^z K_ν(z)`, summed until the terms stop shrinking.
fn asymptotic_scaled(nu: u32, z: Complex64) -> Complex64 {
    let mu = 4.0 * (nu as f64) * (nu as f64);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term = term * (mu - odd * odd) / (8.0 * kf * z);
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        last = size;
        if size < 1e-17 * sum.norm() {
            break;
        }
    }
    (PI / (2.0 * z)).sqrt() * sum
}

fn trapezoid_scaled_k0_k1(z: Complex64) -> (Complex64, Complex64) {
    // integrand magnitude exp(-Re z (cosh u - 1)) cosh u; stop once it is below 1e-18
    let re = z.re;
    let mut u_max: f64 = 1.0;
    while (-re * (u_max.cosh() - 1.0)).exp() * u_max.cosh() > 1e-18 {
        u_max += 0.5;
    }
    let eval = |u: f64| -> (Complex64, Complex64) {
        let c = u.cosh();
        let e = (-z * (c - 1.0)).exp();
        (e, e * c)
    };

    let mut h = 0.5_f64;
    let mut n = (u_max / h).ceil() as usize;
    h = u_max / n as f64;
    let (mut s0, mut s1) = eval(0.0);
    s0 *= 0.5;
    s1 *= 0.5;
    for i in 1..=n {
        let (a, b) = eval(i as f64 * h);
        s0 += a;
        s1 += b;
    }
    let mut t0 = s0 * h;
    let mut t1 = s1 * h;
    for _ in 0..12 {
        // add the midpoints
        let mut m0 = Complex64::new(0.0, 0.0);
        let mut m1 = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let (a, b) = eval((i as f64 + 0.5) * h);
            m0 += a;
            m1 += b;
        }
        s0 += m0;
        s1 += m1;
        n *= 2;
        h *= 0.5;
        let n0 = s0 * h;
        let n1 = s1 * h;
        let done = (n0 - t0).norm() <= 1e-15 * n0.norm() && (n1 - t1).norm() <= 1e-15 * n1.norm();
        t0 = n0;
        t1 = n1;
        if done {
            break;
        }
    }
    (t0, t1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn real_reference_values() {
        let one = Complex64::new(1.0, 0.0);
        assert!(rel(bessel_k(0, one).unwrap(), Complex64::new(0.421_024_438_240_708_3, 0.0)) < 1e-13);
        assert!(rel(bessel_k(1, one).unwrap(), Complex64::new(0.601_907_230_197_234_6, 0.0)) < 1e-13);
        // K_2(1) = K_0(1) + 2 K_1(1)
        assert!(rel(bessel_k(2, one).unwrap(), Complex64::new(1.624_838_898_635_177_4, 0.0)) < 1e-13);
    }

    #[test]
    fn bands_agree_at_boundaries() {
        for &arg in &[0.0, -PI / 4.0, -3.0 * PI / 8.0] {
            for &r in &[SERIES_RADIUS, ASYMPTOTIC_RADIUS] {
                let z = Complex64::from_polar(r, arg);
                let (a0, a1) = if r == SERIES_RADIUS {
                    let (k0, k1) = series_k0_k1(z);
                    (k0 * z.exp(), k1 * z.exp())
                } else {
                    (asymptotic_scaled(0, z), asymptotic_scaled(1, z))
                };
                let (b0, b1) = trapezoid_scaled_k0_k1(z);
                assert!(rel(a0, b0) < 1e-13, "K0 r={r} arg={arg}: {a0} vs {b0}");
                assert!(rel(a1, b1) < 1e-13, "K1 r={r} arg={arg}: {a1} vs {b1}");
            }
        }
    }

    #[test]
    fn rejects_left_half_plane() {
        assert!(matches!(bessel_k(0, Complex64::new(0.0, 1.0)), Err(BesselError::Domain(_))));
        assert!(matches!(bessel_k(3, Complex64::new(-1.0, 0.5)), Err(BesselError::Domain(_))));
    }

    #[test]
    fn unscaled_out_of_range_is_signalled() {
        let z = Complex64::new(800.0, -100.0);
        assert!(matches!(bessel_k(1, z), Err(BesselError::OutOfRange { .. })));
        assert!(bessel_k_scaled(1, z).is_ok());
    }

    #[test]
    fn conjugate_symmetry() {
        let z = Complex64::new(3.3, -1.7);
        let a = bessel_k(4, z).unwrap();
        let b = bessel_k(4, z.conj()).unwrap();
        assert!(rel(a, b.conj()) < 1e-14);
    }
}
