//! Effective fading coefficients under random beamforming and the per-attempt SINR.
//!
//! A unit-norm beam applied to an i.i.d. `CN(0, I)` channel vector yields a
//! `CN(0, 1)` scalar, whatever the beam. The simulator therefore samples the
//! effective coefficients directly. [`RbfVector`] materializes beams only to
//! check that reduction.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid SINR model: {0}")]
    InvalidModel(String),
    #[error("invalid beam: {0}")]
    InvalidBeam(String),
    #[error("attempt {attempt} outside draw of {available} attempts")]
    AttemptOutOfRange { attempt: usize, available: usize },
}

/// `CN(0, 1)` from two uniforms: `|w|² = −ln U₁` is Exp(1), the phase is `2πU₂`.
fn cn_from_uniforms(u1: f64, u2: f64) -> Complex64 {
    // u1 ∈ [0, 1) so 1 − u1 ∈ (0, 1] keeps the log finite
    Complex64::from_polar((-(1.0 - u1).ln()).sqrt(), 2.0 * PI * u2)
}

/// One circularly-symmetric complex Gaussian sample, zero mean, unit variance.
pub fn draw_effective_coefficient<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    cn_from_uniforms(u1, u2)
}

/// Random beam `v_m = √a_m · e^{jθ_m}` with `Σ a_m = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfVector {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl RbfVector {
    /// Equal power `a_m = 1/M` and i.i.d. uniform phases on `[−π, π)`.
    pub fn random_equal_power<R: Rng + ?Sized>(antennas: usize, rng: &mut R) -> Result<Self, ChannelError> {
        let phases = (0..antennas).map(|_| rng.random_range(-PI..PI)).collect();
        RbfVector { amplitudes: vec![1.0 / antennas as f64; antennas], phases }.validated()
    }

    pub fn validated(self) -> Result<Self, ChannelError> {
        if self.amplitudes.is_empty() || self.amplitudes.len() != self.phases.len() {
            return Err(ChannelError::InvalidBeam("need one phase per amplitude and at least one antenna".into()));
        }
        if self.amplitudes.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(ChannelError::InvalidBeam("amplitudes must lie in [0, 1]".into()));
        }
        let total: f64 = self.amplitudes.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ChannelError::InvalidBeam(format!("amplitudes sum to {total}, expected 1")));
        }
        Ok(self)
    }

    pub fn antennas(&self) -> usize {
        self.amplitudes.len()
    }

    /// Inner product `gᴴ v` with a channel vector of the same length.
    pub fn effective_gain(&self, channel: &[Complex64]) -> Complex64 {
        assert_eq!(channel.len(), self.antennas(), "channel length must match the beam");
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .zip(channel)
            .map(|((&a, &th), g)| g.conj() * Complex64::from_polar(a.sqrt(), th))
            .sum()
    }
}

/// Beamformed coefficient from a fresh `CN(0, I_M)` channel and a fresh beam.
/// Exists to check that the scalar law does not depend on `M`.
pub fn draw_effective_via_beam<R: Rng + ?Sized>(antennas: usize, rng: &mut R) -> Result<Complex64, ChannelError> {
    let beam = RbfVector::random_equal_power(antennas, rng)?;
    let channel: Vec<Complex64> = (0..antennas).map(|_| draw_effective_coefficient(rng)).collect();
    Ok(beam.effective_gain(&channel))
}

/// Coefficients of one HARQ process: the desired coefficient is fixed, each
/// interferer is redrawn per attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    pub w0: Complex64,
    /// `w_icis[k][i]`: cell `k`, attempt `i` (both zero-based).
    pub w_icis: Vec<Vec<Complex64>>,
}

impl FadingDraw {
    pub fn attempts(&self) -> usize {
        self.w_icis.first().map_or(0, Vec::len)
    }

    /// `|w⁽ᵏ⁾(t_i)|²` for every cell at one attempt.
    pub fn ici_gains(&self, attempt: usize) -> Vec<f64> {
        self.w_icis.iter().map(|row| row[attempt].norm_sqr()).collect()
    }
}

pub fn draw_harq_fading<R: Rng + ?Sized>(interferers: usize, attempts: usize, rng: &mut R) -> FadingDraw {
    assert!(attempts >= 1, "a HARQ process has at least one attempt");
    let w0 = draw_effective_coefficient(rng);
    let w_icis = (0..interferers).map(|_| (0..attempts).map(|_| draw_effective_coefficient(rng)).collect()).collect();
    FadingDraw { w0, w_icis }
}

/// `γ = s / (Σ_k L⁽ᵏ⁾ g_k + 1/ρ)` parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrModel {
    /// Desired power `L⁽⁰⁾|w⁽⁰⁾|²`.
    pub s: f64,
    pub pathloss_ici: Vec<f64>,
    /// Linear transmit SNR; `f64::INFINITY` removes noise.
    pub rho: f64,
}

impl SinrModel {
    pub fn new(s: f64, pathloss_ici: Vec<f64>, rho: f64) -> Result<Self, ChannelError> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(ChannelError::InvalidModel(format!("desired power must be positive, got {s}")));
        }
        if !(rho > 0.0) {
            return Err(ChannelError::InvalidModel(format!("SNR must be positive, got {rho}")));
        }
        if pathloss_ici.is_empty() || pathloss_ici.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(ChannelError::InvalidModel("need at least one interferer, all gains positive".into()));
        }
        Ok(SinrModel { s, pathloss_ici, rho })
    }

    /// Mean aggregate interference `X̄ = Σ_k L⁽ᵏ⁾`.
    pub fn mean_interference(&self) -> f64 {
        self.pathloss_ici.iter().sum()
    }

    /// SINR for the given per-cell fading gains `|w⁽ᵏ⁾|²`.
    pub fn sinr_from_gains(&self, gains: &[f64]) -> f64 {
        debug_assert_eq!(gains.len(), self.pathloss_ici.len());
        let x: f64 = self.pathloss_ici.iter().zip(gains).map(|(l, g)| l * g).sum();
        self.s / (x + 1.0 / self.rho)
    }
}

/// SINR of attempt `attempt` (zero-based) of a drawn process.
pub fn instantaneous_sinr(model: &SinrModel, draw: &FadingDraw, attempt: usize) -> Result<f64, ChannelError> {
    if attempt >= draw.attempts() || draw.w_icis.len() != model.pathloss_ici.len() {
        return Err(ChannelError::AttemptOutOfRange { attempt, available: draw.attempts() });
    }
    Ok(model.sinr_from_gains(&draw.ici_gains(attempt)))
}

/// Counter-addressed fading for one Monte Carlo trial.
///
/// Every `(slot, user)` owns a fixed block of the trial's ChaCha stream, so a
/// coefficient does not depend on which other coefficients were read or in
/// what order. Policies replayed on the same trial therefore see identical
/// channels.
#[derive(Debug, Clone)]
pub struct FadingField {
    rng: ChaCha8Rng,
    users: usize,
    interferers: usize,
}

/// Two uniforms per coefficient, two 32-bit words per uniform.
const WORDS_PER_COEFFICIENT: u128 = 4;

impl FadingField {
    pub fn new(seed: u64, trial: u64, users: usize, interferers: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        FadingField { rng, users, interferers }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn interferers(&self) -> usize {
        self.interferers
    }

    fn seek(&mut self, slot: u64, user: usize, coefficient: usize) {
        debug_assert!(user < self.users && coefficient <= self.interferers);
        let block = (slot as u128 * self.users as u128 + user as u128) * (self.interferers as u128 + 1);
        self.rng.set_word_pos((block + coefficient as u128) * WORDS_PER_COEFFICIENT);
    }

    fn next_coefficient(&mut self) -> Complex64 {
        let u1: f64 = self.rng.random();
        let u2: f64 = self.rng.random();
        cn_from_uniforms(u1, u2)
    }

    /// `|w⁽⁰⁾|²` of `user` at `slot`.
    pub fn desired_gain(&mut self, slot: u64, user: usize) -> f64 {
        self.seek(slot, user, 0);
        self.next_coefficient().norm_sqr()
    }

    /// `|w⁽ᵏ⁾|²` for `k = 1..=K` of `user` at `slot`, written into `out`.
    pub fn ici_gains_into(&mut self, slot: u64, user: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.interferers);
        self.seek(slot, user, 1);
        for g in out.iter_mut() {
            *g = self.next_coefficient().norm_sqr();
        }
    }

    pub fn ici_gains(&mut self, slot: u64, user: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.interferers];
        self.ici_gains_into(slot, user, &mut out);
        out
    }
}

/// Generator for per-trial draws other than fading, such as user angles.
/// Disjoint from every [`FadingField`] with the same seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(trial);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_only_and_unit_interferer() {
        let m = SinrModel::new(1.0, vec![0.3, 0.2], 10.0).unwrap();
        assert!((m.sinr_from_gains(&[0.0, 0.0]) - 10.0).abs() < 1e-12);
        let m = SinrModel::new(1.0, vec![1.0], f64::INFINITY).unwrap();
        assert_eq!(m.sinr_from_gains(&[1.0]), 1.0);
    }

    #[test]
    fn draw_counts_and_quasi_static_desired() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = draw_harq_fading(6, 4, &mut rng);
        assert_eq!(d.w_icis.len(), 6);
        assert_eq!(d.attempts(), 4);
        assert_eq!(1 + d.w_icis.iter().map(Vec::len).sum::<usize>(), 25);
        let m = SinrModel::new(2.0, vec![0.1; 6], 100.0).unwrap();
        assert!(instantaneous_sinr(&m, &d, 4).is_err());
        for i in 0..4 {
            let g = d.ici_gains(i);
            let x: f64 = g.iter().map(|g| 0.1 * g).sum();
            assert_eq!(instantaneous_sinr(&m, &d, i).unwrap(), 2.0 / (x + 0.01));
        }
    }

    #[test]
    fn beam_validation() {
        assert!(RbfVector { amplitudes: vec![0.5, 0.4], phases: vec![0.0, 0.0] }.validated().is_err());
        assert!(RbfVector { amplitudes: vec![1.0], phases: vec![] }.validated().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = RbfVector::random_equal_power(4, &mut rng).unwrap();
        assert_eq!(b.antennas(), 4);
    }

    #[test]
    fn field_is_order_independent() {
        let mut a = FadingField::new(11, 2, 5, 6);
        let mut b = FadingField::new(11, 2, 5, 6);
        let first = a.ici_gains(40, 3);
        let _ = b.desired_gain(7, 1);
        let _ = b.ici_gains(41, 3);
        assert_eq!(b.ici_gains(40, 3), first);
        assert_eq!(a.desired_gain(40, 3), b.desired_gain(40, 3));
        let mut other_trial = FadingField::new(11, 3, 5, 6);
        assert_ne!(other_trial.ici_gains(40, 3), first);
    }
}
