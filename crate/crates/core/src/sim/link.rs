//! Single-link experiments: exact effective-SINR samples, Q-Q data against the
//! approximations, and simulated DLT curves.

use super::stats::empirical_quantile;
use super::SimError;
use crate::cfmath::{gil_pelaez_cdf, Approximation, CfSpec, QuadratureConfig};
use crate::channel::{draw_effective_coefficient, SinrModel};
use crate::geometry::{build_user, CellTopology, UserGeometry};
use crate::mac::{HarqProcess, Outcome};
use crate::policies::approximation_spec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A single user at a fixed position with a fixed desired gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub topology: CellTopology,
    pub r: f64,
    pub theta: f64,
    pub w0_mag2: f64,
    /// Linear transmit SNR.
    pub rho: f64,
    pub n_max: u32,
}

impl Default for LinkConfig {
    /// Default topology, `r = 250 m`, `θ = π/2`, `|w⁰|² = 1`, ρ = 43 dB, four attempts.
    fn default() -> Self {
        LinkConfig {
            topology: CellTopology::default(),
            r: 250.0,
            theta: std::f64::consts::FRAC_PI_2,
            w0_mag2: 1.0,
            rho: 10f64.powf(4.3),
            n_max: 4,
        }
    }
}

impl LinkConfig {
    pub fn user(&self) -> Result<UserGeometry, SimError> {
        Ok(build_user(&self.topology, self.r, self.theta)?)
    }

    pub fn sinr_model(&self) -> Result<SinrModel, SimError> {
        let u = self.user()?;
        Ok(SinrModel::new(u.home_gain() * self.w0_mag2, u.interference_gains().to_vec(), self.rho)?)
    }

    /// Single-attempt spec under `approx`.
    pub fn spec(&self, approx: Approximation) -> Result<CfSpec, SimError> {
        Ok(approximation_spec(approx, &self.sinr_model()?)?)
    }
}

/// Which interferers a simulation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterferenceSet {
    All,
    /// Only the given number of strongest interferers.
    Dominant(usize),
}

impl InterferenceSet {
    /// Path-loss mask: `true` for every kept interferer.
    fn mask(self, pathloss: &[f64]) -> Vec<bool> {
        match self {
            InterferenceSet::All => vec![true; pathloss.len()],
            InterferenceSet::Dominant(count) => {
                let mut order: Vec<usize> = (0..pathloss.len()).collect();
                order.sort_by(|&a, &b| pathloss[b].total_cmp(&pathloss[a]).then(a.cmp(&b)));
                let mut keep = vec![false; pathloss.len()];
                for &i in order.iter().take(count) {
                    keep[i] = true;
                }
                keep
            }
        }
    }
}

const CHUNK: usize = 4096;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Per-attempt SINRs `γ_1..γ_n` of independent processes with exact interference,
/// generated in fixed-size chunks so the result does not depend on thread count.
fn sinr_traces(model: &SinrModel, attempts: usize, processes: usize, seed: u64) -> Vec<Vec<f64>> {
    let chunks = processes.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(processes - c * CHUNK);
            let mut gains = vec![0.0; model.pathloss_ici.len()];
            (0..len)
                .map(|_| {
                    (0..attempts)
                        .map(|_| {
                            for g in gains.iter_mut() {
                                *g = draw_effective_coefficient(&mut rng).norm_sqr();
                            }
                            model.sinr_from_gains(&gains)
                        })
                        .collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Samples of `γ(n) = Σ_{i≤n} γ_i` with exact per-attempt interference.
pub fn empirical_effective_sinr(
    link: &LinkConfig,
    attempts: u32,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    if samples < 1000 || attempts == 0 {
        return Err(SimError::InvalidConfig(format!(
            "need at least 1000 samples and one attempt, got {samples} and {attempts}"
        )));
    }
    let model = link.sinr_model()?;
    Ok(sinr_traces(&model, attempts as usize, samples, seed).into_iter().map(|t| t.iter().sum()).collect())
}

/// One point of a Q-Q plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QqPoint {
    pub p: f64,
    pub theoretical: f64,
    pub empirical: f64,
}

/// `F⁻¹(p)` by bisection on `ln x`; the CDF is monotone so the bracket is grown
/// geometrically first.
pub fn theoretical_quantile(spec: &CfSpec, p: f64, q: &QuadratureConfig) -> Result<f64, SimError> {
    let cdf = |x: f64| gil_pelaez_cdf(spec, x, q);
    let mut lo = spec.ratio() * spec.attempts as f64;
    let mut hi = lo;
    let mut guard = 0;
    while cdf(lo)? > p {
        lo /= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(SimError::NotConverged(format!("no lower bracket for p = {p}")));
        }
    }
    while cdf(hi)? < p {
        hi *= 2.0;
        guard += 1;
        if guard > 400 {
            return Err(SimError::NotConverged(format!("no upper bracket for p = {p}")));
        }
    }
    for _ in 0..200 {
        if hi / lo - 1.0 < 1e-10 {
            return Ok((lo * hi).sqrt());
        }
        let mid = (lo * hi).sqrt();
        if cdf(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(SimError::NotConverged(format!("bisection for p = {p} stalled at [{lo}, {hi}]")))
}

/// Paired (theoretical, empirical) quantiles at each probability.
pub fn qq_data(
    samples: &[f64],
    spec: &CfSpec,
    probabilities: &[f64],
    q: &QuadratureConfig,
) -> Result<Vec<QqPoint>, SimError> {
    if samples.is_empty() || probabilities.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(SimError::InvalidConfig("Q-Q needs samples and probabilities in (0, 1)".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    probabilities
        .par_iter()
        .map(|&p| {
            Ok(QqPoint { p, theoretical: theoretical_quantile(spec, p, q)?, empirical: empirical_quantile(&sorted, p) })
        })
        .collect()
}

/// Simulated DLT with per-rate standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimCurve {
    pub rates: Vec<f64>,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub processes: usize,
}

/// Two interference sets simulated on the same fading, with the paired
/// difference `first − second` at each rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedCurves {
    pub first: SimCurve,
    pub second: SimCurve,
    pub diff_mean: Vec<f64>,
    pub diff_std_err: Vec<f64>,
}

/// Delivered rate of one HARQ process at `rate` over a SINR trace.
fn run_process(trace: &[f64], rate: f64) -> f64 {
    let mut p = HarqProcess::new(0, rate, trace.len() as u32, 1.0);
    for &g in trace {
        if p.step(g).expect("process is stepped only while in progress").is_terminal() {
            break;
        }
    }
    p.delivered_rate().expect("trace covers n_max attempts")
}

fn masked_model(link: &LinkConfig, set: InterferenceSet) -> Result<(SinrModel, Vec<bool>), SimError> {
    let model = link.sinr_model()?;
    let mask = set.mask(&model.pathloss_ici);
    Ok((model, mask))
}

/// Traces for both sets from the same coefficient draws: a dropped interferer
/// contributes zero, the kept ones see identical fading.
type Traces = Vec<Vec<f64>>;

fn paired_traces(
    link: &LinkConfig,
    a: InterferenceSet,
    b: InterferenceSet,
    processes: usize,
    seed: u64,
) -> Result<(Traces, Traces), SimError> {
    let (model, mask_a) = masked_model(link, a)?;
    let mask_b = b.mask(&model.pathloss_ici);
    let n = link.n_max as usize;
    let chunks = processes.div_ceil(CHUNK);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(processes - c * CHUNK);
            let k = model.pathloss_ici.len();
            let mut ga = vec![0.0; k];
            let mut gb = vec![0.0; k];
            let model = &model;
            let (mask_a, mask_b) = (&mask_a, &mask_b);
            (0..len)
                .map(move |_| {
                    let mut ta = Vec::with_capacity(n);
                    let mut tb = Vec::with_capacity(n);
                    for _ in 0..n {
                        for j in 0..k {
                            let g = draw_effective_coefficient(&mut rng).norm_sqr();
                            ga[j] = if mask_a[j] { g } else { 0.0 };
                            gb[j] = if mask_b[j] { g } else { 0.0 };
                        }
                        ta.push(model.sinr_from_gains(&ga));
                        tb.push(model.sinr_from_gains(&gb));
                    }
                    (ta, tb)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(pairs.into_iter().unzip())
}

/// Running sums of a per-process quantity.
#[derive(Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self, n: f64) -> f64 {
        self.sum / n
    }

    fn std_err(&self, n: f64) -> f64 {
        if n < 2.0 {
            return 0.0;
        }
        let m = self.mean(n);
        ((self.sum_sq - n * m * m).max(0.0) / (n - 1.0)).sqrt() / n.sqrt()
    }
}

fn curve(rates: &[f64], moments: &[Moments], processes: usize) -> SimCurve {
    let n = processes as f64;
    SimCurve {
        rates: rates.to_vec(),
        values: moments.iter().map(|m| m.mean(n)).collect(),
        std_err: moments.iter().map(|m| m.std_err(n)).collect(),
        processes,
    }
}

fn check_rates(rates: &[f64], processes: usize) -> Result<(), SimError> {
    if rates.is_empty() || rates.iter().any(|&r| !(r >= 0.0 && r.is_finite())) || processes == 0 {
        return Err(SimError::InvalidConfig(
            "need a non-empty, non-negative rate grid and at least one process".into(),
        ));
    }
    Ok(())
}

/// Monte Carlo DLT: every rate replays the same per-process SINR traces.
pub fn single_link_dlt_sim(
    link: &LinkConfig,
    rates: &[f64],
    processes: usize,
    set: InterferenceSet,
    seed: u64,
) -> Result<SimCurve, SimError> {
    check_rates(rates, processes)?;
    let (traces, _) = paired_traces(link, set, InterferenceSet::Dominant(0), processes, seed)?;
    let moments: Vec<Moments> = rates
        .par_iter()
        .map(|&r| {
            traces.iter().fold(Moments::default(), |mut m, t| {
                m.push(run_process(t, r));
                m
            })
        })
        .collect();
    Ok(curve(rates, &moments, processes))
}

pub fn single_link_dlt_compare(
    link: &LinkConfig,
    rates: &[f64],
    processes: usize,
    first: InterferenceSet,
    second: InterferenceSet,
    seed: u64,
) -> Result<PairedCurves, SimError> {
    check_rates(rates, processes)?;
    let (ta, tb) = paired_traces(link, first, second, processes, seed)?;
    let moments: Vec<[Moments; 3]> = rates
        .par_iter()
        .map(|&r| {
            ta.iter().zip(&tb).fold([Moments::default(); 3], |mut m, (a, b)| {
                let (x, y) = (run_process(a, r), run_process(b, r));
                m[0].push(x);
                m[1].push(y);
                m[2].push(x - y);
                m
            })
        })
        .collect();
    let n = processes as f64;
    let pick = |i: usize| moments.iter().map(|m| m[i]).collect::<Vec<_>>();
    Ok(PairedCurves {
        first: curve(rates, &pick(0), processes),
        second: curve(rates, &pick(1), processes),
        diff_mean: moments.iter().map(|m| m[2].mean(n)).collect(),
        diff_std_err: moments.iter().map(|m| m[2].std_err(n)).collect(),
    })
}

/// Fraction of processes decoded within `n` attempts at `rate`, for `n = 1..=n_max`.
pub fn empirical_success_by_attempt(
    link: &LinkConfig,
    rate: f64,
    processes: usize,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    check_rates(&[rate], processes)?;
    let model = link.sinr_model()?;
    let traces = sinr_traces(&model, link.n_max as usize, processes, seed);
    let mut counts = vec![0usize; link.n_max as usize];
    for t in &traces {
        let mut p = HarqProcess::new(0, rate, link.n_max, link.w0_mag2);
        for &g in t {
            if let Outcome::Success(n) = p.step(g).expect("in progress") {
                for c in counts.iter_mut().skip(n as usize - 1) {
                    *c += 1;
                }
                break;
            }
            if p.outcome.is_terminal() {
                break;
            }
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / processes as f64).collect())
}
