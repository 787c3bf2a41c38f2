//! Outage probability, delay-limited throughput (DLT) and source-rate selection.
//!
//! With at most `N_max` attempts at rate `R`, a process delivers `R/i` per slot
//! when it first decodes at attempt `i`:
//!
//! ```text
//! S(R) = Σ_{i=1}^{N_max} (R/i) · [P_out(i−1, R) − P_out(i, R)],   P_out(0, R) = 1 for R > 0
//! ```

use crate::cfmath::{
    checked_probabilities, unit_cdf, unit_success_masses, Approximation, CfError, CfSpec, InversionPath,
    QuadratureConfig, UnitCdfTable,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DltError {
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("invalid rate search: {0}")]
    InvalidSearch(String),
    #[error("CSV export failed: {0}")]
    Export(String),
}

/// SINR threshold `2^R − 1` for decoding at rate `R`.
pub fn sinr_threshold(rate: f64) -> f64 {
    (rate * std::f64::consts::LN_2).exp_m1()
}

fn check_rate(rate: f64) -> Result<(), DltError> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(DltError::InvalidRate(format!("rate must be finite and non-negative, got {rate}")));
    }
    Ok(())
}

/// Outage probabilities of one link for every attempt count.
pub trait OutageModel: Sync {
    fn approx(&self) -> Approximation;

    fn n_max(&self) -> u32;

    /// `P_out(n, R)` for `n = 0..=n_max`.
    fn outage_all(&self, rate: f64) -> Result<Vec<f64>, DltError>;

    fn outage(&self, n: u32, rate: f64) -> Result<f64, DltError> {
        if n > self.n_max() {
            return Err(DltError::InvalidRate(format!("attempt count {n} exceeds n_max {}", self.n_max())));
        }
        Ok(self.outage_all(rate)?[n as usize])
    }
}

/// Outage by direct Gil-Pelaez inversion at every call.
#[derive(Debug, Clone)]
pub struct InversionOutage {
    pub spec: CfSpec,
    pub n_max: u32,
    pub quadrature: QuadratureConfig,
}

impl InversionOutage {
    pub fn new(spec: CfSpec, n_max: u32, quadrature: QuadratureConfig) -> Result<Self, DltError> {
        if n_max == 0 {
            return Err(DltError::InvalidRate("n_max must be at least 1".into()));
        }
        Ok(InversionOutage { spec: spec.validated()?, n_max, quadrature })
    }
}

impl OutageModel for InversionOutage {
    fn approx(&self) -> Approximation {
        self.spec.approx
    }

    fn n_max(&self) -> u32 {
        self.n_max
    }

    fn outage_all(&self, rate: f64) -> Result<Vec<f64>, DltError> {
        check_rate(rate)?;
        if rate == 0.0 {
            return Ok(vec![0.0; self.n_max as usize + 1]);
        }
        let x = sinr_threshold(rate);
        let attempts: Vec<u32> = (1..=self.n_max).collect();
        let est = unit_cdf(self.spec.shape(), &attempts, x / self.spec.ratio(), &self.quadrature, InversionPath::Auto)?;
        let mut p = vec![1.0];
        p.extend(checked_probabilities(&est, x, &self.quadrature)?);
        Ok(p)
    }
}

/// Outage read from a shared unit-CDF table.
#[derive(Debug, Clone)]
pub struct TabulatedOutage {
    table: Arc<UnitCdfTable>,
    approx: Approximation,
    ratio: f64,
    n_max: u32,
}

impl TabulatedOutage {
    pub fn new(spec: &CfSpec, n_max: u32, quadrature: &QuadratureConfig) -> Result<Self, DltError> {
        let spec = spec.validated()?;
        let table = UnitCdfTable::shared(spec.shape(), n_max, quadrature)?;
        Ok(TabulatedOutage { table, approx: spec.approx, ratio: spec.ratio(), n_max })
    }

    /// Reuse `table` for a spec with the same shape.
    pub fn with_table(table: Arc<UnitCdfTable>, spec: &CfSpec, n_max: u32) -> Result<Self, DltError> {
        let spec = spec.validated()?;
        if table.shape() != spec.shape() || table.n_max() < n_max {
            return Err(DltError::InvalidRate(format!(
                "table (shape {}, n_max {}) does not cover shape {} with n_max {n_max}",
                table.shape(),
                table.n_max(),
                spec.shape()
            )));
        }
        Ok(TabulatedOutage { table, approx: spec.approx, ratio: spec.ratio(), n_max })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }
}

impl OutageModel for TabulatedOutage {
    fn approx(&self) -> Approximation {
        self.approx
    }

    fn n_max(&self) -> u32 {
        self.n_max
    }

    fn outage_all(&self, rate: f64) -> Result<Vec<f64>, DltError> {
        check_rate(rate)?;
        if rate == 0.0 {
            return Ok(vec![0.0; self.n_max as usize + 1]);
        }
        let y = sinr_threshold(rate) / self.ratio;
        Ok((0..=self.n_max).map(|n| self.table.cdf(n, y)).collect())
    }
}

/// `P_out(n, R) = F_{γ(n)}(2^R − 1)` at the `CfSpec` attempt count.
pub fn outage_probability(spec: &CfSpec, rate: f64, quadrature: &QuadratureConfig) -> Result<f64, DltError> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(0.0);
    }
    if spec.attempts == 0 {
        return Ok(1.0);
    }
    Ok(crate::cfmath::gil_pelaez_cdf(spec, sinr_threshold(rate), quadrature)?)
}

/// Telescoped DLT from `P_out(0..=n_max, R)`.
pub fn dlt_from_outage(rate: f64, outage: &[f64]) -> f64 {
    if rate == 0.0 {
        return 0.0;
    }
    outage.windows(2).enumerate().map(|(i, w)| rate / (i + 1) as f64 * (w[0] - w[1])).sum::<f64>().max(0.0)
}

pub fn dlt(model: &dyn OutageModel, rate: f64) -> Result<f64, DltError> {
    Ok(dlt_from_outage(rate, &model.outage_all(rate)?))
}

/// DLT from single integrals of CF differences `φ^i − φ^{i−1}`, independent of
/// the per-`n` CDF inversions. Serves as a cross-check of [`dlt`].
pub fn dlt_integral_form(spec: &CfSpec, n_max: u32, rate: f64, quadrature: &QuadratureConfig) -> Result<f64, DltError> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(0.0);
    }
    let spec = spec.validated()?;
    let masses = unit_success_masses(spec.shape(), n_max, sinr_threshold(rate) / spec.ratio(), quadrature)?;
    Ok(masses.iter().enumerate().map(|(i, m)| rate / (i + 1) as f64 * m).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DltCurve {
    pub approx: Approximation,
    pub n_max: u32,
    pub rates: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evenly spaced rates `0, step, 2·step, …` up to `r_max` inclusive.
pub fn rate_grid(r_max: f64, step: f64) -> Result<Vec<f64>, DltError> {
    if !(step > 0.0) || !(r_max > 0.0) || !r_max.is_finite() {
        return Err(DltError::InvalidRate(format!("rate grid needs r_max > 0 and step > 0, got {r_max} and {step}")));
    }
    let n = (r_max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

fn check_rates(rates: &[f64]) -> Result<(), DltError> {
    if rates.is_empty() {
        return Err(DltError::InvalidRate("rate grid is empty".into()));
    }
    for &r in rates {
        check_rate(r)?;
    }
    if rates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DltError::InvalidRate("rates must be strictly increasing".into()));
    }
    Ok(())
}

pub fn dlt_curve(model: &dyn OutageModel, rates: &[f64]) -> Result<DltCurve, DltError> {
    check_rates(rates)?;
    let values = rates.par_iter().map(|&r| dlt(model, r)).collect::<Result<Vec<_>, _>>()?;
    Ok(DltCurve { approx: model.approx(), n_max: model.n_max(), rates: rates.to_vec(), values })
}

impl DltCurve {
    /// Columns `approx, R, S_R, n_max`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DltError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DltError::Export(e.to_string());
        w.write_record(["approx", "R", "S_R", "n_max"]).map_err(err)?;
        for (r, s) in self.rates.iter().zip(&self.values) {
            w.write_record([self.approx.as_str(), &r.to_string(), &s.to_string(), &self.n_max.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| DltError::Export(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Upper end of the rate search, bits/s/Hz.
    pub r_max: f64,
    pub grid_step: f64,
    /// Golden-section stopping width.
    pub tolerance: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { r_max: 12.0, grid_step: 0.1, tolerance: 1e-3 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), DltError> {
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(DltError::InvalidSearch(format!("r_max must be positive, got {}", self.r_max)));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= self.r_max) {
            return Err(DltError::InvalidSearch(format!("grid_step must be in (0, r_max], got {}", self.grid_step)));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= self.grid_step) {
            return Err(DltError::InvalidSearch(format!(
                "tolerance must be in (0, grid_step], got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateFlags {
    /// More than one strict local maximum on the coarse grid.
    pub non_unimodal: bool,
    /// The grid maximum sits at `r_max`.
    pub hit_cap: bool,
}

impl RateFlags {
    pub fn union(self, other: RateFlags) -> RateFlags {
        RateFlags { non_unimodal: self.non_unimodal || other.non_unimodal, hit_cap: self.hit_cap || other.hit_cap }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDecision {
    pub r_star: f64,
    pub s_at_r_star: f64,
    pub approx: Approximation,
    pub search_resolution: f64,
    pub flags: RateFlags,
}

/// Grid differences below this are treated as flat when counting local maxima.
const FLAT_TOLERANCE: f64 = 1e-6;

fn count_local_maxima(values: &[f64]) -> usize {
    let slopes: Vec<i8> = values
        .windows(2)
        .filter_map(|w| {
            let d = w[1] - w[0];
            if d > FLAT_TOLERANCE {
                Some(1)
            } else if d < -FLAT_TOLERANCE {
                Some(-1)
            } else {
                None
            }
        })
        .collect();
    let interior = slopes.windows(2).filter(|s| s[0] == 1 && s[1] == -1).count();
    // a curve still rising at the grid end has its maximum at the cap
    interior + usize::from(slopes.last() == Some(&1))
}

/// Coarse grid over `[0, r_max]`, then golden-section refinement inside the
/// bracket of the best grid point.
pub fn optimize_rate(model: &dyn OutageModel, search: &SearchConfig) -> Result<RateDecision, DltError> {
    search.validate()?;
    let rates = rate_grid(search.r_max, search.grid_step)?;
    let values = rates.iter().map(|&r| dlt(model, r)).collect::<Result<Vec<_>, _>>()?;
    let best = values.iter().enumerate().fold(0, |b, (i, &v)| if v > values[b] { i } else { b });
    let mut flags = RateFlags { non_unimodal: count_local_maxima(&values) > 1, hit_cap: best + 1 == rates.len() };
    if flags.hit_cap {
        return Ok(RateDecision {
            r_star: rates[best],
            s_at_r_star: values[best],
            approx: model.approx(),
            search_resolution: search.grid_step,
            flags,
        });
    }
    let mut lo = rates[best.saturating_sub(1)];
    let mut hi = rates[best + 1];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = dlt(model, a)?;
    let mut fb = dlt(model, b)?;
    while hi - lo > search.tolerance {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = dlt(model, a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = dlt(model, b)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let s_mid = dlt(model, mid)?;
    let (r_star, s_at_r_star) = if s_mid >= values[best] { (mid, s_mid) } else { (rates[best], values[best]) };
    flags.hit_cap = false;
    Ok(RateDecision { r_star, s_at_r_star, approx: model.approx(), search_resolution: search.tolerance, flags })
}

/// Optimal source rate as a function of `ln c`, `c = s / scale`, for one
/// `(approximation, K, N_max)`.
///
/// Every spec with the same shape differs only through `c`, so `R*` is
/// tabulated once in `ln c` and interpolated linearly. The DLT at the chosen
/// rate is evaluated exactly at the requested `c`.
#[derive(Debug, Clone)]
pub struct RateTable {
    approx: Approximation,
    interferers: u32,
    n_max: u32,
    search: SearchConfig,
    cdf: Arc<UnitCdfTable>,
    ln_c_min: f64,
    step: f64,
    r_star: Vec<f64>,
    flags: Vec<RateFlags>,
}

const RATE_TABLE_LN_C_MIN: f64 = -9.210_340_371_976_182; // ln 1e-4
const RATE_TABLE_LN_C_MAX: f64 = 13.815_510_557_964_274; // ln 1e6
const RATE_TABLE_STEP: f64 = 0.01;

impl RateTable {
    pub fn build(
        approx: Approximation,
        interferers: u32,
        n_max: u32,
        quadrature: &QuadratureConfig,
        search: &SearchConfig,
    ) -> Result<Self, DltError> {
        search.validate()?;
        let shape = approx.shape(interferers);
        let cdf = UnitCdfTable::shared(shape, n_max, quadrature)?;
        let len = ((RATE_TABLE_LN_C_MAX - RATE_TABLE_LN_C_MIN) / RATE_TABLE_STEP).round() as usize + 1;
        let decisions = (0..len)
            .into_par_iter()
            .map(|i| {
                let spec = CfSpec {
                    approx,
                    s: (RATE_TABLE_LN_C_MIN + i as f64 * RATE_TABLE_STEP).exp(),
                    scale: 1.0,
                    interferers,
                    attempts: 1,
                };
                let model = TabulatedOutage::with_table(cdf.clone(), &spec, n_max)?;
                optimize_rate(&model, search)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RateTable {
            approx,
            interferers,
            n_max,
            search: *search,
            cdf,
            ln_c_min: RATE_TABLE_LN_C_MIN,
            step: RATE_TABLE_STEP,
            r_star: decisions.iter().map(|d| d.r_star).collect(),
            flags: decisions.iter().map(|d| d.flags).collect(),
        })
    }

    /// Process-wide table for the given parameters, built on first use.
    pub fn shared(
        approx: Approximation,
        interferers: u32,
        n_max: u32,
        quadrature: &QuadratureConfig,
        search: &SearchConfig,
    ) -> Result<Arc<Self>, DltError> {
        type Key = (Approximation, u32, u32, [u64; 8], usize);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<RateTable>>>> = OnceLock::new();
        let q = quadrature;
        let key: Key = (
            approx,
            approx.shape(interferers),
            n_max,
            [
                q.t_min.to_bits(),
                q.t_max_cap.to_bits(),
                q.tail_epsilon.to_bits(),
                q.abs_tol.to_bits(),
                q.rel_tol.to_bits(),
                search.r_max.to_bits(),
                search.grid_step.to_bits(),
                search.tolerance.to_bits(),
            ],
            q.max_subdivisions,
        );
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        let table = Arc::new(RateTable::build(approx, interferers, n_max, quadrature, search)?);
        Ok(cache.lock().unwrap().entry(key).or_insert(table).clone())
    }

    pub fn approx(&self) -> Approximation {
        self.approx
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Outage model for `spec` backed by this table's unit CDFs.
    pub fn outage_model(&self, spec: &CfSpec) -> Result<TabulatedOutage, DltError> {
        self.check_spec(spec)?;
        TabulatedOutage::with_table(self.cdf.clone(), spec, self.n_max)
    }

    fn check_spec(&self, spec: &CfSpec) -> Result<(), DltError> {
        if spec.approx != self.approx || spec.shape() != self.approx.shape(self.interferers) {
            return Err(DltError::InvalidRate(format!(
                "spec ({}, K={}) does not match table ({}, K={})",
                spec.approx, spec.interferers, self.approx, self.interferers
            )));
        }
        Ok(())
    }

    /// `R*` and `S(R*)` for `spec`. Ratios outside the tabulated range are
    /// optimized directly.
    pub fn decide(&self, spec: &CfSpec) -> Result<RateDecision, DltError> {
        let model = self.outage_model(spec)?;
        let pos = (model.ratio().ln() - self.ln_c_min) / self.step;
        if !(pos >= 0.0 && pos <= (self.r_star.len() - 1) as f64) {
            return optimize_rate(&model, &self.search);
        }
        let i = (pos.floor() as usize).min(self.r_star.len() - 2);
        let frac = pos - i as f64;
        let r_star = (1.0 - frac) * self.r_star[i] + frac * self.r_star[i + 1];
        Ok(RateDecision {
            r_star,
            s_at_r_star: dlt(&model, r_star)?,
            approx: self.approx,
            search_resolution: self.search.tolerance,
            flags: self.flags[i].union(self.flags[i + 1]),
        })
    }
}
