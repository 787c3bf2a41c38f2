//! Tabulated unit CDFs `F_{S_n}(y)`, `n = 1..=n_max`, on a uniform grid in `ln y`.
//!
//! Rate selection for a scheduler evaluates outage probabilities for every
//! user at every scheduling instant. Since a spec only enters through
//! `y = x / c`, one table per `(shape, n_max)` serves all users. Values between
//! nodes come from local cubic interpolation in `ln y`; beyond the top node the
//! heavy right tail is continued with `1 − F_{S_n}(y) ≈ n · P(Y > y)`.

use super::inversion::{unit_cdf, InversionPath};
use super::{CfError, QuadratureConfig};
use rayon::prelude::*;
use statrs::function::gamma::gamma_lr;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableGrid {
    pub ln_y_min: f64,
    pub ln_y_max: f64,
    pub step: f64,
}

impl Default for TableGrid {
    fn default() -> Self {
        // F_{S_1}(0.02) ≤ e^{-50} for every shape, and the tail continuation
        // is accurate to ~1e-15 past 1e8
        TableGrid { ln_y_min: 0.02f64.ln(), ln_y_max: 1e8f64.ln(), step: 0.01 }
    }
}

#[derive(Debug, Clone)]
pub struct UnitCdfTable {
    shape: u32,
    n_max: u32,
    grid: TableGrid,
    /// `values[n - 1][i]` = `F_{S_n}(exp(ln_y_min + i * step))`
    values: Vec<Vec<f64>>,
}

/// `P(Y > y)` for `Y ~ Inv-Gamma(shape, 1)`, i.e. the lower regularized gamma `P(shape, 1/y)`.
fn unit_survival(shape: u32, y: f64) -> f64 {
    gamma_lr(shape as f64, 1.0 / y)
}

impl UnitCdfTable {
    pub fn build(shape: u32, n_max: u32, q: &QuadratureConfig, grid: TableGrid) -> Result<Self, CfError> {
        if shape == 0 || n_max == 0 {
            return Err(CfError::InvalidArgument("table needs shape ≥ 1 and n_max ≥ 1".into()));
        }
        let len = ((grid.ln_y_max - grid.ln_y_min) / grid.step).round() as usize + 1;
        let attempts: Vec<u32> = (1..=n_max).collect();
        let rows: Vec<Vec<f64>> = (0..len)
            .into_par_iter()
            .map(|i| {
                let y = (grid.ln_y_min + i as f64 * grid.step).exp();
                unit_cdf(shape, &attempts, y, q, InversionPath::Auto).map(|e| e.values)
            })
            .collect::<Result<_, _>>()?;
        let mut values = vec![Vec::with_capacity(len); n_max as usize];
        for row in rows {
            for (n, v) in row.into_iter().enumerate() {
                values[n].push(v.clamp(0.0, 1.0));
            }
        }
        Ok(UnitCdfTable { shape, n_max, grid, values })
    }

    /// Process-wide table for `(shape, n_max)` with the given quadrature,
    /// built on first use.
    pub fn shared(shape: u32, n_max: u32, q: &QuadratureConfig) -> Result<Arc<Self>, CfError> {
        type Key = (u32, u32, [u64; 5], usize);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<UnitCdfTable>>>> = OnceLock::new();
        let key: Key = (
            shape,
            n_max,
            [
                q.t_min.to_bits(),
                q.t_max_cap.to_bits(),
                q.tail_epsilon.to_bits(),
                q.abs_tol.to_bits(),
                q.rel_tol.to_bits(),
            ],
            q.max_subdivisions,
        );
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().unwrap().get(&key) {
            return Ok(t.clone());
        }
        // built outside the lock; a concurrent duplicate build is harmless
        let table = Arc::new(UnitCdfTable::build(shape, n_max, q, TableGrid::default())?);
        Ok(cache.lock().unwrap().entry(key).or_insert(table).clone())
    }

    pub fn shape(&self) -> u32 {
        self.shape
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn grid(&self) -> TableGrid {
        self.grid
    }

    /// `F_{S_n}(y)`; `n = 0` is the point mass at zero.
    pub fn cdf(&self, n: u32, y: f64) -> f64 {
        if n == 0 {
            return if y >= 0.0 { 1.0 } else { 0.0 };
        }
        assert!(n <= self.n_max, "attempt count {n} beyond table n_max {}", self.n_max);
        if !(y > 0.0) {
            return 0.0;
        }
        let u = y.ln();
        let g = self.grid;
        if u <= g.ln_y_min {
            return 0.0;
        }
        let row = &self.values[n as usize - 1];
        if u >= g.ln_y_max {
            // never below the last node, so the seam cannot step down
            let tail = 1.0 - n as f64 * unit_survival(self.shape, y);
            return tail.max(row[row.len() - 1]).clamp(0.0, 1.0);
        }
        let pos = (u - g.ln_y_min) / g.step;
        let i = (pos.floor() as usize).clamp(1, row.len() - 3);
        let s = pos - i as f64;
        // Lagrange cubic through nodes i-1, i, i+1, i+2 at offsets -1, 0, 1, 2
        let (p0, p1, p2, p3) = (row[i - 1], row[i], row[i + 1], row[i + 2]);
        let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        (w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3).clamp(0.0, 1.0)
    }
}
