//! Run configuration: one TOML file, one section per module. Flags override
//! file values, and the resolved config is written next to the outputs.

use crate::error::CliError;
use icilink::cfmath::{Approximation, QuadratureConfig};
use icilink::dlt::SearchConfig;
use icilink::geometry::CellTopology;
use icilink::mac::MacConfig;
use icilink::policies::PolicyKind;
use icilink::sim::{LinkConfig, ScenarioConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Interfering cells, placed on a ring around the home BS.
    pub interferers: usize,
    pub bs_distance: f64,
    pub pl0_db: f64,
    pub d0: f64,
    pub alpha: f64,
    pub min_distance: f64,
    pub cell_radius: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let t = CellTopology::default();
        GeometrySection {
            interferers: t.k(),
            bs_distance: 1000.0,
            pl0_db: t.pl0_db,
            d0: t.d0,
            alpha: t.alpha,
            min_distance: t.min_distance,
            cell_radius: t.cell_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub rho_db: f64,
    /// Desired-link fading power in single-link experiments.
    pub w0_mag2: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection { rho_db: 43.0, w0_mag2: 1.0 }
    }
}

/// Single-link experiments sweep every (radius, alpha) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub radii: Vec<f64>,
    /// Overrides `geometry.alpha` per sweep point; empty means `[geometry.alpha]`.
    pub alphas: Vec<f64>,
    pub theta: f64,
    pub approximations: Vec<Approximation>,
    /// Attempt counts for Q-Q series; empty means `1..=n_max`.
    pub attempts: Vec<u32>,
    pub samples: usize,
    pub processes: usize,
    /// Q-Q probabilities `i / (quantiles + 1)`.
    pub quantiles: usize,
    /// Rate grid step of DLT curves.
    pub curve_step: f64,
    /// Interferers kept by the reduced simulation.
    pub dominant: usize,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            radii: vec![250.0],
            alphas: Vec::new(),
            theta: std::f64::consts::FRAC_PI_2,
            approximations: vec![Approximation::Ga, Approximation::Ipla],
            attempts: Vec::new(),
            samples: 100_000,
            processes: 100_000,
            quantiles: 99,
            curve_step: 0.1,
            dominant: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub users: Vec<usize>,
    pub user_radii: Vec<f64>,
    pub single_user_radius: f64,
    pub policies: Vec<PolicyKind>,
    pub horizon: u64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = ScenarioConfig::default();
        SimSection {
            users: (1..=10).map(|i| 5 * i).collect(),
            user_radii: s.user_radii,
            single_user_radius: s.single_user_radius,
            policies: PolicyKind::ALL.to_vec(),
            horizon: s.horizon,
            trials: s.trials,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub channel: ChannelSection,
    pub cfmath: QuadratureConfig,
    pub dlt: SearchConfig,
    pub mac: MacConfig,
    pub link: LinkSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

fn config_error(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    /// Linear transmit SNR; the only dB conversion in the program.
    pub fn rho(&self) -> f64 {
        10f64.powf(self.channel.rho_db / 10.0)
    }

    pub fn alphas(&self) -> Vec<f64> {
        if self.link.alphas.is_empty() {
            vec![self.geometry.alpha]
        } else {
            self.link.alphas.clone()
        }
    }

    pub fn attempts(&self) -> Vec<u32> {
        if self.link.attempts.is_empty() {
            (1..=self.mac.n_max).collect()
        } else {
            self.link.attempts.clone()
        }
    }

    pub fn topology(&self, alpha: f64) -> Result<CellTopology, CliError> {
        let g = &self.geometry;
        let ring = CellTopology::ring(g.interferers, g.bs_distance, g.pl0_db, g.d0, alpha)
            .map_err(|e| config_error("geometry", e))?;
        CellTopology { min_distance: g.min_distance, cell_radius: g.cell_radius, ..ring }
            .validated()
            .map_err(|e| config_error("geometry", e))
    }

    pub fn link(&self, r: f64, alpha: f64) -> Result<LinkConfig, CliError> {
        Ok(LinkConfig {
            topology: self.topology(alpha)?,
            r,
            theta: self.link.theta,
            w0_mag2: self.channel.w0_mag2,
            rho: self.rho(),
            n_max: self.mac.n_max,
        })
    }

    pub fn scenario(&self, n_users: usize) -> Result<ScenarioConfig, CliError> {
        let s = &self.sim;
        let config = ScenarioConfig {
            topology: self.topology(self.geometry.alpha)?,
            n_users,
            user_radii: s.user_radii.clone(),
            single_user_radius: s.single_user_radius,
            rho: self.rho(),
            mac: self.mac,
            quadrature: self.cfmath,
            search: self.dlt,
            horizon: s.horizon,
            trials: s.trials,
            seed: s.seed,
        };
        config.validate().map_err(|e| config_error(&format!("sim (n_users = {n_users})"), e))?;
        Ok(config)
    }

    /// Checks every field against its home module, reporting the field path.
    pub fn validate(&self) -> Result<(), CliError> {
        if !self.channel.rho_db.is_finite() {
            return Err(config_error("channel.rho_db", "must be finite"));
        }
        if !(self.channel.w0_mag2 > 0.0) {
            return Err(config_error("channel.w0_mag2", "must be positive"));
        }
        self.cfmath.validate().map_err(|e| config_error("cfmath", e))?;
        self.dlt.validate().map_err(|e| config_error("dlt", e))?;
        self.mac.validate().map_err(|e| config_error("mac", e))?;
        for alpha in self.alphas() {
            self.topology(alpha)?;
        }
        let cell = self.geometry.cell_radius;
        let l = &self.link;
        if l.radii.is_empty() {
            return Err(config_error("link.radii", "at least one radius is required"));
        }
        for (i, &r) in l.radii.iter().enumerate() {
            if !(r > 0.0 && r <= cell) {
                return Err(config_error(&format!("link.radii[{i}]"), format!("radius {r} outside (0, {cell}]")));
            }
        }
        if !l.theta.is_finite() {
            return Err(config_error("link.theta", "must be finite"));
        }
        if l.approximations.is_empty() {
            return Err(config_error("link.approximations", "at least one approximation is required"));
        }
        if let Some(n) = l.attempts.iter().find(|&&n| n == 0 || n > self.mac.n_max) {
            return Err(config_error("link.attempts", format!("attempt count {n} outside 1..={}", self.mac.n_max)));
        }
        if l.samples < 1000 {
            return Err(config_error("link.samples", format!("need at least 1000, got {}", l.samples)));
        }
        if l.processes == 0 {
            return Err(config_error("link.processes", "must be at least 1"));
        }
        if l.quantiles == 0 {
            return Err(config_error("link.quantiles", "must be at least 1"));
        }
        if !(l.curve_step > 0.0 && l.curve_step <= self.dlt.r_max) {
            return Err(config_error("link.curve_step", format!("must be in (0, dlt.r_max], got {}", l.curve_step)));
        }
        if l.dominant == 0 || l.dominant > self.geometry.interferers {
            return Err(config_error("link.dominant", format!("must be in 1..={}", self.geometry.interferers)));
        }
        if self.sim.users.is_empty() {
            return Err(config_error("sim.users", "at least one user count is required"));
        }
        if self.sim.policies.is_empty() {
            return Err(config_error("sim.policies", "at least one policy is required"));
        }
        for &n in &self.sim.users {
            self.scenario(n)?;
        }
        Ok(())
    }
}
