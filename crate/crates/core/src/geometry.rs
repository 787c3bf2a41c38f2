//! Cell layout, user placement and distance-based path loss.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("path loss undefined at distance {0} m")]
    DegenerateDistance(f64),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("user radius {r} m outside (0, {cell_radius}] m")]
    RadiusOutOfCell { r: f64, cell_radius: f64 },
}

/// Wrap an angle into `(−π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    // rem_euclid maps −π to π already; guard the rounding case
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// Base station position relative to the home BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsSite {
    /// Meters.
    pub distance: f64,
    /// Radians.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellTopology {
    /// Interfering BSs `k = 1..=K`; the home BS sits at the origin.
    pub interferers: Vec<BsSite>,
    /// Path loss at the reference distance, dB.
    pub pl0_db: f64,
    /// Reference distance, meters.
    pub d0: f64,
    pub alpha: f64,
    /// Distances are clamped to at least this many meters before path loss.
    #[serde(default = "default_min_distance")]
    pub min_distance: f64,
    /// Largest admissible user radius, meters.
    #[serde(default = "default_cell_radius")]
    pub cell_radius: f64,
}

fn default_min_distance() -> f64 {
    1.0
}

fn default_cell_radius() -> f64 {
    1000.0 / 3f64.sqrt()
}

impl Default for CellTopology {
    /// One tier of six neighbours at 1000 m, `ψ_k = 5π/6 − (k−1)π/3`,
    /// PL₀ = 37 dB at 1000 m, α = 3.
    fn default() -> Self {
        CellTopology::ring(6, 1000.0, 37.0, 1000.0, 3.0).expect("default topology is valid")
    }
}

impl CellTopology {
    /// `count` BSs at distance `bs_distance`, angles `5π/6 − k·π/3` for the
    /// hexagonal case and evenly spread otherwise.
    pub fn ring(count: usize, bs_distance: f64, pl0_db: f64, d0: f64, alpha: f64) -> Result<Self, GeometryError> {
        let step = 2.0 * PI / count.max(1) as f64;
        let interferers = (0..count)
            .map(|k| BsSite { distance: bs_distance, angle: normalize_angle(5.0 * PI / 6.0 - k as f64 * step) })
            .collect();
        CellTopology {
            interferers,
            pl0_db,
            d0,
            alpha,
            min_distance: default_min_distance(),
            cell_radius: default_cell_radius(),
        }
        .validated()
    }

    pub fn validated(mut self) -> Result<Self, GeometryError> {
        if self.interferers.is_empty() {
            return Err(GeometryError::InvalidTopology("at least one interfering BS is required".into()));
        }
        if let Some(bad) = self.interferers.iter().find(|b| !(b.distance > 0.0) || !b.angle.is_finite()) {
            return Err(GeometryError::InvalidTopology(format!("interferer at {bad:?} must have positive distance")));
        }
        if !(self.alpha > 0.0) || !(self.d0 > 0.0) || !self.pl0_db.is_finite() {
            return Err(GeometryError::InvalidTopology(format!(
                "need alpha > 0 and d0 > 0, got alpha={} d0={}",
                self.alpha, self.d0
            )));
        }
        if !(self.min_distance > 0.0) || !(self.cell_radius > 0.0) {
            return Err(GeometryError::InvalidTopology("min_distance and cell_radius must be positive".into()));
        }
        for b in &mut self.interferers {
            b.angle = normalize_angle(b.angle);
        }
        Ok(self)
    }

    /// Number of interfering cells `K`.
    pub fn k(&self) -> usize {
        self.interferers.len()
    }

    /// Largest possible link gain, reached at `min_distance`.
    pub fn max_pathloss(&self) -> f64 {
        pathloss(self.min_distance, self.pl0_db, self.d0, self.alpha).expect("min_distance > 0")
    }
}

/// Law-of-cosines distance from a user at `(r, θ)` to a BS at `(D, ψ)`.
pub fn distance_to_bs(r: f64, theta: f64, d: f64, psi: f64) -> f64 {
    if d == 0.0 {
        return r;
    }
    (r * r + d * d - 2.0 * r * d * (theta - psi).cos()).max(0.0).sqrt()
}

/// Linear power gain `10^(−PL₀/10) · (d₀/d)^α`.
pub fn pathloss(d: f64, pl0_db: f64, d0: f64, alpha: f64) -> Result<f64, GeometryError> {
    if !(d > 0.0) {
        return Err(GeometryError::DegenerateDistance(d));
    }
    Ok(10f64.powf(-pl0_db / 10.0) * (d0 / d).powf(alpha))
}

/// A user's position and its link gains to every BS (index 0 = home).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    pub r: f64,
    pub theta: f64,
    pub dist: Vec<f64>,
    pub pathloss: Vec<f64>,
}

impl UserGeometry {
    /// `L⁽⁰⁾`.
    pub fn home_gain(&self) -> f64 {
        self.pathloss[0]
    }

    /// `L⁽ᵏ⁾` for `k = 1..=K`.
    pub fn interference_gains(&self) -> &[f64] {
        &self.pathloss[1..]
    }
}

pub fn build_user(topology: &CellTopology, r: f64, theta: f64) -> Result<UserGeometry, GeometryError> {
    if !(r > 0.0) || r > topology.cell_radius {
        return Err(GeometryError::RadiusOutOfCell { r, cell_radius: topology.cell_radius });
    }
    let theta = normalize_angle(theta);
    let dist: Vec<f64> = std::iter::once(r)
        .chain(topology.interferers.iter().map(|b| distance_to_bs(r, theta, b.distance, b.angle)))
        .collect();
    let pathloss = dist
        .iter()
        .map(|&d| pathloss(d.max(topology.min_distance), topology.pl0_db, topology.d0, topology.alpha))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(UserGeometry { r, theta, dist, pathloss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cartesian(r: f64, theta: f64, d: f64, psi: f64) -> f64 {
        let (ux, uy) = (r * theta.cos(), r * theta.sin());
        let (bx, by) = (d * psi.cos(), d * psi.sin());
        ((ux - bx).powi(2) + (uy - by).powi(2)).sqrt()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_to_bs(250.0, 0.0, 0.0, 1.3), 250.0);
        assert!((distance_to_bs(250.0, PI / 2.0, 1000.0, PI / 2.0) - 750.0).abs() < 1e-9);
        let (r, th, d, psi) = (300.0, PI / 3.0, 1000.0, 5.0 * PI / 6.0);
        assert!((distance_to_bs(r, th, d, psi) - cartesian(r, th, d, psi)).abs() < 1e-9);
    }

    #[test]
    fn pathloss_examples() {
        let base = 10f64.powf(-3.7);
        assert!((pathloss(1000.0, 37.0, 1000.0, 3.0).unwrap() - base).abs() < 1e-18);
        assert!((pathloss(500.0, 37.0, 1000.0, 3.0).unwrap() - 8.0 * base).abs() < 1e-17);
        // (1000/732.1)^3.5 · 10^-3.7 evaluated independently via exp/ln
        let expected = (-3.7 * 10f64.ln() + 3.5 * (1000.0f64 / 732.1).ln()).exp();
        assert!((pathloss(732.1, 37.0, 1000.0, 3.5).unwrap() / expected - 1.0).abs() < 1e-13);
        assert!(matches!(pathloss(0.0, 37.0, 1000.0, 3.0), Err(GeometryError::DegenerateDistance(_))));
    }

    #[test]
    fn default_topology_layout() {
        let t = CellTopology::default();
        assert_eq!(t.k(), 6);
        let expected = [5.0, 3.0, 1.0, -1.0, -3.0, -5.0].map(|m| m * PI / 6.0);
        for (b, e) in t.interferers.iter().zip(expected) {
            assert!((b.angle - e).abs() < 1e-12);
            assert_eq!(b.distance, 1000.0);
        }
    }

    #[test]
    fn build_user_examples() {
        let t = CellTopology::default();
        let u = build_user(&t, 250.0, PI / 2.0).unwrap();
        assert_eq!(u.dist[0], 250.0);
        assert!((u.dist[2] - 750.0).abs() < 1e-9);

        let single =
            CellTopology { interferers: vec![BsSite { distance: 1000.0, angle: 0.0 }], ..CellTopology::default() };
        let near = build_user(&single, 1e-9, 0.3).unwrap();
        assert!((near.pathloss[1] / 10f64.powf(-3.7) - 1.0).abs() < 1e-9);
        assert_eq!(near.pathloss[0], single.max_pathloss());

        let u = build_user(&t, 400.0, 0.3).unwrap();
        for (k, b) in t.interferers.iter().enumerate() {
            let d = cartesian(400.0, 0.3, b.distance, b.angle);
            let l = 10f64.powf(-3.7) * (1000.0 / d).powi(3);
            assert!((u.pathloss[k + 1] / l - 1.0).abs() < 1e-12);
        }
        assert!(build_user(&t, -5.0, 0.0).is_err());
        assert!(build_user(&t, 900.0, 0.0).is_err());
    }

    #[test]
    fn angles_are_normalized() {
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rotation_invariance(r in 0.0..600.0f64, th in -PI..PI, d in 0.0..2000.0f64, psi in -PI..PI, c in -10.0..10.0f64) {
            let a = distance_to_bs(r, th, d, psi);
            let b = distance_to_bs(r, th + c, d, psi + c);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }

        #[test]
        fn triangle_bounds(r in 0.0..600.0f64, th in -PI..PI, d in 0.0..2000.0f64, psi in -PI..PI) {
            let x = distance_to_bs(r, th, d, psi);
            prop_assert!(x >= (d - r).abs() - 1e-9);
            prop_assert!(x <= d + r + 1e-9);
        }

        #[test]
        fn pathloss_decreasing(d in 1.0..5000.0f64, bump in 1e-3..100.0f64, alpha in 0.5..6.0f64) {
            let a = pathloss(d, 37.0, 1000.0, alpha).unwrap();
            let b = pathloss(d + bump, 37.0, 1000.0, alpha).unwrap();
            prop_assert!(b < a);
        }
    }
}
