//! Geometry and media of the gated annular junction.
//!
//! Region I is the ungated exterior `r > 1`, region II the gated annulus
//! between the outer unit circle (center `O`) and the inner disk, region III
//! the inner disk of radius `rho` centered at `O' = (xi, 0)`. The exchange
//! field acts over the whole gated area, so a spin-`s` carrier at energy
//! `eps` sees the local kinetic energy `eps - nu + s mu` in II and III.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensionless junction parameters (lengths in `R_1`, energies in `hbar v_F / R_1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionConfig {
    /// `R_2 / R_1`
    pub rho: f64,
    /// Displacement of the inner disk center along `+x`. Negative values
    /// describe the mirror-image junction.
    pub xi: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub mu: f64,
}

impl JunctionConfig {
    pub fn new(rho: f64, xi: f64, nu1: f64, nu2: f64, mu: f64) -> Result<Self> {
        let cfg = Self { rho, xi, nu1, nu2, mu };
        cfg.validate()?;
        Ok(cfg)
    }

    /// No gate, no exchange field.
    pub fn free_space(rho: f64, xi: f64) -> Self {
        Self { rho, xi, nu1: 0.0, nu2: 0.0, mu: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.rho, self.xi, self.nu1, self.nu2, self.mu];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("junction parameters must be finite".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if self.xi.abs() + self.rho >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "inner disk must lie strictly inside the outer one: |xi| + rho = {} >= 1",
                self.xi.abs() + self.rho
            )));
        }
        Ok(())
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    /// Mirror image under `x -> -x`.
    pub fn mirrored(self) -> Self {
        self.with_xi(-self.xi)
    }

    pub fn is_free_space(&self) -> bool {
        self.nu1 == 0.0 && self.nu2 == 0.0 && self.mu == 0.0
    }
}

/// Real electron spin `s = +1` (up) or `s = -1` (down).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    pub fn from_sign(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Spin::Up),
            -1 => Ok(Spin::Down),
            other => Err(Error::InvalidConfig(format!("spin must be +1 or -1, got {other}"))),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Spin::Up => "up",
            Spin::Down => "down",
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Spin::Up { "+1" } else { "-1" })
    }
}

impl Serialize for Spin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i8())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Spin::from_sign(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::I, Region::II, Region::III];

    pub fn name(self) -> &'static str {
        match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
        }
    }
}

/// Local propagation data of one region for one spin and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    /// `eps - nu + s mu` in the region.
    pub local_energy: f64,
    /// Wavenumber `|local_energy|`.
    pub k: f64,
    /// Band index: `+1` electron-like, `-1` hole-like, `0` at the Dirac point.
    pub tau: i8,
}

impl Medium {
    pub fn from_local_energy(local_energy: f64) -> Self {
        let tau = if local_energy > 0.0 {
            1
        } else if local_energy < 0.0 {
            -1
        } else {
            0
        };
        Self { local_energy, k: local_energy.abs(), tau }
    }

    pub fn tau_f64(&self) -> f64 {
        f64::from(self.tau)
    }

    pub fn is_degenerate(&self) -> bool {
        self.tau == 0
    }
}

/// Potential energy `nu - s mu` felt in `region`.
pub fn potential(cfg: &JunctionConfig, spin: Spin, region: Region) -> f64 {
    let s = spin.sign();
    match region {
        Region::I => 0.0,
        Region::II => cfg.nu1 - s * cfg.mu,
        Region::III => cfg.nu2 - s * cfg.mu,
    }
}

pub fn medium(cfg: &JunctionConfig, spin: Spin, region: Region, eps: f64) -> Medium {
    Medium::from_local_energy(eps - potential(cfg, spin, region))
}

/// Media of regions I, II, III in that order; rejects Dirac-point media.
pub fn media(cfg: &JunctionConfig, spin: Spin, eps: f64) -> Result<[Medium; 3]> {
    if !eps.is_finite() {
        return Err(Error::Domain(format!("energy must be finite, got {eps}")));
    }
    let out = Region::ALL.map(|r| medium(cfg, spin, r, eps));
    for (m, r) in out.iter().zip(Region::ALL) {
        if m.is_degenerate() {
            return Err(Error::DegenerateMedium(r.name()));
        }
    }
    Ok(out)
}

/// Signed refractive index of region II or III relative to the exterior.
pub fn refractive_index(cfg: &JunctionConfig, spin: Spin, region: Region, eps: f64) -> Result<f64> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::Domain(format!("refractive index undefined at eps = {eps}")));
    }
    match region {
        Region::I => Ok(1.0),
        Region::II | Region::III => Ok(medium(cfg, spin, region, eps).local_energy / eps),
    }
}

/// Region containing the point with polar coordinates `(r, theta)` about `O`.
/// Points on a circle belong to the region inside it.
pub fn classify_point(cfg: &JunctionConfig, r: f64, theta: f64) -> Region {
    if r > 1.0 {
        return Region::I;
    }
    // |r - xi|^2 by the law of cosines, so exact boundary radii stay exact
    let d2 = r * r + cfg.xi * cfg.xi - 2.0 * r * cfg.xi * theta.cos();
    if d2 <= cfg.rho * cfg.rho {
        Region::III
    } else {
        Region::II
    }
}

pub fn classify_xy(cfg: &JunctionConfig, x: f64, y: f64) -> Region {
    if x * x + y * y > 1.0 {
        Region::I
    } else if (x - cfg.xi).powi(2) + y * y <= cfg.rho * cfg.rho {
        Region::III
    } else {
        Region::II
    }
}
