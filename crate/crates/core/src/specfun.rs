//! Cylindrical Bessel functions of integer order and real argument.
//!
//! `J` is computed for all orders at once by normalized downward (Miller)
//! recurrence. `Y_0` and `Y_1` follow from Neumann series over the same
//! `J` sequence, so they stay accurate for large arguments where the ascending
//! series cancels badly; higher `Y` orders come from the (stable) upward
//! recurrence.

use std::f64::consts::{FRAC_2_PI, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest order (in magnitude) accepted by the public evaluators.
pub const MAX_ORDER: i32 = 1000;
/// Largest argument accepted by the public evaluators.
pub const MAX_ARGUMENT: f64 = 2000.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_ABOVE: f64 = 1.0e250;
const RESCALE_BY: f64 = 1.0e-250;

/// Hankel function kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HankelKind {
    /// `H^(1) = J + iY`
    First,
    /// `H^(2) = J - iY`
    Second,
}

fn check_argument(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("Bessel argument must be finite and >= 0, got {x}")));
    }
    if x > MAX_ARGUMENT {
        return Err(Error::Domain(format!("Bessel argument {x} exceeds supported maximum {MAX_ARGUMENT}")));
    }
    Ok(())
}

fn check_order(m: i32) -> Result<()> {
    if m.abs() > MAX_ORDER {
        return Err(Error::Domain(format!("Bessel order {m} exceeds supported range |m| <= {MAX_ORDER}")));
    }
    Ok(())
}

fn reflect_sign(m: i32) -> f64 {
    if m < 0 && m % 2 != 0 {
        -1.0
    } else {
        1.0
    }
}

/// Starting order for the downward recurrence.
fn miller_start(n_max: usize, x: f64) -> usize {
    let top = n_max.max(x.ceil() as usize);
    let start = top + 24 + (40.0 * top as f64).sqrt() as usize + (x.cbrt() * 4.0) as usize;
    start + (start % 2)
}

/// `J_0(x) ..= J_{len-1}(x)` by normalized downward recurrence.
///
/// The returned vector may be longer than `n_max + 1`; callers needing the
/// Neumann series use the extra tail.
fn miller_j(n_max: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return out;
    }
    let start = miller_start(n_max, x);
    let mut vals = vec![0.0; start + 1];
    let mut above = 0.0_f64;
    let mut current = 1.0e-30_f64;
    vals[start] = current;
    for k in (1..=start).rev() {
        let below = (2.0 * k as f64 / x) * current - above;
        above = current;
        current = below;
        vals[k - 1] = current;
        if current.abs() > RESCALE_ABOVE {
            for v in vals[k - 1..].iter_mut() {
                *v *= RESCALE_BY;
            }
            above *= RESCALE_BY;
            current *= RESCALE_BY;
        }
    }
    // J_0 + 2 (J_2 + J_4 + ...) = 1
    let mut norm = vals[0];
    for v in vals.iter().skip(2).step_by(2) {
        norm += 2.0 * v;
    }
    for v in vals.iter_mut() {
        *v /= norm;
    }
    vals
}

/// `Y_0` and `Y_1` from the Neumann series over a Miller `J` sequence.
fn neumann_y01(j: &[f64], x: f64) -> (f64, f64) {
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut even_sum = 0.0;
    let mut odd_sum = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        even_sum += sign * j[2 * k] / kf;
        odd_sum += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
        k += 1;
    }
    let y0 = FRAC_2_PI * log_term * j[0] - 2.0 * FRAC_2_PI * even_sum;
    let y1 = FRAC_2_PI * (log_term * j[1] - j[0] / x) + FRAC_2_PI * odd_sum;
    (y0, y1)
}

/// `J_0(x) ..= J_{n_max}(x)`.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Result<Vec<f64>> {
    check_argument(x)?;
    let mut vals = miller_j(n_max, x);
    vals.truncate(n_max + 1);
    Ok(vals)
}

/// `Y_0(x) ..= Y_{n_max}(x)`. Orders whose magnitude overflows come back
/// as `-inf`.
pub fn bessel_y_sequence(n_max: usize, x: f64) -> Result<Vec<f64>> {
    Ok(BesselTable::new(n_max, x)?.y)
}

/// `J_m` and `Y_m` for `m = 0..=max_order` at one argument.
#[derive(Debug, Clone)]
pub struct BesselTable {
    x: f64,
    j: Vec<f64>,
    y: Vec<f64>,
}

impl BesselTable {
    /// Requires `x > 0` (`Y` is singular at the origin).
    pub fn new(max_order: usize, x: f64) -> Result<Self> {
        check_argument(x)?;
        if x == 0.0 {
            return Err(Error::Domain("Y_m diverges at x = 0".into()));
        }
        let full = miller_j(max_order.max(1), x);
        let (y0, y1) = neumann_y01(&full, x);
        let mut y = Vec::with_capacity(max_order + 1);
        y.push(y0);
        if max_order >= 1 {
            y.push(y1);
        }
        for m in 1..max_order {
            let next = (2.0 * m as f64 / x) * y[m] - y[m - 1];
            y.push(if next.is_finite() { next } else { f64::NEG_INFINITY });
        }
        let mut j = full;
        j.truncate(max_order + 1);
        Ok(Self { x, j, y })
    }

    pub fn argument(&self) -> f64 {
        self.x
    }

    pub fn max_order(&self) -> usize {
        self.j.len() - 1
    }

    /// `J_m(x)`, any sign of `m` with `|m| <= max_order`.
    pub fn j(&self, m: i32) -> f64 {
        reflect_sign(m) * self.j[m.unsigned_abs() as usize]
    }

    pub fn y(&self, m: i32) -> f64 {
        reflect_sign(m) * self.y[m.unsigned_abs() as usize]
    }

    pub fn h1(&self, m: i32) -> Complex64 {
        Complex64::new(self.j(m), self.y(m))
    }

    pub fn h2(&self, m: i32) -> Complex64 {
        Complex64::new(self.j(m), -self.y(m))
    }

    pub fn hankel(&self, kind: HankelKind, m: i32) -> Complex64 {
        match kind {
            HankelKind::First => self.h1(m),
            HankelKind::Second => self.h2(m),
        }
    }
}

/// Regular Bessel function `J_m(x)`.
pub fn bessel_j(m: i32, x: f64) -> Result<f64> {
    check_order(m)?;
    check_argument(x)?;
    let n = m.unsigned_abs() as usize;
    Ok(reflect_sign(m) * miller_j(n, x)[n])
}

/// Neumann function `Y_m(x)`, `x > 0`.
pub fn bessel_y(m: i32, x: f64) -> Result<f64> {
    check_order(m)?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Y_m requires x > 0, got {x}")));
    }
    let table = BesselTable::new(m.unsigned_abs() as usize, x)?;
    Ok(table.y(m))
}

/// Hankel function of the given kind.
pub fn hankel(kind: HankelKind, m: i32, x: f64) -> Result<Complex64> {
    check_order(m)?;
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Hankel functions require x > 0, got {x}")));
    }
    let table = BesselTable::new(m.unsigned_abs() as usize, x)?;
    Ok(table.hankel(kind, m))
}

/// Large-argument leading form `sqrt(2 / (pi x))` of `|H_m(x)|`.
pub fn hankel_modulus_asymptote(x: f64) -> f64 {
    (2.0 / (PI * x)).sqrt()
}
