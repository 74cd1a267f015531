//! Spinor cylinder waves of the massless Dirac operator and their
//! re-expansion about the displaced inner center.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::specfun::{bessel_j_sequence, BesselTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    /// `J_m`
    Regular,
    /// `H^(1)_m`
    Outgoing,
    /// `H^(2)_m`
    Incoming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Center {
    /// Center of the outer circle.
    Outer,
    /// Center of the inner disk, `(xi, 0)`.
    Inner,
}

/// Direction of a Graf re-expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Translation {
    OuterToInner,
    InnerToOuter,
}

/// `[Z_m(kr) e^{im theta}, i tau Z_{m+1}(kr) e^{i(m+1) theta}]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinorWave {
    pub kind: WaveKind,
    pub order: i32,
    pub k: f64,
    pub tau: i8,
    pub center: Center,
}

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `J_n(x)` for signed `x` out of a table computed at `|x|`.
pub(crate) fn signed_j(table: &[f64], n: i32, negative_argument: bool) -> f64 {
    let idx = n.unsigned_abs() as usize;
    let mut v = table[idx];
    let odd = n % 2 != 0;
    if n < 0 && odd {
        v = -v;
    }
    if negative_argument && odd {
        v = -v;
    }
    v
}

/// Radial factors `(Z_m(x), Z_{m+1}(x))` of the given kind.
pub(crate) fn radial_pair(kind: WaveKind, table: &BesselTable, m: i32) -> (Complex64, Complex64) {
    match kind {
        WaveKind::Regular => (Complex64::new(table.j(m), 0.0), Complex64::new(table.j(m + 1), 0.0)),
        WaveKind::Outgoing => (table.h1(m), table.h1(m + 1)),
        WaveKind::Incoming => (table.h2(m), table.h2(m + 1)),
    }
}

impl SpinorWave {
    /// Evaluates at polar coordinates `(r, theta)` measured from the wave's own center.
    pub fn evaluate(&self, r: f64, theta: f64) -> Result<[Complex64; 2]> {
        if !(r >= 0.0) || !self.k.is_finite() || self.k <= 0.0 {
            return Err(Error::Domain(format!("invalid wave evaluation at r = {r}, k = {}", self.k)));
        }
        let max_order = (self.order.abs().max((self.order + 1).abs())) as usize;
        let x = self.k * r;
        let (upper, lower) = if x == 0.0 {
            if self.kind != WaveKind::Regular {
                return Err(Error::Domain("singular spinor wave evaluated at its center".into()));
            }
            let j = bessel_j_sequence(max_order, 0.0)?;
            (
                Complex64::new(signed_j(&j, self.order, false), 0.0),
                Complex64::new(signed_j(&j, self.order + 1, false), 0.0),
            )
        } else {
            radial_pair(self.kind, &BesselTable::new(max_order, x)?, self.order)
        };
        let phase = Complex64::from_polar(1.0, self.order as f64 * theta);
        let phase_next = Complex64::from_polar(1.0, (self.order + 1) as f64 * theta);
        Ok([upper * phase, I * f64::from(self.tau) * lower * phase_next])
    }
}

/// Graf re-expansion matrix for orders `-M..=M`.
///
/// For a source coefficient vector `c` (waves about the source center) the
/// target coefficients are `T c`. With the inner center at `(xi, 0)`:
/// outer-to-inner `T_{nm} = J_{m-n}(k xi)`, inner-to-outer `T_{mn} = J_{m-n}(k xi)`.
/// The matrix is the same for every wave kind; for singular kinds it is only
/// valid where the evaluation point is farther from the target center than
/// `|xi|`, which `check_singular_validity` enforces for the matching circles.
pub fn graf_coefficients(k: f64, xi: f64, order: usize, direction: Translation) -> Result<ComplexMatrix> {
    if !(k > 0.0) || !k.is_finite() || !xi.is_finite() {
        return Err(Error::Domain(format!("Graf translation needs k > 0 and finite xi (k = {k}, xi = {xi})")));
    }
    let n = 2 * order + 1;
    let table = bessel_j_sequence(2 * order, k * xi.abs())?;
    let neg = xi < 0.0;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let diff = match direction {
            Translation::OuterToInner => j as i32 - i as i32,
            Translation::InnerToOuter => i as i32 - j as i32,
        };
        Complex64::new(signed_j(&table, diff, neg), 0.0)
    }))
}

/// Singular-kind translation onto the inner matching circle needs `rho > |xi|`.
pub fn check_singular_validity(rho: f64, xi: f64) -> Result<()> {
    if rho <= xi.abs() {
        return Err(Error::Geometry(format!(
            "singular Graf translation diverges on the inner circle when rho ({rho}) <= |xi| ({})",
            xi.abs()
        )));
    }
    Ok(())
}

/// Largest deviation between a cylinder wave evaluated directly and via its
/// translated sum, at `n_points` random points of a matching circle.
///
/// Regular kind: an outer-frame wave `J_m(kr) e^{im theta}` re-expanded about
/// the inner center, sampled on the circle of radius `radius` about `O'`.
/// Singular kinds: an inner-frame wave re-expanded about `O`, sampled on the
/// circle of radius `radius` about `O` (valid for `radius > |xi|`). These are
/// the two expansions the matching solver relies on.
pub fn graf_pointwise_residual(
    kind: WaveKind,
    k: f64,
    xi: f64,
    radius: f64,
    m: i32,
    order: usize,
    n_points: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let table = bessel_j_sequence(2 * order + m.unsigned_abs() as usize, k * xi.abs())?;
    let neg = xi < 0.0;
    for _ in 0..n_points {
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let (px, py) = match kind {
            WaveKind::Regular => (xi + radius * angle.cos(), radius * angle.sin()),
            _ => (radius * angle.cos(), radius * angle.sin()),
        };
        let (r, theta) = ((px * px + py * py).sqrt(), py.atan2(px));
        let (rp, phi) = (((px - xi).powi(2) + py * py).sqrt(), py.atan2(px - xi));
        let (direct, translated) = match kind {
            WaveKind::Regular => {
                // outer-frame regular wave, re-expanded about O'
                let direct = Complex64::new(BesselTable::new(m.unsigned_abs() as usize, k * r)?.j(m), 0.0)
                    * Complex64::from_polar(1.0, m as f64 * theta);
                let local = BesselTable::new(order + m.unsigned_abs() as usize, k * rp)?;
                let sum: Complex64 = (-(order as i32)..=order as i32)
                    .map(|n| {
                        signed_j(&table, m - n, neg) * local.j(n) * Complex64::from_polar(1.0, n as f64 * phi)
                    })
                    .sum();
                (direct, sum)
            }
            WaveKind::Outgoing | WaveKind::Incoming => {
                // inner-frame singular wave, re-expanded about O (r > |xi|)
                let pick = |t: &BesselTable, n: i32| match kind {
                    WaveKind::Outgoing => t.h1(n),
                    _ => t.h2(n),
                };
                let direct = pick(&BesselTable::new(m.unsigned_abs() as usize, k * rp)?, m)
                    * Complex64::from_polar(1.0, m as f64 * phi);
                let outer = BesselTable::new(order + m.unsigned_abs() as usize, k * r)?;
                let sum: Complex64 = (-(order as i32)..=order as i32)
                    .map(|n| {
                        signed_j(&table, n - m, neg) * pick(&outer, n) * Complex64::from_polar(1.0, n as f64 * theta)
                    })
                    .sum();
                (direct, sum)
            }
        };
        worst = worst.max((direct - translated).norm() / direct.norm().max(1.0));
    }
    Ok(worst)
}
