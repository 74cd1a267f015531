//! Boundary matching for the eccentric annular junction.
//!
//! Ansatz per incident order `l` (orders `-M..=M` everywhere):
//!
//! * region I: incoming wave of order `l` plus `sum_m S_ml` outgoing waves about `O`;
//! * region II: regular waves about `O` (coefficients `a`) plus outgoing waves
//!   about `O'` (coefficients `beta`), the latter re-expanded about `O` as
//!   `b = V^T beta` on the outer circle;
//! * region III: regular waves about `O'` (coefficients `c`).
//!
//! Continuity of both spinor components on the inner circle is diagonal in
//! the `O'` harmonics and eliminates `c`, giving `beta = -D V a`; continuity on
//! the outer circle is diagonal in the `O` harmonics and eliminates `S`. What
//! remains is one `(2M+1) x (2M+1)` system for `a` with all incident orders as
//! right-hand sides.

use num_complex::Complex64;

use super::smatrix::SMatrix;
use super::waves::{check_singular_validity, graf_coefficients, graf_pointwise_residual, signed_j, Translation, WaveKind, I};
use crate::error::{Error, Result};
use crate::junction::{media, JunctionConfig, Medium, Spin};
use crate::linalg::{ComplexMatrix, LuFactors};
use crate::specfun::{bessel_j_sequence, BesselTable};

/// Orders added on top of the largest `k R` of the problem.
pub const TRUNCATION_BUFFER: usize = 12;
/// Order increment used by the convergence check and each escalation.
pub const ESCALATION_STEP: usize = 8;
pub const MAX_ESCALATIONS: usize = 3;
/// Largest allowed change of any S-matrix entry when `M` grows by `ESCALATION_STEP`.
pub const CONVERGENCE_TOL: f64 = 1e-9;
/// Matching systems with a smaller reciprocal condition number are rejected.
pub const RCOND_FLOOR: f64 = 1e-13;

/// Interior and exterior expansion coefficients; column `l` belongs to
/// incident order `l`. All orders run over `-M..=M`.
#[derive(Debug, Clone)]
pub struct MatchSolution {
    pub cfg: JunctionConfig,
    pub spin: Spin,
    pub eps: f64,
    pub order: usize,
    pub media: [Medium; 3],
    /// Region II regular waves about `O`.
    pub regular_outer: ComplexMatrix,
    /// Region II outgoing waves about `O`, valid on the outer circle.
    pub outgoing_outer: ComplexMatrix,
    /// Region II outgoing waves about `O'`.
    pub outgoing_inner: ComplexMatrix,
    /// Region III regular waves about `O'`.
    pub regular_inner: ComplexMatrix,
    /// `S - I` in the raw cylinder-wave basis. Kept separately from `S`
    /// because high orders multiply it by very large exterior Hankel values.
    pub t_raw: ComplexMatrix,
    pub rcond: f64,
}

impl MatchSolution {
    pub fn dim(&self) -> usize {
        2 * self.order + 1
    }

    /// Whether region I uses `H^(1)` as its outgoing kind (electron-like exterior).
    pub fn exterior_outgoing_kind(&self) -> (WaveKind, WaveKind) {
        exterior_kinds(&self.media[0])
    }

    /// Largest mismatch of both spinor components on both interfaces,
    /// relative to the incident amplitude, over `n_points` points per circle.
    pub fn boundary_residual(&self, n_points: usize) -> Result<f64> {
        super::field::boundary_residual(self, n_points)
    }
}

/// `(outgoing, incoming)` wave kinds of the exterior.
pub(crate) fn exterior_kinds(exterior: &Medium) -> (WaveKind, WaveKind) {
    if exterior.tau > 0 {
        (WaveKind::Outgoing, WaveKind::Incoming)
    } else {
        (WaveKind::Incoming, WaveKind::Outgoing)
    }
}

pub(crate) fn pick(table: &BesselTable, kind: WaveKind, m: i32) -> Complex64 {
    match kind {
        WaveKind::Regular => Complex64::new(table.j(m), 0.0),
        WaveKind::Outgoing => table.h1(m),
        WaveKind::Incoming => table.h2(m),
    }
}

/// `i^p`
pub(crate) fn i_pow(p: i32) -> Complex64 {
    match p.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// Base truncation `ceil(max_region k * reach) + 12`, where the reach is 1
/// for regions I and II and `rho + |xi|` for region III.
pub fn truncation_order(cfg: &JunctionConfig, spin: Spin, eps: f64) -> Result<usize> {
    let [m1, m2, m3] = media(cfg, spin, eps)?;
    let reach = m1.k.max(m2.k).max(m3.k * (cfg.rho + cfg.xi.abs()));
    Ok(reach.ceil() as usize + TRUNCATION_BUFFER)
}

fn ensure_finite(values: &[Complex64], what: &str) -> Result<()> {
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(format!(
            "{what}: Bessel values out of double range (local wavenumber too small for this truncation order)"
        )));
    }
    Ok(())
}

/// Solves the matching problem at a fixed truncation order.
pub fn assemble_and_solve(cfg: &JunctionConfig, spin: Spin, eps: f64, order: usize) -> Result<(SMatrix, MatchSolution)> {
    cfg.validate()?;
    check_singular_validity(cfg.rho, cfg.xi)?;
    let media = media(cfg, spin, eps)?;
    let [ext, ann, disk] = media;
    let (tau1, tau2, tau3) = (ext.tau_f64(), ann.tau_f64(), disk.tau_f64());
    let (out_kind, _) = exterior_kinds(&ext);
    let m_max = order as i32;
    let n = 2 * order + 1;
    let orders = || -m_max..=m_max;
    let idx = |m: i32| (m + m_max) as usize;

    let t1 = BesselTable::new(order + 1, ext.k)?;
    let t2_outer = BesselTable::new(order + 1, ann.k)?;
    let t2_inner = BesselTable::new(order + 1, ann.k * cfg.rho)?;
    let j3 = bessel_j_sequence(order + 1, disk.k * cfg.rho)?;
    let j3 = |m: i32| signed_j(&j3, m, false);

    // inner-circle reflection: beta_n = -d_n alpha_n
    let d: Vec<Complex64> = orders()
        .map(|m| {
            let num = tau2 * t2_inner.j(m + 1) * j3(m) - tau3 * t2_inner.j(m) * j3(m + 1);
            let den = tau2 * t2_inner.h1(m + 1) * j3(m) - tau3 * t2_inner.h1(m) * j3(m + 1);
            Complex64::new(num, 0.0) / den
        })
        .collect();
    ensure_finite(&d, "inner reflection coefficients")?;

    let (reflection, to_inner) = if cfg.xi == 0.0 {
        let r = ComplexMatrix::diagonal(&d.iter().map(|v| -v).collect::<Vec<_>>());
        (r, None)
    } else {
        let v = graf_coefficients(ann.k, cfg.xi, order, Translation::OuterToInner)?;
        let mut dv = v.clone();
        for i in 0..n {
            for j in 0..n {
                dv[(i, j)] *= -d[i];
            }
        }
        // V^T is the inner-to-outer translation
        let r = v.transpose().matmul(&dv)?;
        (r, Some(v))
    };
    reflection.ensure_finite()?;

    let out1 = |m: i32| pick(&t1, out_kind, m);
    let h_scale: Vec<f64> = orders().map(|m| t2_outer.h1(m).norm()).collect();
    if h_scale.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("region II Hankel functions overflow at this truncation order".into()));
    }

    let mut system = ComplexMatrix::zeros(n, n);
    let mut rhs = ComplexMatrix::zeros(n, n);
    for m in orders() {
        let i = idx(m);
        let ratio = out1(m) / out1(m + 1);
        let p = tau1 * t2_outer.j(m) - tau2 * ratio * t2_outer.j(m + 1);
        let q = tau1 * t2_outer.h1(m) - tau2 * ratio * t2_outer.h1(m + 1);
        for j in 0..n {
            system[(i, j)] = q * reflection[(i, j)] * h_scale[j];
        }
        system[(i, i)] += p * h_scale[i];
        // incoming = 2 J - outgoing, and the outgoing part cancels exactly
        rhs[(i, i)] = 2.0 * tau1 * (t1.j(m) - ratio * t1.j(m + 1));
        let row_max = system.row(i).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(row_max > 0.0) || !row_max.is_finite() {
            return Err(Error::NonFinite(format!("matching row for order {m}")));
        }
        let inv = 1.0 / row_max;
        for j in 0..n {
            system[(i, j)] *= inv;
        }
        rhs[(i, i)] *= inv;
    }

    let lu = LuFactors::factor(&system)?;
    let rcond = lu.rcond();
    if rcond < RCOND_FLOOR {
        return Err(Error::IllConditioned { order, rcond });
    }
    let mut a = lu.solve(&rhs)?;
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= h_scale[i];
        }
    }
    let b = reflection.matmul(&a)?;

    let mut t_raw = ComplexMatrix::zeros(n, n);
    for m in orders() {
        let i = idx(m);
        let denom = out1(m);
        for l in orders() {
            let j = idx(l);
            let mut v = t2_outer.j(m) * a[(i, j)] + t2_outer.h1(m) * b[(i, j)];
            if i == j {
                v -= 2.0 * t1.j(m);
            }
            t_raw[(i, j)] = v / denom;
        }
    }
    t_raw.ensure_finite()?;

    let alpha = match &to_inner {
        Some(v) => v.matmul(&a)?,
        None => a.clone(),
    };
    let mut beta = alpha.clone();
    let mut c = ComplexMatrix::zeros(n, n);
    for nn in orders() {
        let i = idx(nn);
        let use_upper = j3(nn).abs() >= j3(nn + 1).abs();
        for j in 0..n {
            beta[(i, j)] = -d[i] * alpha[(i, j)];
            c[(i, j)] = if use_upper {
                (alpha[(i, j)] * t2_inner.j(nn) + beta[(i, j)] * t2_inner.h1(nn)) / j3(nn)
            } else {
                (alpha[(i, j)] * t2_inner.j(nn + 1) + beta[(i, j)] * t2_inner.h1(nn + 1)) * tau2 / (tau3 * j3(nn + 1))
            };
        }
    }
    c.ensure_finite()?;

    let phys = ComplexMatrix::from_fn(n, n, |i, j| {
        let t = i_pow(j as i32 - i as i32) * t_raw[(i, j)];
        if i == j {
            t + 1.0
        } else {
            t
        }
    });
    let smatrix = SMatrix { eps, spin, order, k: ext.k, mat: phys };
    let solution = MatchSolution {
        cfg: *cfg,
        spin,
        eps,
        order,
        media,
        regular_outer: a,
        outgoing_outer: b,
        outgoing_inner: beta,
        regular_inner: c,
        t_raw,
        rcond,
    };
    Ok((smatrix, solution))
}

/// Result of a solve whose truncation passed the convergence check.
#[derive(Debug, Clone)]
pub struct ConvergedSolve {
    pub smatrix: SMatrix,
    pub solution: MatchSolution,
    /// Order the check started from.
    pub base_order: usize,
    pub escalations: usize,
    /// Largest S-matrix change between the last two orders.
    pub change: f64,
    /// Spot check of the Graf expansion at the annulus wavenumber.
    pub graf_residual: f64,
}

/// Solves at `base_order` and `base_order + 8`, escalating (at most three
/// times) until the S-matrix entries agree to `CONVERGENCE_TOL`. The finer of
/// the last pair is returned.
pub fn solve_from_order(cfg: &JunctionConfig, spin: Spin, eps: f64, base_order: usize) -> Result<ConvergedSolve> {
    let mut order = base_order;
    let mut coarse: Option<SMatrix> = None;
    let mut last_change = f64::INFINITY;
    for escalation in 0..=MAX_ESCALATIONS {
        let coarse_s = match coarse.take() {
            Some(s) => s,
            None => match assemble_and_solve(cfg, spin, eps, order) {
                Ok((s, _)) => s,
                Err(Error::IllConditioned { .. }) => {
                    order += ESCALATION_STEP;
                    continue;
                }
                Err(e) => return Err(e),
            },
        };
        let fine_order = order + ESCALATION_STEP;
        let (fine_s, fine_sol) = match assemble_and_solve(cfg, spin, eps, fine_order) {
            Ok(pair) => pair,
            Err(Error::IllConditioned { .. }) => {
                order = fine_order;
                continue;
            }
            Err(e) => return Err(e),
        };
        let change = fine_s.mat.central_block(coarse_s.dim())?.max_abs_diff(&coarse_s.mat)?;
        last_change = change;
        if change < CONVERGENCE_TOL {
            let ann = fine_sol.media[1];
            let graf_residual = if cfg.xi != 0.0 {
                graf_pointwise_residual(WaveKind::Regular, ann.k, cfg.xi, cfg.rho, 3, fine_order, 4, 0x5eed)?
            } else {
                0.0
            };
            return Ok(ConvergedSolve {
                smatrix: fine_s,
                solution: fine_sol,
                base_order,
                escalations: escalation,
                change,
                graf_residual,
            });
        }
        order = fine_order;
        coarse = Some(fine_s);
    }
    Err(Error::NonConvergence { order, escalations: MAX_ESCALATIONS, change: last_change })
}

/// `solve_from_order` starting at `truncation_order`.
pub fn solve_converged(cfg: &JunctionConfig, spin: Spin, eps: f64) -> Result<ConvergedSolve> {
    solve_from_order(cfg, spin, eps, truncation_order(cfg, spin, eps)?)
}
