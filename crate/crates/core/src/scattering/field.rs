//! Reconstruction of the spinor field from a matching solution.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;

use super::solver::{exterior_kinds, i_pow, pick, MatchSolution};
use super::waves::{signed_j, WaveKind, I};
use crate::error::{Error, Result};
use crate::junction::{classify_xy, Region};
use crate::specfun::{bessel_j_sequence, BesselTable};

/// Incident wave in region I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incident {
    /// Unit-density plane wave with wavevector along `theta_prime`.
    PlaneWave { theta_prime: f64 },
    /// Standing regular wave `2 J_l` of a single order (incoming part with unit coefficient).
    SingleOrder(i32),
}

/// Sum of spinor cylinder waves `sum_m coef_m [Z_m e^{im t}, i tau Z_{m+1} e^{i(m+1) t}]`
/// with orders `-M..=M`.
fn wave_sum(coef: &[Complex64], kind: WaveKind, k: f64, tau: f64, r: f64, theta: f64) -> Result<[Complex64; 2]> {
    let m_max = (coef.len() / 2) as i32;
    let x = k * r;
    let mut upper = Complex64::new(0.0, 0.0);
    let mut lower = Complex64::new(0.0, 0.0);
    let step = Complex64::from_polar(1.0, theta);
    let mut phase = Complex64::from_polar(1.0, -(m_max as f64) * theta);
    if x == 0.0 {
        if kind != WaveKind::Regular {
            return Err(Error::Domain("singular wave sum evaluated at its center".into()));
        }
        let j = bessel_j_sequence(m_max as usize + 1, 0.0)?;
        for (i, c) in coef.iter().enumerate() {
            let m = i as i32 - m_max;
            upper += c * signed_j(&j, m, false) * phase;
            lower += c * signed_j(&j, m + 1, false) * phase * step;
            phase *= step;
        }
    } else {
        let table = BesselTable::new(m_max as usize + 1, x)?;
        for (i, c) in coef.iter().enumerate() {
            let m = i as i32 - m_max;
            if *c != Complex64::new(0.0, 0.0) {
                upper += c * pick(&table, kind, m) * phase;
                lower += c * pick(&table, kind, m + 1) * phase * step;
            }
            phase *= step;
        }
    }
    Ok([upper, I * tau * lower])
}

/// Field evaluator for one solution and one incident wave.
#[derive(Debug, Clone)]
pub struct FieldEvaluator<'a> {
    solution: &'a MatchSolution,
    incident: Incident,
    scattered: Vec<Complex64>,
    regular_outer: Vec<Complex64>,
    outgoing_inner: Vec<Complex64>,
    regular_inner: Vec<Complex64>,
}

/// Raw-basis weights of the incoming part of the incident wave.
fn incident_weights(order: usize, incident: Incident) -> Result<Vec<Complex64>> {
    let n = 2 * order + 1;
    let m_max = order as i32;
    match incident {
        Incident::PlaneWave { theta_prime } => Ok((-m_max..=m_max)
            .map(|l| 0.5 * FRAC_1_SQRT_2 * i_pow(l) * Complex64::from_polar(1.0, -(l as f64) * theta_prime))
            .collect()),
        Incident::SingleOrder(l) => {
            if l.unsigned_abs() as usize > order {
                return Err(Error::Domain(format!("incident order {l} outside truncation M = {order}")));
            }
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            w[(l + m_max) as usize] = Complex64::new(1.0, 0.0);
            Ok(w)
        }
    }
}

fn apply(mat: &crate::linalg::ComplexMatrix, w: &[Complex64]) -> Vec<Complex64> {
    (0..mat.rows()).map(|i| mat.row(i).iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(solution: &'a MatchSolution, incident: Incident) -> Result<Self> {
        let w = incident_weights(solution.order, incident)?;
        let scattered = apply(&solution.t_raw, &w);
        Ok(Self {
            solution,
            incident,
            scattered,
            regular_outer: apply(&solution.regular_outer, &w),
            outgoing_inner: apply(&solution.outgoing_inner, &w),
            regular_inner: apply(&solution.regular_inner, &w),
        })
    }

    /// The incident wave alone, evaluated with the exterior medium.
    pub fn incident_field(&self, x: f64, y: f64) -> Result<[Complex64; 2]> {
        let ext = self.solution.media[0];
        let tau = ext.tau_f64();
        match self.incident {
            Incident::PlaneWave { theta_prime } => {
                let phase = Complex64::from_polar(FRAC_1_SQRT_2, ext.k * (x * theta_prime.cos() + y * theta_prime.sin()));
                Ok([phase, tau * Complex64::from_polar(1.0, theta_prime) * phase])
            }
            Incident::SingleOrder(l) => {
                let m_max = self.solution.order;
                let mut coef = vec![Complex64::new(0.0, 0.0); 2 * m_max + 1];
                coef[(l + m_max as i32) as usize] = Complex64::new(2.0, 0.0);
                wave_sum(&coef, WaveKind::Regular, ext.k, tau, x.hypot(y), y.atan2(x))
            }
        }
    }

    /// Field of the expansion that belongs to `region`, evaluated at `(x, y)`
    /// whether or not the point lies inside that region (used for interface checks).
    pub fn field_from(&self, region: Region, x: f64, y: f64) -> Result<[Complex64; 2]> {
        let sol = self.solution;
        let [ext, ann, disk] = sol.media;
        let (r, theta) = (x.hypot(y), y.atan2(x));
        let (xp, yp) = (x - sol.cfg.xi, y);
        let (rp, phi) = (xp.hypot(yp), yp.atan2(xp));
        match region {
            Region::I => {
                let inc = self.incident_field(x, y)?;
                let (out_kind, _) = exterior_kinds(&ext);
                let sc = wave_sum(&self.scattered, out_kind, ext.k, ext.tau_f64(), r, theta)?;
                Ok([inc[0] + sc[0], inc[1] + sc[1]])
            }
            Region::II => {
                let a = wave_sum(&self.regular_outer, WaveKind::Regular, ann.k, ann.tau_f64(), r, theta)?;
                let b = wave_sum(&self.outgoing_inner, WaveKind::Outgoing, ann.k, ann.tau_f64(), rp, phi)?;
                Ok([a[0] + b[0], a[1] + b[1]])
            }
            Region::III => wave_sum(&self.regular_inner, WaveKind::Regular, disk.k, disk.tau_f64(), rp, phi),
        }
    }

    /// Total field at `(x, y)`.
    pub fn field(&self, x: f64, y: f64) -> Result<[Complex64; 2]> {
        self.field_from(classify_xy(&self.solution.cfg, x, y), x, y)
    }

    /// Scattered part of the region I field (total minus incident).
    pub fn scattered_coefficients(&self) -> &[Complex64] {
        &self.scattered
    }

    /// Coefficients of the regular annulus waves about the outer center.
    pub fn regular_outer_coefficients(&self) -> &[Complex64] {
        &self.regular_outer
    }

    /// Raw-basis weights of the incident wave.
    pub fn weights(&self) -> Vec<Complex64> {
        incident_weights(self.solution.order, self.incident).expect("validated in new")
    }
}

/// Spinor field at `(x, y)` for the given incident wave.
pub fn evaluate_field(solution: &MatchSolution, incident: Incident, x: f64, y: f64) -> Result<[Complex64; 2]> {
    FieldEvaluator::new(solution, incident)?.field(x, y)
}

/// Largest spinor mismatch across both interfaces for plane-wave incidence
/// along `theta' = 0.3`, relative to the unit incident amplitude.
pub(crate) fn boundary_residual(solution: &MatchSolution, n_points: usize) -> Result<f64> {
    let eval = FieldEvaluator::new(solution, Incident::PlaneWave { theta_prime: 0.3 })?;
    let (xi, rho) = (solution.cfg.xi, solution.cfg.rho);
    let mut worst: f64 = 0.0;
    for i in 0..n_points {
        let t = TAU * (i as f64 + 0.5) / n_points as f64;
        let (x, y) = (t.cos(), t.sin());
        let a = eval.field_from(Region::I, x, y)?;
        let b = eval.field_from(Region::II, x, y)?;
        worst = worst.max((a[0] - b[0]).norm()).max((a[1] - b[1]).norm());
        let (x, y) = (xi + rho * t.cos(), rho * t.sin());
        let a = eval.field_from(Region::II, x, y)?;
        let b = eval.field_from(Region::III, x, y)?;
        worst = worst.max((a[0] - b[0]).norm()).max((a[1] - b[1]).norm());
    }
    Ok(worst)
}
