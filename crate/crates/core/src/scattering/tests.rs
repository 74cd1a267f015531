use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::junction::{JunctionConfig, Spin};
use crate::linalg::ComplexMatrix;
use crate::specfun::{hankel, HankelKind};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn jv(m: i32, x: f64) -> Complex64 {
    c(crate::specfun::bessel_j(m, x).unwrap())
}

fn h1(m: i32, x: f64) -> Complex64 {
    hankel(HankelKind::First, m, x).unwrap()
}

fn h2(m: i32, x: f64) -> Complex64 {
    hankel(HankelKind::Second, m, x).unwrap()
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn small_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![c(0.0); n];
    for row in (0..n).rev() {
        let s: Complex64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Diagonal raw S element of a concentric annulus, order by order:
/// unknowns `(S, a, b, c)` with region II = `a J + b H1`, electron-like exterior.
fn concentric_oracle(cfg: &JunctionConfig, spin: Spin, eps: f64, m: i32) -> Complex64 {
    let [e1, e2, e3] = crate::junction::media(cfg, spin, eps).unwrap();
    assert!(e1.tau > 0);
    let (k1, k2, k3) = (e1.k, e2.k, e3.k);
    let (t1, t2, t3) = (e1.tau_f64(), e2.tau_f64(), e3.tau_f64());
    let rho = cfg.rho;
    let z = c(0.0);
    let a = vec![
        vec![-h1(m, k1), jv(m, k2), h1(m, k2), z],
        vec![-t1 * h1(m + 1, k1), t2 * jv(m + 1, k2), t2 * h1(m + 1, k2), z],
        vec![z, jv(m, k2 * rho), h1(m, k2 * rho), -jv(m, k3 * rho)],
        vec![z, t2 * jv(m + 1, k2 * rho), t2 * h1(m + 1, k2 * rho), -t3 * jv(m + 1, k3 * rho)],
    ];
    let b = vec![h2(m, k1), t1 * h2(m + 1, k1), z, z];
    small_solve(a, b)[0]
}

/// Far-field amplitude from the physical S-matrix.
fn amplitude(s: &SMatrix, theta: f64, theta_prime: f64) -> Complex64 {
    let m_max = s.order as i32;
    let mut f = c(0.0);
    for m in -m_max..=m_max {
        for l in -m_max..=m_max {
            let mut v = s.get(m, l).unwrap();
            if m == l {
                v -= 1.0;
            }
            f += v * Complex64::from_polar(1.0, m as f64 * theta - l as f64 * theta_prime);
        }
    }
    f / (4.0 * PI * s.k).sqrt()
}

fn gated_ring(xi: f64) -> JunctionConfig {
    JunctionConfig::new(0.6, xi, -5.0, 45.0, 5.0).unwrap()
}

#[test]
fn free_space_is_identity() {
    let cfg = JunctionConfig::free_space(0.5, 0.2);
    let conv = solve_converged(&cfg, Spin::Up, 1.0).unwrap();
    assert_eq!(truncation_order(&cfg, Spin::Up, 1.0).unwrap(), 13);
    let id = ComplexMatrix::identity(conv.smatrix.dim());
    assert!(conv.smatrix.mat.max_abs_diff(&id).unwrap() < 1e-12);
}

#[test]
fn free_space_plane_wave_has_unit_density() {
    let cfg = JunctionConfig::free_space(0.5, 0.2);
    let conv = solve_converged(&cfg, Spin::Down, 3.0).unwrap();
    let eval = FieldEvaluator::new(&conv.solution, Incident::PlaneWave { theta_prime: 0.7 }).unwrap();
    for &(x, y) in &[(0.1, 0.2), (0.9, -0.3), (0.3, 0.1), (1.5, 0.4)] {
        let psi = eval.field(x, y).unwrap();
        let plane = eval.incident_field(x, y).unwrap();
        let density = psi[0].norm_sqr() + psi[1].norm_sqr();
        assert!((density - 1.0).abs() < 1e-9, "density {density} at ({x}, {y})");
        assert!((psi[0] - plane[0]).norm() < 1e-9);
    }
}

#[test]
fn concentric_annulus_matches_per_order_oracle() {
    for &(spin, eps) in &[(Spin::Up, 3.0), (Spin::Down, 7.5), (Spin::Up, 12.2)] {
        let cfg = JunctionConfig::new(0.55, 0.0, -2.0, 15.0, 1.5).unwrap();
        let (s, sol) = assemble_and_solve(&cfg, spin, eps, 40).unwrap();
        for m in [-7, -1, 0, 2, 9] {
            let oracle = concentric_oracle(&cfg, spin, eps, m);
            let i = s.index(m).unwrap();
            let raw = sol.t_raw[(i, i)] + 1.0;
            assert!((raw - oracle).norm() < 1e-10, "m = {m}: {raw} vs {oracle}");
            assert_eq!(s.get(m, m).unwrap(), raw);
            assert!(s.get(m, m + 1).unwrap().norm() < 1e-13);
        }
    }
}

#[test]
fn uniform_disk_closed_form() {
    // regions II and III share one medium: a single disk of radius 1
    let cfg = JunctionConfig::new(0.5, 0.3, 4.0, 4.0, 1.0).unwrap();
    let (spin, eps) = (Spin::Down, 2.2);
    let s = solve_converged(&cfg, spin, eps).unwrap().smatrix;
    let [e1, e2, _] = crate::junction::media(&cfg, spin, eps).unwrap();
    let (t1, t2) = (e1.tau_f64(), e2.tau_f64());
    for m in -6..=6 {
        let (j, jn) = (jv(m, e2.k), jv(m + 1, e2.k));
        let num = t1 * h2(m + 1, e1.k) * j - t2 * h2(m, e1.k) * jn;
        let den = t1 * h1(m + 1, e1.k) * j - t2 * h1(m, e1.k) * jn;
        let expected = -num / den;
        assert!((s.get(m, m).unwrap() - expected).norm() < 1e-10, "m = {m}");
        assert!((expected.norm() - 1.0).abs() < 1e-12);
    }
    assert!(s.unitarity_defect() < 1e-10);
}

/// A bare disk at `(xi, 0)` scatters like the centered disk up to the
/// translation phase `exp(i k xi (cos theta' - cos theta))`.
#[test]
fn displaced_disk_amplitude_picks_up_translation_phase() {
    let (rho, xi, eps) = (0.45, 0.35, 5.0);
    let centered = JunctionConfig::new(rho, 0.0, 0.0, 9.0, 0.0).unwrap();
    let shifted = centered.with_xi(xi);
    let s0 = solve_converged(&centered, Spin::Up, eps).unwrap().smatrix;
    let s1 = solve_converged(&shifted, Spin::Up, eps).unwrap().smatrix;
    for &(theta, theta_prime) in &[(0.0, 0.0), (1.1, 0.4), (2.9, -1.3), (-2.0, 2.5)] {
        let f0 = amplitude(&s0, theta, theta_prime);
        let f1 = amplitude(&s1, theta, theta_prime);
        let phase = Complex64::from_polar(1.0, eps * xi * (f64::cos(theta_prime) - f64::cos(theta)));
        assert!((f1 - f0 * phase).norm() < 1e-9 * f0.norm().max(1.0), "theta {theta}: {f1} vs {}", f0 * phase);
    }
}

#[test]
fn fields_are_continuous_across_interfaces() {
    for &(spin, xi, eps) in &[(Spin::Up, 0.25, 6.0), (Spin::Down, -0.2, 8.3), (Spin::Up, 0.0, 2.0)] {
        let conv = solve_converged(&gated_ring(xi), spin, eps).unwrap();
        let r = conv.solution.boundary_residual(64).unwrap();
        assert!(r < 1e-8, "{spin} xi={xi} eps={eps}: residual {r}");
    }
}

#[test]
fn convergence_metadata() {
    let conv = solve_converged(&gated_ring(0.25), Spin::Up, 6.0).unwrap();
    assert!(conv.change < solver::CONVERGENCE_TOL);
    assert!(conv.graf_residual < 1e-10, "graf residual {}", conv.graf_residual);
    assert_eq!(conv.smatrix.order, conv.base_order + solver::ESCALATION_STEP * (conv.escalations + 1));
}

#[test]
fn spin_exchange_with_reversed_gate() {
    let cfg = JunctionConfig::new(0.5, 0.2, -3.0, 20.0, 2.0).unwrap();
    let up = solve_converged(&cfg, Spin::Up, 4.0).unwrap().smatrix;
    let down = solve_converged(&cfg.with_mu(-2.0), Spin::Down, 4.0).unwrap().smatrix;
    assert_eq!(up.mat, down.mat);
}

#[test]
fn half_turn_maps_displacement_sign() {
    let (spin, eps) = (Spin::Down, 6.5);
    let a = solve_converged(&gated_ring(0.3), spin, eps).unwrap().smatrix;
    let b = solve_from_order(&gated_ring(-0.3), spin, eps, a.order - solver::ESCALATION_STEP).unwrap().smatrix;
    assert_eq!(a.order, b.order);
    let m_max = a.order as i32;
    let mut worst: f64 = 0.0;
    for m in -m_max..=m_max {
        for l in -m_max..=m_max {
            let sign = if (m - l) % 2 == 0 { 1.0 } else { -1.0 };
            worst = worst.max((b.get(m, l).unwrap() - sign * a.get(m, l).unwrap()).norm());
        }
    }
    assert!(worst < 1e-10, "worst {worst}");
}

fn check_symmetries(s: &SMatrix) -> (f64, f64) {
    let m_max = s.order as i32;
    let (mut mirror, mut recip): (f64, f64) = (0.0, 0.0);
    for m in -m_max..=m_max {
        for l in -m_max..=m_max {
            let v = s.get(m, l).unwrap();
            mirror = mirror.max((s.get(-m - 1, -l - 1).unwrap_or(v) - v).norm());
            let sign = if (l - m) % 2 == 0 { 1.0 } else { -1.0 };
            recip = recip.max((v - sign * s.get(l, m).unwrap()).norm());
        }
    }
    (mirror, recip)
}

#[test]
fn mirror_and_reciprocity() {
    let s = solve_converged(&gated_ring(0.27), Spin::Up, 5.3).unwrap().smatrix;
    let (mirror, recip) = check_symmetries(&s);
    assert!(mirror < 1e-10, "mirror {mirror}");
    assert!(recip < 1e-10, "reciprocity {recip}");
}

#[test]
fn escalation_reports_nonconvergence_or_succeeds() {
    // a deliberately tiny starting order must be escalated or rejected, never silently accepted
    match solve_from_order(&gated_ring(0.2), Spin::Up, 6.0, 2) {
        Ok(conv) => assert!(conv.escalations > 0),
        Err(e) => assert!(matches!(e, crate::Error::NonConvergence { .. })),
    }
}

#[test]
fn rejects_invalid_geometry() {
    let cfg = JunctionConfig { rho: 0.3, xi: 0.5, nu1: 0.0, nu2: 1.0, mu: 0.0 };
    assert!(assemble_and_solve(&cfg, Spin::Up, 1.0, 10).is_err());
    let cfg = JunctionConfig { rho: 0.3, xi: 0.35, nu1: 0.0, nu2: 1.0, mu: 0.0 };
    assert!(matches!(assemble_and_solve(&cfg, Spin::Up, 1.0, 10), Err(crate::Error::Geometry(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unitary_and_symmetric(
        rho in 0.3f64..0.7,
        frac in -0.9f64..0.9,
        nu1 in -6.0f64..6.0,
        nu2 in -20.0f64..20.0,
        mu in -4.0f64..4.0,
        eps in 0.5f64..8.0,
        up in any::<bool>(),
    ) {
        let xi = frac * rho.min(1.0 - rho);
        let cfg = JunctionConfig::new(rho, xi, nu1, nu2, mu).unwrap();
        let spin = if up { Spin::Up } else { Spin::Down };
        let media = crate::junction::media(&cfg, spin, eps);
        prop_assume!(media.map(|m| m.iter().all(|md| md.k > 0.5)).unwrap_or(false));
        let s = solve_converged(&cfg, spin, eps).unwrap().smatrix;
        prop_assert!(s.unitarity_defect() < 1e-8, "defect {}", s.unitarity_defect());
        let (mirror, recip) = check_symmetries(&s);
        prop_assert!(mirror < 1e-9 && recip < 1e-9, "mirror {mirror} recip {recip}");
    }
}
