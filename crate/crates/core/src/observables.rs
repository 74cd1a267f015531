//! Observables built on the S-matrix and the interior fields: Wigner-Smith
//! delay, cross sections, spin polarization, near-field maps, resonance
//! widths and a boundary phase-space projection.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, GridSpec};
use crate::junction::{classify_xy, media, JunctionConfig, Region, Spin};
use crate::linalg::ComplexMatrix;
use crate::scattering::{assemble_and_solve, solve_converged, solve_from_order, truncation_order, FieldEvaluator, Incident, SMatrix};

/// Nodes of every angular trapezoid rule.
pub const QUADRATURE_POINTS: usize = 2048;
/// Default finite-difference step for the energy derivative of `S`.
pub const DEFAULT_DELTA: f64 = 1e-4;
/// Delays above this magnitude trigger step halving.
pub const RESONANT_DELAY: f64 = 1e3;
/// Smallest step the halving goes down to.
pub const MIN_DELTA: f64 = 1e-8;

/// `(2k)^{-1} sum |S_ml - delta_ml|^2`
pub fn total_cross_section(s: &SMatrix, k: f64) -> Result<f64> {
    check_k(k)?;
    let n = s.dim();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut v = s.mat[(i, j)];
            if i == j {
                v -= 1.0;
            }
            sum += v.norm_sqr();
        }
    }
    Ok(sum / (2.0 * k))
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
    }
    Ok(())
}

/// Far-field amplitude `f(theta, theta')` for one incident direction, stored
/// as its angular harmonics so that many scattering angles are cheap.
#[derive(Debug, Clone)]
pub struct Amplitude {
    order: usize,
    harmonics: Vec<Complex64>,
}

impl Amplitude {
    pub fn new(s: &SMatrix, k: f64, theta_prime: f64) -> Result<Self> {
        check_k(k)?;
        let n = s.dim();
        let m_max = s.order as i32;
        let phases: Vec<Complex64> = (-m_max..=m_max).map(|l| Complex64::from_polar(1.0, -(l as f64) * theta_prime)).collect();
        let prefactor = 1.0 / (4.0 * PI * k).sqrt();
        let harmonics = (0..n)
            .map(|i| {
                let row = s.mat.row(i);
                let mut acc: Complex64 = row.iter().zip(&phases).map(|(a, p)| a * p).sum();
                acc -= phases[i];
                acc * prefactor
            })
            .collect();
        Ok(Self { order: s.order, harmonics })
    }

    pub fn at(&self, theta: f64) -> Complex64 {
        let m_max = self.order as i32;
        let step = Complex64::from_polar(1.0, theta);
        let mut phase = Complex64::from_polar(1.0, -(m_max as f64) * theta);
        let mut f = Complex64::new(0.0, 0.0);
        for h in &self.harmonics {
            f += h * phase;
            phase *= step;
        }
        f
    }

    /// `int w(theta) |f|^2 dtheta` by the trapezoid rule on `QUADRATURE_POINTS` nodes.
    pub fn integrate(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let h = TAU / QUADRATURE_POINTS as f64;
        (0..QUADRATURE_POINTS)
            .map(|i| {
                let theta = i as f64 * h;
                weight(theta) * self.at(theta).norm_sqr()
            })
            .sum::<f64>()
            * h
    }
}

/// `(4 pi k)^{-1/2} sum (S_ml - delta_ml) e^{i(m theta - l theta')}`
pub fn scattering_amplitude(s: &SMatrix, k: f64, theta: f64, theta_prime: f64) -> Result<Complex64> {
    Ok(Amplitude::new(s, k, theta_prime)?.at(theta))
}

pub fn differential_cross_section(s: &SMatrix, k: f64, theta: f64, theta_prime: f64) -> Result<f64> {
    Ok(scattering_amplitude(s, k, theta, theta_prime)?.norm_sqr())
}

/// `int |f(theta, theta')|^2 dtheta` for one incident direction.
pub fn directional_cross_section(s: &SMatrix, k: f64, theta_prime: f64) -> Result<f64> {
    Ok(Amplitude::new(s, k, theta_prime)?.integrate(|_| 1.0))
}

/// `int (1 - cos(theta - theta')) |f|^2 dtheta`
pub fn transport_cross_section(s: &SMatrix, k: f64, theta_prime: f64) -> Result<f64> {
    Ok(Amplitude::new(s, k, theta_prime)?.integrate(|t| 1.0 - (t - theta_prime).cos()))
}

/// `(2 pi)^{-1} int dtheta' int dtheta |f|^2`, both by the trapezoid rule.
/// Equals `total_cross_section` for a consistent amplitude normalization.
pub fn averaged_cross_section_by_quadrature(s: &SMatrix, k: f64) -> Result<f64> {
    let h = TAU / QUADRATURE_POINTS as f64;
    let per_angle = (0..QUADRATURE_POINTS)
        .into_par_iter()
        .map(|i| directional_cross_section(s, k, i as f64 * h))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_angle.iter().sum::<f64>() * h / TAU)
}

/// `int_0^pi [sigma(theta' + phi) - sigma(theta' - phi)] dphi`, zero for a
/// mirror-symmetric angular profile.
pub fn asymmetry_integral(s: &SMatrix, k: f64, theta_prime: f64) -> Result<f64> {
    let amp = Amplitude::new(s, k, theta_prime)?;
    let n = QUADRATURE_POINTS / 2;
    let h = PI / n as f64;
    let mut sum = 0.0;
    for i in 0..=n {
        let phi = i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += w * (amp.at(theta_prime + phi).norm_sqr() - amp.at(theta_prime - phi).norm_sqr());
    }
    Ok(sum * h)
}

/// `(sigma_up - sigma_down) / (sigma_up + sigma_down)`
pub fn spin_polarization(sigma_up: f64, sigma_down: f64) -> Result<f64> {
    if sigma_up < 0.0 || sigma_down < 0.0 || !sigma_up.is_finite() || !sigma_down.is_finite() {
        return Err(Error::Domain(format!("cross sections must be finite and nonnegative, got {sigma_up}, {sigma_down}")));
    }
    if sigma_up < 1e-300 && sigma_down < 1e-300 {
        return Err(Error::Degenerate("no scattering in either spin channel".into()));
    }
    Ok((sigma_up - sigma_down) / (sigma_up + sigma_down))
}

/// Transport cross sections of both spins at one energy and the resulting polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarizationPoint {
    pub eps: f64,
    pub sigma_tr_up: f64,
    pub sigma_tr_down: f64,
    pub polarization: Option<f64>,
}

pub fn polarization_at(cfg: &JunctionConfig, eps: f64, theta_prime: f64) -> Result<PolarizationPoint> {
    polarization_over(cfg, eps, &[theta_prime])
}

/// Incident directions of the direction-averaged polarization.
pub const AVERAGING_DIRECTIONS: usize = 16;

/// `AVERAGING_DIRECTIONS` evenly spaced incident angles on `[0, 2 pi)`.
pub fn averaging_directions() -> Vec<f64> {
    (0..AVERAGING_DIRECTIONS).map(|i| TAU * i as f64 / AVERAGING_DIRECTIONS as f64).collect()
}

/// Polarization from transport cross sections averaged over `directions`.
pub fn polarization_over(cfg: &JunctionConfig, eps: f64, directions: &[f64]) -> Result<PolarizationPoint> {
    if directions.is_empty() {
        return Err(Error::InvalidConfig("at least one incident direction is required".into()));
    }
    let mut sigma = [0.0; 2];
    for (i, spin) in Spin::BOTH.into_iter().enumerate() {
        let [ext, ann, disk] = media(cfg, spin, eps)?;
        if ext.local_energy == ann.local_energy && ann.local_energy == disk.local_energy {
            // no interfaces: S is exactly the identity
            continue;
        }
        let s = solve_converged(cfg, spin, eps)?.smatrix;
        let mut total = 0.0;
        for &theta_prime in directions {
            total += transport_cross_section(&s, s.k, theta_prime)?;
        }
        sigma[i] = total / directions.len() as f64;
    }
    let [up, down] = sigma;
    let polarization = match spin_polarization(up, down) {
        Ok(p) => Some(p),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(PolarizationPoint { eps, sigma_tr_up: up, sigma_tr_down: down, polarization })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedPolarization {
    pub mean: f64,
    pub points: Vec<PolarizationPoint>,
    /// Energies skipped because neither spin scatters.
    pub degenerate: Vec<f64>,
}

/// Arithmetic mean of the spin polarization over `eps_grid`.
pub fn energy_averaged_polarization(cfg: &JunctionConfig, eps_grid: &[f64], theta_prime: f64) -> Result<AveragedPolarization> {
    energy_averaged_polarization_over(cfg, eps_grid, &[theta_prime])
}

/// `energy_averaged_polarization` with transport cross sections averaged over `directions`.
pub fn energy_averaged_polarization_over(cfg: &JunctionConfig, eps_grid: &[f64], directions: &[f64]) -> Result<AveragedPolarization> {
    if eps_grid.len() < 2 {
        return Err(Error::InvalidConfig("energy averaging needs at least two grid points".into()));
    }
    let points = eps_grid
        .par_iter()
        .map(|&eps| polarization_over(cfg, eps, directions))
        .collect::<Result<Vec<_>>>()?;
    summarize_polarization(points)
}

/// Mean over the non-degenerate points.
pub fn summarize_polarization(points: Vec<PolarizationPoint>) -> Result<AveragedPolarization> {
    let valid: Vec<f64> = points.iter().filter_map(|p| p.polarization).collect();
    let degenerate = points.iter().filter(|p| p.polarization.is_none()).map(|p| p.eps).collect();
    if valid.is_empty() {
        return Err(Error::Degenerate("polarization undefined at every energy (no scattering)".into()));
    }
    Ok(AveragedPolarization { mean: valid.iter().sum::<f64>() / valid.len() as f64, points, degenerate })
}

/// `-i Tr(S0^dagger (S+ - S-) / (2 delta))` at one order, with the imaginary residue.
fn delay_at_order(cfg: &JunctionConfig, spin: Spin, eps: f64, delta: f64, s0: &SMatrix) -> Result<(f64, f64)> {
    let (sp, _) = assemble_and_solve(cfg, spin, eps + delta, s0.order)?;
    let (sm, _) = assemble_and_solve(cfg, spin, eps - delta, s0.order)?;
    let ds = sp.mat.sub(&sm.mat)?.scale(Complex64::new(0.5 / delta, 0.0));
    let tr = s0.mat.adjoint().matmul(&ds)?.trace()?;
    let tau = -Complex64::i() * tr;
    Ok((tau.re, tau.im))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delay {
    pub eps: f64,
    pub spin: Spin,
    pub tau: f64,
    pub imag_residue: f64,
    /// Step actually used after any halving.
    pub delta: f64,
    pub halvings: usize,
    pub order: usize,
    /// Delay recomputed with half the final step (when requested).
    pub tau_half_step: Option<f64>,
}

impl Delay {
    /// `(4 tau(delta/2) - tau(delta)) / 3`
    pub fn richardson(&self) -> Option<f64> {
        self.tau_half_step.map(|h| (4.0 * h - self.tau) / 3.0)
    }
}

fn residue_ok(tau: f64, imag: f64) -> bool {
    imag.abs() < 1e-6 * tau.abs() + 1e-9
}

/// Wigner-Smith delay with automatic step halving near resonances.
///
/// All three energies share the truncation order that passed the
/// convergence check at `eps`, raised if `eps +- delta` would select more.
pub fn wigner_smith_delay_with(cfg: &JunctionConfig, spin: Spin, eps: f64, delta: f64, richardson: bool) -> Result<Delay> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delay step must be positive, got {delta}")));
    }
    let base = truncation_order(cfg, spin, eps)?
        .max(truncation_order(cfg, spin, eps - delta)?)
        .max(truncation_order(cfg, spin, eps + delta)?);
    let conv = solve_from_order(cfg, spin, eps, base)?;
    let s0 = conv.smatrix;
    let mut delta = delta;
    let mut halvings = 0;
    let (mut tau, mut imag) = delay_at_order(cfg, spin, eps, delta, &s0)?;
    while (tau.abs() > RESONANT_DELAY || !residue_ok(tau, imag)) && delta / 2.0 >= MIN_DELTA {
        delta /= 2.0;
        halvings += 1;
        let (t, i) = delay_at_order(cfg, spin, eps, delta, &s0)?;
        tau = t;
        imag = i;
        if t.abs() <= RESONANT_DELAY && residue_ok(t, i) {
            break;
        }
    }
    if !residue_ok(tau, imag) {
        return Err(Error::NonFinite(format!(
            "delay trace at eps = {eps} ({spin}) keeps an imaginary residue {imag:e} against tau = {tau:e}"
        )));
    }
    let tau_half_step = if richardson { Some(delay_at_order(cfg, spin, eps, delta / 2.0, &s0)?.0) } else { None };
    Ok(Delay { eps, spin, tau, imag_residue: imag, delta, halvings, order: s0.order, tau_half_step })
}

/// `wigner_smith_delay_with` including the half-step comparison.
pub fn wigner_smith_delay(cfg: &JunctionConfig, spin: Spin, eps: f64, delta: f64) -> Result<Delay> {
    wigner_smith_delay_with(cfg, spin, eps, delta, true)
}

/// Delay at every energy of `grid`, in grid order.
pub fn delay_spectrum(cfg: &JunctionConfig, spin: Spin, grid: &[f64], delta: f64) -> Vec<Result<Delay>> {
    grid.par_iter().map(|&eps| wigner_smith_delay_with(cfg, spin, eps, delta, false)).collect()
}

/// `n` evenly spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// One tabulated value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSample {
    pub param: f64,
    pub spin: Spin,
    pub observable: String,
    pub value: f64,
}

/// Observables tabulated against one parameter (`eps` or `xi`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub parameter: String,
    pub samples: Vec<SpectrumSample>,
}

impl Spectrum {
    pub fn new(parameter: &str) -> Self {
        Self { parameter: parameter.to_string(), samples: Vec::new() }
    }

    pub fn push(&mut self, param: f64, spin: Spin, observable: &str, value: f64) {
        self.samples.push(SpectrumSample { param, spin, observable: observable.to_string(), value });
    }

    /// `(param, value)` pairs of one series, in insertion order.
    pub fn series(&self, spin: Spin, observable: &str) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter(|s| s.spin == spin && s.observable == observable)
            .map(|s| (s.param, s.value))
            .collect()
    }

    /// Every series strictly increasing in the parameter and all values finite.
    pub fn validate(&self) -> Result<()> {
        let mut last: std::collections::BTreeMap<(i8, &str), f64> = Default::default();
        for s in &self.samples {
            if !s.value.is_finite() || !s.param.is_finite() {
                return Err(Error::NonFinite(format!("{} at {} = {}", s.observable, self.parameter, s.param)));
            }
            let key = (s.spin.as_i8(), s.observable.as_str());
            if let Some(prev) = last.insert(key, s.param) {
                if s.param <= prev {
                    return Err(Error::InvalidConfig(format!("{} series not increasing in {}", s.observable, self.parameter)));
                }
            }
        }
        Ok(())
    }

    /// `param,spin,observable,value` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,spin,observable,value\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{}\n", s.param, s.spin.as_i8(), s.observable, s.value));
        }
        out
    }
}

/// Spin-resolved densities on a grid for plane-wave incidence along `theta_prime`.
///
/// Channels: `density_up`, `density_down`, `net_spin` and, when
/// `with_components` is set, real and imaginary parts of both spinor
/// components for each spin.
pub fn near_field_grid(cfg: &JunctionConfig, eps: f64, theta_prime: f64, grid: GridSpec, with_components: bool) -> Result<FieldGrid> {
    grid.validate()?;
    let mut out = FieldGrid::new(grid)?;
    let mut densities = Vec::new();
    let mut components = Vec::new();
    for spin in Spin::BOTH {
        let conv = solve_converged(cfg, spin, eps)?;
        let eval = FieldEvaluator::new(&conv.solution, Incident::PlaneWave { theta_prime })?;
        let rows = (0..grid.ny)
            .into_par_iter()
            .map(|iy| {
                (0..grid.nx)
                    .map(|ix| {
                        let (x, y) = grid.point(ix, iy);
                        eval.field(x, y)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let psi: Vec<[Complex64; 2]> = rows.into_iter().flatten().collect();
        densities.push(psi.iter().map(|p| p[0].norm_sqr() + p[1].norm_sqr()).collect::<Vec<f64>>());
        if with_components {
            components.push((spin, psi));
        }
    }
    let net: Vec<f64> = densities[0].iter().zip(&densities[1]).map(|(u, d)| u - d).collect();
    let down = densities.pop().unwrap();
    let up = densities.pop().unwrap();
    out.push("density_up", up)?;
    out.push("density_down", down)?;
    out.push("net_spin", net)?;
    for (spin, psi) in components {
        let tag = spin.label();
        for c in 0..2 {
            out.push(&format!("psi{}_{tag}_re", c + 1), psi.iter().map(|p| p[c].re).collect())?;
            out.push(&format!("psi{}_{tag}_im", c + 1), psi.iter().map(|p| p[c].im).collect())?;
        }
    }
    Ok(out)
}

/// Density of one spin on a grid.
pub fn density_grid(cfg: &JunctionConfig, spin: Spin, eps: f64, theta_prime: f64, grid: GridSpec) -> Result<Vec<f64>> {
    grid.validate()?;
    let conv = solve_converged(cfg, spin, eps)?;
    let eval = FieldEvaluator::new(&conv.solution, Incident::PlaneWave { theta_prime })?;
    let rows = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            (0..grid.nx)
                .map(|ix| {
                    let (x, y) = grid.point(ix, iy);
                    eval.field(x, y).map(|p| p[0].norm_sqr() + p[1].norm_sqr())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Share of the density sampled inside the outer circle that falls in the inner disk.
pub fn inner_disk_fraction(cfg: &JunctionConfig, grid: &GridSpec, density: &[f64]) -> f64 {
    let (mut inner, mut total) = (0.0, 0.0);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let (x, y) = grid.point(ix, iy);
            let region = classify_xy(cfg, x, y);
            if region == Region::I {
                continue;
            }
            let v = density[grid.index(ix, iy)];
            total += v;
            if region == Region::III {
                inner += v;
            }
        }
    }
    if total > 0.0 {
        inner / total
    } else {
        0.0
    }
}

/// Indices of strict local maxima of `values` (ends excluded).
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1)).filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1]).collect()
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
pub fn golden_maximum(mut f: impl FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

/// Resonance of a delay profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub position: f64,
    pub peak: f64,
    pub baseline: f64,
    /// Full width at half the height above `baseline`.
    pub fwhm: f64,
    /// Width of the Lorentzian fit.
    pub lorentz_width: f64,
    /// Largest deviation of the Lorentzian fit over the fitted window, relative to the peak height.
    pub fit_residual: f64,
}

/// Finds the point where `f` drops to `level` between `inside` (above) and
/// `outside` (below) by bisection.
fn bisect_level(f: &mut impl FnMut(f64) -> Result<f64>, mut inside: f64, mut outside: f64, level: f64, iters: usize) -> Result<f64> {
    for _ in 0..iters {
        let mid = 0.5 * (inside + outside);
        if f(mid)? > level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Characterizes the peak of `f` near `guess`, searching within `+-span`.
///
/// The peak is refined by golden section, the half-height crossings by
/// bisection against `baseline` (searched up to `reach` from the peak), and a Lorentzian
/// `A / ((x - x0)^2 + (w/2)^2) + baseline` is fitted to samples within one
/// half-width of the peak through the linear least-squares form
/// `1 / (f - baseline) = quadratic in x`.
pub fn characterize_resonance(
    mut f: impl FnMut(f64) -> Result<f64>,
    guess: f64,
    span: f64,
    reach: f64,
    baseline: f64,
) -> Result<Resonance> {
    let (position, peak) = golden_maximum(&mut f, guess - span, guess + span, span * 1e-9)?;
    let height = peak - baseline;
    if !(height > 0.0) {
        return Err(Error::Degenerate(format!("no peak above baseline near {guess}")));
    }
    let half = baseline + 0.5 * height;
    let mut outward = |dir: f64| -> Result<f64> {
        let mut step = span * 1e-6;
        loop {
            let x = position + dir * step;
            if f(x)? <= half {
                return bisect_level(&mut f, position, x, half, 60);
            }
            if step > reach {
                return Ok(position + dir * reach);
            }
            step *= 2.0;
        }
    };
    let right = outward(1.0)?;
    let left = outward(-1.0)?;
    let fwhm = right - left;
    // quadratic fit of 1 / (f - baseline) on the core of the peak
    let n = 21;
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let x = position + (i as f64 / (n - 1) as f64 - 0.5) * fwhm;
        let v = f(x)? - baseline;
        if v > 0.0 {
            xs.push(x - position);
            ys.push(1.0 / v);
        }
    }
    let (c0, c1, c2) = quadratic_fit(&xs, &ys)?;
    // 1/(f-b) = c2 (x - x0)^2 + q  =>  A = 1/c2, (w/2)^2 = q / c2
    let x0 = -c1 / (2.0 * c2);
    let q = c0 - c2 * x0 * x0;
    let lorentz_width = 2.0 * (q / c2).abs().sqrt();
    let amp = 1.0 / c2;
    let mut fit_residual: f64 = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        let model = amp / ((x - x0).powi(2) + (lorentz_width / 2.0).powi(2));
        fit_residual = fit_residual.max((model - 1.0 / y).abs() / height);
    }
    Ok(Resonance { position, peak, baseline, fwhm, lorentz_width, fit_residual })
}

/// Least-squares `y = c0 + c1 x + c2 x^2`.
fn quadratic_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() < 3 {
        return Err(Error::Degenerate("quadratic fit needs at least three samples".into()));
    }
    let mut a = ComplexMatrix::zeros(3, 3);
    let mut b = ComplexMatrix::zeros(3, 1);
    for (&x, &y) in xs.iter().zip(ys) {
        let basis = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] += Complex64::new(basis[i] * basis[j], 0.0);
            }
            b[(i, 0)] += Complex64::new(basis[i] * y, 0.0);
        }
    }
    let sol = crate::linalg::solve(&a, &b)?.x;
    Ok((sol[(0, 0)].re, sol[(1, 0)].re, sol[(2, 0)].re))
}

/// Full width at half height above `baseline` of the sampled peak at
/// `index`, with linear interpolation between samples. A side that never
/// drops below half height is cut at the end of the samples.
pub fn sampled_fwhm(xs: &[f64], ys: &[f64], index: usize, baseline: f64) -> f64 {
    let half = baseline + 0.5 * (ys[index] - baseline);
    let cross = |range: &mut dyn Iterator<Item = usize>, toward: isize| -> f64 {
        let mut prev = index;
        for i in range {
            if ys[i] <= half {
                let t = (ys[prev] - half) / (ys[prev] - ys[i]);
                return xs[prev] + t * (xs[i] - xs[prev]);
            }
            prev = i;
        }
        if toward < 0 {
            xs[0]
        } else {
            xs[xs.len() - 1]
        }
    };
    let right = cross(&mut (index + 1..xs.len()), 1);
    let left = cross(&mut (0..index).rev(), -1);
    right - left
}

fn check_husimi_args(k: f64, sigma: f64, n_theta: usize, n_sin: usize) -> Result<()> {
    check_k(k)?;
    if !(sigma > 0.0) || n_theta == 0 || n_sin < 2 {
        return Err(Error::InvalidConfig("husimi needs sigma > 0, n_theta >= 1, n_sin >= 2".into()));
    }
    Ok(())
}

/// Unnormalized coherent-state weights of `sum_n coef_n e^{i (n + shift) theta}`.
fn husimi_raw(coef: &[Complex64], shift: i32, k: f64, sigma: f64, n_theta: usize, n_sin: usize) -> Vec<(f64, f64, f64)> {
    let m_max = (coef.len() / 2) as i32;
    let mut out = Vec::with_capacity(n_theta * n_sin);
    for it in 0..n_theta {
        let theta = TAU * it as f64 / n_theta as f64;
        for is in 0..n_sin {
            let sin_beta = -1.0 + 2.0 * is as f64 / (n_sin - 1) as f64;
            let p = k * sin_beta;
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, b) in coef.iter().enumerate() {
                let m = (i as i32 - m_max + shift) as f64;
                let g = (-0.5 * sigma * sigma * (m - p).powi(2)).exp();
                acc += b * g * Complex64::from_polar(1.0, m * theta);
            }
            out.push((theta, sin_beta, acc.norm_sqr()));
        }
    }
    out
}

fn normalize(mut w: Vec<(f64, f64, f64)>) -> Result<Vec<(f64, f64, f64)>> {
    let total: f64 = w.iter().map(|p| p.2).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("boundary function vanishes".into()));
    }
    for p in &mut w {
        p.2 /= total;
    }
    Ok(w)
}

/// Gaussian coherent-state projection of a boundary function
/// `psi(theta) = sum_m b_m e^{i m theta}` (orders `-M..=M`) onto the
/// Birkhoff plane, with `sin beta = m / k` and angular-momentum window
/// `exp(-sigma^2 (m - k sin beta)^2 / 2)`. Rows run over `theta` on
/// `n_theta` points of `[0, 2 pi)`, columns over `sin beta` on `n_sin`
/// points of `[-1, 1]`. Weights are nonnegative and sum to one.
pub fn husimi_from_harmonics(coef: &[Complex64], k: f64, sigma: f64, n_theta: usize, n_sin: usize) -> Result<Vec<(f64, f64, f64)>> {
    check_husimi_args(k, sigma, n_theta, n_sin)?;
    normalize(husimi_raw(coef, 0, k, sigma, n_theta, n_sin))
}

/// Default window `sqrt(2 / k)`.
pub fn default_husimi_sigma(k: f64) -> f64 {
    (2.0 / k).sqrt()
}

/// Husimi projection of the annulus-side spinor on the outer circle for
/// plane-wave incidence along `theta_prime`. The weights of both spinor
/// components are added, and `sin beta` is measured with the annulus
/// wavenumber.
pub fn boundary_husimi(
    solution: &crate::scattering::MatchSolution,
    theta_prime: f64,
    sigma: Option<f64>,
    n_theta: usize,
    n_sin: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let ann = solution.media[1];
    let sigma = sigma.unwrap_or_else(|| default_husimi_sigma(ann.k));
    check_husimi_args(ann.k, sigma, n_theta, n_sin)?;
    let eval = FieldEvaluator::new(solution, Incident::PlaneWave { theta_prime })?;
    let table = crate::specfun::BesselTable::new(solution.order + 1, ann.k)?;
    let m_max = solution.order as i32;
    let regular = eval.regular_outer_coefficients();
    let w = eval.weights();
    let outgoing: Vec<Complex64> = (0..solution.dim())
        .map(|i| solution.outgoing_outer.row(i).iter().zip(&w).map(|(a, b)| a * b).sum())
        .collect();
    let radial = |i: usize, n: i32| regular[i] * table.j(n) + outgoing[i] * table.h1(n);
    let upper: Vec<Complex64> = (-m_max..=m_max).enumerate().map(|(i, m)| radial(i, m)).collect();
    let lower: Vec<Complex64> = (-m_max..=m_max).enumerate().map(|(i, m)| Complex64::i() * ann.tau_f64() * radial(i, m + 1)).collect();
    let mut weights = husimi_raw(&upper, 0, ann.k, sigma, n_theta, n_sin);
    for (p, q) in weights.iter_mut().zip(husimi_raw(&lower, 1, ann.k, sigma, n_theta, n_sin)) {
        p.2 += q.2;
    }
    normalize(weights)
}
