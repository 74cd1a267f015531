//! Subcommands. Each one validates, computes into memory and then writes
//! its outputs plus a `<stem>.meta.json` sidecar into the output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dirac_chimera::junction::Spin;
use dirac_chimera::observables::{
    self, delay_spectrum, near_field_grid, polarization_over, summarize_polarization, transport_cross_section, wigner_smith_delay_with,
    Amplitude, Spectrum, QUADRATURE_POINTS,
};
use dirac_chimera::raytrace::poincare_section;
use dirac_chimera::scattering::{solve_converged, truncation_order, ConvergedSolve};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Minimum share of grid points that must succeed for exit code 0.
pub const SUCCESS_FRACTION: f64 = 0.99;

pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
    pub format: Format,
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize)]
struct PointFailure {
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
    eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    spin: Option<Spin>,
    error: String,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// Sidecar with the resolved config and command results. The timestamp
    /// is the only field that changes between identical runs.
    fn sidecar(&self, stem: &str, command: &str, results: Value) -> Result<(), CliError> {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let doc = json!({
            "command": command,
            "code_version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "format": self.format,
            "workers": self.workers,
            "quadrature_points": QUADRATURE_POINTS,
            "results": results,
            "timestamp_unix": timestamp,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        self.write(&format!("{stem}.meta.json"), text + "\n")
    }

    fn spectrum_output(&self, stem: &str, spectrum: &Spectrum) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), spectrum.to_csv()),
            Format::Json => self.write(&format!("{stem}.json"), serde_json::to_string(spectrum).map_err(|e| CliError::Io(e.to_string()))? + "\n"),
            Format::Bin => Err(CliError::Validation(format!("{stem}: binary output is only available for smatrix"))),
        }
    }
}

/// Errors the run when fewer than `SUCCESS_FRACTION` of the points succeeded.
fn check_success(command: &str, total: usize, failures: &[PointFailure]) -> Result<(), CliError> {
    let ok = total - failures.len();
    if (ok as f64) < SUCCESS_FRACTION * total as f64 {
        let first = failures.first().map(|f| f.error.as_str()).unwrap_or("");
        return Err(CliError::Numerical(format!("{command}: {ok} of {total} points succeeded (first failure: {first})")));
    }
    Ok(())
}

fn success_summary(total: usize, failures: &[PointFailure]) -> Value {
    json!({
        "points": total,
        "failed": failures.len(),
        "success_fraction": (total - failures.len()) as f64 / total as f64,
        "failures": failures,
    })
}

fn spin_file_tag(spin: Spin) -> &'static str {
    match spin {
        Spin::Up => "up",
        Spin::Down => "down",
    }
}

pub fn smatrix(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let energies = cfg.energies()?;
    if run.format == Format::Csv {
        return Err(CliError::Validation("smatrix output format must be json or bin".into()));
    }
    let jobs: Vec<(usize, f64, Spin)> =
        energies.iter().enumerate().flat_map(|(i, &e)| cfg.spins.iter().map(move |&s| (i, e, s))).collect();
    let solved = jobs
        .par_iter()
        .map(|&(i, eps, spin)| {
            solve_converged(&cfg.junction, spin, eps)
                .map(|c| (i, eps, spin, c))
                .map_err(|e| CliError::from_compute(e, &format!("eps = {eps}, spin {spin}")))
        })
        .collect::<Result<Vec<(usize, f64, Spin, ConvergedSolve)>, _>>()?;
    run.prepare()?;
    let mut entries = Vec::new();
    for (i, eps, spin, conv) in &solved {
        let s = &conv.smatrix;
        let name = match run.format {
            Format::Json => {
                let name = format!("smatrix_{i:04}_{}.json", spin_file_tag(*spin));
                run.write(&name, s.to_json().map_err(|e| CliError::Io(e.to_string()))? + "\n")?;
                name
            }
            _ => {
                let name = format!("smatrix_{i:04}_{}.bin", spin_file_tag(*spin));
                let mut buf = Vec::new();
                s.write_binary(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                run.write(&name, buf)?;
                name
            }
        };
        entries.push(json!({
            "file": name,
            "eps": eps,
            "spin": spin,
            "M": s.order,
            "k": s.k,
            "unitarity_defect": s.unitarity_defect(),
            "escalations": conv.escalations,
            "truncation_change": conv.change,
            "rcond": conv.solution.rcond,
        }));
    }
    run.sidecar("smatrix", "smatrix", json!({ "matrices": entries }))
}

pub fn delay(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let grid = cfg.require_energy_grid()?;
    if run.format == Format::Bin {
        return Err(CliError::Validation("delay output format must be csv or json".into()));
    }
    let mut spectrum = Spectrum::new("eps");
    let mut meta = Vec::new();
    let mut failures = Vec::new();
    for &spin in &cfg.spins {
        let results: Vec<_> = grid
            .par_iter()
            .map(|&eps| wigner_smith_delay_with(&cfg.junction, spin, eps, cfg.delta_eps, cfg.richardson))
            .collect();
        for (&eps, r) in grid.iter().zip(results) {
            match r {
                Ok(d) => {
                    spectrum.push(eps, spin, "delay", d.tau);
                    meta.push(json!({
                        "eps": eps, "spin": spin, "M": d.order, "delta": d.delta, "halvings": d.halvings,
                        "imag_residue": d.imag_residue, "tau_half_step": d.tau_half_step, "richardson": d.richardson(),
                    }));
                }
                Err(e) => failures.push(PointFailure { xi: None, eps, spin: Some(spin), error: e.to_string() }),
            }
        }
    }
    let total = grid.len() * cfg.spins.len();
    run.prepare()?;
    run.spectrum_output("delay", &spectrum)?;
    run.sidecar("delay", "delay", json!({ "summary": success_summary(total, &failures), "points": meta }))?;
    check_success("delay", total, &failures)
}

pub fn xsec(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let energies = cfg.energies()?;
    if run.format == Format::Bin {
        return Err(CliError::Validation("xsec output format must be csv or json".into()));
    }
    let directions = cfg.directions();
    let n_angles = cfg.scattering_angles;
    let mut spectrum = Spectrum::new("eps");
    let mut diff = String::from(if cfg.eighth_root { "eps,spin,theta,sigma_diff,sigma_diff_root8\n" } else { "eps,spin,theta,sigma_diff\n" });
    let mut meta = Vec::new();
    let mut failures = Vec::new();
    for &spin in &cfg.spins {
        let results: Vec<_> = energies
            .par_iter()
            .map(|&eps| -> dirac_chimera::Result<_> {
                let conv = solve_converged(&cfg.junction, spin, eps)?;
                let s = conv.smatrix;
                let total = observables::total_cross_section(&s, s.k)?;
                let mut transport = 0.0;
                for &d in &directions {
                    transport += transport_cross_section(&s, s.k, d)?;
                }
                transport /= directions.len() as f64;
                let amp = Amplitude::new(&s, s.k, cfg.theta_prime)?;
                let directional = amp.integrate(|_| 1.0);
                let angles: Vec<(f64, f64)> = (0..n_angles)
                    .map(|i| {
                        let theta = std::f64::consts::TAU * i as f64 / n_angles as f64 - std::f64::consts::PI;
                        (theta, amp.at(theta).norm_sqr())
                    })
                    .collect();
                Ok((s.order, total, transport, directional, angles))
            })
            .collect();
        for (&eps, r) in energies.iter().zip(results) {
            match r {
                Ok((order, total, transport, directional, angles)) => {
                    spectrum.push(eps, spin, "total", total);
                    spectrum.push(eps, spin, "transport", transport);
                    spectrum.push(eps, spin, "directional", directional);
                    meta.push(json!({ "eps": eps, "spin": spin, "M": order }));
                    for (theta, v) in angles {
                        if cfg.eighth_root {
                            diff.push_str(&format!("{eps},{},{theta},{v},{}\n", spin.as_i8(), v.powf(0.125)));
                        } else {
                            diff.push_str(&format!("{eps},{},{theta},{v}\n", spin.as_i8()));
                        }
                    }
                }
                Err(e) => failures.push(PointFailure { xi: None, eps, spin: Some(spin), error: e.to_string() }),
            }
        }
    }
    let total = energies.len() * cfg.spins.len();
    run.prepare()?;
    run.spectrum_output("xsec", &spectrum)?;
    if n_angles > 0 {
        run.write("xsec_diff.csv", diff)?;
    }
    run.sidecar(
        "xsec",
        "xsec",
        json!({ "summary": success_summary(total, &failures), "directions": directions, "points": meta }),
    )?;
    check_success("xsec", total, &failures)
}

pub fn polarization(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let xis = cfg.require_xi_grid()?;
    let grid = cfg.require_energy_grid()?;
    if grid.len() < 2 {
        return Err(CliError::Validation("energy averaging needs at least two energy points".into()));
    }
    if run.format != Format::Csv {
        return Err(CliError::Validation("polarization output format must be csv".into()));
    }
    let directions = cfg.directions();
    let jobs: Vec<(f64, f64)> = xis.iter().flat_map(|&xi| grid.iter().map(move |&e| (xi, e))).collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(xi, eps)| polarization_over(&cfg.junction.with_xi(xi), eps, &directions))
        .collect();
    let mut csv = String::from("xi,polarization,points,degenerate\n");
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (xi_index, &xi) in xis.iter().enumerate() {
        let mut points = Vec::new();
        for (j, r) in results[xi_index * grid.len()..(xi_index + 1) * grid.len()].iter().enumerate() {
            match r {
                Ok(p) => points.push(*p),
                Err(e) => failures.push(PointFailure { xi: Some(xi), eps: grid[j], spin: None, error: e.to_string() }),
            }
        }
        match summarize_polarization(points) {
            Ok(avg) => {
                let used = avg.points.len() - avg.degenerate.len();
                csv.push_str(&format!("{xi},{},{used},{}\n", avg.mean, avg.degenerate.len()));
                rows.push(json!({ "xi": xi, "mean": avg.mean, "degenerate_eps": avg.degenerate }));
            }
            Err(e) => rows.push(json!({ "xi": xi, "error": e.to_string() })),
        }
    }
    let total = jobs.len();
    run.prepare()?;
    run.write("polarization.csv", csv)?;
    run.sidecar(
        "polarization",
        "polarization",
        json!({ "summary": success_summary(total, &failures), "directions": directions, "rows": rows }),
    )?;
    check_success("polarization", total, &failures)?;
    if rows.iter().any(|r| r.get("error").is_some()) {
        return Err(CliError::Numerical("polarization undefined for at least one xi (no scattering)".into()));
    }
    Ok(())
}

pub fn nearfield(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let eps = cfg.require_eps()?;
    let spec = cfg.grid.ok_or_else(|| CliError::Validation("grid is required for nearfield".into()))?;
    let mut grid = near_field_grid(&cfg.junction, eps, cfg.theta_prime, spec, cfg.components)
        .map_err(|e| CliError::from_compute(e, &format!("nearfield at eps = {eps}")))?;
    if cfg.log_density {
        for name in ["density_up", "density_down"] {
            let data: Vec<f64> = grid.channel(name).expect("always present").iter().map(|v| v.max(1e-300).log10()).collect();
            grid.push(&format!("log10_{name}"), data).map_err(|e| CliError::Numerical(e.to_string()))?;
        }
    }
    let mut orders = Map::new();
    for spin in Spin::BOTH {
        if let Ok(m) = truncation_order(&cfg.junction, spin, eps) {
            orders.insert(spin.label().to_string(), json!(m));
        }
    }
    run.prepare()?;
    let mut extra = Map::new();
    extra.insert("eps".into(), json!(eps));
    extra.insert("theta_prime".into(), json!(cfg.theta_prime));
    extra.insert("junction".into(), json!(cfg.junction));
    grid.write_raw(&run.out, "nearfield", &extra).map_err(|e| CliError::from_compute(e, "nearfield"))?;
    if run.format == Format::Csv {
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
        run.write("nearfield.csv", buf)?;
    }
    let channels: Vec<&str> = grid.channels.iter().map(|c| c.name.as_str()).collect();
    run.sidecar("nearfield", "nearfield", json!({ "channels": channels, "base_orders": orders }))
}

pub fn poincare(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let block = cfg.poincare.ok_or_else(|| CliError::Validation("poincare block is required".into()))?;
    if block.n_orbits == 0 || block.n_events == 0 {
        return Err(CliError::Validation("poincare needs n_orbits > 0 and n_events > 0".into()));
    }
    if run.format != Format::Csv {
        return Err(CliError::Validation("poincare output format must be csv".into()));
    }
    let section = poincare_section(&cfg.junction, block.spin, block.eps, block.n_orbits, block.n_events, cfg.seed)
        .map_err(|e| CliError::from_compute(e, &format!("poincare at eps = {}, spin {}", block.eps, block.spin)))?;
    run.prepare()?;
    run.write("poincare.csv", section.to_csv())?;
    let orbits: Vec<Value> = section
        .orbits
        .iter()
        .map(|o| json!({ "events": o.points.len(), "sin_beta_variance": o.sin_beta_variance(true), "coverage_100": o.coverage(100) }))
        .collect();
    run.sidecar(
        "poincare",
        "poincare",
        json!({
            "wall": section.wall,
            "critical_lines": section.critical_lines,
            "seed": section.seed,
            "dropped_orbits": section.dropped(),
            "max_snell_residual": section.max_snell_residual(),
            "orbits": orbits,
        }),
    )
}

pub fn sweep(run: &Run) -> Result<(), CliError> {
    let cfg = &run.config;
    let xis = cfg.require_xi_grid()?;
    let grid = cfg.require_energy_grid()?;
    if run.format != Format::Csv {
        return Err(CliError::Validation("sweep output format must be csv".into()));
    }
    let mut csv = String::from("xi,eps,spin,delay\n");
    let mut failures = Vec::new();
    for &spin in &cfg.spins {
        for &xi in &xis {
            let results = delay_spectrum(&cfg.junction.with_xi(xi), spin, &grid, cfg.delta_eps);
            for (&eps, r) in grid.iter().zip(results) {
                match r {
                    Ok(d) => csv.push_str(&format!("{xi},{eps},{},{}\n", spin.as_i8(), d.tau)),
                    Err(e) => failures.push(PointFailure { xi: Some(xi), eps, spin: Some(spin), error: e.to_string() }),
                }
            }
        }
    }
    let total = xis.len() * grid.len() * cfg.spins.len();
    run.prepare()?;
    run.write("sweep.csv", csv)?;
    run.sidecar("sweep", "sweep", json!({ "summary": success_summary(total, &failures) }))?;
    check_success("sweep", total, &failures)
}

/// Output directory: flag, then config, then the working directory.
pub fn output_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
