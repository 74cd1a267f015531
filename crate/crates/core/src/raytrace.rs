//! Classical ray dynamics of the junction: straight segments between the two
//! circles, spin-resolved Snell refraction (negative indices included) and
//! specular reflection.
//!
//! Closed dynamics treat the effective cavity boundary as a mirror (the
//! "wall"): the outer circle, or the inner circle when the annulus is index
//! matched to the exterior and only the disk remains visible. Interior
//! interfaces refract whenever Snell's law allows and reflect totally
//! otherwise. Open dynamics (used for caustics) have no wall.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FieldGrid, GridSpec};
use crate::junction::{refractive_index, JunctionConfig, Region, Spin};

/// Largest tolerated `|n_in sin_in - n_out sin_out|` at a refraction.
pub const SNELL_TOLERANCE: f64 = 1e-12;
/// Relative discriminant below which a ray counts as tangent to a circle.
pub const TANGENCY_TOLERANCE: f64 = 1e-14;
const TANGENT_NUDGE: f64 = 1e-12;
/// Interface events allowed between two wall events before an orbit is dropped.
const MAX_EVENTS_BETWEEN_WALLS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Circle {
    Outer,
    Inner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Refraction,
    Reflection,
    TotalInternalReflection,
}

/// Ray just after an interface event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState {
    pub circle: Circle,
    /// Polar angle of the event point about the circle's own center.
    pub hit_angle: f64,
    pub point: [f64; 2],
    /// Unit propagation direction after the event.
    pub direction: [f64; 2],
    /// Region the ray now travels in.
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirkhoffPoint {
    pub theta: f64,
    pub sin_beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub kind: EventKind,
    pub interface: Circle,
    pub sin_in: f64,
    pub sin_out: f64,
    /// `|n_in sin_in - n_out sin_out|` for refractions, zero otherwise.
    pub snell_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub circle: Circle,
    pub point: [f64; 2],
    pub hit_angle: f64,
    /// Tangential component of the direction, positive along increasing polar angle.
    pub sin_incidence: f64,
    pub distance: f64,
}

/// `sin_out` from Snell's law, or `None` for total internal reflection.
pub fn refract(n_in: f64, n_out: f64, sin_in: f64) -> Result<Option<f64>> {
    if n_in == 0.0 || n_out == 0.0 || !n_in.is_finite() || !n_out.is_finite() {
        return Err(Error::Domain(format!("refraction needs nonzero finite indices, got {n_in} -> {n_out}")));
    }
    if !(sin_in.abs() <= 1.0) {
        return Err(Error::Domain(format!("|sin_in| must be <= 1, got {sin_in}")));
    }
    if (n_in * sin_in).abs() > n_out.abs() {
        return Ok(None);
    }
    Ok(Some(((n_in / n_out) * sin_in).clamp(-1.0, 1.0)))
}

fn center_radius(cfg: &JunctionConfig, circle: Circle) -> ([f64; 2], f64) {
    match circle {
        Circle::Outer => ([0.0, 0.0], 1.0),
        Circle::Inner => ([cfg.xi, 0.0], cfg.rho),
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Unit radial and tangential vectors at polar angle `phi`.
fn frame(phi: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = phi.sin_cos();
    ([c, s], [-s, c])
}

/// Forward distance to `circle`, skipping the root at the departure point when
/// the ray starts on that circle.
fn circle_hit(cfg: &JunctionConfig, circle: Circle, p: [f64; 2], d: [f64; 2], on_circle: bool) -> Result<Option<f64>> {
    let (c, radius) = center_radius(cfg, circle);
    let q = [p[0] - c[0], p[1] - c[1]];
    let b = dot(d, q);
    if on_circle {
        // roots 0 and -2b
        if -b > 0.0 {
            if (-b) < TANGENCY_TOLERANCE * radius {
                return Err(Error::Geometry(format!("ray tangent to the {circle:?} circle at departure")));
            }
            return Ok(Some(-2.0 * b));
        }
        return Ok(None);
    }
    let cc = dot(q, q) - radius * radius;
    let disc = b * b - cc;
    if disc < 0.0 {
        return Ok(None);
    }
    if disc < TANGENCY_TOLERANCE * radius * radius {
        return Err(Error::Geometry(format!("ray tangent to the {circle:?} circle")));
    }
    let sq = disc.sqrt();
    let (t1, t2) = (-b - sq, -b + sq);
    Ok([t1, t2].into_iter().find(|&t| t > 0.0))
}

fn circles_bounding(region: Region) -> &'static [Circle] {
    match region {
        Region::I => &[Circle::Outer],
        Region::II => &[Circle::Outer, Circle::Inner],
        Region::III => &[Circle::Inner],
    }
}

fn intersection_with(cfg: &JunctionConfig, from: Option<Circle>, p: [f64; 2], d: [f64; 2], region: Region) -> Result<Option<Intersection>> {
    let mut best: Option<(Circle, f64)> = None;
    for &circle in circles_bounding(region) {
        if let Some(t) = circle_hit(cfg, circle, p, d, from == Some(circle))? {
            if best.map_or(true, |(_, bt)| t < bt) {
                best = Some((circle, t));
            }
        }
    }
    Ok(best.map(|(circle, t)| {
        let point = [p[0] + t * d[0], p[1] + t * d[1]];
        let (c, _) = center_radius(cfg, circle);
        let hit_angle = (point[1] - c[1]).atan2(point[0] - c[0]);
        let (_, tangent) = frame(hit_angle);
        Intersection { circle, point, hit_angle, sin_incidence: dot(d, tangent).clamp(-1.0, 1.0), distance: t }
    }))
}

fn nearest_circle(cfg: &JunctionConfig, p: [f64; 2]) -> Option<Circle> {
    let tol = 1e-12;
    let r = p[0].hypot(p[1]);
    if (r - 1.0).abs() < tol {
        return Some(Circle::Outer);
    }
    if ((p[0] - cfg.xi).hypot(p[1]) - cfg.rho).abs() < tol {
        return Some(Circle::Inner);
    }
    None
}

/// First forward intersection with the boundary of `region`. A point within
/// `1e-12` of a circle is treated as departing from it. `None` means the ray
/// escapes to infinity (region I only).
pub fn next_intersection(cfg: &JunctionConfig, point: [f64; 2], direction: [f64; 2], region: Region) -> Result<Option<Intersection>> {
    intersection_with(cfg, nearest_circle(cfg, point), point, direction, region)
}

fn other_side(circle: Circle, region: Region) -> Region {
    match (circle, region) {
        (Circle::Outer, Region::I) => Region::II,
        (Circle::Outer, _) => Region::I,
        (Circle::Inner, Region::III) => Region::II,
        (Circle::Inner, _) => Region::III,
    }
}

/// Refractive indices of the three regions and the mirror circle for one spin and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optics {
    pub cfg: JunctionConfig,
    /// Indices of regions I, II, III (region I is always 1).
    pub index: [f64; 3],
    /// Reflecting boundary for closed dynamics; `None` for open scattering.
    pub wall: Option<Circle>,
}

impl Optics {
    /// Closed cavity dynamics with the effective boundary as mirror.
    pub fn closed(cfg: &JunctionConfig, spin: Spin, eps: f64) -> Result<Self> {
        let optics = Self::open(cfg, spin, eps)?;
        let [n1, n2, n3] = optics.index;
        let wall = if n2 == n1 && n3 != n2 { Circle::Inner } else { Circle::Outer };
        Ok(Self { wall: Some(wall), ..optics })
    }

    /// Open scattering: every circle is a refracting interface.
    pub fn open(cfg: &JunctionConfig, spin: Spin, eps: f64) -> Result<Self> {
        cfg.validate()?;
        let n2 = refractive_index(cfg, spin, Region::II, eps)?;
        let n3 = refractive_index(cfg, spin, Region::III, eps)?;
        if n2 == 0.0 || n3 == 0.0 {
            return Err(Error::DegenerateMedium(if n2 == 0.0 { "II" } else { "III" }));
        }
        Ok(Self { cfg: *cfg, index: [1.0, n2, n3], wall: None })
    }

    pub fn n(&self, region: Region) -> f64 {
        match region {
            Region::I => self.index[0],
            Region::II => self.index[1],
            Region::III => self.index[2],
        }
    }

    /// Region just inside the wall.
    pub fn cavity_region(&self) -> Region {
        match self.wall {
            Some(Circle::Inner) => Region::III,
            _ => Region::II,
        }
    }

    /// Index of the cavity region relative to the medium beyond the wall: the
    /// critical lines of the section sit at `sin beta = +-1/n`.
    pub fn relative_index(&self) -> f64 {
        match self.wall {
            Some(Circle::Inner) => self.index[2] / self.index[1],
            _ => self.index[1],
        }
    }

    /// Starts a ray on the wall at angle `theta` heading inward with tangential component `sin_beta`.
    pub fn launch(&self, theta: f64, sin_beta: f64) -> Result<RayState> {
        let wall = self.wall.ok_or_else(|| Error::Domain("open dynamics have no wall to launch from".into()))?;
        if !(sin_beta.abs() < 1.0) {
            return Err(Error::Domain(format!("launch needs |sin beta| < 1, got {sin_beta}")));
        }
        let (c, radius) = center_radius(&self.cfg, wall);
        let (radial, tangent) = frame(theta);
        let cos_beta = (1.0 - sin_beta * sin_beta).sqrt();
        Ok(RayState {
            circle: wall,
            hit_angle: theta,
            point: [c[0] + radius * radial[0], c[1] + radius * radial[1]],
            direction: [sin_beta * tangent[0] - cos_beta * radial[0], sin_beta * tangent[1] - cos_beta * radial[1]],
            region: self.cavity_region(),
        })
    }

    fn apply_event(&self, hit: Intersection, d: [f64; 2], region: Region) -> Result<(RayState, EventRecord)> {
        let (radial, tangent) = frame(hit.hit_angle);
        let sin_in = hit.sin_incidence;
        let normal = dot(d, radial);
        let reflect = |kind| {
            let dir = [d[0] - 2.0 * normal * radial[0], d[1] - 2.0 * normal * radial[1]];
            let state = RayState { circle: hit.circle, hit_angle: hit.hit_angle, point: hit.point, direction: dir, region };
            (state, EventRecord { kind, interface: hit.circle, sin_in, sin_out: sin_in, snell_residual: 0.0 })
        };
        if self.wall == Some(hit.circle) {
            return Ok(reflect(EventKind::Reflection));
        }
        let next = other_side(hit.circle, region);
        let (n_in, n_out) = (self.n(region), self.n(next));
        match refract(n_in, n_out, sin_in)? {
            None => Ok(reflect(EventKind::TotalInternalReflection)),
            Some(sin_out) => {
                let cos_out = (1.0 - sin_out * sin_out).sqrt() * normal.signum();
                let mut dir = [sin_out * tangent[0] + cos_out * radial[0], sin_out * tangent[1] + cos_out * radial[1]];
                let norm = dir[0].hypot(dir[1]);
                dir = [dir[0] / norm, dir[1] / norm];
                let residual = (n_in * sin_in - n_out * sin_out).abs();
                if residual > SNELL_TOLERANCE {
                    return Err(Error::NonFinite(format!("Snell residual {residual:e} exceeds tolerance")));
                }
                let state = RayState { circle: hit.circle, hit_angle: hit.hit_angle, point: hit.point, direction: dir, region: next };
                Ok((state, EventRecord { kind: EventKind::Refraction, interface: hit.circle, sin_in, sin_out, snell_residual: residual }))
            }
        }
    }

    /// Advances to the next interface event. `Ok(None)` when an open ray escapes.
    pub fn step(&self, state: &RayState) -> Result<Option<(RayState, EventRecord)>> {
        let hit = match intersection_with(&self.cfg, Some(state.circle), state.point, state.direction, state.region) {
            Ok(h) => h,
            Err(Error::Geometry(_)) => {
                // nudge the event point along its circle and retry once
                let (c, radius) = center_radius(&self.cfg, state.circle);
                let phi = state.hit_angle + TANGENT_NUDGE;
                let p = [c[0] + radius * phi.cos(), c[1] + radius * phi.sin()];
                intersection_with(&self.cfg, Some(state.circle), p, state.direction, state.region)?
            }
            Err(e) => return Err(e),
        };
        match hit {
            None => Ok(None),
            Some(hit) => self.apply_event(hit, state.direction, state.region).map(Some),
        }
    }
}

/// Single step of the closed dynamics for `(cfg, spin, eps)`.
pub fn step(cfg: &JunctionConfig, spin: Spin, eps: f64, state: &RayState) -> Result<(RayState, EventRecord)> {
    Optics::closed(cfg, spin, eps)?
        .step(state)?
        .ok_or_else(|| Error::Geometry("closed ray left the cavity".into()))
}

/// Birkhoff coordinates of a wall event: `theta` in `[0, 2 pi)`, `sin_beta`
/// the tangential component of the reflected direction.
pub fn birkhoff(state: &RayState) -> BirkhoffPoint {
    let (_, tangent) = frame(state.hit_angle);
    BirkhoffPoint { theta: state.hit_angle.rem_euclid(TAU), sin_beta: dot(state.direction, tangent).clamp(-1.0, 1.0) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub orbit_id: usize,
    pub initial: BirkhoffPoint,
    pub points: Vec<BirkhoffPoint>,
    /// Set when the orbit was abandoned (repeated tangency or trapped away from the wall).
    pub dropped: Option<String>,
    pub refractions: usize,
    pub max_snell_residual: f64,
}

impl Orbit {
    pub fn sin_beta_variance(&self, absolute: bool) -> f64 {
        let vals: Vec<f64> = self.points.iter().map(|p| if absolute { p.sin_beta.abs() } else { p.sin_beta }).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64
    }

    /// Fraction of an `n x n` grid over `[0, 2 pi) x [-1, 1]` visited by the orbit.
    pub fn coverage(&self, bins: usize) -> f64 {
        let mut seen = vec![false; bins * bins];
        for p in &self.points {
            let i = ((p.theta / TAU) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
            let j = (((p.sin_beta + 1.0) / 2.0) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
            seen[j * bins + i] = true;
        }
        seen.iter().filter(|&&s| s).count() as f64 / (bins * bins) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareSection {
    pub wall: Circle,
    /// `sin beta = +-1/n` for the cavity index relative to the medium beyond the wall.
    pub critical_lines: Vec<f64>,
    pub seed: u64,
    pub orbits: Vec<Orbit>,
}

impl PoincareSection {
    pub fn dropped(&self) -> usize {
        self.orbits.iter().filter(|o| o.dropped.is_some()).count()
    }

    pub fn max_snell_residual(&self) -> f64 {
        self.orbits.iter().map(|o| o.max_snell_residual).fold(0.0, f64::max)
    }

    /// CSV with header `orbit_id,theta,sin_beta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("orbit_id,theta,sin_beta\n");
        for o in &self.orbits {
            for p in &o.points {
                out.push_str(&format!("{},{},{}\n", o.orbit_id, p.theta, p.sin_beta));
            }
        }
        out
    }
}

/// Follows one orbit for `n_bounces` wall events.
pub fn run_orbit(optics: &Optics, orbit_id: usize, initial: BirkhoffPoint, n_bounces: usize) -> Result<Orbit> {
    let mut state = optics.launch(initial.theta, initial.sin_beta)?;
    let mut orbit = Orbit { orbit_id, initial, points: vec![initial], dropped: None, refractions: 0, max_snell_residual: 0.0 };
    let wall = optics.wall.expect("closed optics");
    let mut since_wall = 0;
    while orbit.points.len() <= n_bounces {
        let (next, event) = match optics.step(&state) {
            Ok(Some(pair)) => pair,
            Ok(None) => {
                orbit.dropped = Some("ray escaped".into());
                break;
            }
            Err(Error::Geometry(msg)) => {
                orbit.dropped = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        if event.kind == EventKind::Refraction {
            orbit.refractions += 1;
            orbit.max_snell_residual = orbit.max_snell_residual.max(event.snell_residual);
        }
        state = next;
        if event.interface == wall && event.kind == EventKind::Reflection {
            orbit.points.push(birkhoff(&state));
            since_wall = 0;
        } else {
            since_wall += 1;
            if since_wall > MAX_EVENTS_BETWEEN_WALLS {
                orbit.dropped = Some("trapped away from the wall".into());
                break;
            }
        }
    }
    Ok(orbit)
}

/// Uniform `(theta, sin_beta)` initial conditions from a SplitMix64 stream.
pub fn initial_conditions(n: usize, seed: u64) -> Vec<BirkhoffPoint> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let theta = rng.gen_range(0.0..TAU);
            let mut sin_beta = rng.gen_range(-1.0..1.0);
            while sin_beta == -1.0 {
                sin_beta = rng.gen_range(-1.0..1.0);
            }
            BirkhoffPoint { theta, sin_beta }
        })
        .collect()
}

/// Wall events of `n_initial` random orbits, each followed for `n_bounces`
/// wall events. Orbits run in parallel; the result is ordered by orbit id.
pub fn poincare_section(cfg: &JunctionConfig, spin: Spin, eps: f64, n_initial: usize, n_bounces: usize, seed: u64) -> Result<PoincareSection> {
    if n_initial == 0 {
        return Err(Error::InvalidConfig("poincare section needs at least one initial condition".into()));
    }
    let optics = Optics::closed(cfg, spin, eps)?;
    let ics = initial_conditions(n_initial, seed);
    let orbits = ics
        .par_iter()
        .enumerate()
        .map(|(id, &ic)| run_orbit(&optics, id, ic, n_bounces))
        .collect::<Result<Vec<_>>>()?;
    let n = optics.relative_index();
    Ok(PoincareSection { wall: optics.wall.unwrap(), critical_lines: vec![1.0 / n, -1.0 / n], seed, orbits })
}

/// Parallel beam for the caustic map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beam {
    pub theta_prime: f64,
    pub n_rays: usize,
    /// Full transverse width, centered on the origin.
    pub width: f64,
}

/// Adds the length of segment `p0 -> p1` to the cells it crosses.
fn deposit(grid: &GridSpec, acc: &mut [f64], p0: [f64; 2], p1: [f64; 2]) {
    let d = [p1[0] - p0[0], p1[1] - p0[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return;
    }
    let mut ts = vec![0.0, 1.0];
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut crossings = |origin: f64, step: f64, count: usize, a: f64, da: f64| {
        if da == 0.0 {
            return;
        }
        for i in 0..=count {
            let edge = origin - 0.5 * step + i as f64 * step;
            let t = (edge - a) / da;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    };
    crossings(grid.x_min, dx, grid.nx, p0[0], d[0]);
    crossings(grid.y_min, dy, grid.ny, p0[1], d[1]);
    ts.sort_by(f64::total_cmp);
    for w in ts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if let Some((ix, iy)) = grid.cell_of(p0[0] + mid * d[0], p0[1] + mid * d[1]) {
            acc[grid.index(ix, iy)] += (w[1] - w[0]) * len;
        }
    }
}

/// Path length per unit area deposited by a parallel beam under open
/// (refract-or-reflect) dynamics, in units of the incident beam density.
pub fn caustic_density(cfg: &JunctionConfig, spin: Spin, eps: f64, beam: Beam, grid: GridSpec) -> Result<FieldGrid> {
    grid.validate()?;
    if beam.n_rays < 100 || !(beam.width > 0.0) {
        return Err(Error::InvalidConfig("caustic beam needs n_rays >= 100 and a positive width".into()));
    }
    let optics = Optics::open(cfg, spin, eps)?;
    let dir = [beam.theta_prime.cos(), beam.theta_prime.sin()];
    let perp = [-dir[1], dir[0]];
    let reach = [grid.x_min, grid.x_max, grid.y_min, grid.y_max].iter().fold(1.0f64, |a, b| a.max(b.abs())) * 2.0 + 2.0;
    let max_events = 10_000;
    let per_ray: Vec<Vec<f64>> = (0..beam.n_rays)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; grid.len()];
            let s = beam.width * ((i as f64 + 0.5) / beam.n_rays as f64 - 0.5);
            let mut p = [-reach * dir[0] + s * perp[0], -reach * dir[1] + s * perp[1]];
            let mut state: Option<RayState> = None;
            let mut d = dir;
            for _ in 0..max_events {
                let hit = match &state {
                    None => intersection_with(&optics.cfg, None, p, d, Region::I),
                    Some(st) => intersection_with(&optics.cfg, Some(st.circle), st.point, st.direction, st.region),
                };
                let hit = match hit {
                    Ok(h) => h,
                    Err(_) => break,
                };
                match hit {
                    None => {
                        let far = [p[0] + 2.0 * reach * d[0], p[1] + 2.0 * reach * d[1]];
                        deposit(&grid, &mut acc, p, far);
                        break;
                    }
                    Some(hit) => {
                        deposit(&grid, &mut acc, p, hit.point);
                        let region = state.map_or(Region::I, |s| s.region);
                        match optics.apply_event(hit, d, region) {
                            Ok((next, _)) => {
                                p = next.point;
                                d = next.direction;
                                state = Some(next);
                            }
                            Err(_) => break,
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let cell_area = grid.dx() * grid.dy();
    let beam_density = beam.n_rays as f64 / beam.width;
    let mut density = vec![0.0; grid.len()];
    for acc in &per_ray {
        for (d, a) in density.iter_mut().zip(acc) {
            *d += a;
        }
    }
    for v in &mut density {
        *v /= cell_area * beam_density;
    }
    let mut out = FieldGrid::new(grid)?;
    out.push("ray_density", density)?;
    Ok(out)
}
