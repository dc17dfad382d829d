//! Overdamped Langevin erasure of a one-bit memory in a tilted quartic double
//! well `V(x; a, b, c) = a x^4 - b x^2 + c x`.
//!
//! The left basin is the standard state (outcome 0). Work is the
//! parameter-update part of the energy change only: at every step the
//! parameters move first, the particle's energy change at fixed `x` is booked
//! as work, and then the particle takes one Euler–Maruyama step in the new
//! potential.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::suite::derive_seed;
use crate::operator::Temperature;

/// Default minimum barrier at the start of a protocol, in units of `T`.
pub const DEFAULT_BARRIER_MIN: f64 = 8.0;

/// `dt` may be at most this fraction of `gamma / max|V''|`.
pub const STABILITY_FRACTION: f64 = 0.1;

/// Relative error target for basin partition functions.
pub const QUADRATURE_RTOL: f64 = 1e-8;

/// Below this effective sample size the Jarzynski estimate is flagged.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

const BOOTSTRAP_RESAMPLES: usize = 400;

/// Parameters `(a, b, c)` of the quartic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quartic {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        (self.a * x2 - self.b) * x2 + self.c * x
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (4.0 * self.a * x * x - 2.0 * self.b) * x + self.c
    }

    #[inline]
    pub fn curvature(&self, x: f64) -> f64 {
        12.0 * self.a * x * x - 2.0 * self.b
    }

    pub fn lerp(&self, other: &Quartic, s: f64) -> Quartic {
        Quartic {
            a: self.a + s * (other.a - self.a),
            b: self.b + s * (other.b - self.b),
            c: self.c + s * (other.c - self.c),
        }
    }

    /// Stationary points in ascending order when there are three of them.
    pub fn stationary_points(&self) -> Option<[f64; 3]> {
        if !(self.a > 0.0) {
            return None;
        }
        // x^3 + p x + q = 0
        let p = -self.b / (2.0 * self.a);
        let q = self.c / (4.0 * self.a);
        if p >= 0.0 || 4.0 * p * p * p + 27.0 * q * q >= 0.0 {
            return None;
        }
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0).acos() / 3.0;
        let mut roots = [0, 1, 2].map(|k| m * (theta - 2.0 * PI * k as f64 / 3.0).cos());
        roots.sort_by(f64::total_cmp);
        Some(roots)
    }
}

/// Left well, barrier top and right well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellGeometry {
    pub left_well: f64,
    pub barrier_top: f64,
    pub right_well: f64,
    /// Barrier seen from the higher of the two wells.
    pub barrier_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub lambda: Quartic,
    pub x_min: f64,
    pub x_max: f64,
    /// Minimum barrier in units of `T`.
    #[serde(default = "default_barrier_min")]
    pub barrier_min: f64,
}

fn default_barrier_min() -> f64 {
    DEFAULT_BARRIER_MIN
}

impl PotentialSpec {
    pub fn new(lambda: Quartic, x_min: f64, x_max: f64) -> Result<Self> {
        let spec = Self {
            lambda,
            x_min,
            x_max,
            barrier_min: DEFAULT_BARRIER_MIN,
        };
        spec.check_domain()?;
        Ok(spec)
    }

    fn check_domain(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "domain [{}, {}] is empty or unbounded",
                self.x_min, self.x_max
            )));
        }
        if !(self.lambda.a > 0.0) {
            return Err(Error::InvalidParameter(format!("quartic coefficient a must be positive, got {}", self.lambda.a)));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: Quartic) -> Self {
        Self { lambda, ..*self }
    }

    pub fn geometry(&self) -> Result<WellGeometry> {
        self.check_domain()?;
        let [left, top, right] = self.lambda.stationary_points().ok_or(Error::SingleWell)?;
        if left <= self.x_min || right >= self.x_max {
            return Err(Error::InvalidParameter(format!(
                "wells at {left:.4} and {right:.4} are not inside the domain [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        let v = |x| self.lambda.value(x);
        Ok(WellGeometry {
            left_well: left,
            barrier_top: top,
            right_well: right,
            barrier_height: v(top) - v(left).max(v(right)),
        })
    }

    /// Geometry, additionally requiring the barrier to be at least
    /// `barrier_min * T`.
    pub fn checked_geometry(&self, t: Temperature) -> Result<WellGeometry> {
        let g = self.geometry()?;
        let min = self.barrier_min * t.value();
        if g.barrier_height < min {
            return Err(Error::BarrierTooLow {
                height: g.barrier_height,
                min,
            });
        }
        Ok(g)
    }
}

/// `ln ∫ e^{-V/T} dx` over `[lo, hi]`, with the integrand split at `peaks`.
fn log_integral(lambda: &Quartic, t: Temperature, lo: f64, hi: f64, peaks: &[f64]) -> Result<f64> {
    let beta = t.beta();
    let mut cuts = vec![lo];
    cuts.extend(peaks.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let v_min = cuts.iter().map(|&x| lambda.value(x)).fold(f64::INFINITY, f64::min);
    // Subdivide each piece so the integrand is smooth on every panel.
    let mut panels = Vec::new();
    for w in cuts.windows(2) {
        let pieces = 8;
        for i in 0..pieces {
            let x0 = w[0] + (w[1] - w[0]) * i as f64 / pieces as f64;
            let x1 = w[0] + (w[1] - w[0]) * (i + 1) as f64 / pieces as f64;
            panels.push((x0, x1));
        }
    }
    let f = |x: f64| (-(lambda.value(x) - v_min) * beta).exp();
    // The integrand peaks at 1, so the integral is at least of order the well width.
    let scale = panels
        .iter()
        .map(|&(x0, x1)| (x1 - x0) * f(0.5 * (x0 + x1)).max(f(x0)).max(f(x1)))
        .sum::<f64>();
    let target = QUADRATURE_RTOL * scale / (4.0 * panels.len() as f64);
    let mut total = 0.0;
    let mut error = 0.0;
    for (x0, x1) in panels {
        let out = quadrature::double_exponential::integrate(f, x0, x1, target);
        total += out.integral;
        error += out.error_estimate;
    }
    if !(total > 0.0) || !total.is_finite() || error > QUADRATURE_RTOL * total {
        return Err(Error::Quadrature(format!(
            "integral {total:.6e} with error estimate {error:.3e} on [{lo}, {hi}]"
        )));
    }
    Ok(total.ln() - v_min * beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinFreeEnergies {
    pub f_left: f64,
    pub f_right: f64,
    /// Equilibrium weight of the left basin.
    pub p_eq_left: f64,
    /// `(F_left + F_right) / 2 - F_left`, the standard state being left.
    pub delta_f: f64,
    pub barrier_top: f64,
}

pub fn basin_free_energies(pot: &PotentialSpec, t: Temperature) -> Result<BasinFreeEnergies> {
    let g = pot.geometry()?;
    let ln_zl = log_integral(&pot.lambda, t, pot.x_min, g.barrier_top, &[g.left_well])?;
    let ln_zr = log_integral(&pot.lambda, t, g.barrier_top, pot.x_max, &[g.right_well])?;
    let temp = t.value();
    let (f_left, f_right) = (-temp * ln_zl, -temp * ln_zr);
    Ok(BasinFreeEnergies {
        f_left,
        f_right,
        p_eq_left: 1.0 / (1.0 + (ln_zr - ln_zl).exp()),
        delta_f: 0.5 * (f_left + f_right) - f_left,
        barrier_top: g.barrier_top,
    })
}

/// `-T ln Z` over the whole domain. Works for single wells too.
pub fn free_energy(pot: &PotentialSpec, t: Temperature) -> Result<f64> {
    pot.check_domain()?;
    let peaks: Vec<f64> = match pot.lambda.stationary_points() {
        Some(points) => points.to_vec(),
        None => vec![0.0],
    };
    Ok(-t.value() * log_integral(&pot.lambda, t, pot.x_min, pot.x_max, &peaks)?)
}

/// Root in `c` of the increasing function `log_ratio(c) = target`.
fn solve_tilt(log_ratio: impl Fn(f64) -> Result<f64>, target: f64) -> Result<f64> {
    let unreachable = || Error::InvalidParameter(format!("no tilt reaches log ratio {target}"));
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut span = 1e-3;
    while log_ratio(hi)? < target {
        hi = span;
        span *= 2.0;
        if span > 1e6 {
            return Err(unreachable());
        }
    }
    span = 1e-3;
    while log_ratio(lo)? > target {
        lo = -span;
        span *= 2.0;
        if span > 1e6 {
            return Err(unreachable());
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_ratio(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("basin ratio must be positive and finite, got {ratio}")))
    }
}

/// Tilt `c` at which `Z_left / Z_right = ratio` for fixed `a`, `b`, the
/// basins being split at the barrier top.
pub fn tilt_for_ratio(a: f64, b: f64, ratio: f64, t: Temperature, x_min: f64, x_max: f64) -> Result<f64> {
    check_ratio(ratio)?;
    // Positive c lowers the left well, so the log ratio increases with c.
    solve_tilt(
        |c| {
            let pot = PotentialSpec::new(Quartic::new(a, b, c), x_min, x_max)?;
            let f = basin_free_energies(&pot, t)?;
            Ok((f.f_right - f.f_left) / t.value())
        },
        ratio.ln(),
    )
}

/// Tilt `c` at which the Boltzmann weights of `x < 0` and `x > 0` stand in
/// `ratio`. Unlike [`tilt_for_ratio`] this is defined for single wells too.
pub fn tilt_for_half_line_ratio(a: f64, b: f64, ratio: f64, t: Temperature, x_min: f64, x_max: f64) -> Result<f64> {
    check_ratio(ratio)?;
    if !(x_min < 0.0 && x_max > 0.0) {
        return Err(Error::InvalidParameter(format!("domain [{x_min}, {x_max}] must contain the origin")));
    }
    solve_tilt(
        |c| {
            let l = Quartic::new(a, b, c);
            let peaks: Vec<f64> = l.stationary_points().map_or_else(Vec::new, |p| p.to_vec());
            let left = log_integral(&l, t, x_min, 0.0, &peaks)?;
            let right = log_integral(&l, t, 0.0, x_max, &peaks)?;
            Ok(left - right)
        },
        ratio.ln(),
    )
}

/// A point on a piecewise-linear parameter path. `at` is the fraction of the
/// protocol duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub at: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Waypoint {
    pub fn lambda(&self) -> Quartic {
        Quartic::new(self.a, self.b, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub duration: f64,
    pub waypoints: Vec<Waypoint>,
}

impl ProtocolSchedule {
    pub fn new(duration: f64, waypoints: Vec<Waypoint>) -> Result<Self> {
        let s = Self { duration, waypoints };
        s.validate()?;
        Ok(s)
    }

    /// Consecutive `lambdas` joined by segments of relative length `weights`.
    pub fn from_stages(duration: f64, lambdas: &[Quartic], weights: &[f64]) -> Result<Self> {
        if lambdas.len() != weights.len() + 1 {
            return Err(Error::InvalidSchedule(format!(
                "{} waypoints need {} stage weights, got {}",
                lambdas.len(),
                lambdas.len().saturating_sub(1),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        let mut at = 0.0;
        let mut waypoints = Vec::with_capacity(lambdas.len());
        for (i, l) in lambdas.iter().enumerate() {
            waypoints.push(Waypoint {
                at: if i + 1 == lambdas.len() { 1.0 } else { at },
                a: l.a,
                b: l.b,
                c: l.c,
            });
            if i < weights.len() {
                at += weights[i] / total;
            }
        }
        Self::new(duration, waypoints)
    }

    /// Parameters held at `lambda` for `duration`.
    pub fn frozen(lambda: Quartic, duration: f64) -> Result<Self> {
        Self::from_stages(duration, &[lambda, lambda], &[1.0])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidSchedule(format!("duration must be positive, got {}", self.duration)));
        }
        let w = &self.waypoints;
        if w.len() < 2 {
            return Err(Error::InvalidSchedule("need at least two waypoints".into()));
        }
        if w[0].at != 0.0 || w[w.len() - 1].at != 1.0 {
            return Err(Error::InvalidSchedule("waypoints must start at 0 and end at 1".into()));
        }
        for (i, pair) in w.windows(2).enumerate() {
            if !(pair[1].at >= pair[0].at) {
                return Err(Error::InvalidSchedule(format!("waypoint {} goes back in time", i + 1)));
            }
        }
        if w.iter().any(|p| !(p.a > 0.0) || !p.b.is_finite() || !p.c.is_finite()) {
            return Err(Error::InvalidSchedule("every waypoint needs a > 0 and finite b, c".into()));
        }
        Ok(())
    }

    pub fn initial(&self) -> Quartic {
        self.waypoints[0].lambda()
    }

    pub fn last(&self) -> Quartic {
        self.waypoints[self.waypoints.len() - 1].lambda()
    }

    pub fn is_frozen(&self) -> bool {
        let first = self.initial();
        self.waypoints.iter().all(|w| w.lambda() == first)
    }

    /// Parameters at fraction `s` of the duration.
    pub fn at_fraction(&self, s: f64) -> Quartic {
        let w = &self.waypoints;
        let i = w.partition_point(|p| p.at <= s).clamp(1, w.len() - 1);
        let (p0, p1) = (&w[i - 1], &w[i]);
        let span = p1.at - p0.at;
        if span <= 0.0 {
            return p1.lambda();
        }
        p0.lambda().lerp(&p1.lambda(), ((s - p0.at) / span).clamp(0.0, 1.0))
    }

    /// Largest `|V''|` on `[x_min, x_max]` along the path. `V''` is linear in
    /// the parameters, so waypoints suffice.
    pub fn max_curvature(&self, x_min: f64, x_max: f64) -> f64 {
        self.waypoints
            .iter()
            .flat_map(|w| {
                let l = w.lambda();
                [x_min, x_max, 0.0].map(|x| l.curvature(x).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Barrier levels and target residual of an erasure protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErasureShape {
    pub a: f64,
    /// Barrier parameter at both ends.
    pub b: f64,
    /// Barrier parameter while the tilt is switched on.
    pub b_low: f64,
    /// Barrier parameter while the erased bit is held and the tilt removed.
    pub b_hold: f64,
    /// Equilibrium weight of `x > 0` kept fixed while the barrier rises; the
    /// expected fraction of failed erasures.
    pub residual: f64,
}

/// Relative stage lengths: equalize, lower, tilt, raise, restore, settle.
const ERASURE_STAGE_WEIGHTS: [f64; 6] = [0.4, 1.2, 0.7, 1.2, 0.4, 0.2];

/// Linear pieces in the tilt ramp and the barrier raise.
const RAMP_SEGMENTS: usize = 8;

/// The tilt ramps as `s^1.5`, giving the soft well at small tilt more time.
const TILT_RAMP_POWER: f64 = 1.5;

/// Erasure to the left well starting from tilt `c0`: equalize the wells,
/// lower the barrier to `b_low`, tilt until only `residual` of the weight
/// sits at `x > 0`, raise the barrier to `b_hold` while adjusting the tilt to
/// keep that weight fixed, restore the tilt to `c0`, and settle the barrier
/// back to `b`. The equalize stage is dropped when `c0 = 0` and the settle
/// stage when `b_hold = b`.
///
/// Holding the weight fixed during the raise keeps the populations in
/// equilibrium as the basins separate, so they never lag behind the
/// parameters.
pub fn erasure_schedule(
    shape: &ErasureShape,
    c0: f64,
    t: Temperature,
    x_min: f64,
    x_max: f64,
    duration: f64,
) -> Result<ProtocolSchedule> {
    let ErasureShape {
        a,
        b,
        b_low,
        b_hold,
        residual,
    } = *shape;
    if !(residual > 0.0 && residual < 0.5) {
        return Err(Error::InvalidParameter(format!("residual must lie in (0, 1/2), got {residual}")));
    }
    if !(b_low < b && b <= b_hold) {
        return Err(Error::InvalidParameter(format!(
            "need b_low < b <= b_hold, got {b_low}, {b}, {b_hold}"
        )));
    }
    let ratio = (1.0 - residual) / residual;
    let tilt_at = |bb: f64| tilt_for_half_line_ratio(a, bb, ratio, t, x_min, x_max);
    let q = Quartic::new;

    let mut stages: Vec<(f64, Vec<Quartic>)> = Vec::new();
    if c0 != 0.0 {
        stages.push((ERASURE_STAGE_WEIGHTS[0], vec![q(a, b, 0.0)]));
    }
    stages.push((ERASURE_STAGE_WEIGHTS[1], vec![q(a, b_low, 0.0)]));
    let c_tilt = tilt_at(b_low)?;
    let tilt = (1..=RAMP_SEGMENTS)
        .map(|i| q(a, b_low, c_tilt * (i as f64 / RAMP_SEGMENTS as f64).powf(TILT_RAMP_POWER)))
        .collect();
    stages.push((ERASURE_STAGE_WEIGHTS[2], tilt));
    let raise = (1..=RAMP_SEGMENTS)
        .map(|i| {
            let bb = b_low + (b_hold - b_low) * i as f64 / RAMP_SEGMENTS as f64;
            Ok(q(a, bb, tilt_at(bb)?))
        })
        .collect::<Result<Vec<_>>>()?;
    stages.push((ERASURE_STAGE_WEIGHTS[3], raise));
    stages.push((ERASURE_STAGE_WEIGHTS[4], vec![q(a, b_hold, c0)]));
    if b_hold != b {
        stages.push((ERASURE_STAGE_WEIGHTS[5], vec![q(a, b, c0)]));
    }

    let total: f64 = stages.iter().map(|(w, _)| w).sum();
    let mut waypoints = vec![Waypoint { at: 0.0, a, b, c: c0 }];
    let mut at = 0.0;
    for (weight, points) in &stages {
        let span = weight / total;
        for (i, l) in points.iter().enumerate() {
            let frac = (i + 1) as f64 / points.len() as f64;
            waypoints.push(Waypoint {
                at: at + span * frac,
                a: l.a,
                b: l.b,
                c: l.c,
            });
        }
        at += span;
    }
    let last = waypoints.len() - 1;
    waypoints[last].at = 1.0;
    ProtocolSchedule::new(duration, waypoints)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    pub gamma: f64,
    pub temperature: Temperature,
}

impl EnsembleParams {
    pub fn new(n_traj: usize, seed: u64, dt: f64) -> Self {
        Self {
            n_traj,
            seed,
            dt,
            gamma: 1.0,
            temperature: Temperature::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub mean: f64,
    pub stderr: f64,
    /// Fraction of trajectories ending in the left basin.
    pub success_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub params: EnsembleParams,
    pub potential: PotentialSpec,
    pub schedule: ProtocolSchedule,
    pub n_steps: usize,
    /// Time step actually used: `duration / n_steps`.
    pub dt_used: f64,
    pub seeds: Vec<u64>,
    pub works: Vec<f64>,
    pub final_positions: Vec<f64>,
    /// 0 for left (standard), 1 for right, split at the final barrier top
    /// (the initial one if the final potential has a single well).
    pub final_basins: Vec<u8>,
    pub summary: EnsembleSummary,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Canonical draw within one basin by rejection from a uniform proposal.
fn sample_in_basin(rng: &mut impl Rng, lambda: &Quartic, t: Temperature, lo: f64, hi: f64, v_floor: f64) -> f64 {
    let beta = t.beta();
    loop {
        let x = rng.random_range(lo..hi);
        let accept = (-(lambda.value(x) - v_floor) * beta).exp();
        if rng.random::<f64>() < accept {
            return x;
        }
    }
}

#[inline]
fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    // A single reflection suffices for stable steps; the loop covers the rest.
    while x < lo || x > hi {
        if x < lo {
            x = 2.0 * lo - x;
        }
        if x > hi {
            x = 2.0 * hi - x;
        }
    }
    x
}

/// Runs `n_traj` independent trajectories through `schedule`. Trajectory `j`
/// uses seed `derive_seed(seed, j)` and starts in the left basin for even `j`
/// and the right basin for odd `j`, canonically distributed within it.
/// The domain edges reflect.
pub fn simulate_erasure(
    pot: &PotentialSpec,
    schedule: &ProtocolSchedule,
    params: &EnsembleParams,
) -> Result<TrajectoryEnsemble> {
    schedule.validate()?;
    if params.n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be at least 1".into()));
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("friction must be positive, got {}", params.gamma)));
    }
    if !(params.dt > 0.0 && params.dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {}", params.dt)));
    }
    let t = params.temperature;
    let pot = pot.with_lambda(schedule.initial());
    let start = pot.checked_geometry(t)?;
    // A final single well has no barrier of its own; the starting one is used.
    let boundary = match pot.with_lambda(schedule.last()).geometry() {
        Ok(g) => g.barrier_top,
        Err(Error::SingleWell) => start.barrier_top,
        Err(e) => return Err(e),
    };
    let limit = STABILITY_FRACTION * params.gamma / schedule.max_curvature(pot.x_min, pot.x_max);
    if params.dt > limit {
        return Err(Error::UnstableTimestep { dt: params.dt, limit });
    }

    let n_steps = (schedule.duration / params.dt).ceil() as usize;
    let dt = schedule.duration / n_steps as f64;
    // The path is precomputed once and shared by all trajectories.
    let path: Vec<Quartic> = (0..=n_steps)
        .map(|i| schedule.at_fraction(i as f64 / n_steps as f64))
        .collect();
    let drift = dt / params.gamma;
    let noise = (2.0 * t.value() * dt / params.gamma).sqrt();
    let lambda0 = schedule.initial();
    let floors = [
        lambda0.value(start.left_well).min(lambda0.value(pot.x_min)),
        lambda0.value(start.right_well).min(lambda0.value(pot.x_max)),
    ];
    let (x_min, x_max) = (pot.x_min, pot.x_max);

    let seeds: Vec<u64> = (0..params.n_traj as u64).map(|j| derive_seed(params.seed, j)).collect();
    let results: Vec<Result<(f64, f64)>> = seeds
        .par_iter()
        .enumerate()
        .map(|(j, &seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = if j % 2 == 0 {
                sample_in_basin(&mut rng, &lambda0, t, x_min, start.barrier_top, floors[0])
            } else {
                sample_in_basin(&mut rng, &lambda0, t, start.barrier_top, x_max, floors[1])
            };
            let mut work = 0.0;
            for i in 0..n_steps {
                let (cur, next) = (&path[i], &path[i + 1]);
                if cur != next {
                    work += next.value(x) - cur.value(x);
                }
                let xi: f64 = rng.sample(StandardNormal);
                x = reflect(x - drift * next.derivative(x) + noise * xi, x_min, x_max);
            }
            if !x.is_finite() || !work.is_finite() {
                return Err(Error::NonFiniteTrajectory { index: j, seed });
            }
            Ok((work, x))
        })
        .collect();

    let mut works = Vec::with_capacity(params.n_traj);
    let mut final_positions = Vec::with_capacity(params.n_traj);
    for r in results {
        let (w, x) = r?;
        works.push(w);
        final_positions.push(x);
    }
    let final_basins: Vec<u8> = final_positions
        .iter()
        .map(|&x| u8::from(x > boundary))
        .collect();
    let (mean, stderr) = mean_and_stderr(&works);
    let success_fraction = final_basins.iter().filter(|&&k| k == 0).count() as f64 / params.n_traj as f64;
    Ok(TrajectoryEnsemble {
        params: *params,
        potential: pot,
        schedule: schedule.clone(),
        n_steps,
        dt_used: dt,
        seeds,
        works,
        final_positions,
        final_basins,
        summary: EnsembleSummary {
            mean,
            stderr,
            success_fraction,
        },
    })
}

impl TrajectoryEnsemble {
    /// CSV with header `trajectory_index,seed,W,final_basin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trajectory_index,seed,W,final_basin\n");
        for (j, ((seed, w), basin)) in self.seeds.iter().zip(&self.works).zip(&self.final_basins).enumerate() {
            out.push_str(&format!("{j},{seed},{w:.16e},{basin}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JarzynskiReport {
    /// `-T ln <exp(-W / T)>`
    pub estimator: f64,
    pub expected: f64,
    pub stderr: f64,
    pub z_score: f64,
    pub effective_sample_size: f64,
    /// `|z| > 3`.
    pub flagged: bool,
    /// Warnings about rare-event domination. These do not fail the check.
    pub warnings: Vec<String>,
}

fn log_mean_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - max).exp(), n + 1));
    max + (sum / n as f64).ln()
}

/// Jarzynski estimator with bootstrap standard error. `delta_f` is the
/// full-domain free energy difference between the end points. When
/// `final_weights` (equilibrium basin weights at the final parameters) is
/// given, a basin holding at least 1% of that weight but reached by fewer
/// than ten trajectories raises a warning.
pub fn jarzynski_check(
    ensemble: &TrajectoryEnsemble,
    delta_f: f64,
    t: Temperature,
    final_weights: Option<[f64; 2]>,
    bootstrap_seed: u64,
) -> JarzynskiReport {
    let temp = t.value();
    let w = &ensemble.works;
    let n = w.len();
    let estimator = -temp * log_mean_exp(w.iter().map(|x| -x / temp));

    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
    let mut resampled = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let picks: Vec<f64> = (0..n).map(|_| -w[rng.random_range(0..n)] / temp).collect();
        resampled.push(-temp * log_mean_exp(picks.into_iter()));
    }
    let (_, stderr_of_mean) = mean_and_stderr(&resampled);
    let stderr = stderr_of_mean * (BOOTSTRAP_RESAMPLES as f64).sqrt();

    let diff = estimator - delta_f;
    let z_score = if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * (1.0 + delta_f.abs()) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };

    let max = w.iter().map(|x| -x / temp).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = w.iter().map(|x| (-x / temp - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|x| x * x).sum();
    let effective_sample_size = sum * sum / sum_sq;

    let mut warnings = Vec::new();
    if effective_sample_size < MIN_EFFECTIVE_SAMPLES {
        warnings.push(format!(
            "effective sample size {effective_sample_size:.1} is below {MIN_EFFECTIVE_SAMPLES}"
        ));
    }
    if let Some(pw) = final_weights {
        for (k, &p) in pw.iter().enumerate() {
            let count = ensemble.final_basins.iter().filter(|&&b| b as usize == k).count();
            if p >= 0.01 && count < 10 {
                warnings.push(format!(
                    "basin {k} holds equilibrium weight {p:.3} at the end but only {count} trajectories reach it"
                ));
            }
        }
    }
    JarzynskiReport {
        estimator,
        expected: delta_f,
        stderr,
        z_score,
        effective_sample_size,
        flagged: z_score.abs() > 3.0,
        warnings,
    }
}

/// Bound checks on an erasure ensemble. The start is the `(1/2, 1/2)` basin
/// mixture at `λ(0)` and the standard state is the left basin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErasureAnalysis {
    pub summary: EnsembleSummary,
    pub shannon: f64,
    /// Basin free energies at the start.
    pub basins: BasinFreeEnergies,
    /// `T ln 2 - ΔF^M`
    pub landauer_bound: f64,
    pub landauer_margin: f64,
    /// Second-law bound for the reached basin distribution `w`:
    /// `T (ln 2 - H(w)) + sum_k w_k F_k(τ) - (F_left(0) + F_right(0)) / 2`.
    /// Equals the Landauer bound when `w = (1, 0)` and the end points agree.
    pub reached_bound: f64,
    pub reached_margin: f64,
    pub jarzynski: Option<JarzynskiReport>,
}

impl ErasureAnalysis {
    /// Margins against `-3 stderr` and, when present, `|z| <= 3`.
    pub fn passes(&self) -> bool {
        let slack = 3.0 * self.summary.stderr;
        let jarzynski_ok = self.jarzynski.as_ref().is_none_or(|j| !j.flagged);
        self.reached_margin >= -slack && jarzynski_ok
    }
}

/// Bound checks for `ensemble`. The Jarzynski check runs only when the
/// initial basins are equally weighted in equilibrium, since only then is the
/// initial mixture canonical.
pub fn analyze_erasure(ensemble: &TrajectoryEnsemble) -> Result<ErasureAnalysis> {
    let t = ensemble.params.temperature;
    let temp = t.value();
    let pot0 = ensemble.potential.with_lambda(ensemble.schedule.initial());
    let pot1 = ensemble.potential.with_lambda(ensemble.schedule.last());
    let start = basin_free_energies(&pot0, t)?;
    let end = basin_free_energies(&pot1, t)?;
    let summary = ensemble.summary;
    let landauer_bound = temp * LN_2 - start.delta_f;
    let w = [summary.success_fraction, 1.0 - summary.success_fraction];
    let h_w: f64 = w.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
    let reached_bound =
        temp * (LN_2 - h_w) + w[0] * end.f_left + w[1] * end.f_right - 0.5 * (start.f_left + start.f_right);
    let jarzynski = if (start.p_eq_left - 0.5).abs() < 1e-6 {
        let delta_f = free_energy(&pot1, t)? - free_energy(&pot0, t)?;
        Some(jarzynski_check(
            ensemble,
            delta_f,
            t,
            Some([end.p_eq_left, 1.0 - end.p_eq_left]),
            derive_seed(ensemble.params.seed, u64::MAX),
        ))
    } else {
        None
    };
    Ok(ErasureAnalysis {
        summary,
        shannon: LN_2,
        basins: start,
        landauer_bound,
        landauer_margin: summary.mean - landauer_bound,
        reached_bound,
        reached_margin: summary.mean - reached_bound,
        jarzynski,
    })
}

/// Defaults for the desk-scale erasure runs: `a = 1`, `b = 6` (barrier 9 T
/// at `c = 0`), domain `[-2.75, 2.75]`, barrier lowered to zero during erasure.
pub mod presets {
    use super::*;

    pub const A: f64 = 1.0;
    pub const B: f64 = 6.0;
    pub const B_LOW: f64 = 0.0;
    pub const B_HOLD: f64 = 6.0;
    pub const X_MIN: f64 = -2.75;
    pub const X_MAX: f64 = 2.75;
    pub const DT: f64 = 5e-4;
    pub const RESIDUAL: f64 = 5e-3;
    pub const TAU: f64 = 300.0;

    pub fn potential(c: f64) -> Result<PotentialSpec> {
        PotentialSpec::new(Quartic::new(A, B, c), X_MIN, X_MAX)
    }

    pub fn shape(residual: f64) -> ErasureShape {
        ErasureShape {
            a: A,
            b: B,
            b_low: B_LOW,
            b_hold: B_HOLD,
            residual,
        }
    }

    /// Tilt giving `Z_left : Z_right = t : (1 - t)`, the two-box analog.
    pub fn tilt_for_fraction(t_box: f64, temperature: Temperature) -> Result<f64> {
        if !(t_box > 0.0 && t_box < 1.0) {
            return Err(Error::InvalidParameter(format!("t must lie strictly inside (0, 1), got {t_box}")));
        }
        tilt_for_ratio(A, B, t_box / (1.0 - t_box), temperature, X_MIN, X_MAX)
    }

    pub fn erasure(c0: f64, residual: f64, t: Temperature, tau: f64) -> Result<ProtocolSchedule> {
        erasure_schedule(&shape(residual), c0, t, X_MIN, X_MAX, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1() -> Temperature {
        Temperature::default()
    }

    #[test]
    fn stationary_points_of_symmetric_well() {
        let [l, m, r] = Quartic::new(1.0, 6.0, 0.0).stationary_points().unwrap();
        assert!((l + 3f64.sqrt()).abs() < 1e-12);
        assert!(m.abs() < 1e-12);
        assert!((r - 3f64.sqrt()).abs() < 1e-12);
        assert!(Quartic::new(1.0, 6.0, 9.0).stationary_points().is_none());
        assert!(Quartic::new(1.0, -1.0, 0.0).stationary_points().is_none());
    }

    #[test]
    fn symmetric_basins_agree() {
        let f = basin_free_energies(&presets::potential(0.0).unwrap(), t1()).unwrap();
        assert!((f.f_left - f.f_right).abs() < 1e-10);
        assert!(f.delta_f.abs() < 1e-10);
        assert!((f.p_eq_left - 0.5).abs() < 1e-10);
    }

    #[test]
    fn single_well_rejected() {
        let pot = PotentialSpec::new(Quartic::new(1.0, 0.5, 3.0), -3.0, 3.0).unwrap();
        assert!(matches!(basin_free_energies(&pot, t1()), Err(Error::SingleWell)));
    }

    #[test]
    fn low_barrier_rejected() {
        let pot = PotentialSpec::new(Quartic::new(1.0, 2.0, 0.0), -3.0, 3.0).unwrap();
        assert!(matches!(pot.checked_geometry(t1()), Err(Error::BarrierTooLow { .. })));
    }

    #[test]
    fn quadrature_matches_gaussian_integral() {
        // Pure quadratic well written as a quartic with a = tiny is not allowed,
        // so compare the whole-domain integral of x^4 against the gamma function.
        let pot = PotentialSpec::new(Quartic::new(1.0, 0.0, 0.0), -6.0, 6.0).unwrap();
        let f = free_energy(&pot, t1()).unwrap();
        // ∫ exp(-x^4) dx = 2 Γ(5/4)
        let exact = -(2.0f64 * 0.906_402_477_055_477).ln();
        assert!((f - exact).abs() < 1e-9, "{f} vs {exact}");
    }

    #[test]
    fn schedule_interpolation() {
        let s = presets::erasure(0.0, presets::RESIDUAL, t1(), 10.0).unwrap();
        assert_eq!(s.initial(), Quartic::new(1.0, 6.0, 0.0));
        assert_eq!(s.last(), Quartic::new(1.0, 6.0, 0.0));
        // Lower stage spans 1.2 of 3.5 weight units when c0 = 0 and b_hold = b.
        assert_eq!(s.at_fraction(1.2 / 3.5), Quartic::new(1.0, 0.0, 0.0));
        let mid = s.at_fraction(0.6 / 3.5);
        assert!((mid.b - 3.0).abs() < 1e-12);
        assert!(!s.is_frozen());
        assert!(ProtocolSchedule::frozen(Quartic::new(1.0, 6.0, 0.0), 1.0).unwrap().is_frozen());
    }

    #[test]
    fn schedule_json_round_trip_and_validation() {
        let s = presets::erasure(0.4, presets::RESIDUAL, t1(), 10.0).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(ProtocolSchedule::from_json(&text).unwrap(), s);
        assert!(ProtocolSchedule::from_json(r#"{"duration": 1, "waypoints": [{"at": 0, "a": 1, "b": 6, "c": 0}]}"#).is_err());
        assert!(ProtocolSchedule::from_json(
            r#"{"duration": 1, "waypoints": [{"at": 0.5, "a": 1, "b": 6, "c": 0}, {"at": 1, "a": 1, "b": 6, "c": 0}]}"#
        )
        .is_err());
        assert!(ProtocolSchedule::from_json(
            r#"{"duration": -1, "waypoints": [{"at": 0, "a": 1, "b": 6, "c": 0}, {"at": 1, "a": 1, "b": 6, "c": 0}]}"#
        )
        .is_err());
    }

    #[test]
    fn unstable_timestep_rejected() {
        let s = presets::erasure(0.0, presets::RESIDUAL, t1(), 1.0).unwrap();
        let pot = presets::potential(0.0).unwrap();
        let err = simulate_erasure(&pot, &s, &EnsembleParams::new(4, 1, 1e-2)).unwrap_err();
        assert!(matches!(err, Error::UnstableTimestep { .. }));
    }

    #[test]
    fn frozen_protocol_does_no_work() {
        let pot = presets::potential(0.0).unwrap();
        let s = ProtocolSchedule::frozen(pot.lambda, 0.5).unwrap();
        let e = simulate_erasure(&pot, &s, &EnsembleParams::new(64, 3, presets::DT)).unwrap();
        assert!(e.works.iter().all(|&w| w == 0.0));
        let j = jarzynski_check(&e, 0.0, t1(), None, 1);
        assert_eq!(j.z_score, 0.0);
        assert!(!j.flagged);
    }

    #[test]
    fn simulation_is_deterministic() {
        let pot = presets::potential(0.0).unwrap();
        let s = presets::erasure(0.0, presets::RESIDUAL, t1(), 0.5).unwrap();
        let p = EnsembleParams::new(16, 9, presets::DT);
        let a = simulate_erasure(&pot, &s, &p).unwrap();
        let b = simulate_erasure(&pot, &s, &p).unwrap();
        assert_eq!(a.works, b.works);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn csv_layout() {
        let pot = presets::potential(0.0).unwrap();
        let s = ProtocolSchedule::frozen(pot.lambda, 0.01).unwrap();
        let e = simulate_erasure(&pot, &s, &EnsembleParams::new(3, 0, presets::DT)).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "trajectory_index,seed,W,final_basin");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with(&format!("0,{},", derive_seed(0, 0))));
    }
}
