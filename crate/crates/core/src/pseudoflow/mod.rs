//! Pseudo-gradient fields and the normalized descent flow
//! `d/dt φ_t(x) = -X(φ_t(x)) / |X(φ_t(x))|^2`.
//!
//! The pseudo-gradient is `X = Du`, evaluated off the grid as the gradient
//! of the cubic Hermite interpolant of the sample, so the interpolated
//! potential drops at unit rate along every trajectory. Integration uses the
//! Dormand–Prince 5(4) pair with level crossings located by bisection.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::critgroups::CriticalGroups;
use crate::cubhom::{relative_homology, CubicalComplex, CubicalPair, NodeRegion};
use crate::math;
use crate::symfield::{gradient, hessian, GridDomain, HermiteInterpolant, NodeIndex, Point, ScalarField, VectorField, MAX_DIM};
use crate::symlinalg::op_norm;

/// Relative tolerance of the embedded Runge–Kutta pair.
pub const RTOL: f64 = 1e-8;
/// Level events are located to `1e-9 * oscillation(u)`.
pub const EPS_EVENT_FACTOR: f64 = 1e-9;
/// Tolerance for trajectory invariants, relative to `oscillation(u)`.
pub const EPS_TOL_FACTOR: f64 = 1e-4;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
/// The flow stops where `|X| <= 0.5 h |D^2 u|`, the size of the gradient
/// half a cell away from a nondegenerate critical point.
pub const FLOW_CRIT_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedLevel,
    ReachedTime,
    ReachedCritical,
    LeftDomain,
    StepLimit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ReachedLevel => "reached_level",
            Termination::ReachedTime => "reached_time",
            Termination::ReachedCritical => "reached_critical",
            Termination::LeftDomain => "left_domain",
            Termination::StepLimit => "step_limit",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("start point {0:?} lies outside the domain")]
    StartOutside(Point),
    #[error("trajectory terminated with {0} before reaching the level")]
    Terminated(Termination),
    #[error("seed set is empty")]
    EmptySeed,
    #[error("parameter {0} outside [0, 1]")]
    BadParameter(f64),
    #[error("node {0:?} is not an interior node")]
    NotInterior(NodeIndex),
}

/// `X = Du` together with the data needed to evaluate it off the grid.
#[derive(Debug, Clone)]
pub struct PseudoGradientField {
    base: VectorField,
    source_gradient: VectorField,
    interp: HermiteInterpolant,
    /// Per-node criticality threshold `0.5 h |D^2 u|`, floored.
    eps_crit: Vec<f64>,
    oscillation: f64,
}

/// Builds `X = Du`.
pub fn make_pseudo_gradient(u: &ScalarField) -> PseudoGradientField {
    let d = u.domain();
    let g = gradient(u);
    let h = hessian(u);
    let osc = u.oscillation();
    let floor = 1e-8 * osc / d.diameter();
    let step = d.max_spacing();
    let eps_crit = (0..d.node_count())
        .map(|f| (FLOW_CRIT_FACTOR * step * op_norm(&h.matrix_at(f))).max(floor))
        .collect();
    PseudoGradientField { base: g.clone(), source_gradient: g, interp: HermiteInterpolant::new(u), eps_crit, oscillation: osc }
}

impl PseudoGradientField {
    pub fn base(&self) -> &VectorField {
        &self.base
    }

    pub fn source_gradient(&self) -> &VectorField {
        &self.source_gradient
    }

    pub fn domain(&self) -> &GridDomain {
        self.interp.domain()
    }

    pub fn interpolant(&self) -> &HermiteInterpolant {
        &self.interp
    }

    pub fn oscillation(&self) -> f64 {
        self.oscillation
    }

    pub fn eps_event(&self) -> f64 {
        EPS_EVENT_FACTOR * self.oscillation
    }

    pub fn eps_tol(&self) -> f64 {
        EPS_TOL_FACTOR * self.oscillation
    }

    /// Interpolated potential at `p`.
    pub fn value(&self, p: &[f64]) -> Option<f64> {
        self.interp.value(p)
    }

    /// `X(p)`.
    pub fn vector(&self, p: &[f64]) -> Option<[f64; MAX_DIM]> {
        self.interp.gradient(p)
    }

    /// Criticality threshold at the node nearest `p`.
    pub fn eps_crit_at(&self, p: &[f64]) -> f64 {
        match self.domain().nearest_node(p) {
            Some(n) => self.eps_crit[self.domain().flat(&n)],
            None => 0.0,
        }
    }

    pub fn eps_crit_node(&self, flat: usize) -> f64 {
        self.eps_crit[flat]
    }

    /// Whether `|X(p)| <= eps_crit` (points outside the box count as not
    /// critical).
    pub fn is_critical(&self, p: &[f64]) -> bool {
        match self.vector(p) {
            Some(x) => norm(&x) <= self.eps_crit_at(p),
            None => false,
        }
    }

    /// First interior node, above the criticality threshold, violating
    /// `|X| <= 2|Du|` or `<Du, X> >= |Du|^2`.
    pub fn check_inequalities(&self) -> Option<usize> {
        let d = self.domain();
        let dim = d.dim();
        d.interior_nodes().find(|&f| {
            let g = self.source_gradient.at(f);
            let x = self.base.at(f);
            let ng = self.source_gradient.norm_at(f);
            if ng <= self.eps_crit[f] {
                return false;
            }
            let dot: f64 = (0..dim).map(|a| g[a] * x[a]).sum();
            // slack for the rounding of |Du|^2 through a square root
            self.base.norm_at(f) > 2.0 * ng || dot < ng * ng * (1.0 - 1e-12)
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

fn distance(a: &Point, b: &Point) -> f64 {
    math::sqrt((0..MAX_DIM).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum())
}

/// When to stop integrating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowStop {
    /// At the level `u = a`.
    Level(f64),
    /// At flow time `T`.
    Time(f64),
    /// Only at a critical point, the boundary, or the step budget.
    Exhaust,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub rtol: f64,
    /// Budget of step attempts, accepted or not.
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { rtol: RTOL, max_steps: DEFAULT_MAX_STEPS }
    }
}

/// Accepted steps of one integration, starting at `φ_0(x) = x`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    dim: usize,
    times: Vec<f64>,
    points: Vec<Point>,
    values: Vec<f64>,
    termination: Termination,
}

impl FlowTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> &Point {
        &self.points[0]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Interpolated potential at each recorded point.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the path never left its start.
    pub fn is_empty(&self) -> bool {
        self.points.len() <= 1
    }

    pub fn end_point(&self) -> &Point {
        self.points.last().expect("trajectory holds its start")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds its start")
    }

    pub fn end_value(&self) -> f64 {
        *self.values.last().expect("trajectory holds its start")
    }

    /// `max_i |u(φ_{t_i}) - (u(x) - t_i)|`.
    pub fn identity_defect(&self) -> f64 {
        let v0 = self.values[0];
        self.times.iter().zip(self.values.iter()).map(|(t, v)| (v - (v0 - t)).abs()).fold(0.0, f64::max)
    }

    /// `max_{i<j} (u(φ_{t_j}) - u(φ_{t_i}) + rate (t_j - t_i))`; nonpositive
    /// when the potential drops at least at `rate`.
    pub fn decay_defect(&self, rate: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut lowest = f64::INFINITY;
        for (t, v) in self.times.iter().zip(self.values.iter()) {
            let w = v + rate * t;
            if lowest.is_finite() {
                best = best.max(w - lowest);
            }
            lowest = lowest.min(w);
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }

    /// Over runs of consecutive points satisfying `inside`, the largest
    /// `|φ_{t_j} - φ_{t_i}| - (t_j - t_i) / min_grad`.
    pub fn displacement_excess(&self, inside: impl Fn(&Point) -> bool, min_grad: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut run_start = None;
        for j in 0..=self.points.len() {
            let ok = j < self.points.len() && inside(&self.points[j]);
            match (ok, run_start) {
                (true, None) => run_start = Some(j),
                (false, Some(s)) => {
                    for a in s..j {
                        for b in a + 1..j {
                            let excess = distance(&self.points[a], &self.points[b])
                                - (self.times[b] - self.times[a]) / min_grad;
                            best = best.max(excess);
                        }
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
        if best.is_finite() {
            best
        } else {
            0.0
        }
    }
}

/// The closed shell `inner <= |x - center| <= outer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    pub center: Point,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn contains(&self, p: &Point) -> bool {
        let r = distance(p, &self.center);
        r >= self.inner && r <= self.outer
    }

    /// Smallest `|Du|` over grid nodes within one cell diagonal of the
    /// shell; infinite if none.
    pub fn min_gradient(&self, field: &PseudoGradientField) -> f64 {
        let d = field.domain();
        let diag = math::sqrt(d.spacing().iter().map(|h| h * h).sum());
        let wide = Annulus { center: self.center, inner: self.inner - diag, outer: self.outer + diag };
        (0..d.node_count())
            .filter(|&f| wide.contains(&d.coords_flat(f)))
            .map(|f| field.source_gradient().norm_at(f))
            .fold(f64::INFINITY, f64::min)
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fourth-order weights; the fifth-order ones are the last row of `A`.
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn b5(j: usize) -> f64 {
    if j < 6 {
        A[6][j]
    } else {
        0.0
    }
}

fn rhs(field: &PseudoGradientField, p: &Point) -> Option<Point> {
    let x = field.vector(p)?;
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if n2.is_nan() || n2 <= 0.0 {
        return None;
    }
    let mut out = [0.0; MAX_DIM];
    for k in 0..field.domain().dim() {
        out[k] = -x[k] / n2;
    }
    Some(out)
}

struct Step {
    point: Point,
    /// Right-hand side at `point`.
    slope: Point,
    error: Point,
}

fn dp_step(field: &PseudoGradientField, x: &Point, k1: &Point, h: f64) -> Option<Step> {
    let dim = field.domain().dim();
    let mut k = [[0.0; MAX_DIM]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut p = *x;
        for a in 0..dim {
            p[a] += h * (0..s).map(|j| A[s][j] * k[j][a]).sum::<f64>();
        }
        k[s] = rhs(field, &p)?;
        if s == 6 {
            let mut error = [0.0; MAX_DIM];
            for a in 0..dim {
                error[a] = h * (0..7).map(|j| (b5(j) - B4[j]) * k[j][a]).sum::<f64>();
            }
            return Some(Step { point: p, slope: k[6], error });
        }
    }
    None
}

/// Integrates the normalized descent flow from `x`.
///
/// A start at a critical point yields a one-point trajectory terminated with
/// [`Termination::ReachedCritical`].
pub fn integrate_flow(
    field: &PseudoGradientField,
    x: &[f64],
    stop: FlowStop,
    opts: &FlowOptions,
) -> Result<FlowTrajectory, FlowError> {
    let d = field.domain();
    let dim = d.dim();
    let mut start = [0.0; MAX_DIM];
    start[..dim].copy_from_slice(&x[..dim]);
    let v0 = field.value(&start).ok_or(FlowError::StartOutside(start))?;
    let mut traj =
        FlowTrajectory { dim, times: vec![0.0], points: vec![start], values: vec![v0], termination: Termination::StepLimit };

    if field.is_critical(&start) {
        traj.termination = Termination::ReachedCritical;
        return Ok(traj);
    }
    match stop {
        FlowStop::Level(a) if v0 <= a => {
            traj.termination = Termination::ReachedLevel;
            return Ok(traj);
        }
        FlowStop::Time(t_end) if t_end <= 0.0 => {
            traj.termination = Termination::ReachedTime;
            return Ok(traj);
        }
        _ => {}
    }
    let Some(mut k1) = rhs(field, &start) else {
        traj.termination = Termination::ReachedCritical;
        return Ok(traj);
    };

    let eps_event = field.eps_event();
    let diam = d.diameter();
    let atol = 1e-10 * diam;
    let min_move = 1e-12 * diam;
    let cell = d.min_spacing();
    let mut x = start;
    let mut t = 0.0;
    let mut h = 0.1 * cell / norm(&k1);
    let mut attempts = 0;
    let mut blocked = false;

    while attempts < opts.max_steps {
        attempts += 1;
        let speed = norm(&k1);
        h = h.min(cell / speed);
        let mut clipped = false;
        if let FlowStop::Time(t_end) = stop {
            if t + h >= t_end {
                h = t_end - t;
                clipped = true;
            }
        }
        if h * speed < min_move {
            traj.termination = if blocked { Termination::LeftDomain } else { Termination::ReachedCritical };
            return Ok(traj);
        }
        let Some(step) = dp_step(field, &x, &k1, h).filter(|s| d.contains_point(&s.point[..dim])) else {
            blocked = true;
            h *= 0.5;
            continue;
        };
        let err = (0..dim)
            .map(|a| step.error[a].abs() / (atol + opts.rtol * x[a].abs().max(step.point[a].abs())))
            .fold(0.0, f64::max);
        if err > 1.0 {
            blocked = false;
            h *= (0.9 * math::powf(err, -0.2)).max(0.2);
            continue;
        }
        let v = field.value(&step.point).expect("accepted point lies in the box");

        if let FlowStop::Level(a) = stop {
            if v <= a + eps_event {
                let (s, p, pv) = if (v - a).abs() <= eps_event {
                    (h, step.point, v)
                } else {
                    locate_level(field, &x, &k1, h, a, eps_event)
                };
                traj.times.push(t + s);
                traj.points.push(p);
                traj.values.push(pv);
                traj.termination = Termination::ReachedLevel;
                return Ok(traj);
            }
        }

        t = match stop {
            FlowStop::Time(t_end) if clipped => t_end,
            _ => t + h,
        };
        traj.times.push(t);
        traj.points.push(step.point);
        traj.values.push(v);
        if clipped {
            traj.termination = Termination::ReachedTime;
            return Ok(traj);
        }
        if field.is_critical(&step.point) {
            traj.termination = Termination::ReachedCritical;
            return Ok(traj);
        }
        x = step.point;
        k1 = step.slope;
        blocked = false;
        let grow = if err == 0.0 { 5.0 } else { (0.9 * math::powf(err, -0.2)).min(5.0) };
        h *= grow;
    }
    traj.termination = Termination::StepLimit;
    Ok(traj)
}

/// Bisects the step size of a single step from `x` until the end value is
/// within `eps_event` of `a`.
fn locate_level(field: &PseudoGradientField, x: &Point, k1: &Point, h: f64, a: f64, eps_event: f64) -> (f64, Point, f64) {
    let (mut lo, mut hi) = (0.0, h);
    let mut best = (h, *x, f64::INFINITY);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let Some(step) = dp_step(field, x, k1, mid) else {
            hi = mid;
            continue;
        };
        let Some(v) = field.value(&step.point) else {
            hi = mid;
            continue;
        };
        if (v - a).abs() < (best.2 - a).abs() {
            best = (mid, step.point, v);
        }
        if (v - a).abs() <= eps_event {
            break;
        }
        if v > a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// The time at which the trajectory from `x` reaches the level `a`; zero
/// when `u(x) <= a`.
pub fn arrival_time(field: &PseudoGradientField, x: &[f64], a: f64, opts: &FlowOptions) -> Result<f64, FlowError> {
    let traj = integrate_flow(field, x, FlowStop::Level(a), opts)?;
    match traj.termination() {
        Termination::ReachedLevel => Ok(traj.end_time()),
        other => Err(FlowError::Terminated(other)),
    }
}

/// The deformation `h(t, x)`: identity on `{u <= a}`, otherwise the flow
/// run for `t` times the arrival time at level `a`.
pub fn retract(field: &PseudoGradientField, x: &[f64], t: f64, a: f64, opts: &FlowOptions) -> Result<Point, FlowError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::BadParameter(t));
    }
    let dim = field.domain().dim();
    let mut p = [0.0; MAX_DIM];
    p[..dim].copy_from_slice(&x[..dim]);
    let v = field.value(&p).ok_or(FlowError::StartOutside(p))?;
    if t == 0.0 || v <= a {
        return Ok(p);
    }
    if t == 1.0 {
        let traj = integrate_flow(field, &p, FlowStop::Level(a), opts)?;
        return match traj.termination() {
            Termination::ReachedLevel => Ok(*traj.end_point()),
            other => Err(FlowError::Terminated(other)),
        };
    }
    let ta = arrival_time(field, &p, a, opts)?;
    let traj = integrate_flow(field, &p, FlowStop::Time(t * ta), opts)?;
    Ok(*traj.end_point())
}

/// Nodes reached by trajectories from a seed set.
#[derive(Debug, Clone, PartialEq)]
pub struct Saturation {
    /// Node mask over the whole grid.
    pub nodes: Vec<bool>,
    /// The step budget ran out; `nodes` is partial.
    pub exhausted: bool,
    pub trajectories: usize,
}

impl Saturation {
    pub fn count(&self) -> usize {
        self.nodes.iter().filter(|&&b| b).count()
    }
}

/// Marks the nodes of the smallest closed grid cell containing `p`;
/// coordinates within `1e-9` cells of a grid plane snap onto it.
fn mark_cell(d: &GridDomain, p: &Point, mask: &mut [bool]) {
    let dim = d.dim();
    let mut choices = [[0usize; 2]; MAX_DIM];
    let mut counts = [1usize; MAX_DIM];
    for a in 0..dim {
        let n = d.shape()[a];
        let s = (p[a] - d.bounds()[a].0) / d.spacing()[a];
        let r = math::round(s);
        if (s - r).abs() <= 1e-9 {
            choices[a][0] = (r.max(0.0) as usize).min(n - 1);
        } else {
            let f = (math::floor(s).max(0.0) as usize).min(n - 2);
            choices[a] = [f, f + 1];
            counts[a] = 2;
        }
    }
    for corner in 0..(1usize << dim) {
        let mut idx = [0usize; MAX_DIM];
        let mut valid = true;
        for a in 0..dim {
            let bit = (corner >> a) & 1;
            if bit >= counts[a] {
                valid = false;
                break;
            }
            idx[a] = choices[a][bit];
        }
        if valid {
            mask[d.flat(&idx)] = true;
        }
    }
}

/// Adds every node within one cell (Chebyshev) of a marked node.
pub fn dilate(d: &GridDomain, mask: &[bool]) -> Vec<bool> {
    let dim = d.dim();
    let mut out = mask.to_vec();
    for f in 0..d.node_count() {
        if !mask[f] {
            continue;
        }
        let idx = d.unflat(f);
        for offset in 0..3usize.pow(dim as u32) {
            let mut n = idx;
            let mut code = offset;
            let mut valid = true;
            for a in 0..dim {
                let shift = code % 3;
                code /= 3;
                match shift {
                    0 if n[a] == 0 => valid = false,
                    0 => n[a] -= 1,
                    2 => n[a] += 1,
                    _ => {}
                }
            }
            if valid && d.in_grid(&n) {
                out[d.flat(&n)] = true;
            }
        }
    }
    out
}

/// Grid cells visited by trajectories launched from the seed nodes, run
/// until they terminate, dilated by one cell.
///
/// `budget` caps the total number of step attempts over all trajectories.
pub fn flow_saturate(
    field: &PseudoGradientField,
    seed: &[usize],
    budget: usize,
    opts: &FlowOptions,
) -> Result<Saturation, FlowError> {
    if seed.is_empty() {
        return Err(FlowError::EmptySeed);
    }
    let d = field.domain();
    let half = 0.5 * d.min_spacing();
    let mut seeds = seed.to_vec();
    seeds.sort_unstable();
    seeds.dedup();
    let mut mask = vec![false; d.node_count()];
    let mut used = 0usize;
    let mut exhausted = false;
    let mut trajectories = 0;
    for &f in &seeds {
        mask[f] = true;
        if used >= budget {
            exhausted = true;
            break;
        }
        let local = FlowOptions { max_steps: budget - used, ..*opts };
        let traj = integrate_flow(field, &d.coords_flat(f), FlowStop::Exhaust, &local)?;
        trajectories += 1;
        used += traj.len();
        for w in traj.points().windows(2) {
            let pieces = math::ceil(distance(&w[0], &w[1]) / half).max(1.0) as usize;
            for i in 0..=pieces {
                let s = i as f64 / pieces as f64;
                let mut p = [0.0; MAX_DIM];
                for k in 0..MAX_DIM {
                    p[k] = w[0][k] + s * (w[1][k] - w[0][k]);
                }
                mark_cell(d, &p, &mut mask);
            }
        }
        if traj.termination() == Termination::StepLimit {
            exhausted = true;
            break;
        }
    }
    Ok(Saturation { nodes: dilate(d, &mask), exhausted, trajectories })
}

/// Critical groups at `x0` computed as `H_k(W^ε, W^{-ε})`, where `W` is the
/// flow saturation of the grid ball of `seed_radius` and `W^c` its part
/// where `u - u(x0) <= c`.
pub fn critical_groups_via_flow(
    u: &ScalarField,
    x0: &NodeIndex,
    seed_radius: f64,
    eps: f64,
    budget: usize,
) -> Result<(CriticalGroups, Saturation), FlowError> {
    let d = u.domain();
    if !d.in_grid(x0) || !d.is_interior(x0) {
        return Err(FlowError::NotInterior(*x0));
    }
    let field = make_pseudo_gradient(u);
    let ball = NodeRegion::Ball { center: *x0, radius: seed_radius }.to_mask(d);
    let seed: Vec<usize> = (0..d.node_count()).filter(|&f| ball[f]).collect();
    let sat = flow_saturate(&field, &seed, budget, &FlowOptions::default())?;
    let c = u.value(x0);
    let upper: Vec<bool> = (0..d.node_count()).map(|f| sat.nodes[f] && u.at(f) - c <= eps).collect();
    let lower: Vec<bool> = (0..d.node_count()).map(|f| sat.nodes[f] && u.at(f) - c <= -eps).collect();
    let pair = CubicalPair::new(CubicalComplex::from_vertex_mask(d, &upper), CubicalComplex::from_vertex_mask(d, &lower))
        .expect("a smaller sublevel set is a subcomplex");
    Ok((CriticalGroups(relative_homology(&pair)), sat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubhom::HomologyResult;
    use crate::symfield::{gallery_entry, sample};

    fn field(name: &str) -> PseudoGradientField {
        let e = gallery_entry(name).unwrap();
        make_pseudo_gradient(&sample(&e, &e.default_domain()).unwrap())
    }

    #[test]
    fn pseudo_gradient_of_quadratic_is_position() {
        let f = field("quad-min");
        for p in [[0.31, -0.2, 0.0], [-0.77, 0.05, 0.0]] {
            let x = f.vector(&p).unwrap();
            assert!((x[0] - p[0]).abs() < 1e-12 && (x[1] - p[1]).abs() < 1e-12);
        }
        assert_eq!(f.check_inequalities(), None);
        let a = field("affine");
        let x = a.vector(&[0.123, -0.456, 0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn radial_flow_reaches_level() {
        let f = field("quad-min");
        let traj = integrate_flow(&f, &[0.5, 0.0], FlowStop::Level(0.05), &FlowOptions::default()).unwrap();
        assert_eq!(traj.termination(), Termination::ReachedLevel);
        assert!((traj.end_value() - 0.05).abs() <= f.eps_event());
        assert!((traj.end_time() - 0.075).abs() < 1e-6);
        assert!(traj.identity_defect() < 1e-9);
        assert!(traj.end_point()[1].abs() < 1e-12);
    }

    #[test]
    fn affine_flow_is_a_unit_speed_segment() {
        let f = field("affine");
        let traj = integrate_flow(&f, &[0.2, 0.1], FlowStop::Time(0.3), &FlowOptions::default()).unwrap();
        assert_eq!(traj.termination(), Termination::ReachedTime);
        let end = traj.end_point();
        assert!((end[0] - (0.2 - 0.3)).abs() < 1e-10);
        assert!((end[1] - 0.1).abs() < 1e-12);
        assert_eq!(traj.end_time(), 0.3);
    }

    #[test]
    fn flow_from_a_critical_point_is_empty() {
        let f = field("quad-saddle");
        let traj = integrate_flow(&f, &[0.0, 0.0], FlowStop::Exhaust, &FlowOptions::default()).unwrap();
        assert_eq!(traj.termination(), Termination::ReachedCritical);
        assert!(traj.is_empty());
    }

    #[test]
    fn arrival_times() {
        let f = field("quad-min");
        let opts = FlowOptions::default();
        let x = [0.5, 0.0];
        let t = arrival_time(&f, &x, 0.025, &opts).unwrap();
        assert!((t - 0.1).abs() < 1e-6);
        assert_eq!(arrival_time(&f, &x, 0.125, &opts).unwrap(), 0.0);
        assert_eq!(arrival_time(&f, &x, -0.1, &opts), Err(FlowError::Terminated(Termination::ReachedCritical)));
        // strictly decreasing in the level
        let t1 = arrival_time(&f, &x, 0.06, &opts).unwrap();
        let t2 = arrival_time(&f, &x, 0.04, &opts).unwrap();
        assert!(t1 < t2 && t2 < t);
    }

    #[test]
    fn retraction_examples() {
        let f = field("quad-min");
        let opts = FlowOptions::default();
        let x = [0.5, 0.0];
        assert_eq!(retract(&f, &x, 0.0, 0.045, &opts).unwrap(), [0.5, 0.0, 0.0]);
        assert_eq!(retract(&f, &[0.1, 0.1], 0.7, 0.045, &opts).unwrap(), [0.1, 0.1, 0.0]);
        let end = retract(&f, &x, 1.0, 0.045, &opts).unwrap();
        assert!((end[0] - 0.3).abs() < 1e-4 && end[1].abs() < 1e-4);
        let mid = retract(&f, &x, 0.5, 0.045, &opts).unwrap();
        let v = f.value(&mid).unwrap();
        assert!((v - (0.125 - 0.5 * 0.08)).abs() < 1e-6);
        assert_eq!(retract(&f, &x, 1.5, 0.045, &opts), Err(FlowError::BadParameter(1.5)));
    }

    #[test]
    fn decay_and_displacement_bounds() {
        let f = field("quartic-saddle");
        let traj = integrate_flow(&f, &[0.6, 0.3], FlowStop::Exhaust, &FlowOptions::default()).unwrap();
        assert!(traj.len() > 3);
        assert!(traj.identity_defect() <= f.eps_tol());
        assert!(traj.decay_defect(0.25) <= f.eps_tol());
        assert!(traj.decay_defect(1.0) <= f.eps_tol());
        let shell = Annulus { center: [0.0; 3], inner: 0.3, outer: 0.9 };
        let m = shell.min_gradient(&f);
        assert!(traj.displacement_excess(|p| shell.contains(p), m) <= f.eps_tol());
        assert!(traj.end_time() <= 4.0 * f.oscillation());
    }

    #[test]
    fn saturation_of_a_convex_ball_is_its_closure() {
        let e = gallery_entry("quad-min").unwrap();
        let d = GridDomain::cube(2, -1.0, 1.0, 33).unwrap();
        let f = make_pseudo_gradient(&sample(&e, &d).unwrap());
        let ball = NodeRegion::Ball { center: [16, 16, 0], radius: 0.25 }.to_mask(&d);
        let seed: Vec<usize> = (0..d.node_count()).filter(|&i| ball[i]).collect();
        let sat = flow_saturate(&f, &seed, 1_000_000, &FlowOptions::default()).unwrap();
        assert!(!sat.exhausted);
        assert_eq!(sat.nodes, dilate(&d, &ball));
    }

    #[test]
    fn saturation_of_affine_flow_is_a_tube() {
        let f = field("affine");
        let d = f.domain().clone();
        let (i0, j0) = (40, 20);
        let sat = flow_saturate(&f, &[d.flat(&[i0, j0, 0])], 100_000, &FlowOptions::default()).unwrap();
        for idx in d.nodes() {
            let expected = idx[0] <= i0 + 1 && idx[1].abs_diff(j0) <= 1;
            assert_eq!(sat.nodes[d.flat(&idx)], expected, "{idx:?}");
        }
        assert_eq!(flow_saturate(&f, &[], 10, &FlowOptions::default()), Err(FlowError::EmptySeed));
        let partial = flow_saturate(&f, &[d.flat(&[i0, j0, 0])], 3, &FlowOptions::default()).unwrap();
        assert!(partial.exhausted);
    }

    #[test]
    fn flow_route_matches_definition_on_quadratics() {
        for (name, k) in [("quad-min", 0), ("quad-saddle", 1), ("quad-max", 2)] {
            let e = gallery_entry(name).unwrap();
            let d = GridDomain::cube(2, -1.0, 1.0, 33).unwrap();
            let u = sample(&e, &d).unwrap();
            let h = d.max_spacing();
            let (g, sat) = critical_groups_via_flow(&u, &[16, 16, 0], 8.0 * h, 2.0 * h * h, 10_000_000).unwrap();
            assert!(!sat.exhausted);
            assert_eq!(g.0, HomologyResult::delta(2, k), "{name}");
        }
    }
}
