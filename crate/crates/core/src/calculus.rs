//! The shift operator `Sh(alpha)(x) = Phi(x, alpha(x))` and the algebra of
//! shift functions: composition, inversion, the kernel `Sh^{-1}(id)` and
//! the injectivity radius of time-of-flight.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffeo::{diffeo_classify, DiffeoClass};
use crate::error::{Error, Result};
use crate::flow::{classify_trajectory_with, ClassifyOptions, Flow, TrajectoryKind};
use crate::grid::Grid;
use crate::numeric::{distance, jacobian, norm, solve};
use crate::shift::{ScalarField, ShiftFunction};

/// Newton iterations allowed when inverting a shifted map.
pub const NEWTON_MAX_ITER: usize = 50;

/// Safety factor below one half of the minimal period.
pub const INJECTIVITY_FACTOR: f64 = 0.49;

/// Default horizon for period searches.
pub const DEFAULT_HORIZON: f64 = 20.0;

/// A pointwise map of `R^d`.
pub trait PointMap: Send + Sync {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl<F> PointMap for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync,
{
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

/// The map `x -> Phi(x, alpha(x))`.
#[derive(Debug, Clone)]
pub struct ShiftMap {
    flow: Flow,
    alpha: ShiftFunction,
}

impl ShiftMap {
    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    pub fn alpha(&self) -> &ShiftFunction {
        &self.alpha
    }
}

impl PointMap for ShiftMap {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.alpha.try_value(x)?;
        self.flow.evaluate(x, t)
    }
}

pub fn shift_map(flow: &Flow, alpha: &ShiftFunction) -> ShiftMap {
    ShiftMap { flow: flow.clone(), alpha: alpha.clone() }
}

struct Composite {
    alpha: ShiftFunction,
    inner: ShiftMap,
}

impl ScalarField for Composite {
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        let y = self.inner.apply(x)?;
        Ok(self.inner.alpha.try_value(x)? + self.alpha.try_value(&y)?)
    }
}

/// `sigma = beta + alpha o Sh(beta)`, so that `Sh(sigma) = Sh(alpha) o Sh(beta)`.
pub fn compose_shift_functions(alpha: &ShiftFunction, beta: &ShiftFunction, flow: &Flow) -> ShiftFunction {
    let out = ShiftFunction::from_field(Arc::new(Composite { alpha: alpha.clone(), inner: shift_map(flow, beta) }));
    match beta.domain() {
        Some(d) => out.with_domain(d.clone()),
        None => out,
    }
}

/// Pointwise inverse of a shifted map by Newton iteration, seeded from the
/// grid node whose image is closest to the target.
struct Inverse {
    map: ShiftMap,
    seeds: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Inverse {
    fn preimage(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, seed) = self
            .seeds
            .iter()
            .min_by(|a, b| distance(&a.0, x).total_cmp(&distance(&b.0, x)))
            .ok_or_else(|| Error::NonInvertible("empty seed grid".into()))?;
        let mut y = seed.clone();
        let residual = |y: &[f64]| -> Result<Vec<f64>> {
            Ok(self.map.apply(y)?.iter().zip(x).map(|(a, b)| a - b).collect())
        };
        let target = 1e-13 * (1.0 + norm(x));
        let mut r = residual(&y)?;
        for _ in 0..NEWTON_MAX_ITER {
            let rn = norm(&r);
            if rn <= target {
                return Ok(y);
            }
            let jac = jacobian(|p| self.map.apply(p), &y, 1e-6)?;
            let step = solve(&jac, &r)
                .ok_or_else(|| Error::NonInvertible(format!("singular Jacobian of the shifted map at {y:?}")))?;
            // Halve the step until the residual decreases.
            let mut lambda = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(a, d)| a - lambda * d).collect();
                if let Ok(rt) = residual(&trial) {
                    if norm(&rt) < rn || lambda < 1e-3 {
                        y = trial;
                        r = rt;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-4 {
                    return Err(Error::NoConvergence(format!("Newton line search failed at {x:?}")));
                }
            }
        }
        if norm(&r) <= 1e-9 * (1.0 + norm(x)) {
            Ok(y)
        } else {
            Err(Error::NoConvergence(format!(
                "Newton inversion did not converge in {NEWTON_MAX_ITER} steps at {x:?}"
            )))
        }
    }
}

impl ScalarField for Inverse {
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        let y = self.preimage(x)?;
        Ok(-self.map.alpha.try_value(&y)?)
    }
}

/// `sigma = -gamma o g^{-1}` with `g = Sh(gamma)`, so that
/// `Sh(sigma) o Sh(gamma) = id`. Requires `g` to pass the diffeomorphism
/// check on `grid`.
pub fn invert_shift_function(gamma: &ShiftFunction, flow: &Flow, grid: &Grid) -> Result<ShiftFunction> {
    let report = diffeo_classify(flow, gamma, grid, 1e-9)?;
    match report.classification {
        DiffeoClass::OrientationPreserving | DiffeoClass::OrientationReversing => {}
        other => {
            return Err(Error::NonInvertible(format!("shifted map is classified {other:?} on the grid")));
        }
    }
    let map = shift_map(flow, gamma);
    let seeds = grid
        .points()
        .into_par_iter()
        .map(|p| map.apply(&p).map(|img| (img, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftFunction::from_field(Arc::new(Inverse { map, seeds })))
}

/// Largest displacement `|Phi(x, mu(x)) - x|` over the grid.
pub fn kernel_deviation(flow: &Flow, mu: &ShiftFunction, grid: &Grid) -> Result<f64> {
    let map = shift_map(flow, mu);
    let devs = grid
        .points()
        .into_par_iter()
        .map(|p| map.apply(&p).map(|q| distance(&p, &q)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Whether `Sh(mu)` is the identity on the grid to `tol`. Evaluation
/// failures count as non-membership.
pub fn kernel_membership(flow: &Flow, mu: &ShiftFunction, grid: &Grid, tol: f64) -> bool {
    matches!(kernel_deviation(flow, mu, grid), Ok(d) if d <= tol)
}

/// Structure of the kernel as sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum KernelVerdict {
    /// Only `mu = 0`.
    Trivial { reason: String },
    /// All kernel elements are integer multiples of the constant `nu`.
    InfiniteCyclic { nu: f64 },
    /// Generated by a non-constant positive period function.
    FullPeriodicLattice { min_period: f64, max_period: f64 },
    /// The fixed-point set has interior; the kernel consists of all
    /// functions vanishing off that interior and has no finite generator.
    InteriorFixedPoints { count: usize },
    Indeterminate { reason: String },
}

/// Orbit type sampled at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSample {
    pub point: Vec<f64>,
    pub orbit: TrajectoryKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    #[serde(flatten)]
    pub verdict: KernelVerdict,
    /// Largest `|Sh(nu)(x) - x|` on the grid, when a generator was found.
    pub generator_residual: Option<f64>,
    pub evidence: Vec<OrbitSample>,
    #[serde(skip)]
    pub generator: Option<ShiftFunction>,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelOptions {
    pub horizon: f64,
    /// Tolerance of the period search; small so that periods are accurate.
    pub tol: f64,
    pub samples: usize,
    /// Largest multiple of the longest period tried as a common period.
    pub max_multiple: usize,
    /// Acceptance threshold for `|Sh(nu) - id|`.
    pub verify_tol: f64,
    /// Relative tolerance of the integer-multiple test.
    pub rel_tol: f64,
}

impl KernelOptions {
    pub fn new(horizon: f64) -> Self {
        Self { horizon, tol: 1e-9, samples: 4096, max_multiple: 12, verify_tol: 1e-8, rel_tol: 1e-4 }
    }
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self::new(DEFAULT_HORIZON)
    }
}

pub fn kernel_generator(flow: &Flow, grid: &Grid, horizon: f64) -> Result<KernelReport> {
    kernel_generator_with(flow, grid, &KernelOptions::new(horizon))
}

/// Whether `nu` is within `rel` of an integer multiple of `theta`.
pub fn is_multiple_of(nu: f64, theta: f64, rel: f64) -> bool {
    let k = (nu / theta).round();
    k >= 1.0 && (nu - k * theta).abs() <= rel * nu.abs()
}

fn tangent_flow_is_trivial(flow: &Flow, z: &[f64], horizon: f64) -> Result<bool> {
    // Times chosen to avoid accidental common periods.
    for frac in [0.1234567, 0.3718281, 0.6180339] {
        let t = frac * horizon;
        let m = flow.tangent_map(z, t)?;
        let dev = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| (m[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if dev > 1e-6 {
            return Ok(false);
        }
    }
    Ok(true)
}

struct NearestPeriod {
    grid: Grid,
    periods: Vec<f64>,
}

impl ScalarField for NearestPeriod {
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.periods[self.grid.nearest(x)])
    }
}

/// Samples orbit types on the grid and derives the kernel structure:
/// interior fixed points, then non-closed orbits or trivial tangent flows
/// (both force `mu = 0`), then a common period of all closed orbits.
pub fn kernel_generator_with(flow: &Flow, grid: &Grid, opts: &KernelOptions) -> Result<KernelReport> {
    let copts = ClassifyOptions { samples: opts.samples, witness_points: 1, ..ClassifyOptions::new(opts.horizon, opts.tol) };
    let points = grid.points();
    let kinds = points
        .par_iter()
        .map(|p| classify_trajectory_with(flow, p, &copts).map(|info| info.kind))
        .collect::<Result<Vec<_>>>()?;
    let evidence: Vec<OrbitSample> =
        points.iter().zip(&kinds).map(|(p, k)| OrbitSample { point: p.clone(), orbit: *k }).collect();
    let report = |verdict, generator: Option<ShiftFunction>, residual| KernelReport {
        verdict,
        generator_residual: residual,
        evidence: evidence.clone(),
        generator,
    };

    let fixed: Vec<bool> = kinds.iter().map(|k| *k == TrajectoryKind::Fixed).collect();
    let interior_fixed = (0..grid.len())
        .filter(|&i| {
            let nb = grid.neighbours(i);
            fixed[i] && nb.len() == 2 * grid.dim() && nb.iter().all(|&j| fixed[j])
        })
        .count();
    if interior_fixed > 0 {
        return Ok(report(KernelVerdict::InteriorFixedPoints { count: interior_fixed }, None, None));
    }

    if let Some(i) = kinds.iter().position(|k| *k == TrajectoryKind::NonClosed) {
        let reason = format!("no return up to t = {} from {:?}", opts.horizon, points[i]);
        return Ok(report(KernelVerdict::Trivial { reason }, None, None));
    }
    for (i, p) in points.iter().enumerate() {
        if fixed[i] && tangent_flow_is_trivial(flow, p, opts.horizon)? {
            let reason = format!("trivial tangent flow at fixed point {p:?}");
            return Ok(report(KernelVerdict::Trivial { reason }, None, None));
        }
    }

    let periods: Vec<f64> = kinds
        .iter()
        .filter_map(|k| match k {
            TrajectoryKind::Periodic { theta } => Some(*theta),
            _ => None,
        })
        .collect();
    if periods.is_empty() {
        let reason = "no regular grid points".to_string();
        return Ok(report(KernelVerdict::Indeterminate { reason }, None, None));
    }
    let theta_max = periods.iter().copied().fold(0.0, f64::max);
    let theta_min = periods.iter().copied().fold(f64::INFINITY, f64::min);

    for k in 1..=opts.max_multiple {
        let nu = k as f64 * theta_max;
        if periods.iter().all(|&th| is_multiple_of(nu, th, opts.rel_tol)) {
            let generator = ShiftFunction::constant(nu);
            let residual = kernel_deviation(flow, &generator, grid)?;
            if residual <= opts.verify_tol {
                return Ok(report(KernelVerdict::InfiniteCyclic { nu }, Some(generator), Some(residual)));
            }
            let reason = format!("common period {nu} fails verification: |Sh(nu) - id| = {residual:e}");
            return Ok(report(KernelVerdict::Indeterminate { reason }, None, None));
        }
    }

    // No constant common period. A period function that varies without
    // jumps between neighbours generates the kernel on its own.
    let mut per_point = vec![f64::NAN; grid.len()];
    for (i, k) in kinds.iter().enumerate() {
        if let TrajectoryKind::Periodic { theta } = k {
            per_point[i] = *theta;
        }
    }
    for i in 0..grid.len() {
        if fixed[i] {
            let nearby = grid.neighbours(i).into_iter().map(|j| per_point[j]).find(|v| v.is_finite());
            per_point[i] = nearby.unwrap_or(theta_min);
        }
    }
    let jump = (0..grid.len()).any(|i| {
        grid.neighbours(i).into_iter().any(|j| {
            let (a, b) = (per_point[i], per_point[j]);
            let ratio = a.max(b) / a.min(b);
            ratio >= 1.5
        })
    });
    if jump {
        let reason = "periods jump between neighbouring orbits without a common multiple".to_string();
        return Ok(report(KernelVerdict::Indeterminate { reason }, None, None));
    }
    let generator = ShiftFunction::from_field(Arc::new(NearestPeriod { grid: grid.clone(), periods: per_point }));
    let residual = kernel_deviation(flow, &generator, grid)?;
    if residual > opts.verify_tol {
        let reason = format!("period function fails verification: |Sh(nu) - id| = {residual:e}");
        return Ok(report(KernelVerdict::Indeterminate { reason }, None, None));
    }
    Ok(report(
        KernelVerdict::FullPeriodicLattice { min_period: theta_min, max_period: theta_max },
        Some(generator),
        Some(residual),
    ))
}

pub fn injectivity_bound(flow: &Flow, x: &[f64], probe_radius: f64) -> Result<f64> {
    injectivity_bound_with(flow, x, probe_radius, DEFAULT_HORIZON)
}

/// `0.49` times the shortest period found at `x` and at the `2d` axis
/// probes at distance `probe_radius`; `1` when no probe is periodic.
pub fn injectivity_bound_with(flow: &Flow, x: &[f64], probe_radius: f64, horizon: f64) -> Result<f64> {
    let mut probes = vec![x.to_vec()];
    for i in 0..x.len() {
        for sign in [-1.0, 1.0] {
            let mut p = x.to_vec();
            p[i] += sign * probe_radius;
            if flow.in_domain(&p) {
                probes.push(p);
            }
        }
    }
    let copts = ClassifyOptions { witness_points: 1, ..ClassifyOptions::new(horizon, 1e-9) };
    let mut theta_min = f64::INFINITY;
    for p in &probes {
        if let TrajectoryKind::Periodic { theta } = classify_trajectory_with(flow, p, &copts)?.kind {
            theta_min = theta_min.min(theta);
        }
    }
    Ok(if theta_min.is_finite() { INJECTIVITY_FACTOR * theta_min } else { 1.0 })
}
