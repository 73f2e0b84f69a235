//! Recovering the shift function `alpha` from a map `h = Sh(alpha)`.
//!
//! Near the fixed point of the three irreducible linear flows the shift is
//! read off the Hadamard quotient `phi` of `h` (`h(x) = x phi(x)`):
//!
//! * `x' = lambda x`: `alpha = ln(phi) / lambda`;
//! * rotation `(a, b)`, `a != 0`: `alpha = ln|phi|^2 / (2a)`;
//! * rotation `(0, b)`: `alpha = arg(phi) / b + 2 pi k / b`;
//! * `(x, y) -> (x + t y, y)`: `alpha` is the quotient of `h_1 - x` by `y`.
//!
//! Every recovery checks the round trip `Sh(alpha) = h` on the grid before
//! returning.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{injectivity_bound, PointMap};
use crate::diffeo::{csv_error, fmt_float};
use crate::error::{Error, Result};
use crate::flow::{Flow, RegularExtension};
use crate::grid::Grid;
use crate::jordan::{Block, JordanSpec};
use crate::numeric::{brent_root, distance, dot, five_point_derivative, norm, GaussLegendre};
use crate::shift::{ScalarField, ShiftFunction};

pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Step of the five-point derivative inside the Hadamard quotient.
pub const HADAMARD_FD_STEP: f64 = 1e-3;

/// Default round-trip tolerance for closed-form recoveries.
pub const ROUND_TRIP_TOL: f64 = 1e-8;

/// Round-trip tolerance of the extension lift.
pub const EXTENSION_TOL: f64 = 1e-6;

/// Residual accepted by time-of-flight recovery.
pub const TIME_OF_FLIGHT_TOL: f64 = 1e-6;

/// Wraps a closure as a shareable map.
pub fn map_fn<F>(f: F) -> Arc<dyn PointMap>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
{
    Arc::new(f)
}

/// `phi(x) = int_0^1 f'(t x) dt`, so that `f(x) = x phi(x)` when `f(0) = 0`.
/// The derivative is a five-point difference with step `1e-3`.
pub fn hadamard_quotient<F: Fn(f64) -> f64>(f: F, x: f64, quad_order: usize) -> f64 {
    hadamard_quotient_with_derivative(|u| five_point_derivative(&f, u, HADAMARD_FD_STEP), x, quad_order)
}

/// Hadamard quotient from an analytic derivative `df`.
pub fn hadamard_quotient_with_derivative<D: Fn(f64) -> f64>(df: D, x: f64, quad_order: usize) -> f64 {
    GaussLegendre::new(quad_order).integrate(0.0, 1.0, |t| df(t * x))
}

/// Planar Hadamard quotient: the complex `phi` with `h(z) = z phi(z)`,
/// identifying `R^2` with `C`. Integrates the directional derivative of `h`
/// along `u = z / |z|` over the ray; at `z = 0` uses `u = 1`.
pub fn complex_hadamard_quotient<H>(h: H, z: &[f64], quad_order: usize) -> Result<Complex64>
where
    H: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let zc = Complex64::new(z[0], z[1]);
    let r = zc.norm();
    let u = if r == 0.0 { Complex64::new(1.0, 0.0) } else { zc / r };
    let along = |s: f64| -> Result<Complex64> {
        let v = h(&[s * u.re, s * u.im])?;
        Ok(Complex64::new(v[0], v[1]))
    };
    let step = HADAMARD_FD_STEP;
    let derivative = |s: f64| -> Result<Complex64> {
        Ok((along(s - 2.0 * step)? - 8.0 * along(s - step)? + 8.0 * along(s + step)? - along(s + 2.0 * step)?)
            / (12.0 * step))
    };
    let rule = GaussLegendre::new(quad_order);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        acc += w * derivative(0.5 * (x + 1.0) * r)?;
    }
    Ok(0.5 * acc / u)
}

/// The irreducible linear flows, each in its own coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinimalFlow {
    /// `x -> e^{lambda t} x`.
    Scalar { lambda: f64 },
    /// `z -> e^{(a + i b) t} z`.
    Rotation { alpha: f64, beta: f64 },
    /// `(x, y) -> (x + t y, y)`.
    Shear,
}

impl MinimalFlow {
    /// The minimal flow generated by a single-block spec, and whether its
    /// coordinates are swapped relative to the spec (the nilpotent block
    /// `J_2(0)` acts as `(u, v) -> (u, v + t u)`).
    pub fn from_spec(spec: &JordanSpec) -> Result<(Self, bool)> {
        match spec.blocks() {
            [Block::Real { lambda, p: 1 }] if *lambda != 0.0 => Ok((MinimalFlow::Scalar { lambda: *lambda }, false)),
            [Block::Rotation { alpha, beta, p: 1 }] => Ok((MinimalFlow::Rotation { alpha: *alpha, beta: *beta }, false)),
            [Block::Real { lambda, p: 2 }] if *lambda == 0.0 => Ok((MinimalFlow::Shear, true)),
            _ => Err(Error::InvalidSpec(
                "closed-form recovery needs a single block: real lambda != 0 (p = 1), rotation (p = 1) or real 0 (p = 2)"
                    .into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MinimalFlow::Scalar { .. } => 1,
            _ => 2,
        }
    }

    fn evaluate(&self, x: &[f64], t: f64) -> Vec<f64> {
        match *self {
            MinimalFlow::Scalar { lambda } => vec![(lambda * t).exp() * x[0]],
            MinimalFlow::Rotation { alpha, beta } => {
                let w = (Complex64::new(alpha, beta) * t).exp() * Complex64::new(x[0], x[1]);
                vec![w.re, w.im]
            }
            MinimalFlow::Shear => vec![x[0] + t * x[1], x[1]],
        }
    }

    /// Period of the orbits when the flow is a pure rotation.
    fn branch_period(&self) -> Option<f64> {
        match *self {
            MinimalFlow::Rotation { alpha, beta } if alpha == 0.0 => Some(2.0 * PI / beta.abs()),
            _ => None,
        }
    }

    /// Principal shift value at `x` for the factor map `f`, plus `|phi|`.
    fn principal<F>(&self, f: F, x: &[f64], order: usize) -> Result<(f64, Option<f64>)>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let origin = f(&vec![0.0; self.dim()])?;
        if let MinimalFlow::Shear = self {
            let here = f(x)?;
            if (here[1] - x[1]).abs() > 1e-10 {
                return Err(Error::NotAShift(format!("second coordinate not preserved at {x:?}")));
            }
            let b = |y: f64| f(&[x[0], y]).map(|v| v[0] - x[0]).unwrap_or(f64::NAN);
            if b(0.0).abs() > 1e-12 {
                return Err(Error::NotAShift(format!("h moves the fixed point ({}, 0)", x[0])));
            }
            let sigma = hadamard_quotient(b, x[1], order);
            return finite(sigma, x).map(|s| (s, None));
        }
        if norm(&origin) > 1e-12 {
            return Err(Error::NotAShift("h does not fix the origin".into()));
        }
        match *self {
            MinimalFlow::Scalar { lambda } => {
                let phi = hadamard_quotient(|u| f(&[u]).map(|v| v[0]).unwrap_or(f64::NAN), x[0], order);
                if !(phi > 0.0) {
                    return Err(Error::NotAShift(format!("quotient {phi} is not positive at {x:?}")));
                }
                finite(phi.ln() / lambda, x).map(|s| (s, Some(phi)))
            }
            MinimalFlow::Rotation { alpha, beta } => {
                let phi = complex_hadamard_quotient(&f, x, order)?;
                let modulus = phi.norm();
                if !(modulus > 0.0) || !modulus.is_finite() {
                    return Err(Error::NotAShift(format!("quotient vanishes at {x:?}")));
                }
                let sigma = if alpha != 0.0 {
                    modulus.powi(2).ln() / (2.0 * alpha)
                } else {
                    let mut arg = phi.arg();
                    // Keep the principal value in (-pi, pi].
                    if arg <= -PI + 1e-12 {
                        arg = PI;
                    }
                    arg / beta
                };
                finite(sigma, x).map(|s| (s, Some(modulus)))
            }
            MinimalFlow::Shear => unreachable!(),
        }
    }
}

fn finite(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NotAShift(format!("recovered shift is not finite at {x:?}")))
    }
}

/// One grid row of a recovery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySample {
    pub point: Vec<f64>,
    pub alpha: f64,
    pub residual: f64,
}

/// A recovered shift function with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveredShift {
    #[serde(skip)]
    pub alpha: ShiftFunction,
    /// Branch index at the anchor (pure rotations only).
    pub branch: Option<i64>,
    /// Largest `|Sh(alpha)(x) - h(x)|` over the grid.
    pub max_residual: f64,
    /// Empirical range of `|phi|` over the grid, when a quotient is used.
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    pub samples: Vec<RecoverySample>,
}

impl RecoveredShift {
    /// Columns: coordinates, `alpha`, `residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.samples.first().map_or(0, |s| s.point.len());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.push("alpha".into());
        header.push("residual".into());
        w.write_record(&header).map_err(csv_error)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.point.iter().map(|v| fmt_float(*v)).collect();
            row.push(fmt_float(s.alpha));
            row.push(fmt_float(s.residual));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

/// Recovery of a shift along a minimal factor, with the remaining
/// coordinates held as parameters.
struct Engine {
    kind: MinimalFlow,
    h: Arc<dyn PointMap>,
    /// Factor dimension; coordinates `m..` are fiber parameters.
    m: usize,
    swap: bool,
    order: usize,
}

impl Engine {
    fn principal(&self, p: &[f64]) -> Result<(f64, Option<f64>)> {
        let (x, y) = p.split_at(self.m);
        let swap = |v: &[f64]| -> Vec<f64> {
            if self.swap {
                vec![v[1], v[0]]
            } else {
                v.to_vec()
            }
        };
        let factor = |xp: &[f64]| -> Result<Vec<f64>> {
            let mut q = swap(xp);
            q.extend_from_slice(y);
            let img = self.h.apply(&q)?;
            Ok(swap(&img[..self.m]))
        };
        self.kind.principal(factor, &swap(x), self.order)
    }
}

/// Off-grid evaluation: principal value, with the branch of the pure
/// rotation taken from the nearest unwrapped grid node.
struct RecoveredField {
    engine: Engine,
    grid: Grid,
    unwrapped: Vec<f64>,
}

impl ScalarField for RecoveredField {
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        let (s, _) = self.engine.principal(x)?;
        Ok(match self.engine.kind.branch_period() {
            Some(period) => {
                let reference = self.unwrapped[self.grid.nearest(x)];
                s + period * ((reference - s) / period).round()
            }
            None => s,
        })
    }
}

/// Evaluates the principal values on the grid, unwraps the pure-rotation
/// branch from the anchor and validates the round trip.
fn recover_on_grid<R>(engine: Engine, grid: &Grid, anchor: Option<&[f64]>, round_trip: R, tol: f64) -> Result<RecoveredShift>
where
    R: Fn(&[f64], f64) -> Result<Vec<f64>> + Sync,
{
    let points = grid.points();
    let principal = points.par_iter().map(|p| engine.principal(p)).collect::<Result<Vec<_>>>()?;
    let phis: Vec<f64> = principal.iter().filter_map(|(_, phi)| *phi).collect();
    let phi_min = phis.iter().copied().reduce(f64::min);
    let phi_max = phis.iter().copied().reduce(f64::max);
    let mut values: Vec<f64> = principal.iter().map(|(s, _)| *s).collect();

    let mut branch = None;
    if let Some(period) = engine.kind.branch_period() {
        let center = grid.domain.center();
        let start = grid.nearest(anchor.unwrap_or(&center));
        let k0 = (-values[start] / period).ceil();
        let k0 = if values[start] + k0 * period >= period { k0 - 1.0 } else { k0 };
        branch = Some(k0 as i64);
        values[start] += k0 * period;
        let mut seen = vec![false; grid.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in grid.neighbours(i) {
                if seen[j] {
                    continue;
                }
                let k = ((values[i] - values[j]) / period).round();
                let v = values[j] + k * period;
                if (v - values[i]).abs() > 0.25 * period {
                    return Err(Error::Branch(format!(
                        "no continuous branch between {:?} and {:?}",
                        points[i], points[j]
                    )));
                }
                values[j] = v;
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }

    let samples = points
        .par_iter()
        .zip(&values)
        .map(|(p, &a)| {
            let target = engine.h.apply(p)?;
            let got = round_trip(p, a)?;
            Ok(RecoverySample { point: p.clone(), alpha: a, residual: distance(&got, &target) })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    if !(max_residual <= tol) {
        return Err(Error::NotAShift(format!("round trip |Sh(alpha) - h| = {max_residual:e} exceeds {tol:e}")));
    }
    let alpha = ShiftFunction::from_field(Arc::new(RecoveredField { engine, grid: grid.clone(), unwrapped: values }))
        .with_domain(grid.domain.clone());
    Ok(RecoveredShift { alpha, branch, max_residual, phi_min, phi_max, samples })
}

fn minimal_engine(kind: MinimalFlow, h: Arc<dyn PointMap>, swap: bool) -> Engine {
    Engine { kind, h, m: kind.dim(), swap, order: DEFAULT_QUAD_ORDER }
}

fn require_dim(grid: &Grid, dim: usize) -> Result<()> {
    crate::error::check_dim(dim, grid.dim())
}

/// `alpha = ln(phi) / lambda` for `x' = lambda x`.
pub fn recover_shift_linear1d(h: Arc<dyn PointMap>, lambda: f64, grid: &Grid) -> Result<RecoveredShift> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidSpec("lambda must be finite and nonzero".into()));
    }
    require_dim(grid, 1)?;
    let kind = MinimalFlow::Scalar { lambda };
    recover_on_grid(minimal_engine(kind, h, false), grid, None, |p, a| Ok(kind.evaluate(p, a)), ROUND_TRIP_TOL)
}

/// Planar rotation flow with rate `alpha + i beta`. For `alpha = 0` the
/// branch is continued from `anchor` (default: domain center), where the
/// value is normalized into `[0, 2 pi / |beta|)`.
pub fn recover_shift_rotation(
    h: Arc<dyn PointMap>,
    alpha: f64,
    beta: f64,
    grid: &Grid,
    anchor: Option<&[f64]>,
) -> Result<RecoveredShift> {
    if beta == 0.0 || !beta.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidSpec("rotation needs finite alpha and nonzero beta".into()));
    }
    require_dim(grid, 2)?;
    let kind = MinimalFlow::Rotation { alpha, beta };
    recover_on_grid(minimal_engine(kind, h, false), grid, anchor, |p, a| Ok(kind.evaluate(p, a)), ROUND_TRIP_TOL)
}

/// Shear flow `(x, y) -> (x + t y, y)`: `alpha` is the Hadamard quotient
/// in `y` of `h_1(x, y) - x`.
pub fn recover_shift_j20(h: Arc<dyn PointMap>, grid: &Grid) -> Result<RecoveredShift> {
    require_dim(grid, 2)?;
    let kind = MinimalFlow::Shear;
    recover_on_grid(minimal_engine(kind, h, false), grid, None, |p, a| Ok(kind.evaluate(p, a)), ROUND_TRIP_TOL)
}

/// Dispatches to the closed form matching a single-block linear flow.
/// The block `J_2(0)` acts as `(u, v) -> (u, v + t u)` and is handled by
/// swapping coordinates.
pub fn recover_shift_minimal(spec: &JordanSpec, h: Arc<dyn PointMap>, grid: &Grid) -> Result<RecoveredShift> {
    let (kind, swap) = MinimalFlow::from_spec(spec)?;
    require_dim(grid, kind.dim())?;
    let flow = Flow::linear(spec.clone());
    recover_on_grid(minimal_engine(kind, h, swap), grid, None, |p, a| flow.evaluate(p, a), ROUND_TRIP_TOL)
}

/// Recovers the shift of a regular extension from its factor: the factor
/// formula is applied to `x -> p_m h(x, y)` with the fiber point `y` as a
/// parameter, then validated against the full flow.
pub fn recover_shift_regular_extension(flow: &Flow, h: Arc<dyn PointMap>, grid: &Grid) -> Result<RecoveredShift> {
    let ext: &RegularExtension = match flow {
        Flow::Extension(ext) => ext,
        _ => return Err(Error::InvalidSpec("flow is not a regular extension".into())),
    };
    let (kind, swap) = MinimalFlow::from_spec(&ext.factor)?;
    require_dim(grid, flow.dim())?;
    let engine = Engine { kind, h, m: kind.dim(), swap, order: DEFAULT_QUAD_ORDER };
    recover_on_grid(engine, grid, None, |p, a| flow.evaluate(p, a), EXTENSION_TOL).map_err(|e| match e {
        Error::NotAShift(msg) => Error::NotARegularExtensionShift(msg),
        other => other,
    })
}

/// Local minima of `t -> |Phi(x, t) - target|` on `[-window, window]`
/// whose residual is within `1e-6`, sorted by time.
pub fn time_of_flight_candidates(flow: &Flow, x: &[f64], target: &[f64], window: f64) -> Result<Vec<f64>> {
    const SAMPLES: usize = 512;
    let g = |t: f64| -> f64 {
        flow.evaluate(x, t)
            .and_then(|p| {
                let f = flow.generator(&p)?;
                let d: Vec<f64> = p.iter().zip(target).map(|(a, b)| a - b).collect();
                Ok(dot(&d, &f))
            })
            .unwrap_or(f64::NAN)
    };
    let residual = |t: f64| flow.evaluate(x, t).map(|p| distance(&p, target)).unwrap_or(f64::INFINITY);
    let dt = 2.0 * window / SAMPLES as f64;
    let mut roots = Vec::new();
    let mut prev = g(-window);
    for k in 1..=SAMPLES {
        let t1 = -window + k as f64 * dt;
        let g1 = g(t1);
        if prev < 0.0 && g1 >= 0.0 {
            let t0 = t1 - dt;
            if let Ok(t) = brent_root(g, t0, t1, 1e-15, 200) {
                roots.push(t);
            }
        }
        prev = g1;
    }
    // A minimum sitting exactly on the window edge has no sign change.
    roots.extend([-window, window]);
    let mut hits: Vec<f64> = roots.into_iter().filter(|&t| residual(t) <= TIME_OF_FLIGHT_TOL).collect();
    hits.sort_by(f64::total_cmp);
    hits.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);
    Ok(hits)
}

/// Time of flight from `x` to `h(x)` within the injectivity bound of `x`.
pub fn recover_shift_regular_point(flow: &Flow, h: &dyn PointMap, x: &[f64]) -> Result<f64> {
    if norm(&flow.generator(x)?) <= 1e-12 {
        return Err(Error::NotOnLocalOrbit(format!("{x:?} is a fixed point")));
    }
    let target = h.apply(x)?;
    let delta = injectivity_bound(flow, x, 0.05)?;
    let hits = time_of_flight_candidates(flow, x, &target, delta)?;
    let residual = |t: f64| flow.evaluate(x, t).map(|p| distance(&p, &target)).unwrap_or(f64::INFINITY);
    hits.into_iter()
        .min_by(|a, b| residual(*a).total_cmp(&residual(*b)))
        .ok_or_else(|| Error::NotOnLocalOrbit(format!("h({x:?}) is not reached within |t| <= {delta}")))
}

/// `int_z^hz dx / x^n` by composite Gauss-Legendre quadrature.
pub fn counterexample_quadrature(n: u32, z: f64, hz: f64) -> f64 {
    GaussLegendre::new(DEFAULT_QUAD_ORDER).integrate_composite(z, hz, 16, |x| x.powi(-(n as i32)))
}

/// Time to travel from `z` to `h(z)` under `x' = x^n`:
/// `(h^{n-1} - z^{n-1}) / ((n - 1) z^{n-1} h^{n-1})`, checked against
/// quadrature of the time integral.
pub fn counterexample_alpha_xn<H: Fn(f64) -> f64>(h: H, n: u32, z: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidSpec("exponent must be at least 2".into()));
    }
    if z == 0.0 || !z.is_finite() {
        return Err(Error::InvalidSpec("z must be finite and nonzero".into()));
    }
    let hz = h(z);
    if !hz.is_finite() || hz == 0.0 || hz.signum() != z.signum() {
        return Err(Error::SignMismatch { z, hz });
    }
    let k = (n - 1) as i32;
    let (zk, hk) = (z.powi(k), hz.powi(k));
    let alpha = (hk - zk) / ((n - 1) as f64 * zk * hk);
    let quad = counterexample_quadrature(n, z, hz);
    if (alpha - quad).abs() > 1e-8 * alpha.abs().max(1.0) {
        return Err(Error::NoConvergence(format!("closed form {alpha} disagrees with quadrature {quad}")));
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::shift_map;
    use crate::grid::Domain;
    use approx::assert_abs_diff_eq;

    fn square(n: usize) -> Grid {
        Grid::uniform(Domain::cube(2, 1.0).unwrap(), n).unwrap()
    }

    fn line() -> Grid {
        Grid::uniform(Domain::interval(-1.0, 1.0).unwrap(), 21).unwrap()
    }

    fn identity() -> Arc<dyn PointMap> {
        map_fn(|x: &[f64]| Ok(x.to_vec()))
    }

    #[test]
    fn hadamard_examples() {
        assert_abs_diff_eq!(hadamard_quotient(|x| x * x, 0.5, 16), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hadamard_quotient(f64::sin, 1.0, 16), 1f64.sin(), epsilon = 1e-10);
        assert_abs_diff_eq!(hadamard_quotient(|x| 2.0 * x, 0.0, 16), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hadamard_quotient_with_derivative(f64::cos, 1.0, 16), 1f64.sin(), epsilon = 1e-15);
        for x in [-1.0, -0.3, 0.2, 1.0] {
            let f = |u: f64| u.exp() - 1.0 + u * u * u.cos();
            assert!((x * hadamard_quotient(f, x, 16) - f(x)).abs() <= 1e-9);
        }
    }

    #[test]
    fn complex_hadamard_of_rotation() {
        let w = Complex64::new(0.3, 1.1);
        let h = |x: &[f64]| -> Result<Vec<f64>> {
            let v = w * Complex64::new(x[0], x[1]);
            Ok(vec![v.re, v.im])
        };
        for z in [[0.0, 0.0], [0.4, -0.7], [-1.0, 0.2]] {
            let phi = complex_hadamard_quotient(h, &z, 16).unwrap();
            assert_abs_diff_eq!(phi.re, w.re, epsilon = 1e-12);
            assert_abs_diff_eq!(phi.im, w.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear1d_examples() {
        let r = recover_shift_linear1d(map_fn(|x: &[f64]| Ok(vec![2.0 * x[0]])), 1.0, &line()).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.37]), 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.phi_min.unwrap(), 2.0, epsilon = 1e-12);
        let r = recover_shift_linear1d(identity(), 2.0, &line()).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.5]), 0.0, epsilon = 1e-12);
        let r = recover_shift_linear1d(map_fn(|x: &[f64]| Ok(vec![x[0] * x[0].exp()])), 1.0, &line()).unwrap();
        for s in &r.samples {
            assert_abs_diff_eq!(s.alpha, s.point[0], epsilon = 1e-10);
        }
    }

    #[test]
    fn linear1d_rejects_folds() {
        let err = recover_shift_linear1d(map_fn(|x: &[f64]| Ok(vec![-x[0]])), 1.0, &line());
        assert!(matches!(err, Err(Error::NotAShift(_))));
        let err = recover_shift_linear1d(map_fn(|x: &[f64]| Ok(vec![x[0] + 0.1])), 1.0, &line());
        assert!(matches!(err, Err(Error::NotAShift(_))));
    }

    #[test]
    fn rotation_examples() {
        let quarter = map_fn(|x: &[f64]| Ok(vec![-x[1], x[0]]));
        let r = recover_shift_rotation(quarter, 0.0, 1.0, &square(11), None).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.3, 0.2]), PI / 2.0, epsilon = 1e-10);
        assert_eq!(r.branch, Some(0));
        let time_one = map_fn(|x: &[f64]| {
            let v = (Complex64::new(1.0, 1.0)).exp() * Complex64::new(x[0], x[1]);
            Ok(vec![v.re, v.im])
        });
        let r = recover_shift_rotation(time_one, 1.0, 1.0, &square(11), None).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[-0.4, 0.9]), 1.0, epsilon = 1e-10);
        let r = recover_shift_rotation(identity(), 0.0, 3.0, &square(11), None).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.1, 0.1]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_half_turn_is_normalized() {
        let half = map_fn(|x: &[f64]| Ok(vec![-x[0], -x[1]]));
        let r = recover_shift_rotation(half, 0.0, 1.0, &square(10), None).unwrap();
        for s in &r.samples {
            assert_abs_diff_eq!(s.alpha, PI, epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_branch_follows_anchor() {
        let flow = Flow::linear(JordanSpec::rotation(0.0, 2.0, 1).unwrap());
        let alpha = ShiftFunction::parse("sin:1.2,2+const:-0.3").unwrap();
        let h: Arc<dyn PointMap> = Arc::new(shift_map(&flow, &alpha));
        let anchor = [0.5, 0.5];
        let r = recover_shift_rotation(h, 0.0, 2.0, &square(21), Some(&anchor)).unwrap();
        let period = PI;
        let at_anchor = r.alpha.value(&anchor);
        assert!((0.0..period).contains(&at_anchor));
        let offset = r.alpha.value(&[0.0, 0.0]) - alpha.value(&[0.0, 0.0]);
        for s in &r.samples {
            assert_abs_diff_eq!(s.alpha - alpha.value(&s.point), offset, epsilon = 1e-8);
        }
        assert_abs_diff_eq!((offset / period).round() * period, offset, epsilon = 1e-8);
    }

    #[test]
    fn j20_examples() {
        let r = recover_shift_j20(map_fn(|p: &[f64]| Ok(vec![p[0] + 3.0 * p[1], p[1]])), &square(9)).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.2, -0.4]), 3.0, epsilon = 1e-10);
        let r = recover_shift_j20(map_fn(|p: &[f64]| Ok(vec![p[0] + p[1] * p[0].sin(), p[1]])), &square(9)).unwrap();
        for s in &r.samples {
            assert_abs_diff_eq!(s.alpha, s.point[0].sin(), epsilon = 1e-10);
        }
        let r = recover_shift_j20(identity(), &square(9)).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.5, 0.5]), 0.0, epsilon = 1e-12);
        let bad = recover_shift_j20(map_fn(|p: &[f64]| Ok(vec![p[0], 2.0 * p[1]])), &square(9));
        assert!(matches!(bad, Err(Error::NotAShift(_))));
    }

    #[test]
    fn minimal_dispatch_handles_subdiagonal_nilpotent_block() {
        let spec = JordanSpec::real(0.0, 2).unwrap();
        let flow = Flow::linear(spec.clone());
        let alpha = ShiftFunction::parse("cos@1:0.5,1+const:0.2").unwrap();
        let h: Arc<dyn PointMap> = Arc::new(shift_map(&flow, &alpha));
        let r = recover_shift_minimal(&spec, h, &square(9)).unwrap();
        for s in &r.samples {
            assert_abs_diff_eq!(s.alpha, alpha.value(&s.point), epsilon = 1e-9);
        }
        assert!(recover_shift_minimal(&JordanSpec::real(1.0, 2).unwrap(), identity(), &square(3)).is_err());
    }

    #[test]
    fn extension_examples() {
        use crate::flow::Coupler;
        let flow = Flow::extension(JordanSpec::real(1.0, 1).unwrap(), Coupler::Trivial { fiber_dim: 1 }).unwrap();
        let h: Arc<dyn PointMap> = Arc::new(shift_map(&flow, &ShiftFunction::constant(2f64.ln())));
        let r = recover_shift_regular_extension(&flow, h, &square(7)).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.3, -0.2]), 2f64.ln(), epsilon = 1e-12);
        let r = recover_shift_regular_extension(&flow, identity(), &square(7)).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.3, -0.2]), 0.0, epsilon = 1e-12);

        let flow = Flow::extension(JordanSpec::rotation(0.0, 1.0, 1).unwrap(), Coupler::Scaled { mu: 0.5, fiber_dim: 1 }).unwrap();
        let h: Arc<dyn PointMap> = Arc::new(shift_map(&flow, &ShiftFunction::constant(PI)));
        let grid = Grid::uniform(Domain::cube(3, 1.0).unwrap(), 5).unwrap();
        let r = recover_shift_regular_extension(&flow, h, &grid).unwrap();
        assert_abs_diff_eq!(r.alpha.value(&[0.3, -0.2, 0.5]), PI, epsilon = 1e-9);

        // Factor is shifted by pi/2 but the fiber by a different time.
        let h = map_fn(|p: &[f64]| Ok(vec![-p[1], p[0], p[2]]));
        let err = recover_shift_regular_extension(&flow, h, &grid);
        assert!(matches!(err, Err(Error::NotARegularExtensionShift(_))));
    }

    #[test]
    fn regular_point_examples() {
        let t = recover_shift_regular_point(&Flow::Translation, &|x: &[f64]| Ok(vec![x[0] + 0.3]), &[1.0]).unwrap();
        assert_abs_diff_eq!(t, 0.3, epsilon = 1e-12);
        let lin = Flow::linear(JordanSpec::real(1.0, 1).unwrap());
        let t = recover_shift_regular_point(&lin, &|x: &[f64]| Ok(vec![2.0 * x[0]]), &[1.0]).unwrap();
        assert_abs_diff_eq!(t, 2f64.ln(), epsilon = 1e-10);
        let rot = Flow::linear(JordanSpec::rotation(0.0, 2.0, 1).unwrap());
        let turn = |x: &[f64]| -> Result<Vec<f64>> {
            let (c, s) = (0.4f64.cos(), 0.4f64.sin());
            Ok(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
        };
        assert_abs_diff_eq!(recover_shift_regular_point(&rot, &turn, &[1.0, 0.0]).unwrap(), 0.2, epsilon = 1e-10);
        let off = recover_shift_regular_point(&rot, &|x: &[f64]| Ok(vec![2.0 * x[0], x[1]]), &[1.0, 0.0]);
        assert!(matches!(off, Err(Error::NotOnLocalOrbit(_))));
        let fixed = recover_shift_regular_point(&rot, &|x: &[f64]| Ok(x.to_vec()), &[0.0, 0.0]);
        assert!(matches!(fixed, Err(Error::NotOnLocalOrbit(_))));
    }

    #[test]
    fn counterexample_examples() {
        assert_abs_diff_eq!(counterexample_alpha_xn(|z| 2.0 * z, 2, 0.01).unwrap(), 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(counterexample_alpha_xn(|z| z + z * z, 2, 0.1).unwrap(), 1.0 / 1.1, epsilon = 1e-12);
        assert_eq!(counterexample_alpha_xn(|z| z, 3, -0.2).unwrap(), 0.0);
        assert!(matches!(counterexample_alpha_xn(|z| -z, 2, 0.1), Err(Error::SignMismatch { .. })));
        assert!(counterexample_alpha_xn(|z| z, 1, 0.1).is_err());
        // Forward time for h(z) > z > 0.
        assert!(counterexample_alpha_xn(|z| 1.5 * z, 3, 0.2).unwrap() > 0.0);
    }

    #[test]
    fn csv_columns() {
        let r = recover_shift_linear1d(map_fn(|x: &[f64]| Ok(vec![2.0 * x[0]])), 1.0, &line()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,alpha,residual\n"));
        assert_eq!(text.lines().count(), 22);
    }
}
