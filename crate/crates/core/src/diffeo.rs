//! The diffeomorphism criterion for shifted maps.
//!
//! `Sh(alpha)` is a diffeomorphism exactly when `d alpha(F) != -1`
//! everywhere; it preserves the orientation of trajectories when
//! `d alpha(F) > -1` and reverses it when `d alpha(F) < -1`. Properness is
//! not checked: grids live on bounded boxes and the report says so.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{shift_map, PointMap};
use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::grid::Grid;
use crate::numeric::{determinant, distance, dot, jacobian, norm};
use crate::shift::ShiftFunction;

/// Step of the central differences in the Jacobian of a shifted map.
pub const JACOBIAN_FD_STEP: f64 = 1e-5;

/// `d alpha(F)(x) = grad alpha(x) . F(x)`.
pub fn lie_derivative(flow: &Flow, alpha: &ShiftFunction, x: &[f64]) -> Result<f64> {
    let f = flow.generator(x)?;
    let g = alpha.gradient_or_fd(x)?;
    Ok(dot(&g, &f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffeoClass {
    OrientationPreserving,
    OrientationReversing,
    Degenerate,
    /// Values on both sides of `-1`: not a diffeomorphism of a connected
    /// domain, which indicates a modelling error.
    Mixed,
}

impl DiffeoClass {
    /// Class of a set of Lie-derivative values.
    pub fn from_values(values: &[f64], tol: f64) -> Self {
        if values.iter().any(|v| (v + 1.0).abs() <= tol || !v.is_finite()) {
            DiffeoClass::Degenerate
        } else if values.iter().all(|&v| v > -1.0) {
            DiffeoClass::OrientationPreserving
        } else if values.iter().all(|&v| v < -1.0) {
            DiffeoClass::OrientationReversing
        } else {
            DiffeoClass::Mixed
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostic {
    pub point: Vec<f64>,
    pub lie_derivative: f64,
    /// Determinant of the difference Jacobian of `Sh(alpha)`; `None` where
    /// the stencil leaves the domain.
    pub local_det: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoReport {
    pub classification: DiffeoClass,
    pub min: f64,
    pub max: f64,
    pub properness_assumed: bool,
    pub points: Vec<PointDiagnostic>,
}

impl DiffeoReport {
    /// One row per grid point: coordinates, `lie_derivative`, `local_det`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.points.first().map_or(0, |p| p.point.len());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.push("lie_derivative".into());
        header.push("local_det".into());
        w.write_record(&header).map_err(csv_error)?;
        for p in &self.points {
            let mut row: Vec<String> = p.point.iter().map(|v| fmt_float(*v)).collect();
            row.push(fmt_float(p.lie_derivative));
            row.push(p.local_det.map(fmt_float).unwrap_or_default());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::InvalidSpec(format!("csv: {e}"))
}

/// 17 significant digits, independent of locale.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn local_det(flow: &Flow, alpha: &ShiftFunction, x: &[f64]) -> Result<f64> {
    let map = shift_map(flow, alpha);
    let h = JACOBIAN_FD_STEP;
    for i in 0..x.len() {
        for s in [-h, h] {
            let mut p = x.to_vec();
            p[i] += s;
            if !flow.in_domain(&p) {
                return Err(Error::SingularStencil(format!("stencil point {p:?} is outside the flow domain")));
            }
        }
    }
    let jac = jacobian(|p| map.apply(p), x, h)
        .map_err(|e| Error::SingularStencil(format!("shifted map fails on the stencil at {x:?}: {e}")))?;
    Ok(determinant(&jac))
}

/// Classifies `Sh(alpha)` from the values of `d alpha(F)` on the grid.
pub fn diffeo_classify(flow: &Flow, alpha: &ShiftFunction, grid: &Grid, tol: f64) -> Result<DiffeoReport> {
    let points = grid
        .points()
        .into_par_iter()
        .map(|p| {
            let v = lie_derivative(flow, alpha, &p)?;
            let det = local_det(flow, alpha, &p).ok();
            Ok(PointDiagnostic { point: p, lie_derivative: v, local_det: det })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = points.iter().map(|p| p.lie_derivative).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DiffeoReport {
        classification: DiffeoClass::from_values(&values, tol),
        min,
        max,
        properness_assumed: true,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares `det D Sh(alpha)(z)` with `1 + d alpha(F(z))` after replacing
/// `alpha` by `alpha - alpha(z)`, which makes `z` a zero of the shift.
pub fn jacobian_det_identity_check(flow: &Flow, alpha: &ShiftFunction, z: &[f64], tol: f64) -> Result<DetIdentity> {
    let a0 = alpha.try_value(z)?;
    let beta = if a0.abs() <= 1e-10 { alpha.clone() } else { alpha.offset(-a0) };
    let lhs = local_det(flow, &beta, z)?;
    let rhs = 1.0 + lie_derivative(flow, &beta, z)?;
    Ok(DetIdentity { lhs, rhs, pass: (lhs - rhs).abs() <= tol })
}

/// Which half of the diffeomorphism class a convexity probe targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Preserving,
    Reversing,
}

impl Orientation {
    fn class(self) -> DiffeoClass {
        match self {
            Orientation::Preserving => DiffeoClass::OrientationPreserving,
            Orientation::Reversing => DiffeoClass::OrientationReversing,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvexityOptions {
    pub target: Orientation,
    /// Degeneracy tolerance and image-collision radius.
    pub tol: f64,
}

impl Default for ConvexityOptions {
    fn default() -> Self {
        Self { target: Orientation::Preserving, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexitySample {
    pub s: f64,
    pub classification: DiffeoClass,
    /// Grid pairs farther apart than the resolution whose images collide.
    pub collisions: usize,
    /// `max |d alpha_s(F) - s d alpha_0(F) - (1 - s) d alpha_1(F)|`.
    pub linearity_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConvexityReport {
    Probed { samples: Vec<ConvexitySample>, failures: usize },
    /// An endpoint is not in the target class.
    PreconditionFailed { alpha0: DiffeoClass, alpha1: DiffeoClass },
    /// The reversing class is empty: `d alpha(F) = 0` at fixed points.
    EmptyClass { fixed_point: Vec<f64> },
}

impl ConvexityReport {
    pub fn all_pass(&self) -> bool {
        matches!(self, ConvexityReport::Probed { failures: 0, .. })
    }
}

/// Number of pairs of grid points farther apart than `resolution` whose
/// images lie within `tol` of each other.
pub fn grid_collisions(points: &[Vec<f64>], images: &[Vec<f64>], resolution: f64, tol: f64) -> usize {
    let mut order: Vec<usize> = (0..images.len()).collect();
    order.sort_by(|&a, &b| images[a][0].total_cmp(&images[b][0]));
    let mut count = 0;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if images[j][0] - images[i][0] > tol {
                break;
            }
            if distance(&images[i], &images[j]) <= tol && distance(&points[i], &points[j]) > resolution * (1.0 + 1e-9) {
                count += 1;
            }
        }
    }
    count
}

/// Tests the segment `s alpha0 + (1 - s) alpha1` for membership in the
/// target orientation class, grid injectivity and linearity of the
/// criterion in `alpha`.
pub fn convexity_probe(
    flow: &Flow,
    alpha0: &ShiftFunction,
    alpha1: &ShiftFunction,
    s_samples: &[f64],
    grid: &Grid,
    opts: &ConvexityOptions,
) -> Result<ConvexityReport> {
    let points = grid.points();
    if opts.target == Orientation::Reversing {
        for p in &points {
            if norm(&flow.generator(p)?) <= opts.tol {
                return Ok(ConvexityReport::EmptyClass { fixed_point: p.clone() });
            }
        }
    }
    let c0 = diffeo_classify(flow, alpha0, grid, opts.tol)?;
    let c1 = diffeo_classify(flow, alpha1, grid, opts.tol)?;
    let want = opts.target.class();
    if c0.classification != want || c1.classification != want {
        return Ok(ConvexityReport::PreconditionFailed { alpha0: c0.classification, alpha1: c1.classification });
    }
    let resolution = grid.resolution();
    let mut samples = Vec::with_capacity(s_samples.len());
    for &s in s_samples {
        let alpha_s = ShiftFunction::convex_combination(s, alpha0, alpha1);
        let report = diffeo_classify(flow, &alpha_s, grid, opts.tol)?;
        let linearity_error = report
            .points
            .iter()
            .zip(c0.points.iter().zip(&c1.points))
            .map(|(ps, (p0, p1))| (ps.lie_derivative - s * p0.lie_derivative - (1.0 - s) * p1.lie_derivative).abs())
            .fold(0.0, f64::max);
        let map = shift_map(flow, &alpha_s);
        let images = points.par_iter().map(|p| map.apply(p)).collect::<Result<Vec<_>>>()?;
        let collisions = grid_collisions(&points, &images, resolution, opts.tol);
        let pass = report.classification == want && collisions == 0;
        samples.push(ConvexitySample { s, classification: report.classification, collisions, linearity_error, pass });
    }
    let failures = samples.iter().filter(|s| !s.pass).count();
    Ok(ConvexityReport::Probed { samples, failures })
}
