//! Evaluatable flows `Phi(x, t)` and trajectory classification.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::jordan::{build_jordan_matrix, jordan_exp, jordan_exp_apply, JordanSpec};
use crate::numeric::{self, bisect, dot, norm};

/// Default fixed RK4 step for numeric flows.
pub const DEFAULT_RK4_STEP: f64 = 1e-3;

/// Time step of the central difference used for numeric generators.
pub const GENERATOR_FD_STEP: f64 = 1e-5;

/// A flow on an open subset of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Flow {
    /// `Phi(x, t) = e^{A t} x` with `A` in real Jordan form.
    Linear(JordanSpec),
    /// `Phi(x, t) = x + t` on the line.
    Translation,
    /// Local flow of `dx/dt = x^n` on `(-radius, radius)`.
    #[serde(rename = "powerline")]
    PowerLine { n: u32, radius: f64 },
    /// Linear factor on `R^m` with a fiber coupler on `R^k`.
    Extension(RegularExtension),
    /// Fixed-step RK4 integration of a built-in vector field.
    #[serde(rename = "vectorfield")]
    VectorField(NumericFlow),
}

/// `Phi(x, y, t) = (psi(x, t), B(x, y, t))` where `psi` is a linear flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularExtension {
    pub factor: JordanSpec,
    pub coupler: Coupler,
}

/// Fiber part `B(x, y, t)` of a regular extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Coupler {
    /// `B = y`.
    Trivial { fiber_dim: usize },
    /// `B = e^{mu t} y`.
    Scaled { mu: f64, fiber_dim: usize },
    /// `B = y + t v`.
    Drift { velocity: Vec<f64> },
}

impl Coupler {
    pub fn fiber_dim(&self) -> usize {
        match self {
            Coupler::Trivial { fiber_dim } | Coupler::Scaled { fiber_dim, .. } => *fiber_dim,
            Coupler::Drift { velocity } => velocity.len(),
        }
    }

    fn evaluate(&self, y: &[f64], t: f64) -> Vec<f64> {
        match self {
            Coupler::Trivial { .. } => y.to_vec(),
            Coupler::Scaled { mu, .. } => {
                let s = (mu * t).exp();
                y.iter().map(|v| s * v).collect()
            }
            Coupler::Drift { velocity } => y.iter().zip(velocity).map(|(v, w)| v + t * w).collect(),
        }
    }

    fn generator(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Coupler::Trivial { fiber_dim } => vec![0.0; *fiber_dim],
            Coupler::Scaled { mu, .. } => y.iter().map(|v| mu * v).collect(),
            Coupler::Drift { velocity } => velocity.clone(),
        }
    }
}

/// Numerically integrated flow of a named vector field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFlow {
    pub field: BuiltinField,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    DEFAULT_RK4_STEP
}

/// Registry of vector fields available to numeric flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum BuiltinField {
    /// `(-omega y, omega x)`.
    Harmonic { omega: f64 },
    /// `(v, -sin q)`.
    Pendulum,
    /// `(y, mu (1 - x^2) y - x)`.
    #[serde(rename = "vanderpol")]
    VanDerPol { mu: f64 },
    /// `x^n` on the line.
    Power { n: u32 },
    /// Constant field `v`.
    Constant { velocity: Vec<f64> },
    /// `M x` for a dense row-major matrix.
    Linear { matrix: Vec<Vec<f64>> },
}

impl BuiltinField {
    pub fn dim(&self) -> usize {
        match self {
            BuiltinField::Harmonic { .. } | BuiltinField::Pendulum | BuiltinField::VanDerPol { .. } => 2,
            BuiltinField::Power { .. } => 1,
            BuiltinField::Constant { velocity } => velocity.len(),
            BuiltinField::Linear { matrix } => matrix.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BuiltinField::Harmonic { omega } => vec![-omega * x[1], omega * x[0]],
            BuiltinField::Pendulum => vec![x[1], -x[0].sin()],
            BuiltinField::VanDerPol { mu } => vec![x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0]],
            BuiltinField::Power { n } => vec![x[0].powi(*n as i32)],
            BuiltinField::Constant { velocity } => velocity.clone(),
            BuiltinField::Linear { matrix } => matrix.iter().map(|row| dot(row, x)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BuiltinField::Harmonic { omega } => omega.is_finite(),
            BuiltinField::VanDerPol { mu } => mu.is_finite(),
            BuiltinField::Pendulum | BuiltinField::Power { .. } => true,
            BuiltinField::Constant { velocity } => {
                !velocity.is_empty() && velocity.iter().all(|v| v.is_finite())
            }
            BuiltinField::Linear { matrix } => {
                let n = matrix.len();
                n > 0 && matrix.iter().all(|r| r.len() == n && r.iter().all(|v| v.is_finite()))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid vector field parameters: {self:?}")))
        }
    }
}

impl NumericFlow {
    fn integrate(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(x.to_vec());
        }
        let steps = (t.abs() / self.step).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut state = x.to_vec();
        let d = state.len();
        let mut tmp = vec![0.0; d];
        for _ in 0..steps {
            let k1 = self.field.eval(&state);
            for i in 0..d {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            let k2 = self.field.eval(&tmp);
            for i in 0..d {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            let k3 = self.field.eval(&tmp);
            for i in 0..d {
                tmp[i] = state[i] + h * k3[i];
            }
            let k4 = self.field.eval(&tmp);
            for i in 0..d {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::OutOfDomain(format!("RK4 solution blew up before t = {t}")));
            }
        }
        Ok(state)
    }
}

impl Flow {
    pub fn linear(spec: JordanSpec) -> Self {
        Flow::Linear(spec)
    }

    pub fn power_line(n: u32, radius: f64) -> Result<Self> {
        let f = Flow::PowerLine { n, radius };
        f.validate()?;
        Ok(f)
    }

    pub fn extension(factor: JordanSpec, coupler: Coupler) -> Result<Self> {
        let f = Flow::Extension(RegularExtension { factor, coupler });
        f.validate()?;
        Ok(f)
    }

    pub fn numeric(field: BuiltinField, step: f64) -> Result<Self> {
        let f = Flow::VectorField(NumericFlow { field, step });
        f.validate()?;
        Ok(f)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let flow: Flow = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        flow.validate()?;
        Ok(flow)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Flow::Linear(_) | Flow::Translation => Ok(()),
            Flow::PowerLine { n, radius } => {
                if *n < 2 {
                    Err(Error::InvalidSpec("power-line exponent must be at least 2".into()))
                } else if !(radius.is_finite() && *radius > 0.0) {
                    Err(Error::InvalidSpec("power-line radius must be positive".into()))
                } else {
                    Ok(())
                }
            }
            Flow::Extension(ext) => match &ext.coupler {
                Coupler::Trivial { fiber_dim } | Coupler::Scaled { fiber_dim, .. } if *fiber_dim == 0 => {
                    Err(Error::InvalidSpec("fiber dimension must be positive".into()))
                }
                Coupler::Scaled { mu, .. } if !mu.is_finite() => {
                    Err(Error::InvalidSpec("fiber rate must be finite".into()))
                }
                Coupler::Drift { velocity } if velocity.is_empty() || velocity.iter().any(|v| !v.is_finite()) => {
                    Err(Error::InvalidSpec("drift velocity must be a nonempty finite vector".into()))
                }
                _ => Ok(()),
            },
            Flow::VectorField(nf) => {
                if !(nf.step.is_finite() && nf.step > 0.0) {
                    return Err(Error::InvalidSpec("RK4 step must be positive".into()));
                }
                nf.field.validate()
            }
        }
    }

    /// Dimension of the phase space.
    pub fn dim(&self) -> usize {
        match self {
            Flow::Linear(spec) => spec.dim(),
            Flow::Translation | Flow::PowerLine { .. } => 1,
            Flow::Extension(ext) => ext.factor.dim() + ext.coupler.fiber_dim(),
            Flow::VectorField(nf) => nf.field.dim(),
        }
    }

    /// True for variants evaluated in closed form.
    pub fn is_exact(&self) -> bool {
        !matches!(self, Flow::VectorField(_))
    }

    /// Whether `x` lies in the open set on which the flow is defined.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().all(|v| v.is_finite())
            && match self {
                Flow::PowerLine { radius, .. } => x[0].abs() < *radius,
                _ => true,
            }
    }

    /// `Phi(x, t)`.
    pub fn evaluate(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if !t.is_finite() {
            return Err(Error::OutOfDomain(format!("non-finite time {t}")));
        }
        match self {
            Flow::Linear(spec) => Ok(jordan_exp_apply(spec, t, x)),
            Flow::Translation => Ok(vec![x[0] + t]),
            Flow::PowerLine { n, radius } => {
                let x0 = x[0];
                if x0.abs() >= *radius || !x0.is_finite() {
                    return Err(Error::OutOfDomain(format!("|x| = {} >= {radius}", x0.abs())));
                }
                if t == 0.0 || x0 == 0.0 {
                    return Ok(vec![x0]);
                }
                let k = (*n - 1) as f64;
                let denom = 1.0 - k * t * x0.powi(*n as i32 - 1);
                if denom <= 0.0 {
                    return Err(Error::OutOfDomain(format!("solution of x' = x^{n} from {x0} blows up before t = {t}")));
                }
                let y = x0 * denom.powf(-1.0 / k);
                if y.abs() >= *radius {
                    return Err(Error::OutOfDomain(format!("trajectory from {x0} leaves (-{radius}, {radius}) before t = {t}")));
                }
                Ok(vec![y])
            }
            Flow::Extension(ext) => {
                let m = ext.factor.dim();
                let mut out = jordan_exp_apply(&ext.factor, t, &x[..m]);
                out.extend(ext.coupler.evaluate(&x[m..], t));
                Ok(out)
            }
            Flow::VectorField(nf) => nf.integrate(x, t),
        }
    }

    /// Generator `F(x) = dPhi/dt (x, 0)`; exact for closed forms, a central
    /// difference in time for numeric flows.
    pub fn generator(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        match self {
            Flow::Linear(spec) => Ok(mat_vec(spec, x)),
            Flow::Translation => Ok(vec![1.0]),
            Flow::PowerLine { n, radius } => {
                if x[0].abs() >= *radius {
                    return Err(Error::OutOfDomain(format!("|x| = {} >= {radius}", x[0].abs())));
                }
                Ok(vec![x[0].powi(*n as i32)])
            }
            Flow::Extension(ext) => {
                let m = ext.factor.dim();
                let mut out = mat_vec(&ext.factor, &x[..m]);
                out.extend(ext.coupler.generator(&x[m..]));
                Ok(out)
            }
            Flow::VectorField(_) => {
                let h = GENERATOR_FD_STEP;
                let plus = self.evaluate(x, h)?;
                let minus = self.evaluate(x, -h)?;
                Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect())
            }
        }
    }

    /// Finite-difference Jacobian `dPhi/dx (z, t)` of the time-`t` map.
    pub fn tangent_map(&self, z: &[f64], t: f64) -> Result<nalgebra::DMatrix<f64>> {
        numeric::jacobian(|p| self.evaluate(p, t), z, 1e-6)
    }

    /// Advances states by a fixed time step.
    pub(crate) fn stepper(&self, dt: f64) -> Stepper<'_> {
        match self {
            Flow::Linear(spec) => Stepper::Matrix(jordan_exp(spec, dt)),
            _ => Stepper::Direct { flow: self, dt },
        }
    }
}

pub(crate) enum Stepper<'a> {
    Matrix(nalgebra::DMatrix<f64>),
    Direct { flow: &'a Flow, dt: f64 },
}

impl Stepper<'_> {
    pub(crate) fn advance(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Stepper::Matrix(m) => Ok((m * DVector::from_column_slice(x)).iter().copied().collect()),
            Stepper::Direct { flow, dt } => flow.evaluate(x, *dt),
        }
    }
}

fn mat_vec(spec: &JordanSpec, x: &[f64]) -> Vec<f64> {
    let a = build_jordan_matrix(spec);
    (a * DVector::from_column_slice(x)).iter().copied().collect()
}

/// `Phi(x, t)`.
pub fn evaluate_flow(flow: &Flow, x: &[f64], t: f64) -> Result<Vec<f64>> {
    flow.evaluate(x, t)
}

/// `F(x) = dPhi/dt (x, 0)`.
pub fn vector_field(flow: &Flow, x: &[f64]) -> Result<Vec<f64>> {
    flow.generator(x)
}

/// Orbit type of a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrajectoryKind {
    Fixed,
    Periodic { theta: f64 },
    /// No return found up to the horizon.
    #[serde(rename = "nonclosed")]
    NonClosed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInfo {
    pub kind: TrajectoryKind,
    /// Subsampled orbit points, starting at the initial point.
    pub witness: Vec<Vec<f64>>,
}

impl TrajectoryInfo {
    pub fn period(&self) -> Option<f64> {
        match self.kind {
            TrajectoryKind::Periodic { theta } => Some(theta),
            _ => None,
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.kind == TrajectoryKind::Fixed
    }
}

/// Sampling controls for [`classify_trajectory_with`].
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub horizon: f64,
    pub tol: f64,
    /// Number of time samples over `(0, horizon]`.
    pub samples: usize,
    /// Number of orbit points kept as witness.
    pub witness_points: usize,
}

impl ClassifyOptions {
    pub fn new(horizon: f64, tol: f64) -> Self {
        Self { horizon, tol, samples: 4096, witness_points: 64 }
    }
}

/// Classifies the trajectory through `x` as fixed, periodic or non-closed.
pub fn classify_trajectory(flow: &Flow, x: &[f64], horizon: f64, tol: f64) -> Result<TrajectoryInfo> {
    classify_trajectory_with(flow, x, &ClassifyOptions::new(horizon, tol))
}

/// Return times are local minima of `|Phi(x, t) - x|`, i.e. sign changes
/// from negative to positive of `g(t) = (Phi(x, t) - x) . F(Phi(x, t))`.
/// The first bracketed minimum whose distance is within `tol` is refined by
/// bisection to `tol * 1e-2` and reported as the period.
pub fn classify_trajectory_with(flow: &Flow, x: &[f64], opts: &ClassifyOptions) -> Result<TrajectoryInfo> {
    check_dim(flow.dim(), x.len())?;
    if !(opts.horizon > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidSpec("horizon and tolerance must be positive".into()));
    }
    let f0 = flow.generator(x)?;
    if norm(&f0) <= opts.tol {
        return Ok(TrajectoryInfo { kind: TrajectoryKind::Fixed, witness: vec![x.to_vec()] });
    }

    let samples = opts.samples.max(16);
    let dt = opts.horizon / samples as f64;
    let stride = (samples / opts.witness_points.max(1)).max(1);
    let stepper = flow.stepper(dt);
    let approach = |p: &[f64]| -> Result<f64> {
        let f = flow.generator(p)?;
        let diff: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        Ok(dot(&diff, &f))
    };
    let direct = |t: f64| -> f64 {
        flow.evaluate(x, t)
            .and_then(|p| approach(&p))
            .unwrap_or(f64::NAN)
    };

    let mut witness = vec![x.to_vec()];
    let mut state = x.to_vec();
    let mut prev_g = 0.0;
    for k in 1..=samples {
        state = match stepper.advance(&state) {
            Ok(s) if flow.in_domain(&s) => s,
            // Escaped the domain: the orbit cannot return.
            _ => break,
        };
        if k % stride == 0 {
            witness.push(state.clone());
        }
        let g = match approach(&state) {
            Ok(g) => g,
            Err(_) => break,
        };
        if prev_g < 0.0 && g >= 0.0 {
            let lo = (k - 1) as f64 * dt;
            let hi = k as f64 * dt;
            let theta = bisect(direct, lo, hi, opts.tol * 1e-2);
            if theta > opts.tol {
                if let Ok(p) = flow.evaluate(x, theta) {
                    if numeric::distance(&p, x) <= opts.tol {
                        return Ok(TrajectoryInfo { kind: TrajectoryKind::Periodic { theta }, witness });
                    }
                }
            }
        }
        prev_g = g;
    }
    Ok(TrajectoryInfo { kind: TrajectoryKind::NonClosed, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jordan::Block;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn rotation(beta: f64) -> Flow {
        Flow::linear(JordanSpec::rotation(0.0, beta, 1).unwrap())
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Flow::Translation.evaluate(&[3.0], 2.0).unwrap(), vec![5.0]);
        let lin = Flow::linear(JordanSpec::real(1.0, 1).unwrap());
        assert_abs_diff_eq!(lin.evaluate(&[1.0], 2f64.ln()).unwrap()[0], 2.0, epsilon = 1e-15);
        let pl = Flow::power_line(2, 1.0).unwrap();
        assert_abs_diff_eq!(pl.evaluate(&[0.1], 1.0).unwrap()[0], 0.1 / 0.9, epsilon = 1e-15);
    }

    #[test]
    fn power_line_matches_rk4() {
        for n in 2..=5u32 {
            let exact = Flow::power_line(n, 1.0).unwrap();
            let numeric = Flow::numeric(BuiltinField::Power { n }, 1e-3).unwrap();
            for &(x, t) in &[(0.1, 1.0), (-0.3, 0.7), (0.5, -2.0), (-0.2, -1.5)] {
                let a = exact.evaluate(&[x], t).unwrap()[0];
                let b = numeric.evaluate(&[x], t).unwrap()[0];
                assert!((a - b).abs() <= 1e-8, "n={n} x={x} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn power_line_blow_up_is_domain_error() {
        let pl = Flow::power_line(2, 10.0).unwrap();
        assert!(matches!(pl.evaluate(&[0.5], 2.0), Err(Error::OutOfDomain(_))));
        assert!(matches!(pl.evaluate(&[0.5], 1.99), Err(Error::OutOfDomain(_))));
        assert!(pl.evaluate(&[0.5], 1.5).is_ok());
        // n odd: both signs blow up forward in time
        let pl3 = Flow::power_line(3, 10.0).unwrap();
        assert!(pl3.evaluate(&[-0.5], 3.0).is_err());
        assert!(matches!(pl.evaluate(&[10.0], 0.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn generator_examples() {
        assert_eq!(Flow::Translation.generator(&[7.0]).unwrap(), vec![1.0]);
        let f = rotation(1.0).generator(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(f[0], 0.0);
        assert_abs_diff_eq!(f[1], 1.0);
        let pl = Flow::power_line(3, 1.0).unwrap();
        assert_abs_diff_eq!(pl.generator(&[0.5]).unwrap()[0], 0.125);
        let vf = Flow::numeric(BuiltinField::VanDerPol { mu: 0.5 }, 1e-3).unwrap();
        let fd = vf.generator(&[0.3, -0.4]).unwrap();
        let exact = BuiltinField::VanDerPol { mu: 0.5 }.eval(&[0.3, -0.4]);
        assert_abs_diff_eq!(fd[0], exact[0], epsilon = 1e-8);
        assert_abs_diff_eq!(fd[1], exact[1], epsilon = 1e-8);
    }

    #[test]
    fn identity_at_time_zero() {
        let flows = [
            Flow::Translation,
            rotation(2.0),
            Flow::power_line(4, 1.0).unwrap(),
            Flow::numeric(BuiltinField::Pendulum, 1e-3).unwrap(),
        ];
        for f in &flows {
            let x: Vec<f64> = (0..f.dim()).map(|i| 0.3 - 0.1 * i as f64).collect();
            assert_eq!(f.evaluate(&x, 0.0).unwrap(), x);
        }
    }

    #[test]
    fn extension_commutes_with_projection() {
        let ext = Flow::extension(
            JordanSpec::rotation(0.2, 1.0, 1).unwrap(),
            Coupler::Scaled { mu: -0.5, fiber_dim: 2 },
        )
        .unwrap();
        let factor = Flow::linear(JordanSpec::rotation(0.2, 1.0, 1).unwrap());
        let x = [0.4, -0.2, 1.0, 2.0];
        for &t in &[-1.3, 0.0, 0.7, 2.5] {
            let full = ext.evaluate(&x, t).unwrap();
            let proj = factor.evaluate(&x[..2], t).unwrap();
            assert_eq!(&full[..2], proj.as_slice());
        }
    }

    #[test]
    fn classify_rotation_period() {
        let info = classify_trajectory(&rotation(2.0), &[1.0, 0.0], 10.0, 1e-6).unwrap();
        let theta = info.period().expect("periodic");
        assert!((theta - PI).abs() <= 1e-6 * PI);
        assert!(info.witness.len() > 10);
    }

    #[test]
    fn classify_translation_and_fixed() {
        let info = classify_trajectory(&Flow::Translation, &[0.0], 10.0, 1e-6).unwrap();
        assert_eq!(info.kind, TrajectoryKind::NonClosed);
        let lin = Flow::linear(
            JordanSpec::new(vec![Block::Real { lambda: 0.3, p: 2 }, Block::Rotation { alpha: 0.0, beta: 1.0, p: 1 }]).unwrap(),
        );
        let info = classify_trajectory(&lin, &[0.0; 4], 10.0, 1e-6).unwrap();
        assert!(info.is_fixed());
    }

    #[test]
    fn classify_power_line_escapes() {
        let pl = Flow::power_line(2, 1.0).unwrap();
        let info = classify_trajectory(&pl, &[0.5], 10.0, 1e-6).unwrap();
        assert_eq!(info.kind, TrajectoryKind::NonClosed);
        assert!(classify_trajectory(&pl, &[0.0], 10.0, 1e-6).unwrap().is_fixed());
    }

    #[test]
    fn classify_numeric_center() {
        let vf = Flow::numeric(BuiltinField::Harmonic { omega: 1.0 }, 1e-3).unwrap();
        let theta = classify_trajectory(&vf, &[0.5, 0.0], 10.0, 1e-6).unwrap().period().unwrap();
        assert!((theta - 2.0 * PI).abs() <= 1e-6);
    }

    #[test]
    fn spiral_has_no_return() {
        let spiral = Flow::linear(JordanSpec::rotation(-0.1, 1.0, 1).unwrap());
        let info = classify_trajectory(&spiral, &[1.0, 0.0], 20.0 * PI, 1e-6).unwrap();
        assert_eq!(info.kind, TrajectoryKind::NonClosed);
    }

    #[test]
    fn json_forms() {
        let f = Flow::from_json(r#"{"kind":"linear","blocks":[{"kind":"rotation","alpha":0.0,"beta":1.0,"p":1}]}"#).unwrap();
        assert_eq!(f, rotation(1.0));
        assert_eq!(Flow::from_json(r#"{"kind":"translation"}"#).unwrap(), Flow::Translation);
        let pl = Flow::from_json(r#"{"kind":"powerline","n":2,"radius":1.0}"#).unwrap();
        assert_eq!(pl, Flow::PowerLine { n: 2, radius: 1.0 });
        assert!(Flow::from_json(r#"{"kind":"powerline","n":1,"radius":1.0}"#).is_err());
        let ext = Flow::from_json(
            r#"{"kind":"extension","factor":{"blocks":[{"kind":"real","lambda":1.0,"p":1}]},"coupler":{"name":"trivial","fiber_dim":1}}"#,
        )
        .unwrap();
        assert_eq!(ext.dim(), 2);
        let vf = Flow::from_json(r#"{"kind":"vectorfield","field":{"name":"harmonic","omega":2.0}}"#).unwrap();
        assert_eq!(vf.dim(), 2);
        for flow in [f, pl, ext, vf] {
            let text = serde_json::to_string(&flow).unwrap();
            assert_eq!(Flow::from_json(&text).unwrap(), flow);
        }
    }
}
