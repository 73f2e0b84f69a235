//! Shift functions: scalar fields measured in units of flow time.
//!
//! A [`ShiftFunction`] wraps any [`ScalarField`]. Closed forms come from the
//! [`Expr`] registry, which carries analytic gradients and a compact text
//! syntax used on the command line:
//!
//! ```text
//! const:0.5            0.5
//! affine:c0,a1,a2      c0 + a1 x1 + a2 x2
//! poly:c0,c1,...       c0 + c1 x + ... + c6 x^6   (degree <= 6)
//! sin:a,w[,phi]        a sin(w x + phi)
//! cos:a,w[,phi]        a cos(w x + phi)
//! exp:a,r              a e^{r x}
//! ```
//!
//! A name may carry `@k` to act on coordinate `k` (default 0), and terms
//! are summed with `+`, e.g. `sin@1:0.5,1+const:0.2`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, Grid};

/// Step of the central differences used when no analytic gradient exists.
pub const GRADIENT_FD_STEP: f64 = 1e-5;

pub const MAX_POLY_DEGREE: usize = 6;

/// A real-valued function on `R^d`.
pub trait ScalarField: Send + Sync {
    fn try_value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Named closed-form scalar functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Expr {
    Const { value: f64 },
    Affine { offset: f64, coeffs: Vec<f64> },
    Poly { coord: usize, coeffs: Vec<f64> },
    Sin { coord: usize, amplitude: f64, freq: f64, phase: f64 },
    Cos { coord: usize, amplitude: f64, freq: f64, phase: f64 },
    Exp { coord: usize, amplitude: f64, rate: f64 },
    Sum { terms: Vec<Expr> },
}

fn coordinate(x: &[f64], coord: usize) -> Result<f64> {
    x.get(coord).copied().ok_or(Error::Dimension { expected: coord + 1, got: x.len() })
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn sin(coord: usize, amplitude: f64, freq: f64, phase: f64) -> Self {
        Expr::Sin { coord, amplitude, freq, phase }
    }

    pub fn cos(coord: usize, amplitude: f64, freq: f64, phase: f64) -> Self {
        Expr::Cos { coord, amplitude, freq, phase }
    }

    pub fn poly(coord: usize, coeffs: Vec<f64>) -> Self {
        Expr::Poly { coord, coeffs }
    }

    pub fn affine(offset: f64, coeffs: Vec<f64>) -> Self {
        Expr::Affine { offset, coeffs }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const { value } => *value,
            Expr::Affine { offset, coeffs } => {
                if coeffs.len() > x.len() {
                    return Err(Error::Dimension { expected: coeffs.len(), got: x.len() });
                }
                offset + coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
            }
            Expr::Poly { coord, coeffs } => {
                let v = coordinate(x, *coord)?;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * v + c)
            }
            Expr::Sin { coord, amplitude, freq, phase } => {
                amplitude * (freq * coordinate(x, *coord)? + phase).sin()
            }
            Expr::Cos { coord, amplitude, freq, phase } => {
                amplitude * (freq * coordinate(x, *coord)? + phase).cos()
            }
            Expr::Exp { coord, amplitude, rate } => amplitude * (rate * coordinate(x, *coord)?).exp(),
            Expr::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(x)?;
                }
                acc
            }
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        self.accumulate_grad(x, &mut g)?;
        Ok(g)
    }

    fn accumulate_grad(&self, x: &[f64], g: &mut [f64]) -> Result<()> {
        match self {
            Expr::Const { .. } => {}
            Expr::Affine { coeffs, .. } => {
                if coeffs.len() > x.len() {
                    return Err(Error::Dimension { expected: coeffs.len(), got: x.len() });
                }
                for (gi, a) in g.iter_mut().zip(coeffs) {
                    *gi += a;
                }
            }
            Expr::Poly { coord, coeffs } => {
                let v = coordinate(x, *coord)?;
                let d = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * v + k as f64 * c);
                g[*coord] += d;
            }
            Expr::Sin { coord, amplitude, freq, phase } => {
                let v = coordinate(x, *coord)?;
                g[*coord] += amplitude * freq * (freq * v + phase).cos();
            }
            Expr::Cos { coord, amplitude, freq, phase } => {
                let v = coordinate(x, *coord)?;
                g[*coord] -= amplitude * freq * (freq * v + phase).sin();
            }
            Expr::Exp { coord, amplitude, rate } => {
                let v = coordinate(x, *coord)?;
                g[*coord] += amplitude * rate * (rate * v).exp();
            }
            Expr::Sum { terms } => {
                for t in terms {
                    t.accumulate_grad(x, g)?;
                }
            }
        }
        Ok(())
    }

    /// Highest coordinate index referenced, plus one.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Const { .. } => 0,
            Expr::Affine { coeffs, .. } => coeffs.len(),
            Expr::Poly { coord, .. }
            | Expr::Sin { coord, .. }
            | Expr::Cos { coord, .. }
            | Expr::Exp { coord, .. } => coord + 1,
            Expr::Sum { terms } => terms.iter().map(Expr::min_dim).max().unwrap_or(0),
        }
    }

    /// Parses the `name[@k]:params` syntax described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let terms = split_terms(text.trim());
        if terms.is_empty() {
            return Err(Error::InvalidSpec("empty function spec".into()));
        }
        let mut parsed = terms.iter().map(|t| parse_term(t)).collect::<Result<Vec<_>>>()?;
        Ok(if parsed.len() == 1 { parsed.remove(0) } else { Expr::Sum { terms: parsed } })
    }
}

/// Splits on `+` signs that start a new named term (not exponent signs).
fn split_terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let starts_term = c == '+' && chars.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic());
        if starts_term {
            out.push(std::mem::take(&mut current));
        } else {
            current.push(c);
        }
    }
    if !current.trim().is_empty() {
        out.push(current);
    }
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn parse_term(term: &str) -> Result<Expr> {
    let (head, params) = match term.split_once(':') {
        Some((h, p)) => (h.trim(), p.trim()),
        None => (term.trim(), ""),
    };
    let (name, coord) = match head.split_once('@') {
        Some((n, k)) => (
            n,
            k.parse::<usize>().map_err(|_| Error::InvalidSpec(format!("bad coordinate index in `{term}`")))?,
        ),
        None => (head, 0),
    };
    let nums: Vec<f64> = if params.is_empty() {
        Vec::new()
    } else {
        params
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::InvalidSpec(format!("bad number `{p}` in `{term}`"))))
            .collect::<Result<_>>()?
    };
    if nums.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("non-finite parameter in `{term}`")));
    }
    let arity = |lo: usize, hi: usize| -> Result<()> {
        if nums.len() < lo || nums.len() > hi {
            Err(Error::InvalidSpec(format!("`{name}` takes {lo}..={hi} parameters, got {}", nums.len())))
        } else {
            Ok(())
        }
    };
    match name {
        "zero" => {
            arity(0, 0)?;
            Ok(Expr::constant(0.0))
        }
        "const" => {
            arity(1, 1)?;
            Ok(Expr::constant(nums[0]))
        }
        "affine" => {
            arity(1, usize::MAX)?;
            Ok(Expr::affine(nums[0], nums[1..].to_vec()))
        }
        "poly" => {
            arity(1, MAX_POLY_DEGREE + 1)?;
            Ok(Expr::poly(coord, nums))
        }
        "sin" | "cos" => {
            arity(2, 3)?;
            let phase = nums.get(2).copied().unwrap_or(0.0);
            Ok(if name == "sin" {
                Expr::sin(coord, nums[0], nums[1], phase)
            } else {
                Expr::cos(coord, nums[0], nums[1], phase)
            })
        }
        "exp" => {
            arity(2, 2)?;
            Ok(Expr::Exp { coord, amplitude: nums[0], rate: nums[1] })
        }
        other => Err(Error::InvalidSpec(format!("unknown function `{other}`"))),
    }
}

impl ScalarField for Expr {
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.grad(x).ok()
    }
}

struct FnField<F, G> {
    value: F,
    gradient: Option<G>,
}

impl<F, G> ScalarField for FnField<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        let v = (self.value)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OutOfDomain(format!("shift function is not finite at {x:?}")))
        }
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }
}

/// `sum_i c_i f_i + offset`, keeping analytic gradients when all parts have them.
struct LinearCombination {
    parts: Vec<(f64, ShiftFunction)>,
    offset: f64,
}

impl ScalarField for LinearCombination {
    fn try_value(&self, x: &[f64]) -> Result<f64> {
        let mut acc = self.offset;
        for (c, f) in &self.parts {
            if *c != 0.0 {
                acc += c * f.try_value(x)?;
            }
        }
        Ok(acc)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        for (c, f) in &self.parts {
            let gi = f.gradient(x)?;
            for (a, b) in g.iter_mut().zip(gi) {
                *a += c * b;
            }
        }
        Some(g)
    }
}

/// A shift function `alpha`: `x -> alpha(x)` in units of flow time.
#[derive(Clone)]
pub struct ShiftFunction {
    field: Arc<dyn ScalarField>,
    expr: Option<Expr>,
    domain: Option<Domain>,
}

impl fmt::Debug for ShiftFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.expr {
            Some(e) => f.debug_struct("ShiftFunction").field("expr", e).finish(),
            None => f.write_str("ShiftFunction(<opaque>)"),
        }
    }
}

impl From<Expr> for ShiftFunction {
    fn from(expr: Expr) -> Self {
        Self { field: Arc::new(expr.clone()), expr: Some(expr), domain: None }
    }
}

impl ShiftFunction {
    pub fn constant(c: f64) -> Self {
        Expr::constant(c).into()
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Expr::parse(text).map(Into::into)
    }

    pub fn from_field(field: Arc<dyn ScalarField>) -> Self {
        Self { field, expr: None, domain: None }
    }

    /// Opaque evaluator without a gradient.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::from_field(Arc::new(FnField { value: f, gradient: None::<fn(&[f64]) -> Vec<f64>> }))
    }

    pub fn with_gradient<F, G>(f: F, g: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::from_field(Arc::new(FnField { value: f, gradient: Some(g) }))
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn domain(&self) -> Option<&Domain> {
        self.domain.as_ref()
    }

    /// The registry form, when this function is a closed form.
    pub fn expr(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64> {
        self.field.try_value(x)
    }

    /// Value, or NaN where the evaluator fails.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.try_value(x).unwrap_or(f64::NAN)
    }

    pub fn has_gradient(&self, x: &[f64]) -> bool {
        self.field.gradient(x).is_some()
    }

    /// Analytic gradient, if the evaluator provides one.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.field.gradient(x)
    }

    /// Central-difference gradient with step `h`.
    pub fn gradient_fd(&self, x: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut probe = x.to_vec();
        let mut g = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            probe[i] = x[i] + h;
            let plus = self.try_value(&probe)?;
            probe[i] = x[i] - h;
            let minus = self.try_value(&probe)?;
            probe[i] = x[i];
            g.push((plus - minus) / (2.0 * h));
        }
        Ok(g)
    }

    /// Analytic gradient when available, else central differences.
    pub fn gradient_or_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.gradient(x) {
            Some(g) => Ok(g),
            None => self.gradient_fd(x, GRADIENT_FD_STEP),
        }
    }

    /// `sum_i c_i f_i + offset`.
    pub fn linear_combination(parts: Vec<(f64, ShiftFunction)>, offset: f64) -> Self {
        let expr = parts
            .iter()
            .map(|(c, f)| f.expr().map(|e| scale_expr(e, *c)))
            .collect::<Option<Vec<_>>>()
            .map(|mut terms| {
                if offset != 0.0 {
                    terms.push(Expr::constant(offset));
                }
                Expr::Sum { terms }
            });
        match expr {
            Some(e) => e.into(),
            None => Self::from_field(Arc::new(LinearCombination { parts, offset })),
        }
    }

    /// `s alpha0 + (1 - s) alpha1`.
    pub fn convex_combination(s: f64, alpha0: &ShiftFunction, alpha1: &ShiftFunction) -> Self {
        Self::linear_combination(vec![(s, alpha0.clone()), (1.0 - s, alpha1.clone())], 0.0)
    }

    pub fn add(&self, other: &ShiftFunction) -> Self {
        Self::linear_combination(vec![(1.0, self.clone()), (1.0, other.clone())], 0.0)
    }

    pub fn offset(&self, c: f64) -> Self {
        Self::linear_combination(vec![(1.0, self.clone())], c)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::linear_combination(vec![(c, self.clone())], 0.0)
    }

    /// Checks finiteness on the grid and, where an analytic gradient exists,
    /// its agreement with central differences to `1e-4`.
    pub fn check_on(&self, grid: &Grid) -> Result<()> {
        for x in grid.points() {
            let v = self.try_value(&x)?;
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("shift function not finite at {x:?}")));
            }
            if let Some(g) = self.gradient(&x) {
                let fd = self.gradient_fd(&x, GRADIENT_FD_STEP)?;
                let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if err > 1e-4 {
                    return Err(Error::InvalidSpec(format!(
                        "analytic gradient disagrees with finite differences by {err:e} at {x:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn scale_expr(e: &Expr, c: f64) -> Expr {
    match e {
        Expr::Const { value } => Expr::Const { value: c * value },
        Expr::Affine { offset, coeffs } => Expr::Affine {
            offset: c * offset,
            coeffs: coeffs.iter().map(|a| c * a).collect(),
        },
        Expr::Poly { coord, coeffs } => Expr::Poly { coord: *coord, coeffs: coeffs.iter().map(|a| c * a).collect() },
        Expr::Sin { coord, amplitude, freq, phase } => {
            Expr::Sin { coord: *coord, amplitude: c * amplitude, freq: *freq, phase: *phase }
        }
        Expr::Cos { coord, amplitude, freq, phase } => {
            Expr::Cos { coord: *coord, amplitude: c * amplitude, freq: *freq, phase: *phase }
        }
        Expr::Exp { coord, amplitude, rate } => Expr::Exp { coord: *coord, amplitude: c * amplitude, rate: *rate },
        Expr::Sum { terms } => Expr::Sum { terms: terms.iter().map(|t| scale_expr(t, c)).collect() },
    }
}
