//! Real Jordan form matrices and their exponentials.
//!
//! A [`JordanSpec`] is an ordered list of cells. Cells are laid out on the
//! block diagonal; inside a cell of multiplicity `p` the repeated diagonal
//! block sits on the diagonal and identity blocks sit on the first block
//! **subdiagonal**:
//!
//! ```text
//! J_3(A) = | A 0 0 |
//!          | E A 0 |
//!          | 0 E A |
//! ```
//!
//! Most references put the identities above the diagonal; here they are
//! below, so `e^{J t}` is lower block-triangular.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense square matrix of reals.
pub type Matrix = DMatrix<f64>;

/// Largest supported cell multiplicity.
pub const MAX_MULTIPLICITY: usize = 20;

/// One real Jordan cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Block {
    /// `J_p(lambda)`: a `p x p` cell with a real eigenvalue.
    Real { lambda: f64, p: usize },
    /// `J_p(R(alpha, beta))`: a `2p x 2p` cell with eigenvalues `alpha ± i beta`.
    Rotation { alpha: f64, beta: f64, p: usize },
}

impl Block {
    pub fn multiplicity(&self) -> usize {
        match *self {
            Block::Real { p, .. } | Block::Rotation { p, .. } => p,
        }
    }

    /// Size of the diagonal sub-block (1 for real cells, 2 for rotation cells).
    pub fn width(&self) -> usize {
        match self {
            Block::Real { .. } => 1,
            Block::Rotation { .. } => 2,
        }
    }

    pub fn dim(&self) -> usize {
        self.width() * self.multiplicity()
    }

    fn validate(&self) -> Result<()> {
        let p = self.multiplicity();
        if p == 0 {
            return Err(Error::InvalidSpec("cell multiplicity must be at least 1".into()));
        }
        if p > MAX_MULTIPLICITY {
            return Err(Error::InvalidSpec(format!(
                "cell multiplicity {p} exceeds {MAX_MULTIPLICITY}"
            )));
        }
        match *self {
            Block::Real { lambda, .. } if !lambda.is_finite() => {
                Err(Error::InvalidSpec("eigenvalue must be finite".into()))
            }
            Block::Rotation { alpha, beta, .. } if !alpha.is_finite() || !beta.is_finite() => {
                Err(Error::InvalidSpec("rotation parameters must be finite".into()))
            }
            Block::Rotation { beta, .. } if beta == 0.0 => {
                Err(Error::InvalidSpec("rotation cell requires beta != 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// The 1x1 or 2x2 diagonal sub-block.
    fn diagonal_block(&self) -> Matrix {
        match *self {
            Block::Real { lambda, .. } => Matrix::from_element(1, 1, lambda),
            Block::Rotation { alpha, beta, .. } => rotation_generator(alpha, beta),
        }
    }

    /// Closed-form `e^{D t}` of the diagonal sub-block.
    fn diagonal_exp(&self, t: f64) -> Matrix {
        match *self {
            Block::Real { lambda, .. } => Matrix::from_element(1, 1, (lambda * t).exp()),
            Block::Rotation { alpha, beta, .. } => {
                let scale = (alpha * t).exp();
                let (s, c) = (beta * t).sin_cos();
                Matrix::from_row_slice(2, 2, &[scale * c, -scale * s, scale * s, scale * c])
            }
        }
    }
}

/// `R(alpha, beta) = [[alpha, -beta], [beta, alpha]]`.
pub fn rotation_generator(alpha: f64, beta: f64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[alpha, -beta, beta, alpha])
}

/// Block-diagonal description of a real matrix in Jordan form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct JordanSpec {
    blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    blocks: Vec<Block>,
}

impl TryFrom<RawSpec> for JordanSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        JordanSpec::new(raw.blocks)
    }
}

impl From<JordanSpec> for RawSpec {
    fn from(spec: JordanSpec) -> Self {
        RawSpec { blocks: spec.blocks }
    }
}

impl JordanSpec {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSpec("Jordan spec needs at least one cell".into()));
        }
        for b in &blocks {
            b.validate()?;
        }
        Ok(Self { blocks })
    }

    pub fn real(lambda: f64, p: usize) -> Result<Self> {
        Self::new(vec![Block::Real { lambda, p }])
    }

    pub fn rotation(alpha: f64, beta: f64, p: usize) -> Result<Self> {
        Self::new(vec![Block::Rotation { alpha, beta, p }])
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum()
    }

    /// Starting row/column of each cell.
    pub fn offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                let start = *acc;
                *acc += b.dim();
                Some(start)
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn spectrum(&self) -> Spectrum {
        let eigenvalues = self
            .blocks
            .iter()
            .flat_map(|b| match *b {
                Block::Real { lambda, p } => vec![Eigenvalue { re: lambda, im: 0.0, multiplicity: p }],
                Block::Rotation { alpha, beta, p } => vec![
                    Eigenvalue { re: alpha, im: beta, multiplicity: p },
                    Eigenvalue { re: alpha, im: -beta, multiplicity: p },
                ],
            })
            .collect();
        Spectrum { eigenvalues }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

/// Eigenvalues read off the cells of a [`JordanSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
}

impl Spectrum {
    /// Eigenvalues on the imaginary axis with nonzero imaginary part.
    pub fn purely_imaginary(&self) -> impl Iterator<Item = &Eigenvalue> {
        self.eigenvalues.iter().filter(|e| e.re == 0.0 && e.im != 0.0)
    }
}

/// Assembles the block-diagonal matrix described by `spec`.
pub fn build_jordan_matrix(spec: &JordanSpec) -> Matrix {
    let n = spec.dim();
    let mut m = Matrix::zeros(n, n);
    for (block, start) in spec.blocks().iter().zip(spec.offsets()) {
        let w = block.width();
        let d = block.diagonal_block();
        for k in 0..block.multiplicity() {
            let base = start + k * w;
            m.view_mut((base, base), (w, w)).copy_from(&d);
            if k > 0 {
                for i in 0..w {
                    m[(base + i, base - w + i)] = 1.0;
                }
            }
        }
    }
    m
}

/// Closed-form `e^{A t}` for `A = build_jordan_matrix(spec)`.
///
/// Each cell is lower block-triangular with `(t^j / j!) e^{D t}` on its
/// `j`-th block subdiagonal. The coefficients are built as running products
/// so no factorial is ever formed explicitly.
pub fn jordan_exp(spec: &JordanSpec, t: f64) -> Matrix {
    let n = spec.dim();
    let mut out = Matrix::zeros(n, n);
    for (block, start) in spec.blocks().iter().zip(spec.offsets()) {
        let w = block.width();
        let p = block.multiplicity();
        let diag = block.diagonal_exp(t);
        let mut coeff = 1.0;
        for j in 0..p {
            if j > 0 {
                coeff *= t / j as f64;
            }
            let scaled = &diag * coeff;
            for k in j..p {
                let row = start + k * w;
                let col = start + (k - j) * w;
                out.view_mut((row, col), (w, w)).copy_from(&scaled);
            }
        }
    }
    out
}

/// Applies `e^{A t}` to a vector without assembling the full matrix.
pub fn jordan_exp_apply(spec: &JordanSpec, t: f64, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (block, start) in spec.blocks().iter().zip(spec.offsets()) {
        let w = block.width();
        let p = block.multiplicity();
        let diag = block.diagonal_exp(t);
        let mut coeff = 1.0;
        for j in 0..p {
            if j > 0 {
                coeff *= t / j as f64;
            }
            for k in j..p {
                let row = start + k * w;
                let col = start + (k - j) * w;
                for r in 0..w {
                    let mut acc = 0.0;
                    for c in 0..w {
                        acc += diag[(r, c)] * x[col + c];
                    }
                    out[row + r] += coeff * acc;
                }
            }
        }
    }
    out
}

/// Oracle tolerance: absolute entrywise accuracy for `||m t|| <= 10`.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

/// `e^{m t}` by scaling and squaring a truncated Taylor series.
///
/// Independent of the cell structure; used to cross-check [`jordan_exp`].
pub fn matrix_exp_oracle(m: &Matrix, t: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::InvalidSpec("matrix must be square".into()));
    }
    if !t.is_finite() || m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Range("non-finite input".into()));
    }
    let n = m.nrows();
    let a = m * t;
    let norm = one_norm(&a);
    // Overflow of e^{||a||} is certain well before this bound.
    if norm > 700.0 * (n as f64).max(1.0) {
        return Err(Error::Range(format!("||m t|| = {norm:e} is too large")));
    }
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a * scale;
    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &a / k as f64;
        result += &term;
        if one_norm(&term) <= f64::EPSILON * 1e-3 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    if result.iter().any(|v| !v.is_finite()) {
        return Err(Error::Range("matrix exponential overflowed".into()));
    }
    Ok(result)
}

/// Maximum absolute column sum.
pub fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Minimum period of the closed trajectories of `x -> e^{A t} x`.
///
/// Closed trajectories exist iff some cell has a purely imaginary pair
/// `± i beta`; the shortest period is then `min 2 pi / |beta|` over those cells.
pub fn min_closed_period(spec: &JordanSpec) -> Option<f64> {
    spec.blocks()
        .iter()
        .filter_map(|b| match *b {
            Block::Rotation { alpha, beta, .. } if alpha == 0.0 => Some(2.0 * PI / beta.abs()),
            _ => None,
        })
        .reduce(f64::min)
}

/// Index of the cell realizing [`min_closed_period`].
pub fn min_period_block(spec: &JordanSpec) -> Option<usize> {
    let period = min_closed_period(spec)?;
    spec.blocks().iter().position(|b| {
        matches!(*b, Block::Rotation { alpha, beta, .. } if alpha == 0.0 && 2.0 * PI / beta.abs() == period)
    })
}
