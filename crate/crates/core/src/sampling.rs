//! Seeded random specs and shift functions for property checks.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::jordan::{Block, JordanSpec};
use crate::shift::{Expr, ShiftFunction};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random real Jordan spec of dimension at most `max_dim` whose matrix has
/// infinity norm at most `max_norm`.
pub fn random_spec<R: Rng>(rng: &mut R, max_dim: usize, max_norm: f64) -> JordanSpec {
    let target = rng.random_range(1..=max_dim);
    // Off-diagonal identity entries contribute 1 to the row sums.
    let diag = (max_norm - 1.0).max(0.0);
    let mut blocks = Vec::new();
    let mut dim = 0;
    while dim < target {
        let room = target - dim;
        let rotation = room >= 2 && rng.random_bool(0.5);
        let block = if rotation {
            let p = rng.random_range(1..=(room / 2).min(3));
            let beta_mag = rng.random_range(0.1..=diag.max(0.2));
            let alpha_mag = rng.random_range(0.0..=(diag - beta_mag).max(0.0));
            let beta = if rng.random_bool(0.5) { beta_mag } else { -beta_mag };
            let alpha = if rng.random_bool(0.5) { alpha_mag } else { -alpha_mag };
            Block::Rotation { alpha, beta, p }
        } else {
            let p = rng.random_range(1..=room.min(4));
            Block::Real { lambda: rng.random_range(-diag..=diag), p }
        };
        dim += block.dim();
        blocks.push(block);
    }
    JordanSpec::new(blocks).expect("sampled blocks are valid")
}

/// Random spec whose blocks are all pure rotations or real cells, with at
/// least one pure rotation.
pub fn random_imaginary_spec<R: Rng>(rng: &mut R, max_blocks: usize) -> JordanSpec {
    let count = rng.random_range(1..=max_blocks);
    let mut blocks = vec![Block::Rotation { alpha: 0.0, beta: signed(rng, 0.3, 4.0), p: rng.random_range(1..=2) }];
    for _ in 1..count {
        blocks.push(if rng.random_bool(0.7) {
            Block::Rotation { alpha: 0.0, beta: signed(rng, 0.3, 4.0), p: rng.random_range(1..=2) }
        } else {
            Block::Real { lambda: rng.random_range(-1.0..=1.0), p: 1 }
        });
    }
    JordanSpec::new(blocks).expect("sampled blocks are valid")
}

/// Uniform magnitude in `[lo, hi]` with a random sign.
pub fn signed<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Random smooth closed-form shift function on `[-1, 1]^dim`: a constant,
/// a sine, a cosine and a quadratic, each on a random coordinate. Scaled by
/// `scale`, its values are bounded by `scale` and each gradient component
/// by `1.6 scale`.
pub fn random_alpha<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> ShiftFunction {
    random_expr(rng, dim, scale).into()
}

pub fn random_expr<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Expr {
    let mut coord = || rng.random_range(0..dim.max(1));
    let (c1, c2, c3) = (coord(), coord(), coord());
    let mut amp = |m: f64| scale * rng.random_range(-m..=m);
    let (a_const, a_sin, a_cos) = (amp(0.3), amp(0.3), amp(0.3));
    let (p1, p2) = (amp(0.1), amp(0.1));
    let mut freq = || rng.random_range(0.5..=2.0);
    let (w1, w2) = (freq(), freq());
    let mut phase = || rng.random_range(-PI..=PI);
    let (f1, f2) = (phase(), phase());
    Expr::Sum {
        terms: vec![
            Expr::constant(a_const),
            Expr::sin(c1, a_sin, w1, f1),
            Expr::cos(c2, a_cos, w2, f2),
            Expr::poly(c3, vec![0.0, p1, p2]),
        ],
    }
}

/// Uniform point in `[-r, r]^dim`.
pub fn random_point<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-r..=r)).collect()
}
