//! Rectangular evaluation domains and their regular sample grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidSpec("domain bounds must be nonempty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(Error::InvalidSpec("domain needs finite lower < upper on every axis".into()));
        }
        Ok(Self { lower, upper })
    }

    /// `[-r, r]^dim`.
    pub fn cube(dim: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; dim], vec![r; dim])
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

/// Regular tensor-product grid with `counts[i] >= 2` nodes per axis,
/// endpoints included. The first axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: Domain,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(domain: Domain, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != domain.dim() {
            return Err(Error::InvalidSpec("grid counts must match the domain dimension".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidSpec("grid resolution must be at least 2 per axis".into()));
        }
        Ok(Self { domain, counts })
    }

    /// Same count on every axis.
    pub fn uniform(domain: Domain, count: usize) -> Result<Self> {
        let d = domain.dim();
        Self::new(domain, vec![count; d])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (self.domain.upper[i] - self.domain.lower[i]) / (c - 1) as f64)
            .collect()
    }

    /// Largest grid step; pairs closer than this count as neighbours.
    pub fn resolution(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&c| {
                let i = flat % c;
                flat /= c;
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).rev().fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(flat)
            .into_iter()
            .enumerate()
            .map(|(axis, i)| {
                if i + 1 == self.counts[axis] {
                    self.domain.upper[axis]
                } else {
                    self.domain.lower[axis] + h[axis] * i as f64
                }
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Flat indices of the axis-aligned neighbours of `flat`.
    pub fn neighbours(&self, flat: usize) -> Vec<usize> {
        let idx = self.multi_index(flat);
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            if idx[axis] > 0 {
                let mut n = idx.clone();
                n[axis] -= 1;
                out.push(self.flat_index(&n));
            }
            if idx[axis] + 1 < self.counts[axis] {
                let mut n = idx.clone();
                n[axis] += 1;
                out.push(self.flat_index(&n));
            }
        }
        out
    }

    /// Grid node closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let idx: Vec<usize> = (0..self.dim())
            .map(|axis| {
                let r = ((x[axis] - self.domain.lower[axis]) / h[axis]).round();
                (r.max(0.0) as usize).min(self.counts[axis] - 1)
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Nodes strictly inside the box (no coordinate on the boundary).
    pub fn interior_points(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .filter(|&k| {
                self.multi_index(k)
                    .iter()
                    .zip(&self.counts)
                    .all(|(&i, &c)| i > 0 && i + 1 < c)
            })
            .map(|k| self.point(k))
            .collect()
    }
}
