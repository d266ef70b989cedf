use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a tensor grid: `count` equally spaced nodes on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + i as f64 * self.step()
        }
    }
}

/// Tensor grid over the intensity space. Flat indices are row-major, the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::param("grid", "need at least one axis"));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.count < 2 {
                return Err(Error::param(format!("grid[{i}].count"), "need at least 2 nodes"));
            }
            if !(a.min.is_finite() && a.max.is_finite() && a.min > 0.0 && a.max > a.min) {
                return Err(Error::param(format!("grid[{i}]"), format!("need 0 < min < max, got [{}, {}]", a.min, a.max)));
            }
        }
        Ok(Self { axes })
    }

    /// Same box with `count` nodes per axis.
    pub fn uniform(bounds: &[(f64, f64)], count: usize) -> Result<Self> {
        Self::new(bounds.iter().map(|&(min, max)| Axis { min, max, count }).collect())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for i in (0..self.dim().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.axes[i + 1].count;
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = flat % self.axes[i].count;
            flat /= self.axes[i].count;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, a)| a.node(i)).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|g| self.point(g)).collect()
    }

    /// True when the node has a neighbour on both sides along every axis.
    pub fn is_interior(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().zip(&self.axes).all(|(&i, a)| i > 0 && i + 1 < a.count)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.axes).all(|(&v, a)| {
            let tol = 1e-12 * a.max;
            v >= a.min - tol && v <= a.max + tol
        })
    }

    /// Multilinear hat-function weights of `x`, written into `out` as
    /// `(flat index, weight)`. Coordinates outside the box are clamped to
    /// it; the return value reports whether that happened.
    pub fn hat_weights(&self, x: &[f64], out: &mut Vec<(usize, f64)>) -> bool {
        out.clear();
        let strides = self.strides();
        let mut clamped = false;
        out.push((0, 1.0));
        for (d, a) in self.axes.iter().enumerate() {
            let tol = 1e-12 * a.max;
            if x[d] < a.min - tol || x[d] > a.max + tol {
                clamped = true;
            }
            let v = x[d].clamp(a.min, a.max);
            let h = a.step();
            let cell = (((v - a.min) / h).floor() as usize).min(a.count - 2);
            let mut t = ((v - a.node(cell)) / h).clamp(0.0, 1.0);
            // Points on a node reproduce the node value exactly.
            if t < 1e-12 {
                t = 0.0;
            } else if t > 1.0 - 1e-12 {
                t = 1.0;
            }
            let n = out.len();
            for k in 0..n {
                let (base, w) = out[k];
                out[k] = (base + cell * strides[d], w * (1.0 - t));
                out.push((base + (cell + 1) * strides[d], w * t));
            }
        }
        clamped
    }

    /// Multilinear interpolation of node values, with the clamp flag.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> (f64, bool) {
        let mut w = Vec::with_capacity(1 << self.dim());
        let clamped = self.hat_weights(x, &mut w);
        (w.iter().map(|&(i, c)| c * values[i]).sum(), clamped)
    }

    /// Same box with every cell halved.
    pub fn refined(&self) -> Self {
        Self { axes: self.axes.iter().map(|a| Axis { count: 2 * a.count - 1, ..*a }).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = Grid::uniform(&[(1.0, 2.0), (1.0, 3.0)], 5).unwrap();
        assert_eq!(g.len(), 25);
        for f in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(f)), f);
        }
        assert_eq!(g.point(1), vec![1.0, 1.5]);
        assert_eq!(g.point(5), vec![1.25, 1.0]);
        assert!(g.is_interior(6));
        assert!(!g.is_interior(4));
    }

    #[test]
    fn multilinear_is_exact_on_bilinear_functions() {
        let g = Grid::uniform(&[(1.0, 2.0), (1.0, 3.0)], 4).unwrap();
        let f = |p: &[f64]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1];
        let vals: Vec<f64> = g.points().iter().map(|p| f(p)).collect();
        for x in [[1.1, 2.9], [1.5, 1.0], [2.0, 3.0], [1.37, 2.21]] {
            let (v, c) = g.interpolate(&vals, &x);
            assert!(!c);
            assert!((v - f(&x)).abs() < 1e-12);
        }
        let (_, c) = g.interpolate(&vals, &[2.5, 2.0]);
        assert!(c);
    }

    #[test]
    fn weights_partition_unity() {
        let g = Grid::uniform(&[(0.5, 4.0), (0.2, 1.0), (1.0, 2.0)], 3).unwrap();
        let mut w = Vec::new();
        g.hat_weights(&[0.7, 5.0, 1.3], &mut w);
        assert_eq!(w.len(), 8);
        assert!((w.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn node_values_are_reproduced_bitwise() {
        let g = Grid::uniform(&[(0.1, 3.7), (0.3, 2.9)], 17).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|q| 1.0 + (q as f64 * 0.37).sin()).collect();
        for q in 0..g.len() {
            let (v, clamped) = g.interpolate(&values, &g.point(q));
            assert!(!clamped);
            assert_eq!(v.to_bits(), values[q].to_bits(), "node {q}");
        }
    }
}
