use ndarray::Array2;

use crate::grid::Grid2D;

/// Value field `u` and price field `p` sampled at the grid nodes, indexed
/// `[[i, j]]` with `i` along storage and `j` along fringe production.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: Array2<f64>,
    pub p: Array2<f64>,
}

impl FieldPair {
    pub fn constant(grid: &Grid2D, u: f64, p: f64) -> Self {
        Self {
            u: Array2::from_elem(grid.shape(), u),
            p: Array2::from_elem(grid.shape(), p),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.u.dim()
    }

    pub fn matches(&self, grid: &Grid2D) -> bool {
        self.u.dim() == grid.shape() && self.p.dim() == grid.shape()
    }

    /// First node (in row-major order) holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        first_non_finite(&self.u).or_else(|| first_non_finite(&self.p))
    }

    pub fn max_abs_diff(&self, other: &FieldPair) -> f64 {
        sup_norm_diff(&self.u, &other.u).max(sup_norm_diff(&self.p, &other.p))
    }
}

pub fn first_non_finite(a: &Array2<f64>) -> Option<(usize, usize)> {
    a.indexed_iter().find(|(_, v)| !v.is_finite()).map(|(ix, _)| ix)
}

/// Sup norm, reduced in row-major order.
pub fn sup_norm(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup_norm_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Bilinear interpolation at fractional node coordinates `(x, y)`.
pub fn bilinear(a: &Array2<f64>, x: f64, y: f64) -> f64 {
    let (rows, cols) = a.dim();
    let x = x.clamp(0.0, (rows - 1) as f64);
    let y = y.clamp(0.0, (cols - 1) as f64);
    let i0 = (x.floor() as usize).min(rows - 2);
    let j0 = (y.floor() as usize).min(cols.saturating_sub(2));
    let tx = x - i0 as f64;
    if cols == 1 {
        return a[[i0, 0]] * (1.0 - tx) + a[[i0 + 1, 0]] * tx;
    }
    let ty = y - j0 as f64;
    let v00 = a[[i0, j0]];
    let v10 = a[[i0 + 1, j0]];
    let v01 = a[[i0, j0 + 1]];
    let v11 = a[[i0 + 1, j0 + 1]];
    (1.0 - tx) * ((1.0 - ty) * v00 + ty * v01) + tx * ((1.0 - ty) * v10 + ty * v11)
}
