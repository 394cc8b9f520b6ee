use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Uniform `(k, z)` lattice with `n` intervals in storage and `m` in fringe
/// production. Node `(i, j)` sits at `(k_min + i dk, z_min + j dz)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid2D {
    pub n: usize,
    pub m: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub dk: f64,
    pub dz: f64,
}

impl Grid2D {
    pub fn new(params: &ModelParams, n: usize, m: usize) -> Result<Self> {
        if n < 2 || m < 1 {
            return Err(Error::InvalidParams(format!(
                "grid needs n >= 2 and m >= 1, got n={n}, m={m}"
            )));
        }
        if !(params.k_min < params.k_max) || !(params.z_min < params.z_max) {
            return Err(Error::InvalidParams("empty grid rectangle".into()));
        }
        Ok(Self {
            n,
            m,
            k_min: params.k_min,
            k_max: params.k_max,
            z_min: params.z_min,
            z_max: params.z_max,
            dk: (params.k_max - params.k_min) / n as f64,
            dz: (params.z_max - params.z_min) / m as f64,
        })
    }

    /// Storage level of column `i`; the last column is exactly `k_max`.
    pub fn k(&self, i: usize) -> f64 {
        if i == self.n {
            self.k_max
        } else {
            self.k_min + i as f64 * self.dk
        }
    }

    pub fn z(&self, j: usize) -> f64 {
        if j == self.m {
            self.z_max
        } else {
            self.z_min + j as f64 * self.dz
        }
    }

    /// Array shape `(n + 1, m + 1)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.n + 1, self.m + 1)
    }

    pub fn nodes(&self) -> usize {
        (self.n + 1) * (self.m + 1)
    }

    /// Fractional node coordinates of a point, clamped to the rectangle.
    pub fn locate(&self, k: f64, z: f64) -> (f64, f64) {
        let x = ((k - self.k_min) / self.dk).clamp(0.0, self.n as f64);
        let y = ((z - self.z_min) / self.dz).clamp(0.0, self.m as f64);
        (x, y)
    }

    /// Index of the node nearest to `(k, z)`.
    pub fn nearest(&self, k: f64, z: f64) -> (usize, usize) {
        let (x, y) = self.locate(k, z);
        (x.round() as usize, y.round() as usize)
    }
}
