//! Optimal production, state drifts and the shock line.

use ndarray::Array2;

use crate::field::FieldPair;
use crate::grid::Grid2D;
use crate::hamiltonian::{h_down, h_up, h_upwind};
use crate::params::ModelParams;
use crate::scheme::{BoundaryBranch, BoundaryRule, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFields {
    pub q_star: Array2<f64>,
    /// `q* + z - D(p)`.
    pub drift_k: Array2<f64>,
    /// `b(k, z, p)`.
    pub drift_z: Array2<f64>,
    pub shock: Vec<ShockPoint>,
}

/// Largest one-cell jump of `q*` along a fixed-storage column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockPoint {
    pub k: f64,
    /// Midpoint of the cell `[z_j, z_{j+1}]` holding the jump.
    pub z: f64,
    pub j: usize,
    /// `q*_{j+1} - q*_j`.
    pub jump: f64,
}

/// Storage drift actually selected by the scheme at every node: in the
/// interior the one-sided drift of larger magnitude, at the boundaries the
/// drift of the active branch (zero when the cartel holds storage).
pub fn extract_policy(f: &FieldPair, grid: &Grid2D, params: &ModelParams) -> PolicyFields {
    extract_policy_with(f, grid, params, BoundaryRule::ArbitragePrice)
}

pub fn extract_policy_with(f: &FieldPair, grid: &Grid2D, params: &ModelParams, rule: BoundaryRule) -> PolicyFields {
    let scheme = Scheme::with_rule(params, grid, rule);
    let (n, m) = (grid.n, grid.m);
    let dk = grid.dk;
    let mut drift_k = Array2::zeros(grid.shape());
    for j in 0..=m {
        let z = grid.z(j);
        let lo = scheme.residual_boundary_kmin(f, j);
        drift_k[[0, j]] = match lo.branch {
            BoundaryBranch::PriceControlled => 0.0,
            BoundaryBranch::InteriorLike => h_up(params, z, f.p[[0, j]], (f.u[[1, j]] - f.u[[0, j]]) / dk).d_xi,
        };
        let hi = scheme.residual_boundary_kmax(f, j);
        drift_k[[n, j]] = match hi.branch {
            BoundaryBranch::PriceControlled => 0.0,
            BoundaryBranch::InteriorLike => h_down(params, z, f.p[[n, j]], (f.u[[n, j]] - f.u[[n - 1, j]]) / dk).d_xi,
        };
        for i in 1..n {
            let xi_l = (f.u[[i, j]] - f.u[[i - 1, j]]) / dk;
            let xi_r = (f.u[[i + 1, j]] - f.u[[i, j]]) / dk;
            let (_, dl, dr) = h_upwind(params, z, f.p[[i, j]], xi_l, xi_r);
            drift_k[[i, j]] = if dr >= -dl { dr } else { dl };
        }
    }
    let q_star = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        drift_k[[i, j]] - grid.z(j) + params.demand(f.p[[i, j]])
    });
    let drift_z = Array2::from_shape_fn(grid.shape(), |(i, j)| params.drift_b(grid.k(i), grid.z(j), f.p[[i, j]]));
    let shock = shock_locus(&q_star, grid);
    PolicyFields {
        q_star,
        drift_k,
        drift_z,
        shock,
    }
}

pub fn shock_locus(q_star: &Array2<f64>, grid: &Grid2D) -> Vec<ShockPoint> {
    (0..=grid.n)
        .map(|i| {
            let mut best = ShockPoint {
                k: grid.k(i),
                z: grid.z(0),
                j: 0,
                jump: 0.0,
            };
            for j in 0..grid.m {
                let d = q_star[[i, j + 1]] - q_star[[i, j]];
                if d.abs() > best.jump.abs() {
                    best.j = j;
                    best.jump = d;
                    best.z = 0.5 * (grid.z(j) + grid.z(j + 1));
                }
            }
            best
        })
        .collect()
}

/// Jump of `q*` across the shock of column `i`, taken over `span` extra
/// cells on each side to absorb the smearing of the scheme.
pub fn shock_jump(q_star: &Array2<f64>, shock: &ShockPoint, i: usize, span: usize) -> f64 {
    let m = q_star.ncols() - 1;
    let lo = shock.j.saturating_sub(span);
    let hi = (shock.j + 1 + span).min(m);
    q_star[[i, hi]] - q_star[[i, lo]]
}
