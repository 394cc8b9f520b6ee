//! Constant-fringe variant: the fringe output `z` is frozen and only the
//! storage level moves. Same discretization as the full model with the
//! fringe transport removed.
//!
//! At `k_min` the price-controlled branch maximizes `H_min(p)` over
//! `r p + g(k_min) >= 0`; at `k_max` over `r p + g(k_max) <= 0`. The
//! interior-like branch follows the same [`BoundaryRule`] as the 2D scheme.

use crate::error::{Error, Result};
use crate::hamiltonian::{h_down, h_min, h_up, h_upwind, HamiltonianEval};
use crate::params::ModelParams;
use crate::scheme::{quadratic_roots_in, BoundaryBranch, BoundaryRule, Edge};
use crate::solver::{SolveSettings, StopReason};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub dk: f64,
}

impl Grid1D {
    pub fn new(params: &ModelParams, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!("1D grid needs n >= 2, got {n}")));
        }
        Ok(Self {
            n,
            k_min: params.k_min,
            k_max: params.k_max,
            dk: (params.k_max - params.k_min) / n as f64,
        })
    }

    pub fn k(&self, i: usize) -> f64 {
        if i == self.n {
            self.k_max
        } else {
            self.k_min + i as f64 * self.dk
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fields1D {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report1D {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub branch_kmin: BoundaryBranch,
    pub branch_kmax: BoundaryBranch,
}

/// Maximizer of the concave quadratic `H_min(z, .)` over the whole line.
pub fn h_min_vertex(params: &ModelParams, z: f64) -> f64 {
    let ae = params.alpha_eps();
    let eps = params.epsilon;
    (ae * (1.0 - z - params.q_circ) + (1.0 - z) + eps * params.c) / (eps * (ae + 2.0))
}

/// `(max, argmax)` of `H_min` over `{p : r p + g >= 0}`.
pub fn boundary_max_kmin(params: &ModelParams, z: f64, g: f64) -> (f64, f64) {
    let p = h_min_vertex(params, z).max(-g / params.r);
    (h_min(params, z, p), p)
}

/// `(max, argmax)` of `H_min` over `{p : r p + g <= 0}`.
pub fn boundary_max_kmax(params: &ModelParams, z: f64, g: f64) -> (f64, f64) {
    let p = h_min_vertex(params, z).min(-g / params.r);
    (h_min(params, z, p), p)
}

/// Prices solving the one-sided arbitrage equation `-r p + d(p) D_k p - g = 0`
/// with drift leaving the bound; `d(p)` is the feedback drift at marginal
/// value `xi`.
pub fn arbitrage_prices_1d(params: &ModelParams, z: f64, g: f64, xi: f64, p_next: f64, dk: f64, edge: Edge) -> Vec<f64> {
    let slope = params.epsilon + 1.0 / params.alpha;
    let d0 = z - 1.0 + params.q_circ + (xi - params.c) / params.alpha;
    let r = params.r;
    let zero = -d0 / slope;
    let mut roots = Vec::new();
    match edge {
        Edge::KMin => quadratic_roots_in(
            -slope / dk,
            (slope * p_next - d0) / dk - r,
            d0 * p_next / dk - g,
            zero,
            f64::INFINITY,
            &mut roots,
        ),
        Edge::KMax => quadratic_roots_in(
            slope / dk,
            (d0 - slope * p_next) / dk - r,
            -d0 * p_next / dk - g,
            f64::NEG_INFINITY,
            zero,
            &mut roots,
        ),
    }
    roots.retain(|&p| match edge {
        Edge::KMin => slope * p + d0 > 0.0,
        Edge::KMax => slope * p + d0 < 0.0,
    });
    roots
}

struct EdgeNode {
    ru: f64,
    rp: f64,
    branch: BoundaryBranch,
}

#[allow(clippy::too_many_arguments)]
fn edge_residual(params: &ModelParams, rule: BoundaryRule, z: f64, g: f64, u0: f64, p0: f64, u_next: f64, p_next: f64, dk: f64, edge: Edge) -> EdgeNode {
    let r = params.r;
    let (xi, hamiltonian): (f64, fn(&ModelParams, f64, f64, f64) -> HamiltonianEval) = match edge {
        Edge::KMin => ((u_next - u0) / dk, h_up),
        Edge::KMax => ((u0 - u_next) / dk, h_down),
    };
    let (b, p_star) = match edge {
        Edge::KMin => boundary_max_kmin(params, z, g),
        Edge::KMax => boundary_max_kmax(params, z, g),
    };
    let controlled = EdgeNode {
        ru: -r * u0 + b,
        rp: p_star - p0,
        branch: BoundaryBranch::PriceControlled,
    };
    match rule {
        BoundaryRule::OwnPrice => {
            let h = hamiltonian(params, z, p0, xi);
            if h.value >= b {
                let dp = match edge {
                    Edge::KMin => (p_next - p0) / dk,
                    Edge::KMax => (p0 - p_next) / dk,
                };
                EdgeNode {
                    ru: -r * u0 + h.value,
                    rp: -r * p0 + h.d_xi * dp - g,
                    branch: BoundaryBranch::InteriorLike,
                }
            } else {
                controlled
            }
        }
        BoundaryRule::ArbitragePrice => {
            let mut best = (f64::NEG_INFINITY, f64::NAN);
            for q in arbitrage_prices_1d(params, z, g, xi, p_next, dk, edge) {
                let v = hamiltonian(params, z, q, xi).value;
                if v > best.0 {
                    best = (v, q);
                }
            }
            if best.0 >= b {
                EdgeNode {
                    ru: -r * u0 + best.0,
                    rp: best.1 - p0,
                    branch: BoundaryBranch::InteriorLike,
                }
            } else {
                controlled
            }
        }
    }
}

/// Residuals of the constant-fringe system at fringe level `z`.
pub fn residual_1d(
    params: &ModelParams,
    grid: &Grid1D,
    z: f64,
    f: &Fields1D,
    rule: BoundaryRule,
) -> (Vec<f64>, Vec<f64>, BoundaryBranch, BoundaryBranch) {
    let n = grid.n;
    let dk = grid.dk;
    let r = params.r;
    let (u, p) = (&f.u, &f.p);
    let mut ru = vec![0.0; n + 1];
    let mut rp = vec![0.0; n + 1];
    for i in 1..n {
        let (hv, dl, dr) = h_upwind(params, z, p[i], (u[i] - u[i - 1]) / dk, (u[i + 1] - u[i]) / dk);
        let s2 = 0.5 * params.sigma(grid.k(i)).powi(2);
        ru[i] = -r * u[i] + hv + s2 * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dk * dk);
        rp[i] = -r * p[i] + dl * (p[i] - p[i - 1]) / dk + dr * (p[i + 1] - p[i]) / dk
            + s2 * (p[i + 1] - 2.0 * p[i] + p[i - 1]) / (dk * dk)
            - params.storage_cost(grid.k(i));
    }
    let lo = edge_residual(params, rule, z, params.storage_cost(grid.k_min), u[0], p[0], u[1], p[1], dk, Edge::KMin);
    let hi = edge_residual(params, rule, z, params.storage_cost(grid.k_max), u[n], p[n], u[n - 1], p[n - 1], dk, Edge::KMax);
    ru[0] = lo.ru;
    rp[0] = lo.rp;
    ru[n] = hi.ru;
    rp[n] = hi.rp;
    (ru, rp, lo.branch, hi.branch)
}

/// Storage drift at each node, taking the larger one-sided drift in the
/// interior and the active branch at the ends.
pub fn drift_1d(params: &ModelParams, grid: &Grid1D, z: f64, f: &Fields1D) -> Vec<f64> {
    let n = grid.n;
    let dk = grid.dk;
    let (_, _, lo, hi) = residual_1d(params, grid, z, f, BoundaryRule::ArbitragePrice);
    (0..=n)
        .map(|i| {
            if i == 0 {
                match lo {
                    BoundaryBranch::PriceControlled => 0.0,
                    BoundaryBranch::InteriorLike => h_up(params, z, f.p[0], (f.u[1] - f.u[0]) / dk).d_xi,
                }
            } else if i == n {
                match hi {
                    BoundaryBranch::PriceControlled => 0.0,
                    BoundaryBranch::InteriorLike => h_down(params, z, f.p[n], (f.u[n] - f.u[n - 1]) / dk).d_xi,
                }
            } else {
                let (_, dl, dr) = h_upwind(params, z, f.p[i], (f.u[i] - f.u[i - 1]) / dk, (f.u[i + 1] - f.u[i]) / dk);
                if dr >= -dl {
                    dr
                } else {
                    dl
                }
            }
        })
        .collect()
}

/// Explicit pseudo-time marching for the constant-fringe system, started
/// from `U = 0`, `p = mu / lambda`.
pub fn solve_1d(params: &ModelParams, grid: &Grid1D, z: f64, settings: &SolveSettings) -> Result<(Fields1D, Report1D)> {
    params.validate()?;
    settings.validate()?;
    let mut f = Fields1D {
        u: vec![0.0; grid.n + 1],
        p: vec![params.neutral_price(); grid.n + 1],
    };
    let tol = settings.tol_residual.unwrap_or(0.0);
    let mut iteration = 0;
    loop {
        let (ru, rp, lo, hi) = residual_1d(params, grid, z, &f, settings.boundary_rule);
        let res = ru.iter().chain(rp.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if !res.is_finite() {
            return Err(Error::Analysis(format!("1D iteration diverged at step {iteration}")));
        }
        let done = if res <= tol {
            Some(StopReason::Residual)
        } else if iteration >= settings.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if let Some(reason) = done {
            return Ok((
                f,
                Report1D {
                    iterations: iteration,
                    residual: res,
                    converged: reason == StopReason::Residual,
                    stop_reason: reason,
                    branch_kmin: lo,
                    branch_kmax: hi,
                },
            ));
        }
        for i in 0..=grid.n {
            f.u[i] += settings.dt * ru[i];
            f.p[i] += settings.dt * rp[i];
        }
        iteration += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_max_is_vertex_or_constraint() {
        let params = ModelParams::baseline();
        let (_, p) = boundary_max_kmin(&params, 0.58, 0.0);
        assert!((p - h_min_vertex(&params, 0.58)).abs() < 1e-12);
        // Vertex below zero: the no-arbitrage constraint binds at p = 0.
        let (_, p) = boundary_max_kmin(&params, 0.95, 0.0);
        assert!(h_min_vertex(&params, 0.95) < 0.0);
        assert_eq!(p, 0.0);
        let (_, p) = boundary_max_kmax(&params, 0.58, 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn vertex_is_stationary_point() {
        let params = ModelParams::baseline();
        for &z in &[0.45, 0.5, 0.58, 0.7] {
            let v = h_min_vertex(&params, z);
            let h = 1e-3;
            let d = (h_min(&params, z, v + h) - h_min(&params, z, v - h)) / (2.0 * h);
            assert!(d.abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn arbitrage_roots_solve_one_sided_equation() {
        let params = ModelParams::appendix();
        let dk = 0.001;
        for &(z, xi, p_next) in &[(0.5, -50.0, 300.0), (0.6, 20.0, 80.0), (0.45, -200.0, 500.0), (0.7, 100.0, -20.0)] {
            for (edge, g) in [(Edge::KMin, 0.0), (Edge::KMax, 10.0)] {
                for q in arbitrage_prices_1d(&params, z, g, xi, p_next, dk, edge) {
                    let (h, dp) = match edge {
                        Edge::KMin => (h_up(&params, z, q, xi), (p_next - q) / dk),
                        Edge::KMax => (h_down(&params, z, q, xi), (q - p_next) / dk),
                    };
                    let e = -params.r * q + h.d_xi * dp - g;
                    assert!(e.abs() < 1e-8 * (1.0 + q.abs()), "{e}");
                    assert!(h.d_xi != 0.0);
                }
            }
        }
    }

    #[test]
    fn converges_tightly() {
        for params in [ModelParams::baseline(), ModelParams::appendix()] {
            let grid = Grid1D::new(&params, 50).unwrap();
            for &z in &[0.45, 0.5, 0.6, 0.7] {
                let settings = SolveSettings {
                    dt: 1e-3,
                    max_iters: 2_000_000,
                    tol_residual: Some(1e-8),
                    ..Default::default()
                };
                let (f, report) = solve_1d(&params, &grid, z, &settings).unwrap();
                assert!(report.converged, "z = {z}: residual {}", report.residual);
                assert!(f.p.iter().all(|v| v.is_finite()));
            }
        }
    }
}
