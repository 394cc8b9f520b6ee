//! Discrete residual map of the coupled value/price system.
//!
//! Residuals are the discrete equations written as `0 = -r U + ...` and
//! `0 = -r p + ... - g`, so every component is nonincreasing in its own node
//! value and nondecreasing in its neighbours (a monotone scheme). Pseudo-time
//! marching therefore moves along `+R`; see [`crate::solver`].
//!
//! Interior nodes use the upwind Hamiltonian `H_down(xi_l) + H_up(xi_r) - H_min`
//! for the value equation, the matching one-sided drifts for the price
//! equation, first-order upwinding for the fringe transport of `U` and the
//! Godunov flux for the conservative fringe transport of `p`.
//!
//! At `k_min` the value equation is `-r U + max(A, B) = 0` where `A` lets the
//! cartel fill storage and `B` lets it hold storage empty while choosing the
//! price directly, subject to the no-arbitrage inequality. `k_max` mirrors
//! this with the reversed inequality. Ties go to `A`. See [`BoundaryRule`]
//! for the price at which `A` is evaluated.
//!
//! Fringe-direction ghost nodes copy the boundary row (`U_{i,-1} = U_{i,0}`,
//! `p_{i,-1} = p_{i,0}`, and likewise above `j = m`).

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::field::FieldPair;
use crate::flux::{flux_vertex, godunov_flux};
use crate::grid::Grid2D;
use crate::hamiltonian::{h_down, h_min, h_up, h_upwind};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPair {
    pub ru: Array2<f64>,
    pub rp: Array2<f64>,
}

impl ResidualPair {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            ru: Array2::zeros(grid.shape()),
            rp: Array2::zeros(grid.shape()),
        }
    }

    /// Sup norms of the value and price parts.
    pub fn sup_norms(&self) -> (f64, f64) {
        (crate::field::sup_norm(&self.ru), crate::field::sup_norm(&self.rp))
    }
}

/// Which term attains the max in a boundary value equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BoundaryBranch {
    /// Storage may leave the boundary; price set by arbitrage.
    InteriorLike,
    /// Storage held at the bound; the cartel sets the price.
    PriceControlled,
}

/// Result of one boundary node evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub ru: f64,
    pub rp: f64,
    pub branch: BoundaryBranch,
    /// Constrained price maximizer (always computed).
    pub p_star: f64,
    /// Value of the arbitrage-priced term `A` and the price-controlled term `B`.
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDiagnostics {
    pub kmin: Vec<BoundaryBranch>,
    pub kmax: Vec<BoundaryBranch>,
    pub p_star_kmin: Vec<f64>,
    pub p_star_kmax: Vec<f64>,
}

impl BoundaryDiagnostics {
    pub fn new(m: usize) -> Self {
        Self {
            kmin: vec![BoundaryBranch::InteriorLike; m + 1],
            kmax: vec![BoundaryBranch::InteriorLike; m + 1],
            p_star_kmin: vec![f64::NAN; m + 1],
            p_star_kmax: vec![f64::NAN; m + 1],
        }
    }
}

/// Root of the boundary no-arbitrage relation in shifted-price form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiRoot {
    /// Shifted price `rho = p - (mu/lambda - phi/(kappa lambda))`.
    pub rho: f64,
    /// Price threshold `rho + mu/lambda - phi/(kappa lambda)`.
    pub threshold: f64,
}

/// Solves `chi(rho) = -g` where
/// `chi(rho) = r (s + rho) - (Psi(s + rho, p_above) - Psi(p_below, s + rho)) / dz`
/// and `s = mu/lambda - phi/(kappa lambda)`. `chi` is strictly increasing, so
/// prices with `K <= g` are exactly `p >= threshold`.
pub fn chi_root(params: &ModelParams, phi: f64, g: f64, p_above: f64, p_below: f64, dz: f64) -> ChiRoot {
    let r = params.r;
    let a = params.kappa * params.lambda_b / dz;
    let s = flux_vertex(params, phi);
    let up = (p_above - s).max(0.0);
    let down = (s - p_below).max(0.0);
    let q_mid = -s + a / (2.0 * r) * (up * up - down * down) - g / r;
    let rho = if q_mid < -up {
        // Left branch: -(a/2) rho^2 + r rho + y = 0, negative root.
        let y = r * s + 0.5 * a * down * down + g;
        let disc = r * r + 2.0 * a * y;
        assert!(disc >= -1e-12 * r * r, "negative discriminant in chi root");
        -2.0 * y / (r + disc.max(0.0).sqrt())
    } else if q_mid <= down {
        q_mid
    } else {
        // Right branch: (a/2) rho^2 + r rho + y = 0, positive root.
        let y = r * s - 0.5 * a * up * up + g;
        let disc = r * r - 2.0 * a * y;
        assert!(disc >= -1e-12 * r * r, "negative discriminant in chi root");
        -2.0 * y / (r + disc.max(0.0).sqrt())
    };
    ChiRoot {
        rho,
        threshold: rho + s,
    }
}

/// Feasible side of the boundary price constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasible {
    /// `p >= threshold` (empty storage).
    AtLeast,
    /// `p <= threshold` (full storage).
    AtMost,
}

/// Maximizes `H_min(z, p) + max(0, b(p)) uz_r + min(0, b(p)) uz_l` over a
/// half-line of prices. `b(p) = phi + kappa (lambda p - mu)` changes sign at the
/// flux vertex, splitting the objective into two concave quadratics; each
/// piece's vertex is clipped to its feasible sub-interval and the best
/// candidate wins. Returns `(max, argmax)`.
pub fn maximize_boundary_price(
    params: &ModelParams,
    z: f64,
    phi: f64,
    uz_r: f64,
    uz_l: f64,
    threshold: f64,
    side: Feasible,
) -> (f64, f64) {
    let kl = params.kappa * params.lambda_b;
    let eps = params.epsilon;
    let ae = params.alpha_eps();
    let s = flux_vertex(params, phi);
    let objective = |p: f64| {
        let b = phi + params.kappa * (params.lambda_b * p - params.mu_b);
        h_min(params, z, p) + b.max(0.0) * uz_r + b.min(0.0) * uz_l
    };
    let vertex = |w: f64| (ae * (1.0 - z - params.q_circ) + (1.0 - z) + eps * params.c + kl * w) / (eps * (ae + 2.0));
    let (lo, hi) = match side {
        Feasible::AtLeast => (threshold, f64::INFINITY),
        Feasible::AtMost => (f64::NEG_INFINITY, threshold),
    };
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    // Piece with b >= 0 lives on [s, inf), piece with b <= 0 on (-inf, s].
    for (w, plo, phi_) in [(uz_r, s, f64::INFINITY), (uz_l, f64::NEG_INFINITY, s)] {
        let a = lo.max(plo);
        let b = hi.min(phi_);
        if a > b {
            continue;
        }
        let p = vertex(w).clamp(a, b);
        let v = objective(p);
        if v > best.0 {
            best = (v, p);
        }
    }
    best
}

/// How the interior-like term `A` of a boundary value equation is priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BoundaryRule {
    /// `A` is evaluated at the node's current price and, when it wins, the
    /// one-sided arbitrage equation drives the price. When the cartel would
    /// rather move storage at the price-controlled optimum, no fixed point
    /// exists and the boundary price cycles.
    OwnPrice,
    /// `A` is evaluated at a price where the one-sided arbitrage equation
    /// holds with storage leaving the bound (the best such price for the
    /// cartel). Both branches then relax the node price towards their target.
    ArbitragePrice,
}

impl BoundaryRule {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryRule::OwnPrice => "own_price",
            BoundaryRule::ArbitragePrice => "arbitrage_price",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "own_price" => Some(BoundaryRule::OwnPrice),
            "arbitrage_price" => Some(BoundaryRule::ArbitragePrice),
            _ => None,
        }
    }
}

/// Which storage bound a boundary row sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    KMin,
    KMax,
}

/// Real roots of `c2 u^2 + c1 u + c0` inside `[lo, hi]`.
pub(crate) fn quadratic_roots_in(c2: f64, c1: f64, c0: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
    let mut push = |u: f64| {
        if u.is_finite() && u >= lo && u <= hi {
            out.push(u);
        }
    };
    if c2 == 0.0 {
        if c1 != 0.0 {
            push(-c0 / c1);
        }
        return;
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return;
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    if q == 0.0 {
        push(0.0);
        return;
    }
    push(q / c2);
    push(c0 / q);
}

/// Prices at which the one-sided arbitrage equation of a boundary row holds
/// while storage leaves the bound: drift `d(p) > 0` at `k_min`, `d(p) < 0` at
/// `k_max`. With `u = p - s` (flux vertex `s`) the equation
/// `-r p + d(p) D_k p + (Psi(p, p_above) - Psi(p_below, p)) / dz - g = 0`
/// is quadratic on each piece cut by the flux kinks `u = -up`, `u = down`
/// and the zero of the linear drift.
#[allow(clippy::too_many_arguments)]
pub fn arbitrage_prices(
    params: &ModelParams,
    z: f64,
    phi: f64,
    g: f64,
    xi: f64,
    p_next: f64,
    p_above: f64,
    p_below: f64,
    dz: f64,
    dk: f64,
    edge: Edge,
) -> Vec<f64> {
    let r = params.r;
    let a = params.kappa * params.lambda_b / dz;
    let s = flux_vertex(params, phi);
    let up = (p_above - s).max(0.0);
    let down = (s - p_below).max(0.0);
    // d(p) = slope * p + d0, the drift of the unconstrained feedback control.
    let slope = params.epsilon + 1.0 / params.alpha;
    let d0 = z - 1.0 + params.q_circ + (xi - params.c) / params.alpha;
    let ds = slope * s + d0;
    let u_zero = -ds / slope;
    let big = P_FAR;
    let next = p_next - s;
    // Drift term coefficients in u.
    let (d2, d1, d00, lo, hi) = match edge {
        Edge::KMin => (-slope / dk, (slope * next - ds) / dk, ds * next / dk, u_zero, big),
        Edge::KMax => (slope / dk, (ds - slope * next) / dk, -ds * next / dk, -big, u_zero),
    };
    let pieces = [
        (-big, -up, 0.5 * a, -0.5 * a * down * down),
        (-up, down, 0.0, 0.5 * a * (up * up - down * down)),
        (down, big, -0.5 * a, 0.5 * a * up * up),
    ];
    let mut roots = Vec::new();
    for (plo, phi_, t2, t0) in pieces {
        let l = plo.max(lo);
        let h = phi_.min(hi);
        if l > h {
            continue;
        }
        quadratic_roots_in(d2 + t2, d1 - r, d00 + t0 - r * s - g, l, h, &mut roots);
    }
    roots.retain(|&u| match edge {
        Edge::KMin => slope * u + ds > 0.0,
        Edge::KMax => slope * u + ds < 0.0,
    });
    roots.iter().map(|u| u + s).collect()
}

/// Bound on shifted prices considered by the root search.
const P_FAR: f64 = 1e12;

/// Per-grid constants reused across residual evaluations.
#[derive(Debug, Clone)]
pub struct Scheme<'a> {
    pub params: &'a ModelParams,
    pub grid: &'a Grid2D,
    z: Vec<f64>,
    g: Vec<f64>,
    half_sigma2: Vec<f64>,
    phi: Array2<f64>,
    rule: BoundaryRule,
}

impl<'a> Scheme<'a> {
    pub fn new(params: &'a ModelParams, grid: &'a Grid2D) -> Self {
        Self::with_rule(params, grid, BoundaryRule::ArbitragePrice)
    }

    pub fn with_rule(params: &'a ModelParams, grid: &'a Grid2D, rule: BoundaryRule) -> Self {
        let k: Vec<f64> = (0..=grid.n).map(|i| grid.k(i)).collect();
        let z: Vec<f64> = (0..=grid.m).map(|j| grid.z(j)).collect();
        let g: Vec<f64> = k.iter().map(|&k| params.storage_cost(k)).collect();
        let half_sigma2 = k.iter().map(|&k| 0.5 * params.sigma(k).powi(2)).collect();
        let phi = Array2::from_shape_fn(grid.shape(), |(i, j)| params.phi(k[i], z[j]));
        Self {
            params,
            grid,
            z,
            g,
            half_sigma2,
            phi,
            rule,
        }
    }

    pub fn rule(&self) -> BoundaryRule {
        self.rule
    }

    pub fn phi(&self, i: usize, j: usize) -> f64 {
        self.phi[[i, j]]
    }

    /// `(value above, value below)` in the fringe direction with ghost copies.
    #[inline]
    fn z_neighbors(&self, a: &Array2<f64>, i: usize, j: usize) -> (f64, f64) {
        let above = if j < self.grid.m { a[[i, j + 1]] } else { a[[i, j]] };
        let below = if j > 0 { a[[i, j - 1]] } else { a[[i, j]] };
        (above, below)
    }

    /// Upwinded fringe transport of `U`: `max(0,b) D_z,r U + min(0,b) D_z,l U`.
    #[inline]
    fn u_transport(&self, u: &Array2<f64>, i: usize, j: usize, b: f64) -> f64 {
        let (uz_r, uz_l) = self.u_z_diffs(u, i, j);
        b.max(0.0) * uz_r + b.min(0.0) * uz_l
    }

    #[inline]
    fn u_z_diffs(&self, u: &Array2<f64>, i: usize, j: usize) -> (f64, f64) {
        let (above, below) = self.z_neighbors(u, i, j);
        let c = u[[i, j]];
        ((above - c) / self.grid.dz, (c - below) / self.grid.dz)
    }

    /// Conservative fringe transport of `p` through the Godunov flux.
    #[inline]
    fn p_transport(&self, p: &Array2<f64>, i: usize, j: usize) -> f64 {
        let (above, below) = self.z_neighbors(p, i, j);
        let c = p[[i, j]];
        let phi = self.phi[[i, j]];
        (godunov_flux(self.params, phi, c, above) - godunov_flux(self.params, phi, below, c)) / self.grid.dz
    }

    /// Residuals at an interior storage level, `1 <= i <= n - 1`.
    pub fn residual_interior(&self, f: &FieldPair, i: usize, j: usize) -> (f64, f64) {
        assert!(i >= 1 && i < self.grid.n && j <= self.grid.m, "node ({i}, {j}) is not interior");
        let prm = self.params;
        let (u, p) = (&f.u, &f.p);
        let dk = self.grid.dk;
        let (u0, p0) = (u[[i, j]], p[[i, j]]);
        let (ul, ur) = (u[[i - 1, j]], u[[i + 1, j]]);
        let (pl, pr) = (p[[i - 1, j]], p[[i + 1, j]]);
        let z = self.z[j];
        let (hv, drift_l, drift_r) = h_upwind(prm, z, p0, (u0 - ul) / dk, (ur - u0) / dk);
        let b = self.phi[[i, j]] + prm.kappa * (prm.lambda_b * p0 - prm.mu_b);
        let s2 = self.half_sigma2[i];
        let mut ru = -prm.r * u0 + hv + self.u_transport(u, i, j, b);
        let mut rp = -prm.r * p0
            + drift_l * (p0 - pl) / dk
            + drift_r * (pr - p0) / dk
            + self.p_transport(p, i, j)
            - self.g[i];
        if s2 != 0.0 {
            ru += s2 * (ur - 2.0 * u0 + ul) / (dk * dk);
            rp += s2 * (pr - 2.0 * p0 + pl) / (dk * dk);
        }
        (ru, rp)
    }

    /// Threshold of the boundary no-arbitrage constraint at row `i` (0 or n).
    pub fn chi_root_at(&self, p: &Array2<f64>, i: usize, j: usize) -> ChiRoot {
        let (above, below) = self.z_neighbors(p, i, j);
        chi_root(self.params, self.phi[[i, j]], self.g[i], above, below, self.grid.dz)
    }

    /// Price-controlled branch at a boundary row: returns `(B, p*)`.
    pub fn boundary_price_max(&self, f: &FieldPair, i: usize, j: usize) -> (f64, f64) {
        let side = if i == 0 {
            Feasible::AtLeast
        } else {
            assert_eq!(i, self.grid.n, "boundary price max needs i = 0 or i = n");
            Feasible::AtMost
        };
        let root = self.chi_root_at(&f.p, i, j);
        let (uz_r, uz_l) = self.u_z_diffs(&f.u, i, j);
        maximize_boundary_price(self.params, self.z[j], self.phi[[i, j]], uz_r, uz_l, root.threshold, side)
    }

    pub fn residual_boundary_kmin(&self, f: &FieldPair, j: usize) -> BoundaryNode {
        self.residual_boundary(f, Edge::KMin, j)
    }

    pub fn residual_boundary_kmax(&self, f: &FieldPair, j: usize) -> BoundaryNode {
        self.residual_boundary(f, Edge::KMax, j)
    }

    /// Value of the interior-like term at price `p`: the one-sided envelope
    /// Hamiltonian plus fringe transport. Returns `(A, drift)`.
    fn interior_like_term(&self, u: &Array2<f64>, edge: Edge, j: usize, xi: f64, p: f64) -> (f64, f64) {
        let prm = self.params;
        let i = self.edge_row(edge);
        let h = match edge {
            Edge::KMin => h_up(prm, self.z[j], p, xi),
            Edge::KMax => h_down(prm, self.z[j], p, xi),
        };
        let b = self.phi[[i, j]] + prm.kappa * (prm.lambda_b * p - prm.mu_b);
        (h.value + self.u_transport(u, i, j, b), h.d_xi)
    }

    fn edge_row(&self, edge: Edge) -> usize {
        match edge {
            Edge::KMin => 0,
            Edge::KMax => self.grid.n,
        }
    }

    pub fn residual_boundary(&self, f: &FieldPair, edge: Edge, j: usize) -> BoundaryNode {
        let prm = self.params;
        let (u, p) = (&f.u, &f.p);
        let dk = self.grid.dk;
        let i = self.edge_row(edge);
        let inner = match edge {
            Edge::KMin => 1,
            Edge::KMax => i - 1,
        };
        let (u0, p0) = (u[[i, j]], p[[i, j]]);
        // One-sided difference pointing into the domain.
        let xi = match edge {
            Edge::KMin => (u[[inner, j]] - u0) / dk,
            Edge::KMax => (u0 - u[[inner, j]]) / dk,
        };
        let (b_term, p_star) = self.boundary_price_max(f, i, j);
        let controlled = |a: f64| BoundaryNode {
            ru: -prm.r * u0 + b_term,
            rp: p_star - p0,
            branch: BoundaryBranch::PriceControlled,
            p_star,
            a,
            b: b_term,
        };
        match self.rule {
            BoundaryRule::OwnPrice => {
                let (a_term, drift) = self.interior_like_term(u, edge, j, xi, p0);
                if a_term >= b_term {
                    let dp = match edge {
                        Edge::KMin => (p[[inner, j]] - p0) / dk,
                        Edge::KMax => (p0 - p[[inner, j]]) / dk,
                    };
                    BoundaryNode {
                        ru: -prm.r * u0 + a_term,
                        rp: -prm.r * p0 + drift * dp + self.p_transport(p, i, j) - self.g[i],
                        branch: BoundaryBranch::InteriorLike,
                        p_star,
                        a: a_term,
                        b: b_term,
                    }
                } else {
                    controlled(a_term)
                }
            }
            BoundaryRule::ArbitragePrice => {
                let (above, below) = self.z_neighbors(p, i, j);
                let roots = arbitrage_prices(
                    prm,
                    self.z[j],
                    self.phi[[i, j]],
                    self.g[i],
                    xi,
                    p[[inner, j]],
                    above,
                    below,
                    self.grid.dz,
                    dk,
                    edge,
                );
                let mut best = (f64::NEG_INFINITY, f64::NAN);
                for q in roots {
                    let (v, _) = self.interior_like_term(u, edge, j, xi, q);
                    if v > best.0 {
                        best = (v, q);
                    }
                }
                let (a_term, p_arb) = best;
                if a_term >= b_term {
                    BoundaryNode {
                        ru: -prm.r * u0 + a_term,
                        rp: p_arb - p0,
                        branch: BoundaryBranch::InteriorLike,
                        p_star,
                        a: a_term,
                        b: b_term,
                    }
                } else {
                    controlled(a_term)
                }
            }
        }
    }

    /// Evaluates every node into `out` and records boundary branches.
    pub fn assemble_into(&self, f: &FieldPair, out: &mut ResidualPair, diag: &mut BoundaryDiagnostics) {
        assert!(f.matches(self.grid), "field shape does not match grid");
        let n = self.grid.n;
        let m = self.grid.m;
        out.ru
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(out.rp.axis_iter_mut(Axis(0)))
            .enumerate()
            .filter(|(i, _)| *i > 0 && *i < n)
            .for_each(|(i, (mut ru, mut rp))| {
                for j in 0..=m {
                    let (a, b) = self.residual_interior(f, i, j);
                    ru[j] = a;
                    rp[j] = b;
                }
            });
        for j in 0..=m {
            let lo = self.residual_boundary_kmin(f, j);
            out.ru[[0, j]] = lo.ru;
            out.rp[[0, j]] = lo.rp;
            diag.kmin[j] = lo.branch;
            diag.p_star_kmin[j] = lo.p_star;
            let hi = self.residual_boundary_kmax(f, j);
            out.ru[[n, j]] = hi.ru;
            out.rp[[n, j]] = hi.rp;
            diag.kmax[j] = hi.branch;
            diag.p_star_kmax[j] = hi.p_star;
        }
    }

    pub fn assemble(&self, f: &FieldPair) -> (ResidualPair, BoundaryDiagnostics) {
        let mut out = ResidualPair::zeros(self.grid);
        let mut diag = BoundaryDiagnostics::new(self.grid.m);
        self.assemble_into(f, &mut out, &mut diag);
        (out, diag)
    }
}

/// Full residual of the discrete system at `f`.
pub fn assemble_residual(f: &FieldPair, grid: &Grid2D, params: &ModelParams) -> (ResidualPair, BoundaryDiagnostics) {
    Scheme::new(params, grid).assemble(f)
}
