//! Closed-form Hamiltonians of the cartel's control problem.
//!
//! For a price `p`, fringe output `z` and marginal value of storage `xi`,
//! the cartel picks production `q` to maximize
//! `-alpha/2 (q - q_circ)^2 + (p - c) q + xi (q + z - D(p))`.
//! The nonnegativity constraint on `q` is not imposed.
//!
//! The full supremum is `(p - c + xi)^2 / (2 alpha) + xi (z - D(p)) + q_circ (p - c + xi)`.
//! Note the `+ xi` in the last term: it is what the supremum actually evaluates to
//! and the only sign for which the feedback law and the envelope identity hold.
//! `h_down` / `h_up` restrict the control to nonpositive / nonnegative storage
//! drift, `h_min` is the value of the zero-drift control.

use crate::params::ModelParams;

/// A Hamiltonian value with its `xi`-derivative and the maximizing control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianEval {
    pub value: f64,
    /// Derivative w.r.t. `xi`; equals the storage drift `q_opt + z - D(p)`.
    pub d_xi: f64,
    pub q_opt: f64,
}

/// Unconstrained maximizer `q_circ + (p - c + xi) / alpha`.
#[inline]
pub fn feedback(params: &ModelParams, p: f64, xi: f64) -> f64 {
    params.q_circ + (p - params.c + xi) / params.alpha
}

/// Scaled signed distance between the unconstrained optimum and the
/// zero-drift control: `sqrt(alpha) (q_unc - (D(p) - z))`.
#[inline]
fn drift_gap(params: &ModelParams, z: f64, p: f64, xi: f64) -> f64 {
    let sa = params.alpha.sqrt();
    sa * (z - params.demand(p) + params.q_circ) + (p - params.c + xi) / sa
}

pub fn h_full(params: &ModelParams, z: f64, p: f64, xi: f64) -> HamiltonianEval {
    let w = p - params.c + xi;
    let excess = z - params.demand(p);
    let q_opt = params.q_circ + w / params.alpha;
    HamiltonianEval {
        value: w * w / (2.0 * params.alpha) + xi * excess + params.q_circ * w,
        d_xi: q_opt + excess,
        q_opt,
    }
}

/// Value of the control that keeps storage constant, `q = D(p) - z`.
pub fn h_min(params: &ModelParams, z: f64, p: f64) -> f64 {
    let q = params.demand(p) - z;
    let dev = q - params.q_circ;
    -0.5 * params.alpha * dev * dev + (p - params.c) * q
}

/// Supremum over controls with nonpositive storage drift.
pub fn h_down(params: &ModelParams, z: f64, p: f64, xi: f64) -> HamiltonianEval {
    let y = drift_gap(params, z, p, xi).min(0.0);
    let hold = params.demand(p) - z;
    let q_opt = hold.min(feedback(params, p, xi));
    HamiltonianEval {
        value: 0.5 * y * y + h_min(params, z, p),
        d_xi: y / params.alpha.sqrt(),
        q_opt,
    }
}

/// Supremum over controls with nonnegative storage drift.
pub fn h_up(params: &ModelParams, z: f64, p: f64, xi: f64) -> HamiltonianEval {
    let y = drift_gap(params, z, p, xi).max(0.0);
    let hold = params.demand(p) - z;
    let q_opt = hold.max(feedback(params, p, xi));
    HamiltonianEval {
        value: 0.5 * y * y + h_min(params, z, p),
        d_xi: y / params.alpha.sqrt(),
        q_opt,
    }
}

/// Upwind Hamiltonian `H_down(xi_l) + H_up(xi_r) - H_min`: nonincreasing in
/// the backward difference `xi_l`, nondecreasing in the forward one `xi_r`.
/// Returns the value and the two one-sided drifts.
#[inline]
pub fn h_upwind(params: &ModelParams, z: f64, p: f64, xi_l: f64, xi_r: f64) -> (f64, f64, f64) {
    let sa = params.alpha.sqrt();
    let base = sa * (z - params.demand(p) + params.q_circ) + (p - params.c) / sa;
    let yl = (base + xi_l / sa).min(0.0);
    let yr = (base + xi_r / sa).max(0.0);
    (
        0.5 * (yl * yl + yr * yr) + h_min(params, z, p),
        yl / sa,
        yr / sa,
    )
}
