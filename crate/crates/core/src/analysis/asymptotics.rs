//! Expansion of `V = dU/dk` and `p` near empty storage when the drift points
//! into the boundary:
//! `V = V0 + gamma (k - k_min)^n`, `p = p0 - beta (k - k_min)^m`.
//! Matching the leading orders forces `n = m = 1/2` and fixes `V0`, `p0`;
//! `gamma = x beta` with `x` a root of `x^2 - (1 + 2 ae - lambda) x + 1 - lambda (1 + ae) = 0`
//! where `ae = alpha epsilon` and `lambda = r V0 / (r p0 + g(k_min))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticData {
    pub z: f64,
    pub v0: f64,
    pub p0: f64,
    pub lambda_ratio: f64,
    pub x_plus: f64,
    pub x_minus: f64,
    /// `(alpha eps)^2 + alpha eps - 1`; positive means at most one `(gamma, beta)`.
    pub uniqueness_margin: f64,
    /// `None` when `beta^2` would be nonpositive.
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub exponent: f64,
    pub warnings: Vec<String>,
}

impl AsymptoticData {
    pub fn feasible(&self) -> bool {
        self.beta.is_some()
    }

    /// `(gamma - x+ beta)(gamma - x- beta)`, relative to `beta^2 x+`.
    pub fn factor_residual(&self) -> Option<f64> {
        let (b, g) = (self.beta?, self.gamma?);
        let scale = (b * b * self.x_plus.abs()).max(f64::MIN_POSITIVE);
        Some((g - self.x_plus * b) * (g - self.x_minus * b) / scale)
    }

    /// `beta((ae + 1) beta - gamma) - 2 alpha (g + r p0)`, relative.
    pub fn price_order_residual(&self, params: &ModelParams) -> Option<f64> {
        let (b, g) = (self.beta?, self.gamma?);
        let rhs = 2.0 * params.alpha * (params.storage_cost(params.k_min) + params.r * self.p0);
        let lhs = b * ((params.alpha_eps() + 1.0) * b - g);
        Some((lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE))
    }
}

/// Boundary values `(V0, p0)` at fringe level `z`.
pub fn boundary_values(params: &ModelParams, z: f64) -> (f64, f64) {
    let eps = params.epsilon;
    let ae = params.alpha_eps();
    let den = eps * (2.0 + ae);
    let shift = eps * (params.c - params.alpha * params.q_circ);
    ((z - 1.0 + shift) / den, (shift + (1.0 + ae) * (1.0 - z)) / den)
}

pub fn boundary_asymptotics(params: &ModelParams, z: f64) -> Result<AsymptoticData> {
    let ae = params.alpha_eps();
    if ae == 0.0 || ae == -2.0 {
        return Err(Error::Analysis(format!("alpha*epsilon = {ae} leaves the boundary values undetermined")));
    }
    let (v0, p0) = boundary_values(params, z);
    let g = params.storage_cost(params.k_min);
    let r = params.r;
    let lambda_ratio = r * v0 / (r * p0 + g);
    let bsum = 1.0 + 2.0 * ae - lambda_ratio;
    let prod = 1.0 - lambda_ratio * (1.0 + ae);
    let disc = bsum * bsum - 4.0 * prod;
    let mut warnings = Vec::new();
    let uniqueness_margin = ae * ae + ae - 1.0;
    if uniqueness_margin <= 1e-12 {
        warnings.push(format!(
            "(alpha eps)^2 + alpha eps - 1 = {uniqueness_margin:.6e} is not positive: the expansion need not be unique"
        ));
    }
    if !(-1.0..=0.0).contains(&lambda_ratio) {
        warnings.push(format!("lambda = {lambda_ratio:.6} lies outside [-1, 0]"));
    }
    if disc < 0.0 {
        warnings.push("x+- are complex: no admissible singular expansion".into());
        return Ok(AsymptoticData {
            z,
            v0,
            p0,
            lambda_ratio,
            x_plus: f64::NAN,
            x_minus: f64::NAN,
            uniqueness_margin,
            beta: None,
            gamma: None,
            exponent: 0.5,
            warnings,
        });
    }
    let sq = disc.sqrt();
    let x_plus = 0.5 * (bsum + sq);
    let x_minus = 0.5 * (bsum - sq);
    if x_plus <= 1.0 + ae {
        warnings.push(format!("x+ = {x_plus:.6} does not exceed 1 + alpha eps; gamma = x+ beta is not excluded"));
    }
    let radicand = 2.0 * params.alpha * (g + r * p0) / ((ae + 1.0) - x_minus);
    let (beta, gamma) = if radicand > 0.0 && radicand.is_finite() {
        let b = radicand.sqrt();
        (Some(b), Some(x_minus * b))
    } else {
        warnings.push(format!("beta^2 = {radicand:.6e} is not positive: no admissible singular expansion"));
        (None, None)
    };
    Ok(AsymptoticData {
        z,
        v0,
        p0,
        lambda_ratio,
        x_plus,
        x_minus,
        uniqueness_margin,
        beta,
        gamma,
        exponent: 0.5,
        warnings,
    })
}

/// Outcome of forcing a regular (`n = m = 1`) expansion at `k_min`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothAnsatzReport {
    pub z: f64,
    pub v0: f64,
    pub p0: f64,
    pub beta: f64,
    /// Slope of `V` that satisfies the first-order price relation.
    pub gamma: f64,
    /// First-order value relation evaluated at that slope; nonzero means the
    /// regular expansion is inconsistent.
    pub residual: f64,
}

/// Zeroth order: zero drift, `r V0 = -beta D_p H`, `r p0 = -g`. First order:
/// `beta (r - d1) = 0` and `(d1 - r) gamma - beta e1 = 0`, with `d1`, `e1` the
/// slopes of the drift and of `D_p H` along the expansion.
pub fn smooth_ansatz_inconsistency(params: &ModelParams, z: f64) -> SmoothAnsatzReport {
    let (alpha, eps, r, c) = (params.alpha, params.epsilon, params.r, params.c);
    let g = params.storage_cost(params.k_min);
    let p0 = -g / r;
    // Zero drift: (1/alpha + eps) p0 + V0/alpha - c/alpha + z - 1 + q_circ = 0.
    let v0 = c - alpha * (z - 1.0 + params.q_circ) - (1.0 + alpha * eps) * p0;
    let e0 = (p0 - c + v0) / alpha + eps * v0 + params.q_circ;
    let beta = -r * v0 / e0;
    // d1 = gamma/alpha - (1/alpha + eps) beta = r.
    let gamma = alpha * r + (1.0 + alpha * eps) * beta;
    let d1 = gamma / alpha - (1.0 / alpha + eps) * beta;
    let e1 = (gamma - beta) / alpha + eps * gamma;
    let residual = (d1 - r) * gamma - beta * e1;
    SmoothAnsatzReport {
        z,
        v0,
        p0,
        beta,
        gamma,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_values_at_half() {
        let params = ModelParams::baseline();
        let a = boundary_asymptotics(&params, 0.5).unwrap();
        assert!((a.v0 + 906.666_666_666_666_6).abs() < 1e-9);
        assert!((a.p0 - 343.333_333_333_333_3).abs() < 1e-9);
        assert!((a.uniqueness_margin - 19.0).abs() < 1e-12);
        assert!(a.feasible());
        assert!(a.factor_residual().unwrap().abs() < 1e-12);
        assert!(a.price_order_residual(&params).unwrap().abs() < 1e-12);
        assert!(a.x_plus > 1.0 + params.alpha_eps());
    }

    #[test]
    fn v0_vanishes_on_its_zero_line() {
        let params = ModelParams::baseline();
        let z = 1.0 - params.epsilon * (params.c - params.alpha * params.q_circ);
        assert!(boundary_values(&params, z).0.abs() < 1e-12);
    }

    #[test]
    fn golden_ratio_case_warns() {
        let mut params = ModelParams::baseline();
        params.alpha = (5f64.sqrt() - 1.0) / 2.0 / params.epsilon;
        let a = boundary_asymptotics(&params, 0.5).unwrap();
        assert!(a.uniqueness_margin.abs() < 1e-9);
        assert!(a.warnings.iter().any(|w| w.contains("unique")));
    }

    #[test]
    fn smooth_ansatz_is_inconsistent_at_baseline() {
        let params = ModelParams::baseline();
        let rep = smooth_ansatz_inconsistency(&params, 0.5);
        assert_eq!(rep.p0, 0.0);
        assert!(rep.residual.abs() > 1.0);
        let mut moved = params.clone();
        moved.alpha *= 1.0 + 1e-7;
        let rep2 = smooth_ansatz_inconsistency(&moved, 0.5);
        assert!((rep2.residual - rep.residual).abs() < 1e-4 * rep.residual.abs());
    }
}
