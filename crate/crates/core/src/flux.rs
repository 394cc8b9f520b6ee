//! Godunov flux for the conservative fringe-drift transport of the price.
//!
//! With `b = phi + kappa (lambda p - mu)`, the transport term `b dp/dz` is the
//! `z`-derivative of the convex flux `F(p) = phi p + kappa/(2 lambda) (lambda p - mu)^2`.
//! The numerical flux takes the max of `F` over `[p_l, p_r]` when `p_l <= p_r`
//! and the min over `[p_r, p_l]` otherwise.

use crate::params::ModelParams;

/// Physical flux `F(p)` for the column-frozen `phi`.
pub fn physical_flux(params: &ModelParams, phi: f64, p: f64) -> f64 {
    let s = params.lambda_b * p - params.mu_b;
    phi * p + params.kappa / (2.0 * params.lambda_b) * s * s
}

/// Price at which `F` attains its minimum, `mu/lambda - phi/(kappa lambda)`.
#[inline]
pub fn flux_vertex(params: &ModelParams, phi: f64) -> f64 {
    params.mu_b / params.lambda_b - phi / (params.kappa * params.lambda_b)
}

#[inline]
pub fn godunov_flux(params: &ModelParams, phi: f64, p_left: f64, p_right: f64) -> f64 {
    let kl = params.kappa * params.lambda_b;
    let s = flux_vertex(params, phi);
    let right = (p_right - s).max(0.0);
    let left = (p_left - s).min(0.0);
    -phi * phi / (2.0 * kl) + params.mu_b / params.lambda_b * phi
        + 0.5 * kl * (right * right).max(left * left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Min/max of `F` over the closed interval by scanning 10^4 + 1 points
    /// plus the endpoints and the vertex if it lies inside.
    fn scan(params: &ModelParams, phi: f64, pl: f64, pr: f64) -> f64 {
        let (lo, hi) = if pl <= pr { (pl, pr) } else { (pr, pl) };
        let mut pts: Vec<f64> = (0..=10_000).map(|s| lo + (hi - lo) * s as f64 / 1e4).collect();
        let v = flux_vertex(params, phi);
        if v > lo && v < hi {
            pts.push(v);
        }
        let vals = pts.iter().map(|&p| physical_flux(params, phi, p));
        if pl <= pr {
            vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.fold(f64::INFINITY, f64::min)
        }
    }

    #[test]
    fn consistency() {
        let params = ModelParams::baseline();
        for &phi in &[0.0, 0.01, -0.01, 0.04] {
            for &p in &[-30.0, 0.0, 62.5, 140.0] {
                let f = godunov_flux(&params, phi, p, p);
                let s = params.lambda_b * p - params.mu_b;
                let expect = phi * p + params.kappa / (2.0 * params.lambda_b) * s * s;
                assert!((f - expect).abs() < 1e-12 * expect.abs().max(1.0));
            }
        }
        assert!(godunov_flux(&params, 0.0, 62.5, 62.5).abs() < 1e-15);
    }

    #[test]
    fn matches_scan_oracle() {
        let params = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let phi = rng.gen_range(-0.06..0.06);
            let pl = rng.gen_range(-100.0..250.0);
            let pr = rng.gen_range(-100.0..250.0);
            for (a, b) in [(pl, pr), (pr, pl)] {
                let f = godunov_flux(&params, phi, a, b);
                let o = scan(&params, phi, a, b);
                assert!((f - o).abs() <= 1e-6 * o.abs().max(1.0), "{f} vs {o}");
            }
        }
    }

    #[test]
    fn monotone_in_arguments() {
        let params = ModelParams::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..2000 {
            let phi = rng.gen_range(-0.06..0.06);
            let pl = rng.gen_range(-100.0..250.0);
            let pr = rng.gen_range(-100.0..250.0);
            let d = rng.gen_range(0.0..20.0);
            let f = godunov_flux(&params, phi, pl, pr);
            // Backward-in-time orientation: nonincreasing in the left state,
            // nondecreasing in the right state.
            assert!(godunov_flux(&params, phi, pl + d, pr) <= f + 1e-12);
            assert!(godunov_flux(&params, phi, pl, pr + d) >= f - 1e-12);
        }
    }
}
