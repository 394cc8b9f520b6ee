//! Constant-fringe solves against the square-root boundary expansion at
//! empty storage.

use cartel_storage::analysis::asymptotics::boundary_values;
use cartel_storage::analysis::boundary_asymptotics;
use cartel_storage::analysis::cycle::slope;
use cartel_storage::oned::{solve_1d, Grid1D};
use cartel_storage::scheme::BoundaryBranch;
use cartel_storage::{ModelParams, SolveSettings};

fn settings() -> SolveSettings {
    SolveSettings {
        dt: 1e-3,
        max_iters: 2_000_000,
        tol_residual: Some(1e-9),
        ..SolveSettings::default()
    }
}

// least squares line through (x, y), returns (intercept, slope)
fn line(pts: &[(f64, f64)]) -> (f64, f64) {
    let b = slope(pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    (my - b * mx, b)
}

#[test]
fn price_and_value_follow_square_root_law() {
    let params = ModelParams::baseline();
    for z in [0.45, 0.5, 0.55] {
        let a = boundary_asymptotics(&params, z).unwrap();
        let beta = a.beta.expect("beta feasible at baseline");
        let mut v_gap = Vec::new();
        for n in [100usize, 200] {
            let grid = Grid1D::new(&params, n).unwrap();
            let (f, rep) = solve_1d(&params, &grid, z, &settings()).unwrap();
            assert!(rep.converged, "z={z} n={n}: {rep:?}");
            assert_eq!(rep.branch_kmin, BoundaryBranch::PriceControlled);

            // the first few cells carry the boundary stencil error
            let cells = n / 40..=n / 10;
            let p0 = f.p[0];
            assert!((p0 - a.p0).abs() < 0.05 * a.p0.abs(), "z={z}: p(k_min)={p0} vs {}", a.p0);

            let logs: Vec<(f64, f64)> = cells.clone().map(|i| (grid.k(i).ln(), (p0 - f.p[i]).ln())).collect();
            let e = slope(&logs);
            assert!((e - 0.5).abs() < 0.1, "z={z} n={n}: price exponent {e}");

            let v = |i: usize| (f.u[i + 1] - f.u[i]) / grid.dk;
            let logs: Vec<(f64, f64)> = cells.clone().map(|i| ((grid.k(i) + 0.5 * grid.dk).ln(), (v(i) - a.v0).ln())).collect();
            let e = slope(&logs);
            assert!((e - 0.5).abs() < 0.1, "z={z} n={n}: value exponent {e}");

            let root: Vec<(f64, f64)> = cells.map(|i| (grid.k(i).sqrt(), f.p[i])).collect();
            let (p_int, b) = line(&root);
            assert!((p_int - a.p0).abs() < 0.05 * a.p0.abs(), "z={z}: intercept {p_int}");
            assert!((-b - beta).abs() < 0.1 * beta, "z={z}: beta fit {} vs {beta}", -b);

            v_gap.push((v(0) - a.v0).abs());
        }
        // first-cell slope of U approaches V0 under refinement
        assert!(v_gap[1] < v_gap[0], "z={z}: {v_gap:?}");
        assert!(v_gap[1] < 0.02 * a.v0.abs(), "z={z}: {v_gap:?}");
    }
}

#[test]
fn boundary_price_is_the_constrained_argmax() {
    let params = ModelParams::baseline();
    let z = 0.58;
    let grid = Grid1D::new(&params, 100).unwrap();
    let (f, rep) = solve_1d(&params, &grid, z, &settings()).unwrap();
    assert!(rep.converged && rep.residual <= 1e-8, "{rep:?}");
    assert_eq!(rep.branch_kmin, BoundaryBranch::PriceControlled);
    // H_min is a concave quadratic in p; its vertex is p0, clipped to r p + g >= 0
    let g = params.storage_cost(params.k_min);
    let (_, p0) = boundary_values(&params, z);
    let argmax = p0.max(-g / params.r);
    assert!((f.p[0] - argmax).abs() < 1e-6 * argmax.abs(), "{} vs {argmax}", f.p[0]);
}

#[test]
fn interior_like_boundary_sits_below_p0() {
    let params = ModelParams::baseline();
    let grid = Grid1D::new(&params, 50).unwrap();
    let (f, rep) = solve_1d(&params, &grid, 0.65, &settings()).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.branch_kmin, BoundaryBranch::InteriorLike);
    assert!(f.p[0] < boundary_asymptotics(&params, 0.65).unwrap().p0);
}
