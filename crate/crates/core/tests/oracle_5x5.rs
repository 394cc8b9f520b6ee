//! Residual map on a 4x4-interval grid checked against an independent
//! transcription: Hamiltonians by evaluating the objective at its
//! constrained maximizer, flux extrema from endpoints and vertex, the
//! boundary constraint threshold by bisection, the price-controlled maximum
//! by golden-section search and the arbitrage prices by scan and bisection.

use cartel_storage::grid::Grid2D;
use cartel_storage::scheme::{BoundaryBranch, BoundaryRule, Scheme};
use cartel_storage::{FieldPair, ModelParams};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 4;
const M: usize = 4;

struct Oracle {
    prm: ModelParams,
    dk: f64,
    dz: f64,
}

impl Oracle {
    fn new(prm: &ModelParams) -> Self {
        Self {
            prm: prm.clone(),
            dk: (prm.k_max - prm.k_min) / N as f64,
            dz: (prm.z_max - prm.z_min) / M as f64,
        }
    }

    fn k(&self, i: usize) -> f64 {
        self.prm.k_min + i as f64 * self.dk
    }

    fn z(&self, j: usize) -> f64 {
        self.prm.z_min + j as f64 * self.dz
    }

    fn demand(&self, p: f64) -> f64 {
        1.0 - self.prm.epsilon * p
    }

    fn phi(&self, k: f64, z: f64) -> f64 {
        let q = &self.prm;
        let span = q.k_max - q.k_min;
        let f = q.a_f * ((q.k_max - k) / span).powi(2) - q.a_f * ((k - q.k_min) / span).powi(2);
        let w = q.b_tilde_width;
        let lo = if z < q.z_min + w { ((q.z_min + w - z) / w).powi(2) } else { 0.0 };
        let hi = if z > q.z_max - w { ((z - q.z_max + w) / w).powi(2) } else { 0.0 };
        f + q.b_tilde_amp * (lo - hi)
    }

    fn g(&self, k: f64) -> f64 {
        let q = &self.prm;
        q.g_coeff * ((k - q.k_min) / (q.k_max - q.k_min)).powf(q.g_exponent)
    }

    fn b(&self, phi: f64, p: f64) -> f64 {
        phi + self.prm.kappa * (self.prm.lambda_b * p - self.prm.mu_b)
    }

    fn objective(&self, z: f64, p: f64, xi: f64, q: f64) -> f64 {
        let pr = &self.prm;
        -0.5 * pr.alpha * (q - pr.q_circ).powi(2) + (p - pr.c) * q + xi * (q + z - self.demand(p))
    }

    fn q_free(&self, p: f64, xi: f64) -> f64 {
        self.prm.q_circ + (p - self.prm.c + xi) / self.prm.alpha
    }

    fn hold(&self, z: f64, p: f64) -> f64 {
        self.demand(p) - z
    }

    /// `(value, drift)` over controls with drift <= 0.
    fn h_down(&self, z: f64, p: f64, xi: f64) -> (f64, f64) {
        let q = self.q_free(p, xi).min(self.hold(z, p));
        (self.objective(z, p, xi, q), q + z - self.demand(p))
    }

    /// `(value, drift)` over controls with drift >= 0.
    fn h_up(&self, z: f64, p: f64, xi: f64) -> (f64, f64) {
        let q = self.q_free(p, xi).max(self.hold(z, p));
        (self.objective(z, p, xi, q), q + z - self.demand(p))
    }

    fn h_min(&self, z: f64, p: f64) -> f64 {
        self.objective(z, p, 0.0, self.hold(z, p))
    }

    fn big_f(&self, phi: f64, p: f64) -> f64 {
        let pr = &self.prm;
        phi * p + pr.kappa / (2.0 * pr.lambda_b) * (pr.lambda_b * p - pr.mu_b).powi(2)
    }

    fn flux(&self, phi: f64, pl: f64, pr: f64) -> f64 {
        let v = self.prm.mu_b / self.prm.lambda_b - phi / (self.prm.kappa * self.prm.lambda_b);
        let (lo, hi) = (pl.min(pr), pl.max(pr));
        let mut vals = vec![self.big_f(phi, lo), self.big_f(phi, hi)];
        if v > lo && v < hi {
            vals.push(self.big_f(phi, v));
        }
        if pl <= pr {
            vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.into_iter().fold(f64::INFINITY, f64::min)
        }
    }

    fn nb(a: &Array2<f64>, i: usize, j: usize) -> (f64, f64) {
        let above = if j < M { a[[i, j + 1]] } else { a[[i, j]] };
        let below = if j > 0 { a[[i, j - 1]] } else { a[[i, j]] };
        (above, below)
    }

    fn u_transport(&self, u: &Array2<f64>, i: usize, j: usize, b: f64) -> f64 {
        let (above, below) = Self::nb(u, i, j);
        let c = u[[i, j]];
        if b >= 0.0 {
            b * (above - c) / self.dz
        } else {
            b * (c - below) / self.dz
        }
    }

    /// Fringe transport of the price with `p` substituted at the node.
    fn p_transport(&self, pf: &Array2<f64>, i: usize, j: usize, p: f64) -> f64 {
        let (above, below) = Self::nb(pf, i, j);
        let phi = self.phi(self.k(i), self.z(j));
        (self.flux(phi, p, above) - self.flux(phi, below, p)) / self.dz
    }

    fn interior(&self, f: &FieldPair, i: usize, j: usize) -> (f64, f64) {
        let (u, p) = (&f.u, &f.p);
        let z = self.z(j);
        let p0 = p[[i, j]];
        let (dv, dl) = self.h_down(z, p0, (u[[i, j]] - u[[i - 1, j]]) / self.dk);
        let (uv, dr) = self.h_up(z, p0, (u[[i + 1, j]] - u[[i, j]]) / self.dk);
        let b = self.b(self.phi(self.k(i), z), p0);
        let ru = -self.prm.r * u[[i, j]] + dv + uv - self.h_min(z, p0) + self.u_transport(u, i, j, b);
        let rp = -self.prm.r * p0 + dl * (p0 - p[[i - 1, j]]) / self.dk + dr * (p[[i + 1, j]] - p0) / self.dk
            + self.p_transport(p, i, j, p0)
            - self.g(self.k(i));
        (ru, rp)
    }

    /// Lowest (k_min) or highest (k_max) price satisfying the no-arbitrage
    /// inequality `r p + g - transport >= 0` (resp. `<= 0`).
    fn threshold(&self, f: &FieldPair, i: usize, j: usize) -> f64 {
        let g = self.g(self.k(i));
        let h = |p: f64| self.prm.r * p + g - self.p_transport(&f.p, i, j, p);
        let (mut lo, mut hi) = (-1e7, 1e7);
        assert!(h(lo) < 0.0 && h(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn golden_max(obj: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        for _ in 0..300 {
            if obj(c) >= obj(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - r * (b - a);
            d = a + r * (b - a);
        }
        let mut best = (obj(a), a);
        for x in [b, 0.5 * (a + b)] {
            if obj(x) > best.0 {
                best = (obj(x), x);
            }
        }
        best
    }

    /// `(B, p*)` over the feasible half-line. The objective is concave on
    /// each side of the zero of `b`, so each side is searched separately.
    fn price_controlled(&self, f: &FieldPair, i: usize, j: usize) -> (f64, f64) {
        let z = self.z(j);
        let phi = self.phi(self.k(i), z);
        let t = self.threshold(f, i, j);
        let obj = |p: f64| self.h_min(z, p) + self.u_transport(&f.u, i, j, self.b(phi, p));
        let s = self.prm.mu_b / self.prm.lambda_b - phi / (self.prm.kappa * self.prm.lambda_b);
        let far = 1e5;
        let (lo, hi) = if i == 0 { (t, t + far) } else { (t - far, t) };
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for (a, b) in [(lo, hi.min(s)), (lo.max(s), hi)] {
            if a <= b {
                let cand = Self::golden_max(obj, a, b);
                if cand.0 > best.0 {
                    best = cand;
                }
            }
        }
        best
    }

    /// Value and storage drift of the interior-like term at price `p`.
    fn leave_term(&self, f: &FieldPair, i: usize, j: usize, xi: f64, p: f64) -> (f64, f64) {
        let z = self.z(j);
        let (v, d) = if i == 0 { self.h_up(z, p, xi) } else { self.h_down(z, p, xi) };
        let b = self.b(self.phi(self.k(i), z), p);
        (v + self.u_transport(&f.u, i, j, b), d)
    }

    /// Prices solving the one-sided arbitrage equation with drift leaving the bound.
    fn arbitrage_prices(&self, f: &FieldPair, i: usize, j: usize, xi: f64) -> Vec<f64> {
        let z = self.z(j);
        let inner = if i == 0 { 1 } else { N - 1 };
        let p_in = f.p[[inner, j]];
        let g = self.g(self.k(i));
        let drift = |p: f64| self.q_free(p, xi) + z - self.demand(p);
        let eq = |p: f64| {
            let dp = if i == 0 { (p_in - p) / self.dk } else { (p - p_in) / self.dk };
            -self.prm.r * p + drift(p) * dp + self.p_transport(&f.p, i, j, p) - g
        };
        // drift is increasing in p; find where it vanishes
        let (mut lo, mut hi) = (-1e7, 1e7);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if drift(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p_zero = 0.5 * (lo + hi);
        let dir = if i == 0 { 1.0 } else { -1.0 };
        let at = |x: f64| p_zero + dir * x.sinh();
        let steps = 200_000;
        let xs: Vec<f64> = (1..=steps).map(|s| 15.0 * s as f64 / steps as f64).collect();
        let mut roots = Vec::new();
        let mut prev = (1e-9f64, eq(at(1e-9)));
        for &x in &xs {
            let v = eq(at(x));
            if v == 0.0 {
                roots.push(at(x));
            } else if v.signum() != prev.1.signum() {
                let (mut a, mut b) = (prev.0, x);
                let sa = prev.1.signum();
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if eq(at(mid)).signum() == sa {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                roots.push(at(0.5 * (a + b)));
            }
            prev = (x, v);
        }
        roots.retain(|&p| dir * drift(p) > 0.0);
        roots
    }

    fn boundary(&self, f: &FieldPair, i: usize, j: usize, rule: BoundaryRule) -> (f64, f64, BoundaryBranch) {
        let (u, p) = (&f.u, &f.p);
        let u0 = u[[i, j]];
        let p0 = p[[i, j]];
        let xi = if i == 0 { (u[[1, j]] - u0) / self.dk } else { (u0 - u[[N - 1, j]]) / self.dk };
        let (b_val, p_star) = self.price_controlled(f, i, j);
        let controlled = (-self.prm.r * u0 + b_val, p_star - p0, BoundaryBranch::PriceControlled);
        match rule {
            BoundaryRule::OwnPrice => {
                let (a_val, d) = self.leave_term(f, i, j, xi, p0);
                if a_val >= b_val {
                    let inner = if i == 0 { 1 } else { N - 1 };
                    let dp = if i == 0 { (p[[inner, j]] - p0) / self.dk } else { (p0 - p[[inner, j]]) / self.dk };
                    let rp = -self.prm.r * p0 + d * dp + self.p_transport(p, i, j, p0) - self.g(self.k(i));
                    (-self.prm.r * u0 + a_val, rp, BoundaryBranch::InteriorLike)
                } else {
                    controlled
                }
            }
            BoundaryRule::ArbitragePrice => {
                let best = self
                    .arbitrage_prices(f, i, j, xi)
                    .into_iter()
                    .map(|q| (self.leave_term(f, i, j, xi, q).0, q))
                    .fold((f64::NEG_INFINITY, f64::NAN), |acc, c| if c.0 > acc.0 { c } else { acc });
                if best.0 >= b_val {
                    (-self.prm.r * u0 + best.0, best.1 - p0, BoundaryBranch::InteriorLike)
                } else {
                    controlled
                }
            }
        }
    }
}

fn random_fields(seed: u64, prm: &ModelParams) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = prm.k_max - prm.k_min;
    let slope = rng.gen_range(-1500.0..500.0);
    let zslope = rng.gen_range(-300.0..300.0);
    let u = Array2::from_shape_fn((N + 1, M + 1), |(i, j)| {
        slope * span * i as f64 / N as f64 + zslope * j as f64 / M as f64 * 0.1 + rng.gen_range(-2.0..2.0)
    });
    let base = rng.gen_range(0.0..400.0);
    let p = Array2::from_shape_fn((N + 1, M + 1), |_| base + rng.gen_range(-80.0..80.0));
    FieldPair { u, p }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn check(prm: &ModelParams, f: &FieldPair, rule: BoundaryRule, branches: &mut [usize; 2]) {
    let grid = Grid2D::new(prm, N, M).unwrap();
    let scheme = Scheme::with_rule(prm, &grid, rule);
    let (res, diag) = scheme.assemble(f);
    let o = Oracle::new(prm);
    for i in 1..N {
        for j in 0..=M {
            let (ru, rp) = o.interior(f, i, j);
            assert!(close(res.ru[[i, j]], ru, 1e-10), "ru ({i},{j}): {} vs {ru}", res.ru[[i, j]]);
            assert!(close(res.rp[[i, j]], rp, 1e-10), "rp ({i},{j}): {} vs {rp}", res.rp[[i, j]]);
        }
    }
    for i in [0, N] {
        for j in 0..=M {
            let (ru, rp, br) = o.boundary(f, i, j, rule);
            let lib_br = if i == 0 { diag.kmin[j] } else { diag.kmax[j] };
            assert_eq!(lib_br, br, "branch ({i},{j}) under {rule:?}");
            branches[(br == BoundaryBranch::PriceControlled) as usize] += 1;
            assert!(close(res.ru[[i, j]], ru, 1e-9), "ru ({i},{j}) {rule:?}: {} vs {ru}", res.ru[[i, j]]);
            assert!((res.rp[[i, j]] - rp).abs() <= 1e-5 * (1.0 + rp.abs()), "rp ({i},{j}) {rule:?}: {} vs {rp}", res.rp[[i, j]]);
        }
    }
}

#[test]
fn residuals_match_independent_transcription() {
    for (name, prm) in [("baseline", ModelParams::baseline()), ("appendix", ModelParams::appendix())] {
        for rule in [BoundaryRule::ArbitragePrice, BoundaryRule::OwnPrice] {
            let mut branches = [0usize; 2];
            for seed in 0..24 {
                check(&prm, &random_fields(seed, &prm), rule, &mut branches);
            }
            println!("{name} {rule:?}: interior-like {}, price-controlled {}", branches[0], branches[1]);
            assert!(branches[0] > 0 && branches[1] > 0, "{name} {rule:?} exercised one branch only: {branches:?}");
        }
    }
}
