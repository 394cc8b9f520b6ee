//! Model constants and the scalar coefficient functions built from them.
//!
//! Units: one time unit is one year. Quantities of oil (production, demand,
//! storage) are fractions of annual global demand; prices are in the same
//! currency unit as the production cost `c`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Volatility of the storage level. Only the degenerate (identically zero)
/// volatility is supported; the scheme carries the `sigma^2` terms anyway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SigmaSpec {
    Zero,
}

impl SigmaSpec {
    pub fn sigma(&self, _k: f64) -> f64 {
        match self {
            SigmaSpec::Zero => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SigmaSpec::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" | "0" => Some(SigmaSpec::Zero),
            _ => None,
        }
    }
}

/// All scalar model constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    /// Discount rate (1/year).
    pub r: f64,
    /// Slope of the linear demand `D(p) = 1 - epsilon * p`.
    pub epsilon: f64,
    /// Penalty on deviation of cartel production from its target share.
    pub alpha: f64,
    /// Target cartel share.
    pub q_circ: f64,
    /// Unit production cost.
    pub c: f64,
    pub kappa: f64,
    pub lambda_b: f64,
    pub mu_b: f64,
    /// Amplitude of the storage modulation term of the fringe drift.
    pub a_f: f64,
    /// Fringe production noise intensity (`dz = b dt + sqrt(2 nu_z) dB`).
    pub nu_z: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub g_coeff: f64,
    pub g_exponent: f64,
    pub sigma_spec: SigmaSpec,
    /// Support width (z units) of the inward forcing near the z bounds.
    pub b_tilde_width: f64,
    /// Strength of the inward forcing at the z bounds.
    pub b_tilde_amp: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ModelParams {
    /// Baseline experiment: no storage cost, storage range 5% of demand.
    pub fn baseline() -> Self {
        Self {
            r: 0.1,
            epsilon: 4e-4,
            alpha: 1e4,
            q_circ: 0.42,
            c: 10.0,
            kappa: 2e-3,
            lambda_b: 0.4,
            mu_b: 25.0,
            a_f: 0.01,
            nu_z: 1e-4,
            k_min: 0.0,
            k_max: 0.05,
            z_min: 0.35,
            z_max: 0.75,
            g_coeff: 0.0,
            g_exponent: 3.0,
            sigma_spec: SigmaSpec::Zero,
            b_tilde_width: 0.02,
            b_tilde_amp: 0.05,
        }
    }

    /// Larger storage range with a cubic cost penalizing nearly full storage.
    pub fn appendix() -> Self {
        Self {
            k_max: 0.07,
            g_coeff: 10.0,
            ..Self::baseline()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r", self.r),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("kappa", self.kappa),
            ("lambda_b", self.lambda_b),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.k_min < self.k_max) {
            return Err(Error::InvalidParams(format!(
                "k_min ({}) must be below k_max ({})",
                self.k_min, self.k_max
            )));
        }
        if !(self.z_min < self.z_max) {
            return Err(Error::InvalidParams(format!(
                "z_min ({}) must be below z_max ({})",
                self.z_min, self.z_max
            )));
        }
        if self.b_tilde_width <= 0.0 {
            return Err(Error::InvalidParams("b_tilde_width must be positive".into()));
        }
        if self.nu_z < 0.0 || self.g_coeff < 0.0 {
            return Err(Error::InvalidParams("nu_z and g_coeff must be nonnegative".into()));
        }
        Ok(())
    }

    /// `alpha * epsilon`, the dimensionless group driving the boundary asymptotics.
    pub fn alpha_eps(&self) -> f64 {
        self.alpha * self.epsilon
    }

    pub fn demand(&self, p: f64) -> f64 {
        1.0 - self.epsilon * p
    }

    /// Price at which the price-driven part of the fringe drift vanishes.
    pub fn neutral_price(&self) -> f64 {
        self.mu_b / self.lambda_b
    }

    /// Storage modulation `f(k)`: `+a` at empty storage, `-a` at full storage.
    pub fn f_storage(&self, k: f64) -> f64 {
        let span = self.k_max - self.k_min;
        let tol = 1e-12 * span.max(1.0);
        assert!(
            k >= self.k_min - tol && k <= self.k_max + tol,
            "storage level {k} outside [{}, {}]",
            self.k_min,
            self.k_max
        );
        let up = (self.k_max - k) / span;
        let down = (k - self.k_min) / span;
        self.a_f * up * up - self.a_f * down * down
    }

    /// Technical inward forcing near the z bounds; zero away from them.
    pub fn b_tilde(&self, z: f64) -> f64 {
        let w = self.b_tilde_width;
        let lo = ((self.z_min + w - z) / w).max(0.0);
        let hi = ((z - self.z_max + w) / w).max(0.0);
        self.b_tilde_amp * (lo * lo - hi * hi)
    }

    /// Price-independent part of the fringe drift at `(k, z)`.
    pub fn phi(&self, k: f64, z: f64) -> f64 {
        self.f_storage(k) + self.b_tilde(z)
    }

    /// Fringe production drift `b(k, z, p)`.
    pub fn drift_b(&self, k: f64, z: f64, p: f64) -> f64 {
        self.phi(k, z) + self.kappa * (self.lambda_b * p - self.mu_b)
    }

    /// Storage cost rate `g(k)`.
    pub fn storage_cost(&self, k: f64) -> f64 {
        if self.g_coeff == 0.0 {
            return 0.0;
        }
        let x = ((k - self.k_min) / (self.k_max - self.k_min)).max(0.0);
        self.g_coeff * x.powf(self.g_exponent)
    }

    pub fn sigma(&self, k: f64) -> f64 {
        self.sigma_spec.sigma(k)
    }
}
