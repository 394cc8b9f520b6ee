//! Euler simulation of `(k_t, z_t)` under the equilibrium feedback.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::bilinear;
use crate::grid::Grid2D;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajPoint {
    pub t: f64,
    pub k: f64,
    pub z: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Euler steps between stored samples.
    pub record_every: usize,
    pub seed: Option<u64>,
    pub points: Vec<TrajPoint>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Seed of the fringe noise `sqrt(2 nu_z) dW`; `None` runs the noiseless dynamics.
    pub noise_seed: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 60.0,
            record_every: 1,
            noise_seed: None,
        }
    }
}

/// Bilinear lookup of `q*` and `p`, and the drifts they induce.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackField<'a> {
    pub grid: &'a Grid2D,
    pub params: &'a ModelParams,
    pub q_star: &'a Array2<f64>,
    pub p: &'a Array2<f64>,
}

impl<'a> FeedbackField<'a> {
    /// `(dk/dt, dz/dt, p, q)` at a point of the rectangle.
    pub fn eval(&self, k: f64, z: f64) -> (f64, f64, f64, f64) {
        let (x, y) = self.grid.locate(k, z);
        let q = bilinear(self.q_star, x, y);
        let p = bilinear(self.p, x, y);
        let prm = self.params;
        let k = k.clamp(prm.k_min, prm.k_max);
        (q + z - prm.demand(p), prm.drift_b(k, z, p), p, q)
    }
}

/// Explicit Euler with projection onto the rectangle after every step.
pub fn simulate_trajectory(field: &FeedbackField, k0: f64, z0: f64, opts: &SimOptions) -> Result<Trajectory> {
    let prm = field.params;
    if !(k0 >= prm.k_min && k0 <= prm.k_max && z0 >= prm.z_min && z0 <= prm.z_max) {
        return Err(Error::Analysis(format!("start ({k0}, {z0}) lies outside the domain")));
    }
    if !(opts.dt > 0.0) || opts.record_every == 0 {
        return Err(Error::Analysis("simulation step and record interval must be positive".into()));
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let mut rng = opts.noise_seed.map(ChaCha8Rng::seed_from_u64);
    let noise_scale = (2.0 * prm.nu_z * opts.dt).sqrt();
    let (mut k, mut z) = (k0, z0);
    let mut points = Vec::with_capacity(steps / opts.record_every + 1);
    for step in 0..=steps {
        let (dk, dz, p, q) = field.eval(k, z);
        if step % opts.record_every == 0 {
            points.push(TrajPoint {
                t: step as f64 * opts.dt,
                k,
                z,
                p,
                q,
            });
        }
        if step == steps {
            break;
        }
        k += dk * opts.dt;
        z += dz * opts.dt;
        if let Some(rng) = rng.as_mut() {
            let w: f64 = StandardNormal.sample(rng);
            z += noise_scale * w;
        }
        k = k.clamp(prm.k_min, prm.k_max);
        z = z.clamp(prm.z_min, prm.z_max);
        assert!(k.is_finite() && z.is_finite(), "trajectory left the domain");
    }
    Ok(Trajectory {
        dt: opts.dt,
        record_every: opts.record_every,
        seed: opts.noise_seed,
        points,
    })
}
