//! Occupation-time estimate of the invariant measure of the noisy dynamics.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::trajectory::{FeedbackField, Trajectory};
use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureOptions {
    pub dt: f64,
    /// Simulated time per path, burn-in included.
    pub t_end: f64,
    pub burn_in: f64,
    pub seed: u64,
    /// Independent paths; path `i` uses stream `i` of the seeded generator.
    pub paths: usize,
    pub k0: f64,
    pub z0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureHistogram {
    /// Occupation frequency of each node's cell, summing to one.
    pub density: Array2<f64>,
    pub burn_in: f64,
    pub samples: u64,
    pub seed: u64,
    pub paths: usize,
}

impl MeasureHistogram {
    pub fn mass(&self) -> f64 {
        self.density.sum()
    }
}

fn run_path(field: &FeedbackField, opts: &MeasureOptions, stream: u64) -> Array2<u64> {
    let grid = field.grid;
    let prm = field.params;
    let mut counts = Array2::<u64>::zeros(grid.shape());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    let scale = (2.0 * prm.nu_z * opts.dt).sqrt();
    let steps = (opts.t_end / opts.dt).round() as usize;
    let burn = (opts.burn_in / opts.dt).round() as usize;
    let (mut k, mut z) = (opts.k0, opts.z0);
    for step in 0..steps {
        if step >= burn {
            counts[grid.nearest(k, z)] += 1;
        }
        let (dk, dz, _, _) = field.eval(k, z);
        let w: f64 = StandardNormal.sample(&mut rng);
        k = (k + dk * opts.dt).clamp(prm.k_min, prm.k_max);
        z = (z + dz * opts.dt + scale * w).clamp(prm.z_min, prm.z_max);
    }
    counts
}

pub fn invariant_measure(field: &FeedbackField, opts: &MeasureOptions) -> Result<MeasureHistogram> {
    if !(field.params.nu_z > 0.0) {
        return Err(Error::Analysis("the invariant measure needs nu_z > 0".into()));
    }
    if opts.paths == 0 || !(opts.t_end > opts.burn_in) || !(opts.dt > 0.0) {
        return Err(Error::Analysis("measure run needs paths > 0, dt > 0 and t_end > burn_in".into()));
    }
    let per_path: Vec<Array2<u64>> = (0..opts.paths as u64)
        .into_par_iter()
        .map(|s| run_path(field, opts, s))
        .collect();
    let mut total = Array2::<u64>::zeros(field.grid.shape());
    for c in &per_path {
        total += c;
    }
    let samples: u64 = total.sum();
    if samples == 0 {
        return Err(Error::Analysis("no samples after burn-in".into()));
    }
    let density = total.mapv(|c| c as f64 / samples as f64);
    Ok(MeasureHistogram {
        density,
        burn_in: opts.burn_in,
        samples,
        seed: opts.seed,
        paths: opts.paths,
    })
}

/// Cells within Chebyshev index distance `radius` of a node visited by the
/// settled part of `cycle`.
pub fn tube_mask(grid: &Grid2D, cycle: &Trajectory, settle_fraction: f64, radius: usize) -> Array2<bool> {
    let mut mask = Array2::from_elem(grid.shape(), false);
    let start = (cycle.points.len() as f64 * settle_fraction) as usize;
    let (n, m) = (grid.n, grid.m);
    for pt in &cycle.points[start.min(cycle.points.len())..] {
        let (i, j) = grid.nearest(pt.k, pt.z);
        for a in i.saturating_sub(radius)..=(i + radius).min(n) {
            for b in j.saturating_sub(radius)..=(j + radius).min(m) {
                mask[[a, b]] = true;
            }
        }
    }
    mask
}

pub fn tube_mass(hist: &MeasureHistogram, mask: &Array2<bool>) -> f64 {
    hist.density.iter().zip(mask.iter()).filter(|(_, &t)| t).map(|(d, _)| d).sum()
}

/// Mean density over tube cells on the two storage bounds, and over the
/// whole tube.
pub fn boundary_and_tube_density(hist: &MeasureHistogram, mask: &Array2<bool>) -> (f64, f64) {
    let n = hist.density.nrows() - 1;
    let (mut bs, mut bc, mut ts, mut tc) = (0.0, 0usize, 0.0, 0usize);
    for (((i, _), &d), &t) in hist.density.indexed_iter().zip(mask.iter()) {
        if !t {
            continue;
        }
        ts += d;
        tc += 1;
        if i == 0 || i == n {
            bs += d;
            bc += 1;
        }
    }
    (bs / bc.max(1) as f64, ts / tc.max(1) as f64)
}
