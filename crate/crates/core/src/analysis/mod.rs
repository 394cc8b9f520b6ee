//! Post-processing of solved fields.

pub mod asymptotics;
pub mod cycle;
pub mod measure;
pub mod policy;
pub mod trajectory;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::scheme::Edge;

pub use asymptotics::{boundary_asymptotics, smooth_ansatz_inconsistency, AsymptoticData, SmoothAnsatzReport};
pub use cycle::{detect_cycle, detect_cycle_at, phase_summary, Coord, CycleEstimate, Phase, PhaseSummary, Section};
pub use measure::{invariant_measure, MeasureHistogram, MeasureOptions};
pub use policy::{extract_policy, extract_policy_with, PolicyFields, ShockPoint};
pub use trajectory::{simulate_trajectory, FeedbackField, SimOptions, TrajPoint, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// Per-column exponents that entered the average.
    pub columns: Vec<(usize, f64)>,
}

/// Log-log fit of `|drift_k|` against the distance to the edge over the
/// first `n_cells` interior nodes, averaged over the columns of `z_band`
/// where the drift points into the edge at all those nodes.
pub fn fit_boundary_exponent(drift_k: &Array2<f64>, grid: &Grid2D, z_band: (f64, f64), edge: Edge, n_cells: usize) -> Result<ExponentFit> {
    if n_cells < 2 || n_cells >= grid.n {
        return Err(Error::Analysis(format!("n_cells = {n_cells} must lie in [2, {})", grid.n)));
    }
    let mut columns = Vec::new();
    for j in 0..=grid.m {
        let z = grid.z(j);
        if z < z_band.0 || z > z_band.1 {
            continue;
        }
        let pts: Vec<(f64, f64)> = (1..=n_cells)
            .filter_map(|s| {
                let (i, dist, inward) = match edge {
                    Edge::KMin => (s, grid.k(s) - grid.k(0), -1.0),
                    Edge::KMax => (grid.n - s, grid.k(grid.n) - grid.k(grid.n - s), 1.0),
                };
                let d = drift_k[[i, j]] * inward;
                (d > 0.0).then(|| (dist.ln(), d.ln()))
            })
            .collect();
        if pts.len() == n_cells {
            columns.push((j, cycle::slope(&pts)));
        }
    }
    if columns.is_empty() {
        return Err(Error::Analysis(format!(
            "no column in z band [{}, {}] drifts into the {:?} edge",
            z_band.0, z_band.1, edge
        )));
    }
    let exponent = columns.iter().map(|c| c.1).sum::<f64>() / columns.len() as f64;
    Ok(ExponentFit { exponent, columns })
}
