//! Period and phase structure of a settled trajectory.

use serde::Serialize;

use super::trajectory::{TrajPoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coord {
    K,
    Z,
}

/// Poincare section: the line `coord = level`, crossed upwards or downwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub coord: Coord,
    pub level: f64,
    pub rising: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleEstimate {
    pub period: f64,
    pub crossings: Vec<f64>,
    pub periods: Vec<f64>,
}

fn settled(traj: &Trajectory, settle_fraction: f64) -> &[TrajPoint] {
    let n = traj.points.len();
    let start = ((n as f64) * settle_fraction.clamp(0.0, 1.0)).floor() as usize;
    &traj.points[start.min(n)..]
}

fn coord(p: &TrajPoint, c: Coord) -> f64 {
    match c {
        Coord::K => p.k,
        Coord::Z => p.z,
    }
}

/// Linearly interpolated crossing times after the settling part.
pub fn crossing_times(traj: &Trajectory, settle_fraction: f64, section: Section) -> Vec<f64> {
    let pts = settled(traj, settle_fraction);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let a = coord(&w[0], section.coord) - section.level;
        let b = coord(&w[1], section.coord) - section.level;
        let hit = if section.rising { a < 0.0 && b >= 0.0 } else { a > 0.0 && b <= 0.0 };
        if hit {
            let s = a / (a - b);
            out.push(w[0].t + s * (w[1].t - w[0].t));
        }
    }
    out
}

pub fn detect_cycle_at(traj: &Trajectory, settle_fraction: f64, section: Section) -> Option<CycleEstimate> {
    let crossings = crossing_times(traj, settle_fraction, section);
    if crossings.len() < 2 {
        return None;
    }
    let periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let period = periods.iter().sum::<f64>() / periods.len() as f64;
    Some(CycleEstimate {
        period,
        crossings,
        periods,
    })
}

/// Period from upward crossings of the mid storage level of the settled part.
pub fn detect_cycle(traj: &Trajectory, settle_fraction: f64) -> Option<CycleEstimate> {
    let pts = settled(traj, settle_fraction);
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.k), h.max(p.k)));
    if !(hi > lo) {
        return None;
    }
    detect_cycle_at(
        traj,
        settle_fraction,
        Section {
            coord: Coord::K,
            level: 0.5 * (lo + hi),
            rising: true,
        },
    )
}

/// Dwell at empty storage, filling sweep, dwell at full storage, emptying sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Alpha,
    Beta,
    Gamma,
    Delta,
}

impl Phase {
    fn index(self) -> usize {
        match self {
            Phase::Alpha => 0,
            Phase::Beta => 1,
            Phase::Gamma => 2,
            Phase::Delta => 3,
        }
    }

    fn next(self) -> Phase {
        match self {
            Phase::Alpha => Phase::Beta,
            Phase::Beta => Phase::Gamma,
            Phase::Gamma => Phase::Delta,
            Phase::Delta => Phase::Alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRun {
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseSummary {
    /// Fraction of settled time in each of alpha, beta, gamma, delta.
    pub fractions: [f64; 4],
    pub runs: Vec<PhaseRun>,
    /// Runs follow alpha -> beta -> gamma -> delta -> alpha throughout.
    pub cyclic_order: bool,
    /// Fitted `d ln p / dt` over the filling sweeps (positive prices only).
    pub beta_price_growth: Option<f64>,
    /// Mean `dp/dt` over the emptying sweeps.
    pub delta_price_slope: Option<f64>,
}

impl PhaseSummary {
    pub fn all_present(&self) -> bool {
        self.fractions.iter().all(|&f| f > 0.0)
    }
}

/// Labels each settled step by storage band (`band` as a fraction of the
/// range at either end) and, in between, by the direction of motion.
/// Runs shorter than `min_run` are merged into their predecessor.
pub fn phase_summary(traj: &Trajectory, k_min: f64, k_max: f64, settle_fraction: f64, band: f64, min_run: f64) -> PhaseSummary {
    let pts = settled(traj, settle_fraction);
    let span = k_max - k_min;
    let lo = k_min + band * span;
    let hi = k_max - band * span;
    let mut time = [0.0; 4];
    let mut runs: Vec<PhaseRun> = Vec::new();
    let mut beta_segments: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut delta_slopes = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let phase = if a.k <= lo {
            Phase::Alpha
        } else if a.k >= hi {
            Phase::Gamma
        } else if b.k >= a.k {
            Phase::Beta
        } else {
            Phase::Delta
        };
        time[phase.index()] += dt;
        match runs.last_mut() {
            Some(r) if r.phase == phase => r.t_end = b.t,
            _ => {
                runs.push(PhaseRun {
                    phase,
                    t_start: a.t,
                    t_end: b.t,
                });
                if phase == Phase::Beta {
                    beta_segments.push(Vec::new());
                }
            }
        }
        if phase == Phase::Beta && a.p > 0.0 {
            if let Some(seg) = beta_segments.last_mut() {
                seg.push((a.t, a.p.ln()));
            }
        }
        if phase == Phase::Delta {
            delta_slopes.push((b.p - a.p) / dt);
        }
    }
    let total: f64 = time.iter().sum();
    let fractions = if total > 0.0 { time.map(|t| t / total) } else { [0.0; 4] };
    let runs = merge_short_runs(runs, min_run);
    // The first and last runs may be cut by the window; check interior transitions.
    let cyclic_order = runs.len() >= 5 && runs.windows(2).all(|w| w[0].phase.next() == w[1].phase);
    let growth: Vec<(f64, usize)> = beta_segments
        .iter()
        .filter(|s| s.len() >= 3)
        .map(|s| (slope(s), s.len()))
        .collect();
    let beta_price_growth = if growth.is_empty() {
        None
    } else {
        let w: usize = growth.iter().map(|g| g.1).sum();
        Some(growth.iter().map(|(g, n)| g * *n as f64).sum::<f64>() / w as f64)
    };
    let delta_price_slope = if delta_slopes.is_empty() {
        None
    } else {
        Some(delta_slopes.iter().sum::<f64>() / delta_slopes.len() as f64)
    };
    PhaseSummary {
        fractions,
        runs,
        cyclic_order,
        beta_price_growth,
        delta_price_slope,
    }
}

fn merge_short_runs(runs: Vec<PhaseRun>, min_run: f64) -> Vec<PhaseRun> {
    let mut out: Vec<PhaseRun> = Vec::with_capacity(runs.len());
    for r in runs {
        let short = r.t_end - r.t_start < min_run;
        match out.last_mut() {
            Some(prev) if short || prev.phase == r.phase => prev.t_end = r.t_end,
            _ => out.push(r),
        }
    }
    // Merging may leave equal neighbours behind a dropped run.
    let mut dedup: Vec<PhaseRun> = Vec::with_capacity(out.len());
    for r in out {
        match dedup.last_mut() {
            Some(prev) if prev.phase == r.phase => prev.t_end = r.t_end,
            _ => dedup.push(r),
        }
    }
    dedup
}

/// Least-squares slope of `y` against `x`.
pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
