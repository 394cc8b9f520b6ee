//! Pseudo-time marching to the stationary discrete solution.
//!
//! Each iteration evaluates the full residual `R(S)` on a frozen copy of the
//! state and then updates `S <- S + dt R(S)`. The residual components have
//! negative self-derivatives, so this is the stable direction of the explicit
//! long-time iteration; the opposite sign amplifies every mode by `1 + dt |dR/dS|`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{first_non_finite, FieldPair};
use crate::grid::Grid2D;
use crate::params::ModelParams;
use crate::scheme::{BoundaryDiagnostics, BoundaryRule, ResidualPair, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSettings {
    /// Pseudo-time step.
    pub dt: f64,
    pub max_iters: usize,
    /// Target for the sup norm of the residual.
    pub tol_residual: Option<f64>,
    /// Target for `sup |S_{l+1} - S_l| / dt` averaged over a checkpoint window.
    pub tol_delta: Option<f64>,
    /// Iterations between progress records.
    pub checkpoint_every: usize,
    pub boundary_rule: BoundaryRule,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            max_iters: 50_000_000,
            tol_residual: Some(1e-6),
            tol_delta: None,
            checkpoint_every: 10_000,
            boundary_rule: BoundaryRule::ArbitragePrice,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if self.tol_residual.is_none() && self.tol_delta.is_none() {
            return Err(Error::InvalidParams("at least one stopping tolerance must be set".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidParams("checkpoint_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Residual,
    Delta,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistorySample {
    pub iteration: usize,
    pub residual_u: f64,
    pub residual_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_u: f64,
    pub residual_p: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub history: Vec<HistorySample>,
    pub branches: BoundaryDiagnostics,
}

impl SolveReport {
    pub fn residual(&self) -> f64 {
        self.residual_u.max(self.residual_p)
    }
}

/// `U = 0`, `p = mu / lambda` everywhere.
pub fn default_init(params: &ModelParams, grid: &Grid2D) -> FieldPair {
    FieldPair::constant(grid, 0.0, params.neutral_price())
}

/// One explicit step `S + dt R(S)`; returns the residual used.
pub fn step(scheme: &Scheme, state: &FieldPair, dt: f64) -> (FieldPair, ResidualPair, BoundaryDiagnostics) {
    let (res, diag) = scheme.assemble(state);
    let mut next = state.clone();
    next.u.scaled_add(dt, &res.ru);
    next.p.scaled_add(dt, &res.rp);
    (next, res, diag)
}

pub fn solve_stationary(
    params: &ModelParams,
    grid: &Grid2D,
    init: FieldPair,
    settings: &SolveSettings,
) -> Result<(FieldPair, SolveReport)> {
    solve_stationary_with(params, grid, init, settings, |_, _, _| {})
}

/// As [`solve_stationary`], calling `observer(iteration, state, residual)` at
/// every checkpoint.
pub fn solve_stationary_with(
    params: &ModelParams,
    grid: &Grid2D,
    init: FieldPair,
    settings: &SolveSettings,
    mut observer: impl FnMut(usize, &FieldPair, &ResidualPair),
) -> Result<(FieldPair, SolveReport)> {
    params.validate()?;
    settings.validate()?;
    if !init.matches(grid) {
        return Err(Error::InvalidParams("initial fields do not match the grid".into()));
    }
    if let Some((i, j)) = init.first_non_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            i,
            j,
            last_finite: Box::new(init),
        });
    }
    let scheme = Scheme::with_rule(params, grid, settings.boundary_rule);
    let dt = settings.dt;
    let mut state = init;
    let mut res = ResidualPair::zeros(grid);
    let mut diag = BoundaryDiagnostics::new(grid.m);
    let mut history = Vec::new();
    let mut window_start = state.clone();
    let mut iteration = 0;
    loop {
        scheme.assemble_into(&state, &mut res, &mut diag);
        let (ru, rp) = res.sup_norms();
        let at_checkpoint = iteration % settings.checkpoint_every == 0;
        if at_checkpoint {
            history.push(HistorySample {
                iteration,
                residual_u: ru,
                residual_p: rp,
            });
            log::debug!("iteration {iteration}: |R_U| = {ru:.3e}, |R_P| = {rp:.3e}");
            observer(iteration, &state, &res);
        }
        let mut stop = None;
        if settings.tol_residual.is_some_and(|tol| ru.max(rp) <= tol) {
            stop = Some(StopReason::Residual);
        } else if at_checkpoint && iteration > 0 {
            if let Some(tol) = settings.tol_delta {
                let window = settings.checkpoint_every as f64 * dt;
                if state.max_abs_diff(&window_start) / window <= tol {
                    stop = Some(StopReason::Delta);
                }
            }
        }
        if at_checkpoint {
            window_start.clone_from(&state);
        }
        if stop.is_none() && iteration >= settings.max_iters {
            stop = Some(StopReason::MaxIters);
        }
        if let Some(reason) = stop {
            if history.last().map(|h| h.iteration) != Some(iteration) {
                history.push(HistorySample {
                    iteration,
                    residual_u: ru,
                    residual_p: rp,
                });
            }
            let report = SolveReport {
                iterations: iteration,
                residual_u: ru,
                residual_p: rp,
                converged: reason != StopReason::MaxIters,
                stop_reason: reason,
                history,
                branches: diag,
            };
            return Ok((state, report));
        }
        if let Some((i, j)) = first_non_finite(&res.ru).or_else(|| first_non_finite(&res.rp)) {
            return Err(Error::Diverged {
                iteration,
                i,
                j,
                last_finite: Box::new(state),
            });
        }
        let previous = state.clone();
        state.u.scaled_add(dt, &res.ru);
        state.p.scaled_add(dt, &res.rp);
        if let Some((i, j)) = state.first_non_finite() {
            return Err(Error::Diverged {
                iteration: iteration + 1,
                i,
                j,
                last_finite: Box::new(previous),
            });
        }
        iteration += 1;
    }
}
