//! Run configuration in a flat `key = value` text format.
//!
//! `#` starts a comment. Keys may appear once. An optional
//! `preset = baseline | appendix` line, which must come first, selects the
//! starting parameter set; every other key overrides it.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{ModelParams, SigmaSpec};
use crate::scheme::BoundaryRule;
use crate::solver::SolveSettings;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub k0: f64,
    pub z0: f64,
    pub t_end: f64,
    pub dt_sim: f64,
    /// Leading fraction of the trajectory ignored by cycle detection.
    pub settle_fraction: f64,
    /// Noise seed; `None` simulates the noiseless dynamics.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureConfig {
    pub t_end: f64,
    pub burn_in: f64,
    pub paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: String,
    pub params: ModelParams,
    pub n: usize,
    pub m: usize,
    pub solve: SolveSettings,
    pub sim: SimConfig,
    pub measure: MeasureConfig,
    /// Worker threads; `None` defers to `SOLVER_THREADS` or the core count.
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn baseline() -> Self {
        Self {
            preset: "baseline".into(),
            params: ModelParams::baseline(),
            n: 100,
            m: 100,
            solve: SolveSettings {
                dt: 1e-3,
                max_iters: 1_000_000,
                ..SolveSettings::default()
            },
            sim: SimConfig {
                k0: 0.0,
                z0: 0.5,
                t_end: 60.0,
                dt_sim: 1e-3,
                settle_fraction: 0.5,
                seed: None,
            },
            measure: MeasureConfig {
                t_end: 2000.0,
                burn_in: 50.0,
                paths: 8,
                seed: 1,
            },
            threads: None,
        }
    }

    pub fn appendix() -> Self {
        Self {
            preset: "appendix".into(),
            params: ModelParams::appendix(),
            ..Self::baseline()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline()),
            "appendix" => Some(Self::appendix()),
            _ => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::baseline();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, found {body:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|s| s == key) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            if key == "preset" {
                if !seen.is_empty() {
                    return Err(Error::Config {
                        line,
                        msg: "`preset` must be the first key".into(),
                    });
                }
                cfg = Self::preset(value).ok_or_else(|| Error::Config {
                    line,
                    msg: format!("unknown preset {value:?} (expected baseline or appendix)"),
                })?;
            } else {
                cfg.set(key, value).map_err(|msg| Error::Config { line, msg })?;
            }
            seen.push(key.to_string());
        }
        cfg.params.validate().map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        cfg.solve.validate().map_err(|e| Error::Config { line: 0, msg: e.to_string() })?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("invalid value {v:?} for `{key}`"))
        }
        fn opt<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<Option<T>, String> {
            if v.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let p = &mut self.params;
        match key {
            "r" => p.r = num(key, value)?,
            "epsilon" => p.epsilon = num(key, value)?,
            "alpha" => p.alpha = num(key, value)?,
            "q_circ" => p.q_circ = num(key, value)?,
            "c" => p.c = num(key, value)?,
            "kappa" => p.kappa = num(key, value)?,
            "lambda_b" => p.lambda_b = num(key, value)?,
            "mu_b" => p.mu_b = num(key, value)?,
            "a_f" => p.a_f = num(key, value)?,
            "nu_z" => p.nu_z = num(key, value)?,
            "k_min" => p.k_min = num(key, value)?,
            "k_max" => p.k_max = num(key, value)?,
            "z_min" => p.z_min = num(key, value)?,
            "z_max" => p.z_max = num(key, value)?,
            "g_coeff" => p.g_coeff = num(key, value)?,
            "g_exponent" => p.g_exponent = num(key, value)?,
            "sigma" => p.sigma_spec = SigmaSpec::parse(value).ok_or_else(|| format!("unsupported sigma {value:?}"))?,
            "b_tilde_width" => p.b_tilde_width = num(key, value)?,
            "b_tilde_amp" => p.b_tilde_amp = num(key, value)?,
            "n" => self.n = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "dt" => self.solve.dt = num(key, value)?,
            "max_iters" => self.solve.max_iters = num(key, value)?,
            "tol_residual" => self.solve.tol_residual = opt(key, value)?,
            "tol_delta" => self.solve.tol_delta = opt(key, value)?,
            "checkpoint_every" => self.solve.checkpoint_every = num(key, value)?,
            "boundary_rule" => {
                self.solve.boundary_rule = BoundaryRule::parse(value).ok_or_else(|| {
                    format!("unknown boundary_rule {value:?} (expected arbitrage_price or own_price)")
                })?
            }
            "k0" => self.sim.k0 = num(key, value)?,
            "z0" => self.sim.z0 = num(key, value)?,
            "t_end" => self.sim.t_end = num(key, value)?,
            "dt_sim" => self.sim.dt_sim = num(key, value)?,
            "settle_fraction" => self.sim.settle_fraction = num(key, value)?,
            "seed" => self.sim.seed = opt(key, value)?,
            "measure_t" => self.measure.t_end = num(key, value)?,
            "burn_in" => self.measure.burn_in = num(key, value)?,
            "paths" => self.measure.paths = num(key, value)?,
            "measure_seed" => self.measure.seed = num(key, value)?,
            "threads" => self.threads = opt(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every key with its effective value; parses back to `self`.
    pub fn to_config_string(&self) -> String {
        fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map_or("none".into(), |x| x.to_string())
        }
        let p = &self.params;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("preset", self.preset.clone());
        for (k, v) in [
            ("r", p.r),
            ("epsilon", p.epsilon),
            ("alpha", p.alpha),
            ("q_circ", p.q_circ),
            ("c", p.c),
            ("kappa", p.kappa),
            ("lambda_b", p.lambda_b),
            ("mu_b", p.mu_b),
            ("a_f", p.a_f),
            ("nu_z", p.nu_z),
            ("k_min", p.k_min),
            ("k_max", p.k_max),
            ("z_min", p.z_min),
            ("z_max", p.z_max),
            ("g_coeff", p.g_coeff),
            ("g_exponent", p.g_exponent),
            ("b_tilde_width", p.b_tilde_width),
            ("b_tilde_amp", p.b_tilde_amp),
        ] {
            put(k, v.to_string());
        }
        put("sigma", p.sigma_spec.name().into());
        put("n", self.n.to_string());
        put("m", self.m.to_string());
        put("dt", self.solve.dt.to_string());
        put("max_iters", self.solve.max_iters.to_string());
        put("tol_residual", opt(&self.solve.tol_residual));
        put("tol_delta", opt(&self.solve.tol_delta));
        put("checkpoint_every", self.solve.checkpoint_every.to_string());
        put("boundary_rule", self.solve.boundary_rule.name().into());
        put("k0", self.sim.k0.to_string());
        put("z0", self.sim.z0.to_string());
        put("t_end", self.sim.t_end.to_string());
        put("dt_sim", self.sim.dt_sim.to_string());
        put("settle_fraction", self.sim.settle_fraction.to_string());
        put("seed", opt(&self.sim.seed));
        put("measure_t", self.measure.t_end.to_string());
        put("burn_in", self.measure.burn_in.to_string());
        put("paths", self.measure.paths.to_string());
        put("measure_seed", self.measure.seed.to_string());
        put("threads", opt(&self.threads));
        s
    }
}
