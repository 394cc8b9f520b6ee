use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cartel_storage::analysis::{
    self, boundary_asymptotics, detect_cycle, extract_policy_with, invariant_measure, phase_summary, policy::shock_jump,
    simulate_trajectory, smooth_ansatz_inconsistency, FeedbackField, MeasureOptions, SimOptions,
};
use cartel_storage::config::RunConfig;
use cartel_storage::io::{self, RunManifest};
use cartel_storage::solver;
use cartel_storage::validation::{self, ValidationOptions};
use cartel_storage::{Error, Grid2D};

#[derive(Parser)]
#[command(name = "cartel-storage", version, about = "Stationary cartel/fringe/storage equilibrium solver")]
struct Cli {
    /// Worker threads (default: SOLVER_THREADS, then the config, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the stationary system and export U, p, q*, drifts and the shock line.
    Solve(SolveArgs),
    /// Simulate a trajectory on solved fields and detect its period.
    Simulate(SimulateArgs),
    /// Estimate the invariant measure of the noisy dynamics.
    Measure(MeasureArgs),
    /// Print the boundary asymptotics and the smooth-ansatz report.
    Asymptotics(AsymptoticsArgs),
    /// Run the oracle and acceptance checks and print a pass/fail table.
    Validate(ValidateArgs),
    /// Write gnuplot scripts for the exported CSV files.
    ExportPlots(ExportArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Configuration file.
    #[arg(value_name = "CONFIG")]
    config_pos: Option<PathBuf>,
    #[arg(long = "config", conflicts_with = "config_pos")]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig, Failure> {
        match self.config.as_ref().or(self.config_pos.as_ref()) {
            Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
            None => Ok(RunConfig::baseline()),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Output directory.
    #[arg(value_name = "OUT")]
    out_pos: Option<PathBuf>,
    #[arg(long = "out", conflicts_with = "out_pos")]
    out: Option<PathBuf>,
    /// Grid intervals as `N,M`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Pseudo-time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Start from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Directory written by `solve`.
    fields: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k0: Option<f64>,
    #[arg(long)]
    z0: Option<f64>,
    /// Simulated years.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long = "dt-sim")]
    dt_sim: Option<f64>,
    /// Noise seed; omit for the noiseless dynamics.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MeasureArgs {
    /// Directory written by `solve`.
    fields: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulated years per path, burn-in included.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long = "burn-in")]
    burn_in: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Fringe output level.
    #[arg(long, default_value_t = 0.5)]
    z: f64,
    /// Also write `asymptotics.json` and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Only the oracle and consistency checks; no equilibrium solves.
    #[arg(long)]
    skip_solve: bool,
    /// Test hook: replace the Godunov flux by a wrong one.
    #[arg(long, hide = true)]
    inject_flux_bug: bool,
}

#[derive(Args)]
struct ExportArgs {
    /// Directory holding the CSV outputs.
    fields: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected N,M")?;
    let n = a.trim().parse().map_err(|_| format!("bad N in {s:?}"))?;
    let m = b.trim().parse().map_err(|_| format!("bad M in {s:?}"))?;
    Ok((n, m))
}

enum Failure {
    /// Exit 2.
    Usage(String),
    /// Exit 1.
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidParams(_) => Failure::Usage(e.to_string()),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = run(cli);
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn setup_threads(flag: Option<usize>, cfg: &RunConfig) -> Result<(), Failure> {
    let env = match std::env::var("SOLVER_THREADS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| Failure::Usage(format!("SOLVER_THREADS={v:?} is not a count")))?),
        Err(_) => None,
    };
    if let Some(n) = flag.or(env).or(cfg.threads) {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match &cli.cmd {
        Cmd::Solve(a) => cmd_solve(a, cli.threads),
        Cmd::Simulate(a) => cmd_simulate(a, cli.threads),
        Cmd::Measure(a) => cmd_measure(a, cli.threads),
        Cmd::Asymptotics(a) => cmd_asymptotics(a),
        Cmd::Validate(a) => cmd_validate(a, cli.threads),
        Cmd::ExportPlots(a) => cmd_export(a),
    }
}

fn apply_overrides(cfg: &mut RunConfig, grid: Option<(usize, usize)>, dt: Option<f64>) -> Result<(), Failure> {
    if let Some((n, m)) = grid {
        cfg.n = n;
        cfg.m = m;
    }
    if let Some(dt) = dt {
        cfg.solve.dt = dt;
    }
    cfg.solve.validate()?;
    Ok(())
}

const FIELD_FILES: [&str; 6] = ["U.csv", "p.csv", "q_star.csv", "drift_k.csv", "drift_z.csv", "shock_locus.csv"];
const CHECKPOINT_FILE: &str = "state.ckpt";

fn cmd_solve(a: &SolveArgs, threads: Option<usize>) -> CmdResult {
    let mut cfg = a.config.load()?;
    apply_overrides(&mut cfg, a.grid, a.dt)?;
    setup_threads(threads, &cfg)?;
    let out = a
        .out
        .as_ref()
        .or(a.out_pos.as_ref())
        .ok_or_else(|| Failure::Usage("solve needs an output directory".into()))?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let params = &cfg.params;
    let grid = Grid2D::new(params, cfg.n, cfg.m)?;
    let (init, start_iter) = match &a.resume {
        Some(path) => {
            let (f, it) = io::read_checkpoint(path)?;
            if !f.matches(&grid) {
                return Err(Failure::Usage(format!(
                    "checkpoint {} has shape {:?}, grid needs {:?}",
                    path.display(),
                    f.shape(),
                    grid.shape()
                )));
            }
            (f, it)
        }
        None => (solver::default_init(params, &grid), 0),
    };
    let t0 = Instant::now();
    let ckpt = out.join(CHECKPOINT_FILE);
    let mut ckpt_err = None;
    let result = solver::solve_stationary_with(params, &grid, init, &cfg.solve, |it, state, res| {
        let (ru, rp) = res.sup_norms();
        log::info!("iteration {}: |R_U| = {ru:.3e}, |R_P| = {rp:.3e}", start_iter + it);
        if it > 0 {
            if let Err(e) = io::write_checkpoint(&ckpt, state, start_iter + it) {
                ckpt_err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = ckpt_err {
        return Err(e.into());
    }
    let (fields, report) = match result {
        Ok(r) => r,
        Err(Error::Diverged {
            iteration,
            i,
            j,
            last_finite,
        }) => {
            io::write_checkpoint(&ckpt, &last_finite, start_iter + iteration)?;
            return Err(Failure::Failed(format!(
                "iteration diverged at step {} (node {i}, {j}); last finite state saved to {}",
                start_iter + iteration,
                ckpt.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    let t_solve = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    io::write_checkpoint(&ckpt, &fields, start_iter + report.iterations)?;
    let policy = extract_policy_with(&fields, &grid, params, cfg.solve.boundary_rule);
    let meta = |name: &str| vec![("field", name.to_string()), ("n", grid.n.to_string()), ("m", grid.m.to_string())];
    io::write_field_csv(&out.join("U.csv"), &grid, &fields.u, &meta("U"))?;
    io::write_field_csv(&out.join("p.csv"), &grid, &fields.p, &meta("p"))?;
    io::write_field_csv(&out.join("q_star.csv"), &grid, &policy.q_star, &meta("q_star"))?;
    io::write_field_csv(&out.join("drift_k.csv"), &grid, &policy.drift_k, &meta("drift_k"))?;
    io::write_field_csv(&out.join("drift_z.csv"), &grid, &policy.drift_z, &meta("drift_z"))?;
    io::write_shock_csv(&out.join("shock_locus.csv"), &policy.shock, &meta("shock_locus"))?;
    let t_export = t1.elapsed().as_secs_f64();

    let count = |v: &[cartel_storage::scheme::BoundaryBranch], b| v.iter().filter(|&&x| x == b).count();
    use cartel_storage::scheme::BoundaryBranch::*;
    let n = grid.n;
    let mut manifest = RunManifest::new("solve", cfg.to_config_string(), [grid.n, grid.m]);
    manifest.settings = serde_json::to_value(&cfg.solve).unwrap_or_default();
    manifest.timings = vec![("solve".into(), t_solve), ("export".into(), t_export)];
    manifest.results = json!({
        "iterations": start_iter + report.iterations,
        "resumed_from": start_iter,
        "residual_u": report.residual_u,
        "residual_p": report.residual_p,
        "converged": report.converged,
        "stop_reason": format!("{:?}", report.stop_reason),
        "kmin_price_controlled": count(&report.branches.kmin, PriceControlled),
        "kmax_price_controlled": count(&report.branches.kmax, PriceControlled),
        "shock_jump_kmin": shock_jump(&policy.q_star, &policy.shock[0], 0, 1),
        "shock_jump_kmax": shock_jump(&policy.q_star, &policy.shock[n], n, 1),
    });
    let mut files: Vec<&str> = FIELD_FILES.to_vec();
    files.push(CHECKPOINT_FILE);
    manifest.add_outputs(out, &files)?;
    manifest.write(out)?;
    println!(
        "solve: {} iterations, residual {:.3e}, {}",
        start_iter + report.iterations,
        report.residual(),
        if report.converged { "converged" } else { "NOT converged" }
    );
    if report.converged {
        Ok(())
    } else {
        Err(Failure::Failed(format!(
            "no convergence within {} iterations (residual {:.3e})",
            cfg.solve.max_iters,
            report.residual()
        )))
    }
}

struct Loaded {
    cfg: RunConfig,
    grid: Grid2D,
    q_star: ndarray::Array2<f64>,
    p: ndarray::Array2<f64>,
}

fn load_fields(dir: &Path) -> Result<Loaded, Failure> {
    let manifest = RunManifest::read(dir).map_err(|e| Failure::Usage(format!("{} is not a solve output: {e}", dir.display())))?;
    let cfg = RunConfig::parse(&manifest.config)?;
    let grid = Grid2D::new(&cfg.params, cfg.n, cfg.m)?;
    let read = |name: &str| -> Result<ndarray::Array2<f64>, Failure> {
        let path = dir.join(name);
        let a = io::read_field_csv(&path).map_err(|e| Failure::Usage(e.to_string()))?;
        if a.dim() != grid.shape() {
            return Err(Failure::Usage(format!("{} has shape {:?}, expected {:?}", path.display(), a.dim(), grid.shape())));
        }
        Ok(a)
    };
    let q_star = read("q_star.csv")?;
    let p = read("p.csv")?;
    Ok(Loaded { cfg, grid, q_star, p })
}

fn cmd_simulate(a: &SimulateArgs, threads: Option<usize>) -> CmdResult {
    let mut ld = load_fields(&a.fields)?;
    setup_threads(threads, &ld.cfg)?;
    let sim = &mut ld.cfg.sim;
    sim.k0 = a.k0.unwrap_or(sim.k0);
    sim.z0 = a.z0.unwrap_or(sim.z0);
    sim.t_end = a.t_end.unwrap_or(sim.t_end);
    sim.dt_sim = a.dt_sim.unwrap_or(sim.dt_sim);
    sim.seed = a.seed.or(sim.seed);
    let sim = ld.cfg.sim.clone();
    let out = a.out.clone().unwrap_or_else(|| a.fields.clone());
    let field = FeedbackField {
        grid: &ld.grid,
        params: &ld.cfg.params,
        q_star: &ld.q_star,
        p: &ld.p,
    };
    let t0 = Instant::now();
    let opts = SimOptions {
        dt: sim.dt_sim,
        t_end: sim.t_end,
        record_every: 1,
        noise_seed: sim.seed,
    };
    let traj = simulate_trajectory(&field, sim.k0, sim.z0, &opts).map_err(|e| Failure::Usage(e.to_string()))?;
    let name = "trajectory.csv";
    io::write_trajectory_csv(&out.join(name), &traj, &[("k0", sim.k0.to_string()), ("z0", sim.z0.to_string())])?;
    let mut results = json!({ "points": traj.points.len() });
    if sim.seed.is_none() {
        let cycle = detect_cycle(&traj, sim.settle_fraction);
        let prm = &ld.cfg.params;
        let min_run = cycle.as_ref().map_or(0.0, |c| 0.02 * c.period);
        let phases = phase_summary(&traj, prm.k_min, prm.k_max, sim.settle_fraction, 0.05, min_run);
        match &cycle {
            Some(c) => println!("period: {:.4} years over {} returns", c.period, c.periods.len()),
            None => println!("period: none (fewer than two returns after settling)"),
        }
        results = json!({
            "points": traj.points.len(),
            "period": cycle.as_ref().map(|c| c.period),
            "periods": cycle.as_ref().map(|c| c.periods.clone()),
            "phase_fractions": phases.fractions,
            "cyclic_order": phases.cyclic_order,
            "beta_price_growth": phases.beta_price_growth,
            "delta_price_slope": phases.delta_price_slope,
        });
    }
    let mut manifest = RunManifest::new("simulate", ld.cfg.to_config_string(), [ld.grid.n, ld.grid.m]);
    manifest.settings = serde_json::to_value(&sim).unwrap_or_default();
    manifest.seeds = sim.seed.into_iter().collect();
    manifest.timings = vec![("simulate".into(), t0.elapsed().as_secs_f64())];
    manifest.results = results;
    manifest.add_outputs(&out, &[name])?;
    manifest.write(&out)?;
    Ok(())
}

fn cmd_measure(a: &MeasureArgs, threads: Option<usize>) -> CmdResult {
    let mut ld = load_fields(&a.fields)?;
    setup_threads(threads, &ld.cfg)?;
    let m = &mut ld.cfg.measure;
    m.t_end = a.t_end.unwrap_or(m.t_end);
    m.burn_in = a.burn_in.unwrap_or(m.burn_in);
    m.seed = a.seed.unwrap_or(m.seed);
    m.paths = a.paths.unwrap_or(m.paths);
    let mc = ld.cfg.measure.clone();
    let sim = ld.cfg.sim.clone();
    let out = a.out.clone().unwrap_or_else(|| a.fields.clone());
    let field = FeedbackField {
        grid: &ld.grid,
        params: &ld.cfg.params,
        q_star: &ld.q_star,
        p: &ld.p,
    };
    let t0 = Instant::now();
    let opts = MeasureOptions {
        dt: sim.dt_sim,
        t_end: mc.t_end,
        burn_in: mc.burn_in,
        seed: mc.seed,
        paths: mc.paths,
        k0: sim.k0,
        z0: sim.z0,
    };
    let hist = invariant_measure(&field, &opts).map_err(|e| Failure::Usage(e.to_string()))?;
    let t_measure = t0.elapsed().as_secs_f64();
    let name = "measure.csv";
    io::write_measure_csv(&out.join(name), &ld.grid, &hist, &[])?;
    let noiseless = simulate_trajectory(
        &field,
        sim.k0,
        sim.z0,
        &SimOptions {
            dt: sim.dt_sim,
            t_end: sim.t_end,
            record_every: 1,
            noise_seed: None,
        },
    )
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let mask = analysis::measure::tube_mask(&ld.grid, &noiseless, sim.settle_fraction, 5);
    let tube = analysis::measure::tube_mass(&hist, &mask);
    let (edge_density, tube_density) = analysis::measure::boundary_and_tube_density(&hist, &mask);
    println!("tube mass {tube:.4}; boundary density {edge_density:.3e} vs tube average {tube_density:.3e}");
    let mut manifest = RunManifest::new("measure", ld.cfg.to_config_string(), [ld.grid.n, ld.grid.m]);
    manifest.settings = serde_json::to_value(&opts).unwrap_or_default();
    manifest.seeds = vec![mc.seed];
    manifest.timings = vec![("measure".into(), t_measure)];
    manifest.results = json!({
        "mass": hist.mass(),
        "samples": hist.samples,
        "tube_mass": tube,
        "boundary_density": edge_density,
        "tube_density": tube_density,
    });
    manifest.add_outputs(&out, &[name])?;
    manifest.write(&out)?;
    Ok(())
}

fn cmd_asymptotics(a: &AsymptoticsArgs) -> CmdResult {
    let cfg = a.config.load()?;
    let params = &cfg.params;
    let data = boundary_asymptotics(params, a.z).map_err(|e| Failure::Usage(e.to_string()))?;
    let smooth = smooth_ansatz_inconsistency(params, a.z);
    let opt = |v: Option<f64>| v.map_or("infeasible".to_string(), |x| format!("{x:.9}"));
    println!("z = {}", data.z);
    println!("V0 = {:.9}", data.v0);
    println!("p0 = {:.9}", data.p0);
    println!("lambda = r V0 / (r p0 + g(k_min)) = {:.9}", data.lambda_ratio);
    println!("x+ = {:.9}", data.x_plus);
    println!("x- = {:.9}", data.x_minus);
    println!("(alpha eps)^2 + alpha eps - 1 = {}", data.uniqueness_margin);
    println!("beta = {}", opt(data.beta));
    println!("gamma = {}", opt(data.gamma));
    println!("exponent n = m = {}", data.exponent);
    match (data.factor_residual(), data.price_order_residual(params)) {
        (Some(f), Some(p)) => println!("root relation residual {f:.3e}, price relation residual {p:.3e}"),
        _ => println!("no admissible singular expansion"),
    }
    for w in &data.warnings {
        println!("warning: {w}");
    }
    println!(
        "regular expansion: V0 = {:.6}, p0 = {:.6}, beta = {:.6}, gamma = {:.6}, first-order residual = {:.6e}",
        smooth.v0, smooth.p0, smooth.beta, smooth.gamma, smooth.residual
    );
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let name = "asymptotics.json";
        let body = serde_json::to_string_pretty(&json!({ "boundary": data, "smooth_ansatz": smooth })).unwrap_or_default();
        fs::write(out.join(name), body + "\n").map_err(|e| Error::io(out.join(name), e))?;
        let mut manifest = RunManifest::new("asymptotics", cfg.to_config_string(), [cfg.n, cfg.m]);
        manifest.settings = json!({ "z": a.z });
        manifest.add_outputs(out, &[name])?;
        manifest.write(out)?;
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, threads: Option<usize>) -> CmdResult {
    let mut cfg = a.config.load()?;
    apply_overrides(&mut cfg, a.grid, a.dt)?;
    setup_threads(threads, &cfg)?;
    let opts = ValidationOptions {
        seed: a.seed,
        solve: !a.skip_solve,
        inject_flux_bug: a.inject_flux_bug,
    };
    let t0 = Instant::now();
    let rows = validation::run(&cfg, &opts);
    let elapsed = t0.elapsed().as_secs_f64();
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in &rows {
        println!("{:<width$}  {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    println!("{} checks, {} failed, {:.1} s", rows.len(), failed, elapsed);
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let name = "validation.json";
        let body = serde_json::to_string_pretty(&rows).unwrap_or_default();
        fs::write(out.join(name), body + "\n").map_err(|e| Error::io(out.join(name), e))?;
        let mut manifest = RunManifest::new("validate", cfg.to_config_string(), [cfg.n, cfg.m]);
        manifest.settings = json!({ "skip_solve": a.skip_solve, "inject_flux_bug": a.inject_flux_bug });
        manifest.seeds = vec![a.seed];
        manifest.timings = vec![("validate".into(), elapsed)];
        manifest.results = json!({ "checks": rows.len(), "failed": failed });
        manifest.add_outputs(out, &[name])?;
        manifest.write(out)?;
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Failed(format!("{failed} validation checks failed")))
    }
}

fn cmd_export(a: &ExportArgs) -> CmdResult {
    let out = a.out.clone().unwrap_or_else(|| a.fields.clone());
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let data = fs::canonicalize(&a.fields).map_err(|e| Error::io(&a.fields, e))?;
    let d = data.display();
    let mut written = Vec::new();
    let mut put = |name: &'static str, body: String| -> Result<(), Failure> {
        fs::write(out.join(name), body).map_err(|e| Error::io(out.join(name), e))?;
        written.push(name);
        Ok(())
    };
    let surface = |csv: &str, title: &str, png: &str| {
        format!(
            "set datafile separator ','\nset terminal pngcairo size 900,700\nset output '{png}'\n\
             set xlabel 'k'\nset ylabel 'z'\nset title '{title}'\nset pm3d map\n\
             splot '{d}/{csv}' using 3:4:5 with pm3d notitle\n"
        )
    };
    put("value.gp", surface("U.csv", "U(k,z)", "value.png"))?;
    put("price.gp", surface("p.csv", "p(k,z)", "price.png"))?;
    put("production.gp", surface("q_star.csv", "q*(k,z)", "production.png"))?;
    put("drift_k.gp", surface("drift_k.csv", "storage drift", "drift_k.png"))?;
    put("drift_z.gp", surface("drift_z.csv", "fringe drift", "drift_z.png"))?;
    put(
        "shock.gp",
        format!(
            "set datafile separator ','\nset terminal pngcairo size 900,700\nset output 'shock.png'\n\
             set xlabel 'k'\nset ylabel 'z'\nset title 'shock line'\n\
             plot '{d}/shock_locus.csv' using 2:3 with linespoints notitle\n"
        ),
    )?;
    put(
        "trajectory.gp",
        format!(
            "set datafile separator ','\nset terminal pngcairo size 1200,500\nset output 'trajectory.png'\n\
             set multiplot layout 1,2\nset xlabel 'k'\nset ylabel 'z'\n\
             plot '{d}/trajectory.csv' using 2:3 with lines notitle\n\
             set xlabel 't (years)'\nset ylabel 'p'\n\
             plot '{d}/trajectory.csv' using 1:4 with lines notitle\nunset multiplot\n"
        ),
    )?;
    put(
        "measure.gp",
        format!(
            "set datafile separator ','\nset terminal pngcairo size 900,700\nset output 'measure.png'\n\
             set xlabel 'k'\nset ylabel 'z'\nset title 'log10 invariant measure'\nset pm3d map\nset cbrange [-8:*]\n\
             splot '{d}/measure.csv' using 1:2:4 with pm3d notitle\n"
        ),
    )?;
    let mut manifest = RunManifest::new("export-plots", String::new(), [0, 0]);
    manifest.settings = json!({ "fields": d.to_string() });
    manifest.add_outputs(&out, &written)?;
    manifest.write(&out)?;
    Ok(())
}
