//! Experiment dispatch: builds specs from the config, runs the requested
//! experiment, and writes the manifest plus plot-ready CSV outputs.
//!
//! All floating-point output is printed with 17 significant digits so two
//! runs with identical config and seeds produce byte-identical CSV bodies;
//! the manifest is the only file carrying a timestamp.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use gm_lab::bounds::{
    check_integral_bound, check_xi_bounds, summarize, BoundReport, BoundsError,
    TOL_STRUCTURAL_REL,
};
use gm_lab::ldp::{
    ldp_ladder, minimize_rate, weak_convergence_experiment, Direction, EventSpec, LdpError,
    MinimizeOpts, Observable,
};
use gm_lab::model::{
    make_grid, validate_params, Field, Grid, ModelError, ModelParams, RawModelParams,
};
use gm_lab::paths::{sample_brownian_stream, sup_tail_check, PathError};
use gm_lab::model::BLOWUP_THRESHOLD;
use gm_lab::sim::{
    picard_solve, simulate, sup_distance, write_frames_binary, write_trajectory_csv, SimError,
    SimSpec, Splitting,
};

use crate::config::{ConfigError, Ctx, RawConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Io(std::io::Error),
    Model(ModelError),
    Sim(SimError),
    Ldp(LdpError),
    Bounds(BoundsError),
    Path(PathError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Ldp(e) => write!(f, "{e}"),
            CliError::Bounds(e) => write!(f, "{e}"),
            CliError::Path(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e)
    }
}
impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}
impl From<LdpError> for CliError {
    fn from(e: LdpError) -> Self {
        CliError::Ldp(e)
    }
}
impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::Bounds(e)
    }
}
impl From<PathError> for CliError {
    fn from(e: PathError) -> Self {
        CliError::Path(e)
    }
}

/// Machine contract of a run: the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// All work done, all checks passed.
    Ok,
    /// The experiment ran, but at least one theorem-backed bound check
    /// failed (exit code 2 so CI can gate on it).
    BoundViolation,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::BoundViolation => 2,
        }
    }
}

/// 17-significant-digit float formatting, reproducible byte-for-byte.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

/// Applied command-line overrides.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

struct Shared {
    params: ModelParams,
    grid: Grid,
    v0: Field,
    dt: f64,
    horizon: f64,
    save_every: usize,
    blowup_threshold: f64,
    splitting: Splitting,
    master_seed: u64,
    seed_count: usize,
    out_dir: PathBuf,
}

impl Shared {
    /// Spec skeleton with every shared knob applied; callers attach noise,
    /// controls, or a different initial field.
    fn spec_with_v0(&self, v0: Field) -> Result<SimSpec, CliError> {
        Ok(SimSpec::new(self.params, self.grid, v0, self.dt, self.horizon)?
            .with_save_every(self.save_every)
            .with_blowup_threshold(self.blowup_threshold)
            .with_splitting(self.splitting))
    }

    fn spec(&self) -> Result<SimSpec, CliError> {
        self.spec_with_v0(self.v0.clone())
    }
}

fn shared(ctx: &Ctx, overrides: &Overrides) -> Result<Shared, CliError> {
    if let Some(seed) = overrides.seed {
        ctx.override_value("seeds.master", seed.to_string());
    }
    if let Some(dir) = &overrides.out_dir {
        ctx.override_value("output.dir", dir.display().to_string());
    }
    let raw = RawModelParams {
        p: ctx.get_or("model.p", 2.0)?,
        q: ctx.get_or("model.q", 1.0)?,
        alpha: ctx.get_or("model.alpha", 2.0)?,
        beta: ctx.get_or("model.beta", 0.0)?,
        sigma: ctx.get_or("model.sigma", 1.0)?,
        zeta: ctx.get_or("model.zeta", 1.0)?,
        dim: ctx.get_or("model.dim", 1usize)?,
        domain_length: ctx.get_or("model.length", 1.0)?,
    };
    let params = validate_params(&raw)?;
    let grid = make_grid(ctx.get_or("grid.n", 64usize)?, params.dim, params.domain_length)?;
    let v0_level: f64 = ctx.get_or("sim.v0", 0.0)?;
    if !(v0_level >= 0.0) {
        return Err(ConfigError {
            line: None,
            key: "sim.v0".to_string(),
            message: format!("initial activator level must be >= 0, got {v0_level}"),
        }
        .into());
    }
    let splitting = match ctx.get_or("sim.splitting", "lie".to_string())?.as_str() {
        "lie" => Splitting::Lie,
        "strang" => Splitting::Strang,
        other => {
            return Err(ConfigError {
                line: None,
                key: "sim.splitting".to_string(),
                message: format!("expected `lie` or `strang`, got `{other}`"),
            }
            .into())
        }
    };
    Ok(Shared {
        params,
        grid,
        v0: Field::constant(&grid, v0_level),
        dt: ctx.get_or("sim.dt", 1e-3)?,
        horizon: ctx.get_or("sim.horizon", 1.0)?,
        save_every: ctx.get_or("sim.save_every", 0usize)?,
        blowup_threshold: ctx.get_or("sim.blowup_threshold", BLOWUP_THRESHOLD)?,
        splitting,
        master_seed: ctx.get_or("seeds.master", 0u64)?,
        seed_count: ctx.get_or("seeds.count", 1usize)?,
        out_dir: PathBuf::from(ctx.get_or("output.dir", "gm-lab-out".to_string())?),
    })
}

fn event_spec(ctx: &Ctx) -> Result<EventSpec, CliError> {
    let observable: Observable =
        ctx.require::<String>("event.observable")?
            .parse()
            .map_err(|message| ConfigError {
                line: None,
                key: "event.observable".to_string(),
                message,
            })?;
    let direction: Direction = ctx
        .get_or("event.direction", "geq".to_string())?
        .parse()
        .map_err(|message| ConfigError {
            line: None,
            key: "event.direction".to_string(),
            message,
        })?;
    Ok(EventSpec {
        observable,
        threshold: ctx.require("event.threshold")?,
        direction,
    })
}

fn minimize_opts(ctx: &Ctx) -> Result<(usize, MinimizeOpts), CliError> {
    let defaults = MinimizeOpts::default();
    Ok((
        ctx.get_or("ldp.m", 64usize)?,
        MinimizeOpts {
            mu0: ctx.get_or("ldp.mu0", defaults.mu0)?,
            stages: ctx.get_or("ldp.stages", defaults.stages)?,
            max_iters_per_stage: ctx.get_or("ldp.max_iters", defaults.max_iters_per_stage)?,
            fd_step_rel: ctx.get_or("ldp.fd_step", defaults.fd_step_rel)?,
            grad_tol: ctx.get_or("ldp.grad_tol", defaults.grad_tol)?,
            feasibility_tol: ctx.get_or("ldp.feas_tol", defaults.feasibility_tol)?,
        },
    ))
}

fn write_file(dir: &Path, name: &str, body: &[u8]) -> Result<(), CliError> {
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    experiment: &str,
    resolved: &BTreeMap<String, String>,
) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(&format!("artifact_version = {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("experiment = {experiment}\n"));
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    out.push_str(&format!("generated_at_unix = {stamp}\n"));
    for (key, value) in resolved {
        out.push_str(&format!("{key} = {value}\n"));
    }
    write_file(dir, "manifest.txt", out.as_bytes())
}

/// Parses and runs the config, writing all outputs under the resolved
/// output directory.
pub fn run_config_text(text: &str, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let raw = RawConfig::parse(text)?;
    let ctx = Ctx::new(&raw);
    let experiment: String = ctx.require("experiment")?;

    let status = match experiment.as_str() {
        "simulate" => run_simulate(&ctx, overrides)?,
        "picard-check" => run_picard_check(&ctx, overrides)?,
        "bounds-ensemble" => run_bounds_ensemble(&ctx, overrides)?,
        "blowup-scan" => run_blowup_scan(&ctx, overrides)?,
        "ldp-minimize" => run_ldp_minimize(&ctx, overrides)?,
        "ldp-ladder" => run_ldp_ladder(&ctx, overrides)?,
        "weak-convergence" => run_weak_convergence(&ctx, overrides)?,
        "noise-tail-check" => run_noise_tail_check(&ctx, overrides)?,
        other => {
            return Err(ConfigError {
                line: None,
                key: "experiment".to_string(),
                message: format!(
                    "unknown experiment `{other}` (expected simulate, picard-check, \
                     bounds-ensemble, blowup-scan, ldp-minimize, ldp-ladder, \
                     weak-convergence or noise-tail-check)"
                ),
            }
            .into())
        }
    };
    Ok(status)
}

fn prepare_out(sh: &Shared) -> Result<(), CliError> {
    fs::create_dir_all(&sh.out_dir)?;
    Ok(())
}

fn run_simulate(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let delta: f64 = ctx.get_or("sim.delta", sh.params.default_martingale_delta())?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let mut spec = sh.spec()?.with_martingale_delta(delta);
    if sh.params.sigma > 0.0 {
        let n_steps = spec.n_steps();
        spec = spec.with_noise(sample_brownian_stream(
            n_steps,
            sh.horizon,
            sh.master_seed,
            0,
        )?);
    }
    let traj = simulate(&spec)?;

    let mut csv = Vec::new();
    write_trajectory_csv(&traj, &mut csv)?;
    write_file(&sh.out_dir, "trajectory.csv", &csv)?;
    let mut bin = Vec::new();
    write_frames_binary(&traj, &sh.grid, &mut bin)?;
    write_file(&sh.out_dir, "fields.bin", &bin)?;
    write_manifest(&sh.out_dir, "simulate", &ctx.resolved())?;
    if let Some(t) = traj.blowup_time {
        println!("blow-up flagged at t = {}", fmt_float(t));
    }
    println!(
        "simulate: {} steps, final xi = {}",
        traj.len() - 1,
        fmt_float(traj.final_xi())
    );
    Ok(RunStatus::Ok)
}

fn run_picard_check(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let tol: f64 = ctx.get_or("picard.tol", 1e-10)?;
    let max_iter: usize = ctx.get_or("picard.max_iter", 50usize)?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let mut spec = sh.spec()?.with_save_every(sh.save_every.max(1));
    if sh.params.sigma > 0.0 {
        let n_steps = spec.n_steps();
        spec = spec.with_noise(sample_brownian_stream(
            n_steps,
            sh.horizon,
            sh.master_seed,
            0,
        )?);
    }
    let fixed = picard_solve(&spec, tol, max_iter)?;
    let traj = simulate(&spec)?;
    let distance = sup_distance(&fixed.trajectory, &traj)?;

    let mut csv = String::from("iteration,distance\n");
    for (i, d) in fixed.distances.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, fmt_float(*d)));
    }
    write_file(&sh.out_dir, "picard.csv", csv.as_bytes())?;
    let compare = format!("sup_distance\n{}\n", fmt_float(distance));
    write_file(&sh.out_dir, "compare.csv", compare.as_bytes())?;
    write_manifest(&sh.out_dir, "picard-check", &ctx.resolved())?;
    println!(
        "picard-check: converged in {} sweeps, sup distance to the splitting run = {}",
        fixed.iterations,
        fmt_float(distance)
    );
    Ok(RunStatus::Ok)
}

fn run_bounds_ensemble(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let delta: f64 = ctx.get_or("bounds.delta", 0.5)?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let base = sh.spec()?.with_martingale_delta(delta);
    let n_steps = base.n_steps();
    let unit_sigma = (sh.params.sigma - 1.0).abs() <= 1e-12;

    let reports: Result<Vec<Vec<BoundReport>>, CliError> = (0..sh.seed_count as u64)
        .into_par_iter()
        .map(|stream| {
            let path = sample_brownian_stream(n_steps, sh.horizon, sh.master_seed, stream)?;
            let spec = base.clone().with_noise(path.clone());
            let traj = simulate(&spec)?;
            let mut reports =
                check_xi_bounds(&traj, &path, &sh.params, stream, TOL_STRUCTURAL_REL)?;
            if unit_sigma {
                reports.push(check_integral_bound(&traj, &path, &sh.params, delta, stream)?);
            }
            Ok(reports)
        })
        .collect();
    let reports: Vec<BoundReport> = reports?.into_iter().flatten().collect();
    let summaries = summarize(&reports);

    let mut csv = String::from("name,n_paths,n_pass,worst_margin,dt\n");
    for s in &summaries {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            s.name,
            s.n_paths,
            s.n_pass,
            fmt_float(s.worst_margin),
            fmt_float(sh.dt)
        ));
    }
    write_file(&sh.out_dir, "bounds.csv", csv.as_bytes())?;
    write_manifest(&sh.out_dir, "bounds-ensemble", &ctx.resolved())?;

    let mut all_pass = true;
    for s in &summaries {
        println!(
            "bound {}: {}/{} paths pass, worst margin {}",
            s.name,
            s.n_pass,
            s.n_paths,
            fmt_float(s.worst_margin)
        );
        all_pass &= s.n_pass == s.n_paths;
    }
    Ok(if all_pass {
        RunStatus::Ok
    } else {
        RunStatus::BoundViolation
    })
}

fn run_blowup_scan(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let v0_list: Vec<f64> = ctx.list_or("blowup.v0_list", "1,2,4,8")?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let mut csv = String::from("v0,blowup_time,sup_at_detection\n");
    for &level in &v0_list {
        let mut spec = sh.spec_with_v0(Field::constant(&sh.grid, level))?;
        if sh.params.sigma > 0.0 {
            let n_steps = spec.n_steps();
            spec = spec.with_noise(sample_brownian_stream(
                n_steps,
                sh.horizon,
                sh.master_seed,
                0,
            )?);
        }
        let traj = simulate(&spec)?;
        match gm_lab::sim::detect_blowup(&traj, spec.blowup_threshold) {
            Some((t, sup)) => {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_float(level),
                    fmt_float(t),
                    fmt_float(sup)
                ));
                println!("v0 = {level}: blow-up at t = {}", fmt_float(t));
            }
            None => {
                csv.push_str(&format!("{},,\n", fmt_float(level)));
                println!("v0 = {level}: global on [0, {}]", sh.horizon);
            }
        }
    }
    write_file(&sh.out_dir, "blowup.csv", csv.as_bytes())?;
    write_manifest(&sh.out_dir, "blowup-scan", &ctx.resolved())?;
    Ok(RunStatus::Ok)
}

fn run_ldp_minimize(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let event = event_spec(ctx)?;
    let (m, opts) = minimize_opts(ctx)?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let spec = sh.spec()?.with_sigma(0.0);

    match minimize_rate(&event, &spec, m, &opts) {
        Ok(out) => {
            let r = &out.result;
            let rate_csv = format!(
                "i_star,h_norm,converged,iterations\n{},{},{},{}\n",
                fmt_float(r.i_star),
                fmt_float(r.h_star.h_norm()),
                r.converged,
                r.iterations
            );
            write_file(&sh.out_dir, "rate.csv", rate_csv.as_bytes())?;

            let mut h_csv = String::from("interval,t0,t1,hdot\n");
            for (i, hd) in r.h_star.hdot().iter().enumerate() {
                h_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    i,
                    fmt_float(i as f64 * r.h_star.dt_h()),
                    fmt_float((i + 1) as f64 * r.h_star.dt_h()),
                    fmt_float(*hd)
                ));
            }
            write_file(&sh.out_dir, "hstar.csv", h_csv.as_bytes())?;

            let mut trace_csv = String::from("stage,iteration,mu,objective,rate,gap\n");
            for row in &out.trace {
                trace_csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.stage,
                    row.iteration,
                    fmt_float(row.mu),
                    fmt_float(row.objective),
                    fmt_float(row.rate),
                    fmt_float(row.gap)
                ));
            }
            write_file(&sh.out_dir, "trace.csv", trace_csv.as_bytes())?;
            write_manifest(&sh.out_dir, "ldp-minimize", &ctx.resolved())?;
            println!(
                "ldp-minimize: I* = {} (converged = {}, {} iterations)",
                fmt_float(r.i_star),
                r.converged,
                r.iterations
            );
            Ok(RunStatus::Ok)
        }
        Err(LdpError::Infeasible { gap }) => {
            let rate_csv = format!(
                "i_star,h_norm,converged,iterations\ninf,nan,false,0\n# residual gap = {}\n",
                fmt_float(gap)
            );
            write_file(&sh.out_dir, "rate.csv", rate_csv.as_bytes())?;
            write_manifest(&sh.out_dir, "ldp-minimize", &ctx.resolved())?;
            println!("ldp-minimize: event unreachable, I* = inf (gap {})", fmt_float(gap));
            Ok(RunStatus::Ok)
        }
        Err(e) => Err(e.into()),
    }
}

fn run_ldp_ladder(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let event = event_spec(ctx)?;
    let (m, opts) = minimize_opts(ctx)?;
    let eps_list: Vec<f64> = ctx.list_or("ladder.eps_list", "0.5,0.25,0.125,0.0625")?;
    let n_samples: usize = ctx.get_or("ladder.samples", 100_000usize)?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let base = sh.spec()?;
    let out = ldp_ladder(&event, &base, &eps_list, n_samples, sh.master_seed, m, &opts)?;

    let mut csv = String::from("epsilon,p_hat,ci_halfwidth,neg_eps_log_p,method,i_star\n");
    for row in &out.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_float(row.epsilon),
            fmt_float(row.p_hat),
            fmt_float(row.ci_halfwidth),
            fmt_float(row.neg_eps_log_p),
            row.method,
            fmt_float(out.i_star)
        ));
    }
    write_file(&sh.out_dir, "ladder.csv", csv.as_bytes())?;
    write_manifest(&sh.out_dir, "ldp-ladder", &ctx.resolved())?;
    for row in &out.rows {
        println!(
            "eps = {}: p_hat = {} ({}), -eps log p = {}",
            row.epsilon,
            fmt_float(row.p_hat),
            row.method,
            fmt_float(row.neg_eps_log_p)
        );
    }
    println!("I* = {}", fmt_float(out.i_star));
    Ok(RunStatus::Ok)
}

fn run_weak_convergence(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let freq_list: Vec<u32> = ctx.list_or("weak.freq_list", "1,2,4,8,16,32")?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let spec = sh.spec()?.with_sigma(0.0);
    let rows = weak_convergence_experiment(&spec, &freq_list)?;

    let mut csv = String::from("freq,distance\n");
    for row in &rows {
        csv.push_str(&format!("{},{}\n", row.freq, fmt_float(row.distance)));
        println!("n = {}: d_n = {}", row.freq, fmt_float(row.distance));
    }
    write_file(&sh.out_dir, "weak.csv", csv.as_bytes())?;
    write_manifest(&sh.out_dir, "weak-convergence", &ctx.resolved())?;
    Ok(RunStatus::Ok)
}

fn run_noise_tail_check(ctx: &Ctx, overrides: &Overrides) -> Result<RunStatus, CliError> {
    let sh = shared(ctx, overrides)?;
    let n_paths: usize = ctx.get_or("tail.paths", 100_000usize)?;
    let n_steps: usize = ctx.get_or("tail.steps", 1000usize)?;
    let x_list: Vec<f64> = ctx.list_or("tail.x_list", "0.5,1,1.5,2,2.5")?;
    ctx.reject_unknown()?;
    prepare_out(&sh)?;

    let rows = sup_tail_check(n_paths, n_steps, sh.horizon, &x_list, sh.master_seed)?;

    let mut csv = String::from("x,empirical_tail,bound,std_error,pass\n");
    let mut all_pass = true;
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(row.x),
            fmt_float(row.empirical_tail),
            fmt_float(row.bound),
            fmt_float(row.std_error),
            row.pass
        ));
        println!(
            "x = {}: empirical {} vs bound {} -> {}",
            row.x,
            fmt_float(row.empirical_tail),
            fmt_float(row.bound),
            if row.pass { "pass" } else { "FAIL" }
        );
        all_pass &= row.pass;
    }
    write_file(&sh.out_dir, "tail.csv", csv.as_bytes())?;
    write_manifest(&sh.out_dir, "noise-tail-check", &ctx.resolved())?;
    Ok(if all_pass {
        RunStatus::Ok
    } else {
        RunStatus::BoundViolation
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_the_machine_contract() {
        assert_eq!(RunStatus::Ok.exit_code(), 0);
        assert_eq!(RunStatus::BoundViolation.exit_code(), 2);
    }

    #[test]
    fn float_formatting_is_17_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NAN), "nan");
        let x = 0.1234567890123456789;
        let parsed: f64 = fmt_float(x).parse().unwrap();
        assert_eq!(parsed, x);
    }
}
