//! Large-deviation machinery.
//!
//! The small-noise family replaces `σ` by `√ε`; as `ε → 0` the probability
//! of a trajectory event decays like `exp(-I/ε)` where the rate `I` is half
//! the squared Cameron-Martin norm of the cheapest control steering the
//! *skeleton* system (noise replaced by the control) into the event.
//!
//! This module provides the pieces needed to check that picture numerically:
//!
//! - piecewise-constant Cameron-Martin controls and the rate functional
//!   `I(h) = ½ ∫ ḣ²`;
//! - [`minimize_rate`]: penalty-continuation minimization of `I` subject to
//!   the skeleton trajectory meeting an event at equality;
//! - [`mc_tail_probability`]: plain or Girsanov-tilted Monte Carlo estimates
//!   of `P(event)` at fixed `ε`;
//! - [`ldp_ladder`]: the `-ε log p̂` ladder across a decreasing list of `ε`,
//!   with automatic tilting where plain sampling would starve;
//! - [`weak_convergence_experiment`]: skeleton solutions under the weakly
//!   vanishing controls `ḣ_n = sin(2πnt)` collapse onto the uncontrolled
//!   solution.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::model::Trajectory;
use crate::paths::{sample_brownian_stream, BrownianPath};
use crate::pde::spatial_mean_power;
use crate::sim::{simulate, sup_distance, SimError, SimSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum LdpError {
    InvalidParameter { field: &'static str, message: String },
    /// No tried control reaches the event; by convention the rate of an
    /// unreachable event is `+∞`.
    Infeasible { gap: f64 },
    Sim(SimError),
}

impl fmt::Display for LdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LdpError::InvalidParameter { field, message } => {
                write!(f, "invalid parameter `{field}`: {message}")
            }
            LdpError::Infeasible { gap } => write!(
                f,
                "event unreachable by the tried controls (residual gap {gap:.3e}); \
                 the rate is +inf"
            ),
            LdpError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for LdpError {}

impl From<SimError> for LdpError {
    fn from(e: SimError) -> Self {
        LdpError::Sim(e)
    }
}

/// A control with piecewise-constant derivative `ḣ` on uniform subintervals
/// of `[0, horizon]`; `h(0) = 0` and `‖h‖²_H = Σ ḣ_i² Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameronMartinControl {
    hdot: Vec<f64>,
    dt_h: f64,
    /// `prefix[j] = h(j Δ)`, so evaluation is O(1).
    prefix: Vec<f64>,
}

impl CameronMartinControl {
    pub fn new(hdot: Vec<f64>, horizon: f64) -> Result<Self, LdpError> {
        if hdot.is_empty() {
            return Err(LdpError::InvalidParameter {
                field: "hdot",
                message: "need at least one subinterval".to_string(),
            });
        }
        if hdot.iter().any(|v| !v.is_finite()) {
            return Err(LdpError::InvalidParameter {
                field: "hdot",
                message: "values must be finite".to_string(),
            });
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(LdpError::InvalidParameter {
                field: "horizon",
                message: format!("must be positive, got {horizon}"),
            });
        }
        let dt_h = horizon / hdot.len() as f64;
        let mut prefix = Vec::with_capacity(hdot.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &hdot {
            acc += v * dt_h;
            prefix.push(acc);
        }
        Ok(CameronMartinControl {
            hdot,
            dt_h,
            prefix,
        })
    }

    pub fn zero(m: usize, horizon: f64) -> Result<Self, LdpError> {
        CameronMartinControl::new(vec![0.0; m], horizon)
    }

    pub fn constant(hdot: f64, m: usize, horizon: f64) -> Result<Self, LdpError> {
        CameronMartinControl::new(vec![hdot; m], horizon)
    }

    pub fn hdot(&self) -> &[f64] {
        &self.hdot
    }

    pub fn dt_h(&self) -> f64 {
        self.dt_h
    }

    pub fn horizon(&self) -> f64 {
        self.dt_h * self.hdot.len() as f64
    }

    pub fn h_norm_sq(&self) -> f64 {
        self.hdot.iter().map(|v| v * v).sum::<f64>() * self.dt_h
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm_sq().sqrt()
    }

    /// `h(t) = ∫_0^t ḣ`, exact for the piecewise-constant derivative.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let m = self.hdot.len();
        let j = ((t / self.dt_h).floor() as usize).min(m - 1);
        let t_clamped = t.min(self.horizon());
        self.prefix[j] + (t_clamped - j as f64 * self.dt_h) * self.hdot[j]
    }
}

/// Controls the simulator can consume: the Cameron-Martin decision variable
/// or an analytic sinusoid `ḣ(t) = A sin(2πft)` whose increments are
/// integrated exactly (used by the weak-convergence experiment, where
/// `h_n ⇀ 0` with constant norm `A/√2` on the unit horizon).
#[derive(Debug, Clone, PartialEq)]
pub enum ControlLaw {
    PiecewiseConstant(CameronMartinControl),
    Sinusoid { freq: u32, amplitude: f64 },
}

impl ControlLaw {
    /// `h(t)`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            ControlLaw::PiecewiseConstant(c) => c.value(t),
            ControlLaw::Sinusoid { freq, amplitude } => {
                let w = 2.0 * std::f64::consts::PI * *freq as f64;
                amplitude * (1.0 - (w * t).cos()) / w
            }
        }
    }

    /// `h(t1) - h(t0)`, exact for both variants.
    pub fn increment(&self, t0: f64, t1: f64) -> f64 {
        self.value(t1) - self.value(t0)
    }

    /// `‖h‖_H` on `[0, horizon]`.
    pub fn h_norm(&self, horizon: f64) -> f64 {
        match self {
            ControlLaw::PiecewiseConstant(c) => {
                debug_assert!((c.horizon() - horizon).abs() <= 1e-9 * horizon.max(1.0));
                c.h_norm()
            }
            ControlLaw::Sinusoid { freq, amplitude } => {
                let w = 2.0 * std::f64::consts::PI * *freq as f64;
                // ∫_0^T A² sin²(wt) dt = A² (T/2 - sin(2wT)/(4w)).
                (amplitude * amplitude * (0.5 * horizon - (2.0 * w * horizon).sin() / (4.0 * w)))
                    .sqrt()
            }
        }
    }
}

/// Trajectory functionals continuous in the sup-norm, so the large-deviation
/// bounds for closed/open sets apply to the induced events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `ξ(T)`.
    TerminalXi,
    /// Spatial mean of `u(T)`.
    TerminalUMean,
    /// `sup_t ξ(t)` over the recorded steps.
    SupXi,
}

impl Observable {
    pub fn value(&self, traj: &Trajectory) -> f64 {
        match self {
            Observable::TerminalXi => traj.final_xi(),
            Observable::TerminalUMean => spatial_mean_power(traj.final_frame(), 1.0),
            Observable::SupXi => traj.xi_series.iter().fold(f64::MIN, |m, x| m.max(*x)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::TerminalXi => "terminal-xi",
            Observable::TerminalUMean => "terminal-u-mean",
            Observable::SupXi => "sup-xi",
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "terminal-xi" => Ok(Observable::TerminalXi),
            "terminal-u-mean" => Ok(Observable::TerminalUMean),
            "sup-xi" => Ok(Observable::SupXi),
            other => Err(format!(
                "unknown observable `{other}` (expected terminal-xi, terminal-u-mean or sup-xi)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Geq,
    Leq,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Geq => "geq",
            Direction::Leq => "leq",
        })
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "geq" | ">=" => Ok(Direction::Geq),
            "leq" | "<=" => Ok(Direction::Leq),
            other => Err(format!("unknown direction `{other}` (expected geq or leq)")),
        }
    }
}

/// A threshold event on a trajectory observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    pub observable: Observable,
    pub threshold: f64,
    pub direction: Direction,
}

impl EventSpec {
    pub fn satisfied(&self, value: f64) -> bool {
        match self.direction {
            Direction::Geq => value >= self.threshold,
            Direction::Leq => value <= self.threshold,
        }
    }

    /// Signed gap, positive when the event is violated.
    pub fn gap(&self, value: f64) -> f64 {
        match self.direction {
            Direction::Geq => self.threshold - value,
            Direction::Leq => value - self.threshold,
        }
    }
}

/// Rate functional `I(h) = ½ ‖h‖²_H`; nonnegative and 2-homogeneous.
pub fn rate_functional(h: &CameronMartinControl) -> f64 {
    0.5 * h.h_norm_sq()
}

/// Outcome of the constrained rate minimization.
#[derive(Debug, Clone)]
pub struct RateResult {
    pub h_star: CameronMartinControl,
    /// `½ ‖h_star‖²_H`.
    pub i_star: f64,
    pub converged: bool,
    /// Accepted descent iterations across all penalty stages.
    pub iterations: usize,
}

/// One optimizer trace record (per accepted iteration).
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub stage: usize,
    pub iteration: usize,
    pub mu: f64,
    pub objective: f64,
    pub rate: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutput {
    pub result: RateResult,
    pub trace: Vec<TraceRow>,
}

/// Options for [`minimize_rate`].
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOpts {
    /// Initial penalty weight; multiplied by 10 per stage.
    pub mu0: f64,
    pub stages: usize,
    pub max_iters_per_stage: usize,
    /// Relative step for the central finite-difference gradient.
    pub fd_step_rel: f64,
    /// Stop a stage when the gradient inf-norm falls below this.
    pub grad_tol: f64,
    /// Residual event gap (in observable units) accepted as feasible.
    pub feasibility_tol: f64,
}

impl Default for MinimizeOpts {
    fn default() -> Self {
        MinimizeOpts {
            mu0: 10.0,
            stages: 6,
            max_iters_per_stage: 200,
            fd_step_rel: 1e-4,
            grad_tol: 1e-8,
            feasibility_tol: 1e-6,
        }
    }
}

/// Minimizes `½‖h‖²_H` over piecewise-constant controls subject to the
/// skeleton trajectory satisfying `event` (at equality, via quadratic
/// penalty continuation: `½‖h‖² + μ max(0, gap)²` with `μ` raised tenfold
/// per stage). Gradients are central finite differences over the `m`
/// control values; the probes run in parallel.
///
/// The spec must describe skeleton dynamics (`σ = 0`, no noise).
pub fn minimize_rate(
    event: &EventSpec,
    base: &SimSpec,
    m_intervals: usize,
    opts: &MinimizeOpts,
) -> Result<MinimizeOutput, LdpError> {
    if base.params.sigma != 0.0 || base.noise.is_some() {
        return Err(LdpError::InvalidParameter {
            field: "spec",
            message: "rate minimization runs on the skeleton system: set sigma = 0 and no noise"
                .to_string(),
        });
    }
    if m_intervals == 0 {
        return Err(LdpError::InvalidParameter {
            field: "m_intervals",
            message: "need at least one control interval".to_string(),
        });
    }
    let horizon = base.horizon;

    let eval = |hdot: &[f64], mu: f64| -> Result<(f64, f64, f64), LdpError> {
        let control = CameronMartinControl::new(hdot.to_vec(), horizon)?;
        let rate = rate_functional(&control);
        let spec = base.clone().with_control(ControlLaw::PiecewiseConstant(control));
        let traj = simulate(&spec)?;
        let gap = event.gap(event.observable.value(&traj)).max(0.0);
        Ok((rate + mu * gap * gap, rate, gap))
    };

    let gradient = |hdot: &[f64], mu: f64| -> Result<Vec<f64>, LdpError> {
        (0..hdot.len())
            .into_par_iter()
            .map(|i| {
                let step = opts.fd_step_rel * hdot[i].abs().max(1.0);
                let mut plus = hdot.to_vec();
                plus[i] += step;
                let mut minus = hdot.to_vec();
                minus[i] -= step;
                let (fp, _, _) = eval(&plus, mu)?;
                let (fm, _, _) = eval(&minus, mu)?;
                Ok((fp - fm) / (2.0 * step))
            })
            .collect()
    };

    let inf_norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut h = vec![0.0f64; m_intervals];
    let mut trace = Vec::new();
    let mut total_iters = 0usize;
    let mut converged = false;
    let mut mu = opts.mu0;

    for stage in 0..opts.stages {
        mu = opts.mu0 * 10f64.powi(stage as i32);
        let (mut f, mut rate, mut gap) = eval(&h, mu)?;
        let mut g = gradient(&h, mu)?;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut stage_done = false;

        for iter in 0..opts.max_iters_per_stage {
            trace.push(TraceRow {
                stage,
                iteration: iter,
                mu,
                objective: f,
                rate,
                gap,
            });
            let gnorm = inf_norm(&g);
            if gnorm <= opts.grad_tol {
                stage_done = true;
                break;
            }

            // Barzilai-Borwein step with an Armijo backtracking safeguard.
            let mut alpha = match &prev {
                Some((h_prev, g_prev)) => {
                    let s: Vec<f64> = h.iter().zip(h_prev).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g.iter().zip(g_prev).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-300 {
                        (dot(&s, &s) / sy).clamp(1e-12, 1e6)
                    } else {
                        1.0 / gnorm.max(1.0)
                    }
                }
                None => 1.0 / gnorm.max(1.0),
            };

            let gg = dot(&g, &g);
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = h.iter().zip(&g).map(|(x, gi)| x - alpha * gi).collect();
                let (fc, rc, gc) = eval(&cand, mu)?;
                if fc <= f - 1e-4 * alpha * gg {
                    accepted = Some((cand, fc, rc, gc));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((cand, fc, rc, gc)) => {
                    let stalled = f - fc <= 1e-14 * (1.0 + f.abs());
                    prev = Some((std::mem::take(&mut h), g));
                    h = cand;
                    f = fc;
                    rate = rc;
                    gap = gc;
                    total_iters += 1;
                    if stalled {
                        // Progress below finite-difference resolution.
                        stage_done = true;
                        break;
                    }
                    g = gradient(&h, mu)?;
                }
                None => {
                    // Step collapsed below resolution: numerically stationary.
                    stage_done = true;
                    break;
                }
            }
        }
        converged = stage_done;
    }

    let (_, rate, gap) = eval(&h, mu)?;
    if gap > opts.feasibility_tol {
        return Err(LdpError::Infeasible { gap });
    }
    let h_star = CameronMartinControl::new(h, horizon)?;
    debug_assert!((rate - rate_functional(&h_star)).abs() <= 1e-12 * rate.max(1.0));
    Ok(MinimizeOutput {
        result: RateResult {
            i_star: rate_functional(&h_star),
            h_star,
            converged,
            iterations: total_iters,
        },
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMethod {
    Plain,
    Tilted,
}

impl fmt::Display for TailMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailMethod::Plain => "plain",
            TailMethod::Tilted => "tilted",
        })
    }
}

/// One row of the `-ε log p` ladder.
#[derive(Debug, Clone, Copy)]
pub struct LadderRow {
    pub epsilon: f64,
    pub p_hat: f64,
    /// 95% halfwidth: Wilson for plain sampling, normal-theory for the
    /// weighted tilted estimator.
    pub ci_halfwidth: f64,
    /// `-ε log p̂`; `+∞` when no hit was observed.
    pub neg_eps_log_p: f64,
    pub method: TailMethod,
}

const Z95: f64 = 1.959963984540054;

fn wilson_halfwidth(p_hat: f64, n: f64) -> f64 {
    let z2 = Z95 * Z95;
    Z95 * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Monte Carlo estimate of `P(event)` for the small-noise system at `ε`
/// (the run uses `σ = √ε`; the spec's own `σ` is ignored).
///
/// Plain mode counts hits. Tilted mode shifts the driving Brownian motion
/// by `h*/√ε` and reweights each sample by the Girsanov factor
/// `exp(-(1/√ε) ∫ ḣ* dB - ‖h*‖²/(2ε))`, an unbiased estimator whose weights
/// average to one.
pub fn mc_tail_probability(
    event: &EventSpec,
    base: &SimSpec,
    epsilon: f64,
    n_samples: usize,
    seed: u64,
    tilt: Option<&CameronMartinControl>,
) -> Result<LadderRow, LdpError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LdpError::InvalidParameter {
            field: "epsilon",
            message: format!("must be positive, got {epsilon}"),
        });
    }
    if n_samples == 0 {
        return Err(LdpError::InvalidParameter {
            field: "n_samples",
            message: "need at least one sample".to_string(),
        });
    }
    let sqrt_eps = epsilon.sqrt();
    let n_steps = base.n_steps();
    let dt = base.dt;
    let horizon = base.horizon;
    let log_norm_sq = tilt.map(|h| h.h_norm_sq()).unwrap_or(0.0);

    let estimates: Result<Vec<f64>, LdpError> = (0..n_samples as u64)
        .into_par_iter()
        .map(|stream| {
            let raw = sample_brownian_stream(n_steps, horizon, seed, stream)
                .map_err(|e| LdpError::Sim(SimError::Model(e.into())))?;
            let (driving, log_weight) = match tilt {
                None => (raw, 0.0),
                Some(h) => {
                    // Drifted path W = B + h*/√ε and the Girsanov exponent
                    // -(1/√ε) Σ ḣ*(t_k) ΔB_k - ‖h*‖²/(2ε) on the raw increments.
                    let mut ito = 0.0;
                    for k in 0..n_steps {
                        let t0 = k as f64 * dt;
                        let t1 = t0 + dt;
                        let hdot_k = (h.value(t1) - h.value(t0)) / dt;
                        ito += hdot_k * (raw.values()[k + 1] - raw.values()[k]);
                    }
                    let shifted: Vec<f64> = raw
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(k, b)| b + h.value(k as f64 * dt) / sqrt_eps)
                        .collect();
                    (
                        BrownianPath::from_parts(dt, shifted, seed),
                        -ito / sqrt_eps - log_norm_sq / (2.0 * epsilon),
                    )
                }
            };
            let spec = base.clone().with_sigma(sqrt_eps).with_noise(driving);
            let traj = simulate(&spec)?;
            let hit = event.satisfied(event.observable.value(&traj));
            Ok(if hit { log_weight.exp() } else { 0.0 })
        })
        .collect();
    let estimates = estimates?;

    let n = n_samples as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let ci_halfwidth = match tilt {
        None => wilson_halfwidth(mean, n),
        Some(_) => {
            let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
            Z95 * (var / n).sqrt()
        }
    };
    let neg_eps_log_p = if mean > 0.0 {
        -epsilon * mean.ln()
    } else {
        f64::INFINITY
    };
    Ok(LadderRow {
        epsilon,
        p_hat: mean,
        ci_halfwidth,
        neg_eps_log_p,
        method: if tilt.is_some() {
            TailMethod::Tilted
        } else {
            TailMethod::Plain
        },
    })
}

/// Ladder output: one row per `ε` plus the rate minimizer it was compared
/// against.
#[derive(Debug, Clone)]
pub struct LadderOutput {
    pub rows: Vec<LadderRow>,
    pub i_star: f64,
    pub h_star: CameronMartinControl,
}

/// Runs [`mc_tail_probability`] for each `ε` in the (decreasing) list,
/// switching to the tilted estimator whenever the rate prediction
/// `exp(-I*/ε)` falls below `10^-3`. The minimizer runs once on the
/// skeleton version of the spec.
pub fn ldp_ladder(
    event: &EventSpec,
    base: &SimSpec,
    eps_list: &[f64],
    n_samples: usize,
    seed: u64,
    m_intervals: usize,
    opts: &MinimizeOpts,
) -> Result<LadderOutput, LdpError> {
    if eps_list.is_empty() {
        return Err(LdpError::InvalidParameter {
            field: "eps_list",
            message: "need at least one epsilon".to_string(),
        });
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LdpError::InvalidParameter {
            field: "eps_list",
            message: "must be strictly decreasing".to_string(),
        });
    }
    let skeleton = base.clone().with_sigma(0.0);
    let minimized = minimize_rate(event, &skeleton, m_intervals, opts)?;
    let i_star = minimized.result.i_star;
    let h_star = minimized.result.h_star;

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let predicted = (-i_star / eps).exp();
        let tilt = if predicted < 1e-3 { Some(&h_star) } else { None };
        rows.push(mc_tail_probability(
            event, base, eps, n_samples, seed, tilt,
        )?);
    }
    Ok(LadderOutput {
        rows,
        i_star,
        h_star,
    })
}

/// Distance row of the weak-convergence experiment.
#[derive(Debug, Clone, Copy)]
pub struct WeakRow {
    pub freq: u32,
    /// Sup-norm distance between the skeleton solutions under
    /// `ḣ_n = sin(2πnt)` and under `h = 0`.
    pub distance: f64,
}

/// Solves the skeleton system under the oscillating controls
/// `ḣ_n(t) = sin(2πnt)` (constant Cameron-Martin norm `1/√2`, weakly
/// vanishing) and measures the distance to the uncontrolled solution.
pub fn weak_convergence_experiment(
    base: &SimSpec,
    freq_list: &[u32],
) -> Result<Vec<WeakRow>, LdpError> {
    if base.params.sigma != 0.0 || base.noise.is_some() {
        return Err(LdpError::InvalidParameter {
            field: "spec",
            message: "the continuity experiment runs on the skeleton system (sigma = 0)"
                .to_string(),
        });
    }
    let baseline = simulate(base)?;
    freq_list
        .iter()
        .map(|&freq| {
            let spec = base.clone().with_control(ControlLaw::Sinusoid {
                freq,
                amplitude: 1.0,
            });
            let traj = simulate(&spec)?;
            let distance = sup_distance(&traj, &baseline)?;
            Ok(WeakRow { freq, distance })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_grid, validate_params, Field, RawModelParams};
    use crate::paths::normal_sf;
    use proptest::prelude::*;

    fn skeleton_spec(m_grid: usize, dt: f64) -> SimSpec {
        let mut raw = RawModelParams::default();
        raw.sigma = 0.0;
        let params = validate_params(&raw).unwrap();
        let grid = make_grid(m_grid, 1, 1.0).unwrap();
        SimSpec::new(params, grid, Field::zeros(&grid), dt, 1.0).unwrap()
    }

    #[test]
    fn control_evaluation_and_norm() {
        let c = CameronMartinControl::constant(1.0, 64, 1.0).unwrap();
        assert!((c.h_norm_sq() - 1.0).abs() < 1e-14);
        assert!((c.value(0.5) - 0.5).abs() < 1e-14);
        assert!((c.value(1.0) - 1.0).abs() < 1e-14);
        assert_eq!(c.value(0.0), 0.0);
        assert!((rate_functional(&c) - 0.5).abs() < 1e-14);
        assert_eq!(rate_functional(&CameronMartinControl::zero(8, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn rate_of_discretized_sine_matches_integral() {
        // ∫ sin²(2πt) dt = 1/2, so I = 1/4 for the midpoint-sampled control.
        let m = 64;
        let hdot: Vec<f64> = (0..m)
            .map(|i| (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / m as f64).sin())
            .collect();
        let c = CameronMartinControl::new(hdot, 1.0).unwrap();
        assert!((rate_functional(&c) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn sinusoid_control_norm_and_modulus() {
        let law = ControlLaw::Sinusoid {
            freq: 3,
            amplitude: 1.0,
        };
        assert!((law.h_norm(1.0) - 0.5f64.sqrt()).abs() < 1e-12);
        // |h(t) - h(s)| <= ‖h‖_H √(t-s) (Cauchy-Schwarz).
        let norm = law.h_norm(1.0);
        for i in 0..50 {
            for j in (i + 1)..50 {
                let (s, t) = (i as f64 / 50.0, j as f64 / 50.0);
                let dh = (law.value(t) - law.value(s)).abs();
                assert!(dh <= norm * (t - s).sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn minimizer_recovers_analytic_rate() {
        // v0 ≡ 0, ζ = 1: ξ_h(1) = e^{-1+h(1)}; the event ξ(1) >= 1 forces
        // h(1) = 1 and the cheapest control is ḣ ≡ 1, I* = 1/2.
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 1.0,
            direction: Direction::Geq,
        };
        let spec = skeleton_spec(8, 1e-3);
        let out = minimize_rate(&event, &spec, 64, &MinimizeOpts::default()).unwrap();
        let r = &out.result;
        assert!(r.converged);
        assert!((r.i_star - 0.5).abs() <= 1e-4, "I* = {}", r.i_star);
        for v in r.h_star.hdot() {
            assert!((v - 1.0).abs() <= 1e-2, "hdot = {v}");
        }
    }

    #[test]
    fn minimizer_returns_zero_for_satisfied_events() {
        // The uncontrolled skeleton reaches ξ(1) = e^{-1} exactly.
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: (-1.0f64).exp(),
            direction: Direction::Geq,
        };
        let spec = skeleton_spec(8, 1e-3);
        let out = minimize_rate(&event, &spec, 32, &MinimizeOpts::default()).unwrap();
        assert_eq!(out.result.i_star, 0.0);
        assert!(out.result.h_star.hdot().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn minimizer_matches_scalar_reduction_at_higher_threshold() {
        // Event ξ(1) >= a with a = e: h(1) = 1 + ln a = 2, I* = ½·2² = 2.
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: std::f64::consts::E,
            direction: Direction::Geq,
        };
        let spec = skeleton_spec(8, 1e-3);
        let out = minimize_rate(&event, &spec, 64, &MinimizeOpts::default()).unwrap();
        let expect = 0.5 * (1.0 + 1.0f64).powi(2);
        assert!(
            (out.result.i_star - expect).abs() <= 1e-3,
            "I* = {} vs {expect}",
            out.result.i_star
        );
        // Never below the analytic lower bound.
        assert!(out.result.i_star >= expect - 1e-4);
    }

    #[test]
    fn control_grid_refinement_leaves_the_rate_unchanged() {
        // The optimal control is constant here, so doubling the control
        // grid must move I* by less than 1e-3.
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 1.0,
            direction: Direction::Geq,
        };
        let spec = skeleton_spec(8, 1e-2);
        let coarse = minimize_rate(&event, &spec, 64, &MinimizeOpts::default()).unwrap();
        let fine = minimize_rate(&event, &spec, 128, &MinimizeOpts::default()).unwrap();
        assert!(
            (coarse.result.i_star - fine.result.i_star).abs() < 1e-3,
            "I* moved from {} to {}",
            coarse.result.i_star,
            fine.result.i_star
        );
    }

    #[test]
    fn unreachable_event_is_infeasible() {
        // ξ stays strictly positive, so ξ(1) <= 0 is unreachable.
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 0.0,
            direction: Direction::Leq,
        };
        let spec = skeleton_spec(8, 1e-2);
        let opts = MinimizeOpts {
            stages: 3,
            max_iters_per_stage: 40,
            ..MinimizeOpts::default()
        };
        match minimize_rate(&event, &spec, 16, &opts) {
            Err(LdpError::Infeasible { gap }) => assert!(gap > 0.0),
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn plain_tail_matches_gaussian_oracle() {
        // v0 ≡ 0: ξ_ε(1) = exp(-1-ε/2+√εB₁), so P(ξ(1) >= 1) = Φ̄((1+ε/2)/√ε).
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 1.0,
            direction: Direction::Geq,
        };
        let eps = 0.25;
        let spec = skeleton_spec(8, 1e-2);
        let row = mc_tail_probability(&event, &spec, eps, 100_000, 7, None).unwrap();
        let exact = normal_sf((1.0 + eps / 2.0) / eps.sqrt());
        assert!(
            (row.p_hat - exact).abs() <= 3.0 * row.ci_halfwidth,
            "p_hat = {} exact = {exact} ci = {}",
            row.p_hat,
            row.ci_halfwidth
        );
        assert_eq!(row.method, TailMethod::Plain);
    }

    #[test]
    fn tilted_tail_matches_gaussian_oracle() {
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 1.0,
            direction: Direction::Geq,
        };
        let eps = 0.05;
        let spec = skeleton_spec(8, 1e-2);
        let tilt = CameronMartinControl::constant(1.0, 64, 1.0).unwrap();
        let row = mc_tail_probability(&event, &spec, eps, 20_000, 11, Some(&tilt)).unwrap();
        let exact = normal_sf((1.0 + eps / 2.0) / eps.sqrt());
        assert!(
            (row.p_hat - exact).abs() <= 0.1 * exact,
            "p_hat = {} exact = {exact}",
            row.p_hat
        );
        assert_eq!(row.method, TailMethod::Tilted);
    }

    #[test]
    fn girsanov_weights_average_to_one() {
        // Dropping the event indicator, the tilted estimator must have mean
        // one: estimate P(always-true) under the tilt.
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 0.0,
            direction: Direction::Geq, // ξ > 0 always
        };
        let eps = 0.2;
        let spec = skeleton_spec(8, 1e-2);
        let tilt = CameronMartinControl::constant(0.8, 32, 1.0).unwrap();
        let row = mc_tail_probability(&event, &spec, eps, 50_000, 13, Some(&tilt)).unwrap();
        assert!(
            (row.p_hat - 1.0).abs() <= 3.0 * row.ci_halfwidth,
            "weight mean = {} ci = {}",
            row.p_hat,
            row.ci_halfwidth
        );
    }

    #[test]
    fn plain_and_tilted_agree_where_both_feasible() {
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 1.0,
            direction: Direction::Geq,
        };
        let eps = 0.25;
        let spec = skeleton_spec(8, 1e-2);
        let tilt = CameronMartinControl::constant(1.0, 32, 1.0).unwrap();
        let plain = mc_tail_probability(&event, &spec, eps, 200_000, 17, None).unwrap();
        let tilted = mc_tail_probability(&event, &spec, eps, 50_000, 17, Some(&tilt)).unwrap();
        let joint = plain.ci_halfwidth + tilted.ci_halfwidth;
        assert!(
            (plain.p_hat - tilted.p_hat).abs() <= joint,
            "plain {} tilted {} joint ci {joint}",
            plain.p_hat,
            tilted.p_hat
        );
    }

    #[test]
    fn ladder_trends_toward_the_rate() {
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 1.0,
            direction: Direction::Geq,
        };
        let spec = skeleton_spec(8, 1e-2);
        let out = ldp_ladder(
            &event,
            &spec,
            &[0.5, 0.25, 0.125, 0.0625],
            200_000,
            23,
            64,
            &MinimizeOpts::default(),
        )
        .unwrap();
        assert!((out.i_star - 0.5).abs() < 1e-3);
        let v: Vec<f64> = out.rows.iter().map(|r| r.neg_eps_log_p).collect();
        for w in v.windows(2) {
            assert!(w[1] < w[0], "ladder not decreasing: {v:?}");
        }
        assert!(*v.last().unwrap() > out.i_star);
        // Small-ε rows switch to tilting automatically.
        assert_eq!(out.rows[0].method, TailMethod::Plain);
        assert_eq!(out.rows[3].method, TailMethod::Tilted);
    }

    #[test]
    fn zero_rate_event_has_vanishing_ladder() {
        // Event satisfied by the uncontrolled skeleton: I* = 0 and
        // -ε log p̂ -> 0 (p̂ -> 1).
        let event = EventSpec {
            observable: Observable::TerminalXi,
            threshold: 0.5 * (-1.0f64).exp(),
            direction: Direction::Geq,
        };
        let spec = skeleton_spec(8, 1e-2);
        let out = ldp_ladder(
            &event,
            &spec,
            &[0.25, 0.125],
            20_000,
            29,
            32,
            &MinimizeOpts::default(),
        )
        .unwrap();
        assert_eq!(out.i_star, 0.0);
        assert!(out.rows[1].neg_eps_log_p < out.rows[0].neg_eps_log_p);
        for r in &out.rows {
            assert!(r.neg_eps_log_p < 0.05, "row {r:?}");
        }
        assert!(out.rows[1].neg_eps_log_p < 0.01);
    }

    #[test]
    fn weak_convergence_distances_match_closed_form() {
        // v0 ≡ 0: ξ under ḣ_n = sin(2πnt) is ζ e^{-t + (1-cos 2πnt)/(2πn)},
        // so d_n = sup_t ζ e^{-t}(e^{h_n(t)} - 1), bounded by ζ(e^{1/(πn)}-1).
        let spec = skeleton_spec(8, 1e-3);
        let rows = weak_convergence_experiment(&spec, &[1, 2, 4, 8, 16, 32]).unwrap();
        let zeta = 1.0;
        for row in &rows {
            assert!(row.distance > 0.0);
            let envelope = zeta * ((1.0 / (std::f64::consts::PI * row.freq as f64)).exp() - 1.0);
            assert!(
                row.distance <= envelope + 1e-10,
                "d_{} = {} exceeds envelope {envelope}",
                row.freq,
                row.distance
            );
            // Exact closed form at the recorded times.
            let w = 2.0 * std::f64::consts::PI * row.freq as f64;
            let mut exact = 0.0f64;
            let steps = 1000;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let h = (1.0 - (w * t).cos()) / w;
                exact = exact.max(zeta * (-t).exp() * (h.exp() - 1.0));
            }
            assert!(
                (row.distance - exact).abs() <= 1e-10,
                "d_{} = {} vs exact {exact}",
                row.freq,
                row.distance
            );
        }
        // Distances decrease; by n = 32 they are an order of magnitude down.
        for w in rows.windows(2) {
            assert!(w[1].distance < w[0].distance * 1.05);
        }
        assert!(rows[5].distance <= rows[0].distance / 10.0);
    }

    proptest! {
        #[test]
        fn rate_functional_is_two_homogeneous(
            c in -3.0f64..3.0,
            vals in proptest::collection::vec(-2.0f64..2.0, 4..32),
        ) {
            let horizon = 1.0;
            let h = CameronMartinControl::new(vals.clone(), horizon).unwrap();
            let scaled = CameronMartinControl::new(
                vals.iter().map(|v| c * v).collect(),
                horizon,
            ).unwrap();
            let lhs = rate_functional(&scaled);
            let rhs = c * c * rate_functional(&h);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            prop_assert!(lhs >= 0.0);
        }
    }
}
