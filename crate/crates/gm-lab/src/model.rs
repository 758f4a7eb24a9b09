//! Shared data model: validated parameters, uniform grids, fields, and
//! recorded trajectories.
//!
//! The global-existence condition for the exponents,
//! `(p-1)/α < q/(β+1)` and `(p-1)/α < 2/(d+2)`,
//! is computed during validation and stored as `global_ok`. Runs outside the
//! condition are allowed (blow-up studies); invalid data such as `ζ ≤ 0` or
//! `p ≤ 1` is rejected.

use std::fmt;

/// Default sup-norm threshold above which a run is flagged as a blow-up
/// candidate. Far above any bounded-regime dynamics, far below overflow.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A parameter is missing, non-finite, or out of range. Carries the
    /// offending field name.
    InvalidParameter { field: &'static str, message: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidParameter { field, message } => {
                write!(f, "invalid parameter `{field}`: {message}")
            }
        }
    }
}

impl std::error::Error for ModelError {}

/// Raw, unvalidated model parameters as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawModelParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Noise amplitude multiplying `ξ dB` in the inhibitor equation.
    pub sigma: f64,
    /// Initial inhibitor value, must be strictly positive.
    pub zeta: f64,
    /// Spatial dimension. Grids support 1 and 2; the exponent condition may
    /// be evaluated for d = 3 as well.
    pub dim: usize,
    /// Per-axis domain extent.
    pub domain_length: f64,
}

impl Default for RawModelParams {
    /// Canonical globally-existing exponents `p=2, q=1, α=2, β=0` on the
    /// unit interval with `σ = 1`, `ζ = 1`.
    fn default() -> Self {
        RawModelParams {
            p: 2.0,
            q: 1.0,
            alpha: 2.0,
            beta: 0.0,
            sigma: 1.0,
            zeta: 1.0,
            dim: 1,
            domain_length: 1.0,
        }
    }
}

/// Validated model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub dim: usize,
    pub domain_length: f64,
    /// True iff the exponents satisfy the global-existence condition
    /// `(p-1)/α < q/(β+1)` and `(p-1)/α < 2/(d+2)`.
    pub global_ok: bool,
}

fn require_finite(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            message: format!("must be finite, got {value}"),
        })
    }
}

/// Validates raw parameters and computes the `global_ok` flag.
///
/// Rejects `p ≤ 1`, non-positive `q`, `α`, `ζ`, negative `β`, `σ`, and
/// unsupported dimensions. Exponent combinations that merely violate the
/// global-existence condition are *not* an error: they come back with
/// `global_ok = false` so blow-up regimes can be studied.
pub fn validate_params(raw: &RawModelParams) -> Result<ModelParams, ModelError> {
    require_finite("p", raw.p)?;
    require_finite("q", raw.q)?;
    require_finite("alpha", raw.alpha)?;
    require_finite("beta", raw.beta)?;
    require_finite("sigma", raw.sigma)?;
    require_finite("zeta", raw.zeta)?;
    require_finite("domain_length", raw.domain_length)?;

    if raw.p <= 1.0 {
        return Err(ModelError::InvalidParameter {
            field: "p",
            message: format!("must be > 1, got {}", raw.p),
        });
    }
    if raw.q <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "q",
            message: format!("must be > 0, got {}", raw.q),
        });
    }
    if raw.alpha <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "alpha",
            message: format!("must be > 0, got {}", raw.alpha),
        });
    }
    if raw.beta < 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "beta",
            message: format!("must be >= 0, got {}", raw.beta),
        });
    }
    if raw.sigma < 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "sigma",
            message: format!("must be >= 0, got {}", raw.sigma),
        });
    }
    if raw.zeta <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "zeta",
            message: format!("must be > 0, got {}", raw.zeta),
        });
    }
    if raw.dim < 1 || raw.dim > 3 {
        return Err(ModelError::InvalidParameter {
            field: "dim",
            message: format!("must be 1, 2 or 3, got {}", raw.dim),
        });
    }
    if raw.domain_length <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "domain_length",
            message: format!("must be > 0, got {}", raw.domain_length),
        });
    }

    let ratio = (raw.p - 1.0) / raw.alpha;
    let global_ok = ratio < raw.q / (raw.beta + 1.0) && ratio < 2.0 / (raw.dim as f64 + 2.0);

    Ok(ModelParams {
        p: raw.p,
        q: raw.q,
        alpha: raw.alpha,
        beta: raw.beta,
        sigma: raw.sigma,
        zeta: raw.zeta,
        dim: raw.dim,
        domain_length: raw.domain_length,
        global_ok,
    })
}

impl ModelParams {
    /// Midpoint of the admissible interval for the energy-estimate exponent
    /// `ρ`, which must satisfy `(p-1)/α < ρ < min(2/(d+2), q/(1+β))`.
    /// Returns `None` when the interval is empty.
    pub fn default_rho(&self) -> Option<f64> {
        let lo = (self.p - 1.0) / self.alpha;
        let hi = (2.0 / (self.dim as f64 + 2.0)).min(self.q / (1.0 + self.beta));
        if lo < hi {
            Some(0.5 * (lo + hi))
        } else {
            None
        }
    }

    /// Default exponent for the martingale diagnostic `∫ ξ^{-δ} dB`:
    /// `min(0.5, (q - ρ - ρβ)/(2ρ))` with `ρ = default_rho()`, so the energy
    /// estimate's constraint `δ ∈ (0, (q-ρ-ρβ)/ρ)` holds with slack. Falls
    /// back to `0.5` when no admissible `ρ` exists.
    pub fn default_martingale_delta(&self) -> f64 {
        match self.default_rho() {
            Some(rho) => {
                let cap = (self.q - rho - rho * self.beta) / rho;
                if cap > 0.0 {
                    (0.5f64).min(0.5 * cap)
                } else {
                    0.5
                }
            }
            None => 0.5,
        }
    }
}

/// Uniform cell-centered grid on `[0, L]^dim` with reflecting (Neumann)
/// boundaries. Cell `i` is centered at `(i + 1/2) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub dim: usize,
    pub h: f64,
    pub domain_length: f64,
}

/// Builds a uniform cell-centered grid with `n >= 4` cells per axis.
pub fn make_grid(n: usize, dim: usize, length: f64) -> Result<Grid, ModelError> {
    if n < 4 {
        return Err(ModelError::InvalidParameter {
            field: "n",
            message: format!("need at least 4 cells per axis, got {n}"),
        });
    }
    if dim != 1 && dim != 2 {
        return Err(ModelError::InvalidParameter {
            field: "dim",
            message: format!("grids support dim 1 or 2, got {dim}"),
        });
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(ModelError::InvalidParameter {
            field: "length",
            message: format!("must be positive and finite, got {length}"),
        });
    }
    Ok(Grid {
        n,
        dim,
        h: length / n as f64,
        domain_length: length,
    })
}

impl Grid {
    /// Total number of cells (`n` in 1D, `n^2` in 2D).
    pub fn num_cells(&self) -> usize {
        match self.dim {
            1 => self.n,
            _ => self.n * self.n,
        }
    }

    /// Volume of a single cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        match self.dim {
            1 => self.h,
            _ => self.h * self.h,
        }
    }

    /// Measure of the full domain, `L^dim`.
    pub fn domain_volume(&self) -> f64 {
        match self.dim {
            1 => self.domain_length,
            _ => self.domain_length * self.domain_length,
        }
    }

    /// Center coordinate of cell `i` along one axis.
    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }
}

/// A scalar field sampled at cell centers, row-major in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    /// Wraps raw cell values; the length must match the grid.
    pub fn new(values: Vec<f64>, grid: &Grid) -> Result<Self, ModelError> {
        if values.len() != grid.num_cells() {
            return Err(ModelError::InvalidParameter {
                field: "values",
                message: format!(
                    "expected {} cells, got {}",
                    grid.num_cells(),
                    values.len()
                ),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter {
                field: "values",
                message: "field values must be finite".to_string(),
            });
        }
        Ok(Field { values })
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Field {
            values: vec![c; grid.num_cells()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    /// Samples `f(x)` at 1D cell centers.
    pub fn from_fn_1d(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        assert_eq!(grid.dim, 1, "from_fn_1d requires a 1D grid");
        Field {
            values: (0..grid.n).map(|i| f(grid.cell_center(i))).collect(),
        }
    }

    /// Samples `f(x, y)` at 2D cell centers, row-major (`x` fastest).
    pub fn from_fn_2d(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(grid.dim, 2, "from_fn_2d requires a 2D grid");
        let mut values = Vec::with_capacity(grid.n * grid.n);
        for iy in 0..grid.n {
            for ix in 0..grid.n {
                values.push(f(grid.cell_center(ix), grid.cell_center(iy)));
            }
        }
        Field { values }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Field { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Discrete `L^2` norm, `sqrt(Σ u_i^2 h^dim)`.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt()
    }

    /// Discrete `L^ℓ` norm raised to the `ℓ`-th power, `Σ |u_i|^ℓ h^dim`.
    pub fn lp_norm_pow(&self, grid: &Grid, ell: f64) -> f64 {
        self.values.iter().map(|v| v.abs().powf(ell)).sum::<f64>() * grid.cell_volume()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Time series produced by one trajectory integration.
///
/// Scalar diagnostics (`xi`, `mean(u^α)`, `min/max/L² of u`, the martingale
/// `∫ ξ^{-δ} dB`) are recorded at every step; full activator frames are
/// decimated by `save_every`. When a blow-up is detected the series stop at
/// the crossing time, which is kept as the final record.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Step times, `t_k = k dt`, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// Inhibitor value per step time, strictly positive.
    pub xi_series: Vec<f64>,
    /// Normalized spatial mean of `u^α` per step time.
    pub ubar_alpha_series: Vec<f64>,
    /// `min u` per step time.
    pub u_min_series: Vec<f64>,
    /// `max u` per step time.
    pub u_max_series: Vec<f64>,
    /// Discrete `L^2` norm of `u` per step time.
    pub u_l2_series: Vec<f64>,
    /// Running value of the martingale `∫_0^t ξ^{-δ} dB` per step time.
    pub m_delta_series: Vec<f64>,
    /// Exponent `δ` used for `m_delta_series`.
    pub martingale_delta: f64,
    /// Times of the saved activator frames (subset of `times`).
    pub frame_times: Vec<f64>,
    /// Saved activator frames.
    pub u_frames: Vec<Field>,
    /// First time the activator sup-norm crossed the blow-up threshold.
    pub blowup_time: Option<f64>,
}

impl Trajectory {
    /// Number of recorded step times.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least t = 0")
    }

    pub fn final_xi(&self) -> f64 {
        *self.xi_series.last().expect("trajectory has at least t = 0")
    }

    pub fn final_frame(&self) -> &Field {
        self.u_frames.last().expect("trajectory saves the final frame")
    }

    /// Running supremum of the recorded martingale values.
    pub fn m_delta_sup(&self) -> f64 {
        self.m_delta_series.iter().fold(0.0, |m, v| m.max(*v))
    }

    /// Running supremum of the absolute recorded martingale values.
    pub fn m_delta_abs_sup(&self) -> f64 {
        self.m_delta_series.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Checks the structural record invariants; used by tests and after
    /// deserialization-like construction.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let n = self.times.len();
        if self.xi_series.len() != n
            || self.ubar_alpha_series.len() != n
            || self.u_min_series.len() != n
            || self.u_max_series.len() != n
            || self.u_l2_series.len() != n
            || self.m_delta_series.len() != n
        {
            return Err(ModelError::InvalidParameter {
                field: "trajectory",
                message: "diagnostic series lengths differ".to_string(),
            });
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ModelError::InvalidParameter {
                field: "times",
                message: "must be strictly increasing".to_string(),
            });
        }
        if self.xi_series.iter().any(|x| !(*x > 0.0)) {
            return Err(ModelError::InvalidParameter {
                field: "xi_series",
                message: "must be strictly positive".to_string(),
            });
        }
        if let Some(t_star) = self.blowup_time {
            if self.frame_times.iter().any(|t| *t > t_star) {
                return Err(ModelError::InvalidParameter {
                    field: "frame_times",
                    message: "frames past the blow-up time".to_string(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(p: f64, q: f64, alpha: f64, beta: f64, dim: usize) -> RawModelParams {
        RawModelParams {
            p,
            q,
            alpha,
            beta,
            dim,
            ..RawModelParams::default()
        }
    }

    #[test]
    fn canonical_exponents_are_global_in_1d() {
        // (p-1)/α = 1/2 < q/(β+1) = 1 and 1/2 < 2/3.
        let params = validate_params(&raw(2.0, 1.0, 2.0, 0.0, 1)).unwrap();
        assert!(params.global_ok);
    }

    #[test]
    fn canonical_exponents_fail_in_3d() {
        // 1/2 > 2/5.
        let params = validate_params(&raw(2.0, 1.0, 2.0, 0.0, 3)).unwrap();
        assert!(!params.global_ok);
    }

    #[test]
    fn zero_zeta_is_rejected() {
        let mut r = RawModelParams::default();
        r.zeta = 0.0;
        let err = validate_params(&r).unwrap_err();
        match err {
            ModelError::InvalidParameter { field, .. } => assert_eq!(field, "zeta"),
        }
    }

    #[test]
    fn p_at_most_one_is_rejected() {
        let err = validate_params(&raw(1.0, 1.0, 2.0, 0.0, 1)).unwrap_err();
        match err {
            ModelError::InvalidParameter { field, .. } => assert_eq!(field, "p"),
        }
    }

    #[test]
    fn validation_is_idempotent() {
        let r = RawModelParams::default();
        let a = validate_params(&r).unwrap();
        let b = validate_params(&r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_spacing() {
        assert_eq!(make_grid(4, 1, 1.0).unwrap().h, 0.25);
        assert_eq!(make_grid(128, 1, 1.0).unwrap().h, 1.0 / 128.0);
        assert!(make_grid(3, 1, 1.0).is_err());
        // n * h reproduces the length to machine precision.
        let g = make_grid(96, 1, 2.5).unwrap();
        assert!((g.n as f64 * g.h - g.domain_length).abs() < 1e-15);
    }

    #[test]
    fn default_delta_satisfies_energy_constraint() {
        let params = validate_params(&RawModelParams::default()).unwrap();
        let rho = params.default_rho().unwrap();
        let delta = params.default_martingale_delta();
        assert!(rho > (params.p - 1.0) / params.alpha);
        assert!(rho < 2.0 / (params.dim as f64 + 2.0));
        assert!(rho < params.q / (1.0 + params.beta));
        assert!(delta > 0.0);
        assert!(delta < (params.q - rho - rho * params.beta) / rho);
    }

    #[test]
    fn global_ok_is_monotone_in_p_and_alpha() {
        // Decreasing p or increasing α never flips global_ok true -> false.
        use proptest::prelude::*;
        proptest!(|(
            p in 1.01f64..6.0,
            q in 0.1f64..4.0,
            alpha in 0.1f64..6.0,
            beta in 0.0f64..3.0,
            dp in 0.0f64..2.0,
            da in 0.0f64..4.0,
        )| {
            let base = validate_params(&RawModelParams {
                p, q, alpha, beta, ..RawModelParams::default()
            }).unwrap();
            if base.global_ok {
                let moved = validate_params(&RawModelParams {
                    p: (p - dp).max(1.01),
                    q,
                    alpha: alpha + da,
                    beta,
                    ..RawModelParams::default()
                }).unwrap();
                prop_assert!(moved.global_ok);
            }
        });
    }

    #[test]
    fn field_norms() {
        let g = make_grid(8, 1, 1.0).unwrap();
        let f = Field::constant(&g, -2.0);
        assert_eq!(f.sup_norm(), 2.0);
        assert_eq!(f.min(), -2.0);
        assert!((f.l2_norm(&g) - 2.0).abs() < 1e-14);
        assert!(Field::new(vec![f64::NAN; 8], &g).is_err());
        assert!(Field::new(vec![0.0; 7], &g).is_err());
    }
}
