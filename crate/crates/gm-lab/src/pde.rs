//! Spatial discretization of the activator equation.
//!
//! The linear part uses the semigroup `S(t) = e^{(Δ-1)t}` evaluated in the
//! cell-centered cosine basis, which diagonalizes the Neumann Laplacian:
//! mode `k` (per axis) carries the eigenvalue `λ_k = (kπ/L)²` and is damped
//! by `e^{-(1+λ_k)t}`. This makes the mild (Duhamel) form of the equation
//! literal: the activator step is exponential Euler,
//!
//! ```text
//! u' = S(dt) u + (1 - e^{-(1+λ)dt})/(1+λ) * reaction(u, ξ)   (per mode)
//! ```
//!
//! with the reaction `u^p/ξ^q` frozen at the start of the step. Both `S(dt)`
//! and the reaction preserve nonnegativity, so the step does too (up to
//! spectral undershoot on rough data, which is clipped at zero).
//!
//! A second-order finite-difference Neumann Laplacian with reflected ghost
//! cells is provided separately for diagnostics; it is not used by the
//! semigroup.

use std::fmt;

use crate::model::{Field, Grid};

#[derive(Debug, Clone, PartialEq)]
pub enum PdeError {
    /// The inhibitor reached a non-positive value; the reaction `u^p/ξ^q`
    /// is undefined there.
    DegenerateInhibitor { xi: f64 },
}

impl fmt::Display for PdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdeError::DegenerateInhibitor { xi } => {
                write!(f, "degenerate inhibitor: xi = {xi} (must be > 0)")
            }
        }
    }
}

impl std::error::Error for PdeError {}

/// Second-order central-difference Neumann Laplacian with reflected ghost
/// cells. The discrete integral of the result vanishes to roundoff
/// (telescoping fluxes). For data violating the Neumann condition the
/// boundary cells see the reflected ghost value; this is the documented
/// behaviour, not an error.
pub fn laplacian_neumann(u: &Field, grid: &Grid) -> Field {
    let v = u.values();
    let n = grid.n;
    let inv_h2 = 1.0 / (grid.h * grid.h);
    match grid.dim {
        1 => {
            let mut out = vec![0.0; n];
            for i in 0..n {
                let left = if i == 0 { v[0] } else { v[i - 1] };
                let right = if i == n - 1 { v[n - 1] } else { v[i + 1] };
                out[i] = (left - 2.0 * v[i] + right) * inv_h2;
            }
            Field::from_raw(out)
        }
        _ => {
            let mut out = vec![0.0; n * n];
            let idx = |ix: usize, iy: usize| iy * n + ix;
            for iy in 0..n {
                for ix in 0..n {
                    let c = v[idx(ix, iy)];
                    let xl = if ix == 0 { c } else { v[idx(ix - 1, iy)] };
                    let xr = if ix == n - 1 { c } else { v[idx(ix + 1, iy)] };
                    let yl = if iy == 0 { c } else { v[idx(ix, iy - 1)] };
                    let yr = if iy == n - 1 { c } else { v[idx(ix, iy + 1)] };
                    out[idx(ix, iy)] = (xl + xr + yl + yr - 4.0 * c) * inv_h2;
                }
            }
            Field::from_raw(out)
        }
    }
}

/// Elementwise reaction `u^p / ξ^q`. Nonnegative for nonnegative `u`.
pub fn reaction(u: &Field, xi: f64, p: f64, q: f64) -> Result<Field, PdeError> {
    if !(xi > 0.0) {
        return Err(PdeError::DegenerateInhibitor { xi });
    }
    let scale = xi.powf(-q);
    Ok(Field::from_raw(
        u.values().iter().map(|v| v.powf(p) * scale).collect(),
    ))
}

/// Normalized spatial mean `(1/|O|) ∫ u^α dx`, i.e. the plain average of
/// `u_i^α` over the cells. Independent of the domain volume by construction.
pub fn spatial_mean_power(u: &Field, alpha: f64) -> f64 {
    u.values().iter().map(|v| v.powf(alpha)).sum::<f64>() / u.len() as f64
}

/// Precomputed cosine basis and eigenvalues for one grid.
///
/// The transform pair is the unnormalized DCT-II/DCT-III on cell centers:
/// `A_k = Σ_i u_i cos(kπ(i+1/2)/n)` and
/// `u_i = A_0/n + (2/n) Σ_{k>=1} A_k cos(kπ(i+1/2)/n)`, exact to roundoff.
/// All methods take `&self`; a workspace can be shared across workers.
#[derive(Debug, Clone)]
pub struct SpectralWorkspace {
    n: usize,
    dim: usize,
    /// `cos_tab[k * n + i] = cos(kπ(i+1/2)/n)`.
    cos_tab: Vec<f64>,
    /// `λ_k = (kπ/L)²`, nondecreasing, `λ_0 = 0`.
    eigenvalues: Vec<f64>,
}

impl SpectralWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n;
        let mut cos_tab = Vec::with_capacity(n * n);
        for k in 0..n {
            for i in 0..n {
                cos_tab.push((k as f64 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos());
            }
        }
        let eigenvalues = (0..n)
            .map(|k| {
                let w = k as f64 * std::f64::consts::PI / grid.domain_length;
                w * w
            })
            .collect();
        SpectralWorkspace {
            n,
            dim: grid.dim,
            cos_tab,
            eigenvalues,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn forward_1d(&self, src: &[f64], dst: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let row = &self.cos_tab[k * n..(k + 1) * n];
            dst[k] = row.iter().zip(src).map(|(c, u)| c * u).sum();
        }
    }

    fn inverse_1d(&self, coeffs: &[f64], dst: &mut [f64]) {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        for d in dst.iter_mut() {
            *d = coeffs[0] * inv_n;
        }
        for k in 1..n {
            let w = 2.0 * inv_n * coeffs[k];
            if w == 0.0 {
                continue;
            }
            let row = &self.cos_tab[k * n..(k + 1) * n];
            for (d, c) in dst.iter_mut().zip(row) {
                *d += w * c;
            }
        }
    }

    /// Forward cosine transform of a field (per axis in 2D). The result
    /// lives in coefficient space with the same layout as the field.
    fn forward(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        match self.dim {
            1 => {
                let mut out = vec![0.0; n];
                self.forward_1d(u, &mut out);
                out
            }
            _ => {
                let mut out = vec![0.0; n * n];
                let mut scratch = vec![0.0; n];
                // Rows (x-axis).
                for iy in 0..n {
                    self.forward_1d(&u[iy * n..(iy + 1) * n], &mut scratch);
                    out[iy * n..(iy + 1) * n].copy_from_slice(&scratch);
                }
                // Columns (y-axis).
                let mut col = vec![0.0; n];
                for ix in 0..n {
                    for iy in 0..n {
                        col[iy] = out[iy * n + ix];
                    }
                    self.forward_1d(&col, &mut scratch);
                    for iy in 0..n {
                        out[iy * n + ix] = scratch[iy];
                    }
                }
                out
            }
        }
    }

    fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n;
        match self.dim {
            1 => {
                let mut out = vec![0.0; n];
                self.inverse_1d(coeffs, &mut out);
                out
            }
            _ => {
                let mut out = coeffs.to_vec();
                let mut scratch = vec![0.0; n];
                let mut col = vec![0.0; n];
                for ix in 0..n {
                    for iy in 0..n {
                        col[iy] = out[iy * n + ix];
                    }
                    self.inverse_1d(&col, &mut scratch);
                    for iy in 0..n {
                        out[iy * n + ix] = scratch[iy];
                    }
                }
                let mut row = vec![0.0; n];
                for iy in 0..n {
                    row.copy_from_slice(&out[iy * n..(iy + 1) * n]);
                    self.inverse_1d(&row, &mut scratch);
                    out[iy * n..(iy + 1) * n].copy_from_slice(&scratch);
                }
                out
            }
        }
    }

    /// Damping exponent `1 + λ` of the flat-index mode.
    fn mode_mu(&self, flat: usize) -> f64 {
        match self.dim {
            1 => 1.0 + self.eigenvalues[flat],
            _ => {
                let kx = flat % self.n;
                let ky = flat / self.n;
                1.0 + self.eigenvalues[kx] + self.eigenvalues[ky]
            }
        }
    }

    /// Applies `S(t) = e^{(Δ-1)t}`: mode `k` is scaled by `e^{-(1+λ_k)t}`.
    /// Exact for the sampled cosine modes; a sup-norm contraction.
    pub fn semigroup_apply(&self, u: &Field, t: f64) -> Field {
        assert!(t >= 0.0, "semigroup requires t >= 0");
        if t == 0.0 {
            return u.clone();
        }
        let mut coeffs = self.forward(u.values());
        for (flat, c) in coeffs.iter_mut().enumerate() {
            *c *= (-self.mode_mu(flat) * t).exp();
        }
        Field::from_raw(self.inverse(&coeffs))
    }

    /// One exponential-Euler step of the activator equation with the
    /// reaction frozen at the step start:
    ///
    /// ```text
    /// û'_k = e^{-(1+λ_k)dt} û_k + (1 - e^{-(1+λ_k)dt})/(1+λ_k) * r̂_k
    /// ```
    ///
    /// Returns the new field and a saturation flag set when the sup-norm
    /// exceeds `blowup_threshold` (a recorded outcome, not an error).
    pub fn step_u_imex(
        &self,
        u: &Field,
        xi: f64,
        dt: f64,
        p: f64,
        q: f64,
        blowup_threshold: f64,
    ) -> Result<(Field, bool), PdeError> {
        assert!(dt > 0.0, "step requires dt > 0");
        // The zero field is invariant (0^p = 0); skip the transforms.
        if u.values().iter().all(|v| *v == 0.0) {
            return Ok((u.clone(), false));
        }
        let r = reaction(u, xi, p, q)?;
        let mut u_hat = self.forward(u.values());
        let r_hat = self.forward(r.values());
        for flat in 0..u_hat.len() {
            let mu = self.mode_mu(flat);
            let decay = (-mu * dt).exp();
            u_hat[flat] = decay * u_hat[flat] + (1.0 - decay) / mu * r_hat[flat];
        }
        let mut out = self.inverse(&u_hat);
        let mut sup = 0.0f64;
        let mut finite = true;
        for v in out.iter_mut() {
            // Clip spectral undershoot; positivity is structural in the
            // continuum problem.
            if *v < 0.0 {
                *v = 0.0;
            }
            if v.is_finite() {
                sup = sup.max(*v);
            } else {
                finite = false;
            }
        }
        let saturated = !finite || sup > blowup_threshold;
        Ok((Field::from_raw(out), saturated))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_grid, BLOWUP_THRESHOLD};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = make_grid(32, 1, 1.0).unwrap();
        let u = Field::constant(&g, 3.7);
        let lap = laplacian_neumann(&u, &g);
        assert!(lap.sup_norm() < 1e-12);
    }

    #[test]
    fn laplacian_matches_eigenfunction() {
        let g = make_grid(256, 1, 1.0).unwrap();
        let u = Field::from_fn_1d(&g, |x| (PI * x).cos());
        let lap = laplacian_neumann(&u, &g);
        let mut max_err = 0.0f64;
        for (i, l) in lap.values().iter().enumerate() {
            let x = g.cell_center(i);
            max_err = max_err.max((l + PI * PI * (PI * x).cos()).abs());
        }
        assert!(max_err <= 1e-3, "max error {max_err}");
        // Discrete integral of the result is zero to roundoff.
        let integral: f64 = lap.values().iter().sum::<f64>() * g.h;
        assert!(integral.abs() < 1e-10);
    }

    #[test]
    fn laplacian_of_linear_data_reflects_at_boundary() {
        // u(x) = x violates the Neumann condition; the interior second
        // difference is zero while boundary cells see the reflected ghost.
        let g = make_grid(64, 1, 1.0).unwrap();
        let u = Field::from_fn_1d(&g, |x| x);
        let lap = laplacian_neumann(&u, &g);
        for i in 1..g.n - 1 {
            assert!(lap.values()[i].abs() < 1e-9, "interior cell {i}");
        }
        let expect = 1.0 / g.h; // (u[1]-u[0])/h² = h/h²
        assert!((lap.values()[0] - expect).abs() < 1e-6 * expect);
        assert!((lap.values()[g.n - 1] + expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn semigroup_identity_at_zero_time() {
        let g = make_grid(64, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let u = Field::from_fn_1d(&g, |x| x * x - 0.3);
        assert_eq!(ws.semigroup_apply(&u, 0.0), u);
    }

    #[test]
    fn semigroup_on_constant_is_exponential_decay() {
        let g = make_grid(32, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let u = Field::constant(&g, 2.0);
        let s = ws.semigroup_apply(&u, 1.0);
        for v in s.values() {
            assert!((v - 2.0 * (-1.0f64).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn semigroup_matches_eigenfunction_oracle() {
        let g = make_grid(128, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let u = Field::from_fn_1d(&g, |x| (PI * x).cos());
        let s = ws.semigroup_apply(&u, 0.1);
        let factor = (-0.1 * (1.0 + PI * PI)).exp();
        let mut max_err = 0.0f64;
        for (i, v) in s.values().iter().enumerate() {
            let x = g.cell_center(i);
            max_err = max_err.max((v - factor * (PI * x).cos()).abs());
        }
        assert!(max_err < 1e-10, "max error {max_err}");
    }

    #[test]
    fn semigroup_eigenfunction_2d() {
        let g = make_grid(32, 2, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let u = Field::from_fn_2d(&g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos());
        let s = ws.semigroup_apply(&u, 0.05);
        let factor = (-0.05 * (1.0 + PI * PI + 4.0 * PI * PI)).exp();
        let mut max_err = 0.0f64;
        for (i, v) in s.values().iter().enumerate() {
            let x = g.cell_center(i % g.n);
            let y = g.cell_center(i / g.n);
            let expect = factor * (PI * x).cos() * (2.0 * PI * y).cos();
            max_err = max_err.max((v - expect).abs());
        }
        assert!(max_err < 1e-10, "max error {max_err}");
    }

    #[test]
    fn reaction_basics() {
        let g = make_grid(8, 1, 1.0).unwrap();
        let zero = reaction(&Field::zeros(&g), 1.0, 2.0, 1.0).unwrap();
        assert!(zero.sup_norm() == 0.0);
        let one = reaction(&Field::constant(&g, 1.0), 1.0, 3.7, 2.2).unwrap();
        assert!((one.values()[0] - 1.0).abs() < 1e-15);
        let r = reaction(&Field::constant(&g, 2.0), 4.0, 2.0, 1.0).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);
        assert!(reaction(&Field::zeros(&g), 0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn mean_power_examples() {
        let g = make_grid(8, 1, 1.0).unwrap();
        let c = Field::constant(&g, 3.0);
        assert!((spatial_mean_power(&c, 2.5) - 3.0f64.powf(2.5)).abs() < 1e-12);
        assert_eq!(spatial_mean_power(&Field::zeros(&g), 2.0), 0.0);

        let g = make_grid(1024, 1, 1.0).unwrap();
        let u = Field::from_fn_1d(&g, |x| x);
        assert!((spatial_mean_power(&u, 2.0) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn mean_power_normalizes_by_domain_volume() {
        // Same profile on a longer domain: the normalized mean is unchanged.
        let g = make_grid(512, 1, 2.0).unwrap();
        let u = Field::from_fn_1d(&g, |x| x / 2.0);
        assert!((spatial_mean_power(&u, 2.0) - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn zero_field_is_invariant_under_step() {
        let g = make_grid(16, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let (u, sat) = ws
            .step_u_imex(&Field::zeros(&g), 1.0, 1e-3, 2.0, 1.0, BLOWUP_THRESHOLD)
            .unwrap();
        assert!(u.sup_norm() == 0.0);
        assert!(!sat);
    }

    /// Fourth-order scalar reference step for `u' = -u + r` with `r` frozen,
    /// matching the homogeneous mode of the activator step.
    fn rk4_frozen(u0: f64, r: f64, dt: f64) -> f64 {
        let f = |u: f64| -u + r;
        let k1 = f(u0);
        let k2 = f(u0 + 0.5 * dt * k1);
        let k3 = f(u0 + 0.5 * dt * k2);
        let k4 = f(u0 + dt * k3);
        u0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    #[test]
    fn homogeneous_step_solves_frozen_ode_exactly() {
        // With the reaction frozen the homogeneous mode is u' = -u + r; the
        // exponential-Euler step integrates this exactly, so the deviation
        // from the RK4 oracle is the RK4 truncation error, O(dt^5).
        let g = make_grid(16, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let u0 = 0.3f64;
        let xi = 0.8f64;
        let r = u0.powf(2.0) / xi; // p = 2, q = 1
        for dt in [1e-2, 1e-3] {
            let (u1, _) = ws
                .step_u_imex(&Field::constant(&g, u0), xi, dt, 2.0, 1.0, BLOWUP_THRESHOLD)
                .unwrap();
            let oracle = rk4_frozen(u0, r, dt);
            let err = (u1.values()[0] - oracle).abs();
            assert!(err < 1e-2 * dt * dt, "dt={dt}: err={err}");
        }
    }

    /// Fourth-order scalar step for the full nonlinear mode
    /// `u' = -u + u^p/ξ^q` with ξ fixed.
    fn rk4_nonlinear(u0: f64, xi: f64, p: f64, q: f64, dt: f64) -> f64 {
        let f = |u: f64| -u + u.powf(p) / xi.powf(q);
        let k1 = f(u0);
        let k2 = f(u0 + 0.5 * dt * k1);
        let k3 = f(u0 + 0.5 * dt * k2);
        let k4 = f(u0 + dt * k3);
        u0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    #[test]
    fn one_step_consistency_is_second_order() {
        // Against the true nonlinear flow (reaction not frozen) the local
        // error is O(dt²): halving dt cuts it by about four.
        let g = make_grid(16, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let u0 = 0.7f64;
        let xi = 1.3f64;
        let err = |dt: f64| -> f64 {
            let (u1, _) = ws
                .step_u_imex(&Field::constant(&g, u0), xi, dt, 2.0, 1.0, BLOWUP_THRESHOLD)
                .unwrap();
            (u1.values()[0] - rk4_nonlinear(u0, xi, 2.0, 1.0, dt)).abs()
        };
        let e1 = err(2e-2);
        let e2 = err(1e-2);
        let e3 = err(5e-3);
        assert!(e1 / e2 > 3.0 && e2 / e3 > 3.0, "errors {e1} {e2} {e3}");
    }

    #[test]
    fn laplacian_matches_eigenfunction_2d() {
        let g = make_grid(128, 2, 1.0).unwrap();
        let u = Field::from_fn_2d(&g, |x, y| (PI * x).cos() * (PI * y).cos());
        let lap = laplacian_neumann(&u, &g);
        let mut max_err = 0.0f64;
        for (i, l) in lap.values().iter().enumerate() {
            let x = g.cell_center(i % g.n);
            let y = g.cell_center(i / g.n);
            let expect = -2.0 * PI * PI * (PI * x).cos() * (PI * y).cos();
            max_err = max_err.max((l - expect).abs());
        }
        assert!(max_err <= 5e-3, "max error {max_err}");
    }

    #[test]
    fn steady_state_single_step_drift() {
        // (1,1) is a fixed point of the homogeneous flow at p=2, q=1; a
        // single activator step holds it to well below 1e-6 at dt = 1e-3.
        let g = make_grid(16, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let (u1, _) = ws
            .step_u_imex(&Field::constant(&g, 1.0), 1.0, 1e-3, 2.0, 1.0, BLOWUP_THRESHOLD)
            .unwrap();
        assert!((u1.values()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn saturation_flag_on_blowup() {
        let g = make_grid(8, 1, 1.0).unwrap();
        let ws = SpectralWorkspace::new(&g);
        let (_, sat) = ws
            .step_u_imex(&Field::constant(&g, 1e7), 1.0, 1e-3, 5.0, 1.0, BLOWUP_THRESHOLD)
            .unwrap();
        assert!(sat);
    }

    proptest! {
        #[test]
        fn semigroup_contracts_sup_norm(
            seed in 0u64..1000,
            t in 1e-3f64..2.0,
        ) {
            let g = make_grid(64, 1, 1.0).unwrap();
            let ws = SpectralWorkspace::new(&g);
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let vals: Vec<f64> = (0..64).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            }).collect();
            let u = Field::new(vals, &g).unwrap();
            let s = ws.semigroup_apply(&u, t);
            prop_assert!(s.sup_norm() <= u.sup_norm() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn semigroup_composes(
            s in 1e-3f64..0.5,
            t in 1e-3f64..0.5,
        ) {
            let g = make_grid(32, 1, 1.0).unwrap();
            let ws = SpectralWorkspace::new(&g);
            let u = Field::from_fn_1d(&g, |x| 0.5 + 0.3 * (PI * x).cos() + 0.1 * (3.0 * PI * x).cos());
            let once = ws.semigroup_apply(&u, s + t);
            let twice = ws.semigroup_apply(&ws.semigroup_apply(&u, s), t);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn step_preserves_nonnegativity(
            seed in 0u64..500,
            dt in 1e-4f64..0.5,
            xi in 0.05f64..5.0,
        ) {
            let g = make_grid(64, 1, 1.0).unwrap();
            let ws = SpectralWorkspace::new(&g);
            let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let vals: Vec<f64> = (0..64).map(|_| {
                state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0
            }).collect();
            let u = Field::new(vals, &g).unwrap();
            let (next, _) = ws.step_u_imex(&u, xi, dt, 2.0, 1.0, BLOWUP_THRESHOLD).unwrap();
            prop_assert!(next.is_nonnegative());
        }
    }
}
