//! Positive radial ground state of `-Δu + u = u^p` by Petviashvili's
//! spectral renormalization.

use crate::error::{Error, Result};
use crate::params::ReducedParams;
use crate::spectral::{forward, norm_hs, norm_lq, radial_defect, symmetrize_radial, Field, Grid, Multiplier};
use crate::symbols;

/// Floor applied before `exp(p ln u)`.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Width of the initial Gaussian `A e^{-|x|²/(2 w²)}`.
    pub width: f64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 2000, width: 1.0 }
    }
}

/// Output of the renormalized iteration for `P(D) u = u^p`.
#[derive(Debug, Clone)]
pub struct Renormalized {
    pub u: Field,
    pub iterations: usize,
    /// `‖P(D)u - u^p‖₂`.
    pub residual: f64,
    /// Stabilizing factor `M = ⟨P u, u⟩ / ⟨u^p, u⟩` at exit.
    pub factor: f64,
    pub last_step: f64,
    /// Samples clamped from negative to zero before taking powers.
    pub clamped: usize,
}

fn positive_power(u: &Field, p: f64, clamped: &mut usize) -> Field {
    *clamped += u.values().iter().filter(|&&v| v < 0.0).count();
    u.map(|v| (p * v.max(LOG_FLOOR).ln()).exp())
}

/// `A e^{-|x|²/(2w²)}` with `A` chosen so the Nehari quotient `M(u)` equals one.
pub fn nehari_gaussian(operator: &Multiplier, p: f64, width: f64) -> Field {
    let grid = *operator.grid();
    let g = Field::from_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * width * width)).exp());
    let kinetic = operator.quadratic_form(&g);
    let potential = g.map(|v| v.powf(p + 1.0)).values().iter().sum::<f64>() * grid.cell_volume();
    let amplitude = (kinetic / potential).powf(1.0 / (p - 1.0));
    g.scale(amplitude)
}

fn residual_of(operator: &Multiplier, u: &Field, p: f64) -> Result<f64> {
    let lhs = operator.apply(u)?;
    let mut scratch = 0;
    Ok(norm_lq(&lhs.sub(&positive_power(u, p, &mut scratch)), 2.0))
}

/// Petviashvili iteration `u ← M^γ P(D)^{-1} u^p`, `γ = p/(p-1)`, with
/// symmetrization each step. Stops when `‖Δu‖_∞ < tol` and the residual is
/// below `10 tol max(1, ‖u^p‖₂)`.
pub fn renormalized_iteration(operator: &Multiplier, p: f64, init: Field, opts: &RenormOptions) -> Result<Renormalized> {
    let inverse = operator.recip()?;
    let gamma = p / (p - 1.0);
    let mut u = symmetrize_radial(&init);
    let mut clamped = 0;
    let mut last_step = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        let power = positive_power(&u, p, &mut clamped);
        let denominator = power.dot(&u);
        let numerator = operator.quadratic_form(&u);
        if !(denominator.is_finite() && numerator.is_finite()) || denominator <= 0.0 {
            return Err(Error::Convergence { iterations: iteration, last_change: f64::INFINITY });
        }
        let factor = numerator / denominator;
        let next = symmetrize_radial(&inverse.apply(&power)?.scale(factor.powf(gamma)));
        let peak = next.max_abs();
        if peak < 1e-10 {
            return Err(Error::Collapse { iterations: iteration });
        }
        if !peak.is_finite() {
            return Err(Error::Convergence { iterations: iteration, last_change: f64::INFINITY });
        }
        last_step = next.sub(&u).max_abs();
        u = next;
        if last_step < opts.tol {
            let residual = residual_of(operator, &u, p)?;
            let scale = norm_lq(&power, 2.0).max(1.0);
            if residual < 10.0 * opts.tol * scale {
                return Ok(Renormalized { u, iterations: iteration, residual, factor, last_step, clamped });
            }
        }
    }
    Err(Error::Convergence { iterations: opts.max_iter, last_change: last_step })
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub u: Field,
    pub p: f64,
    /// `‖-Δu + u - u^p‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub factor: f64,
    pub clamped: usize,
}

impl GroundState {
    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `(‖∇u‖₂² + ‖u‖₂², ‖u‖_{p+1}^{p+1})`.
    pub fn nehari_sides(&self) -> (f64, f64) {
        let grid = *self.u.grid();
        let xi2 = grid.frequency_norms_sq();
        let kinetic = forward(&self.u).weighted_energy(|k| 1.0 + xi2[k]);
        let potential = norm_lq(&self.u, self.p + 1.0).powf(self.p + 1.0);
        (kinetic, potential)
    }

    pub fn nehari_mismatch(&self) -> f64 {
        let (a, b) = self.nehari_sides();
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    pub fn radial_defect(&self) -> f64 {
        radial_defect(&self.u)
    }

    pub fn peak(&self) -> f64 {
        self.u.max_abs()
    }

    /// `(s, ‖u‖_{H^s})` for `s = 0..=4`.
    pub fn regularity_report(&self) -> Vec<(f64, f64)> {
        (0..=4).map(|s| (s as f64, norm_hs(&self.u, s as f64))).collect()
    }
}

/// Ground state of `-Δu + u = u^p` on `grid` with default options and tolerance `tol`.
pub fn solve_limit_equation(rp: &ReducedParams, grid: &Grid, tol: f64) -> Result<GroundState> {
    solve_limit_equation_with(rp, grid, &RenormOptions { tol, ..RenormOptions::default() })
}

pub fn solve_limit_equation_with(rp: &ReducedParams, grid: &Grid, opts: &RenormOptions) -> Result<GroundState> {
    if !rp.subcritical_for_construction() {
        return Err(Error::Precondition(format!(
            "p = {} is not below the H^1-critical exponent for n = {}",
            rp.p, rp.n
        )));
    }
    if grid.dim() != rp.n {
        return Err(Error::GridMismatch(format!("grid {} for n = {}", grid, rp.n)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let operator = Multiplier::new(&symbols::p_infty(), grid)?;
    let init = nehari_gaussian(&operator, rp.p, opts.width);
    let out = renormalized_iteration(&operator, rp.p, init, opts)?;
    Ok(GroundState {
        u: out.u,
        p: rp.p,
        residual: out.residual,
        iterations: out.iterations,
        factor: out.factor,
        clamped: out.clamped,
    })
}

/// `((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1)x/2)`, the 1-D ground state.
pub fn soliton_1d(p: f64, x: f64) -> f64 {
    ((p + 1.0) / 2.0).powf(1.0 / (p - 1.0)) * (1.0 / ((p - 1.0) * x / 2.0).cosh()).powf(2.0 / (p - 1.0))
}
