//! Physical parameters `(n, p, m, μ, c)` and the scaling to `m = 1/2, μ = 1`.
//!
//! If `v` solves `P_c̃(D) v = |v|^{p-1} v` then
//! `u(x) = μ^{1/(p-1)} v(sqrt(2mμ) x)` solves the physical equation, with
//! `c̃ = c sqrt(2m/μ)`. In particular `c̃²/2 = mc²/μ`.

use crate::error::{Error, Result};
use crate::spectral::{resample_dilated, Field, Grid};

fn validate_common(n: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension n must be >= 1".into()));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidParameter(format!("p > 1 required, got {p}")));
    }
    Ok(())
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} > 0 required, got {value}")))
    }
}

/// `(n+1)/(n-1)`; infinite for `n = 1`.
pub fn half_wave_critical(n: usize) -> f64 {
    if n <= 1 {
        f64::INFINITY
    } else {
        (n as f64 + 1.0) / (n as f64 - 1.0)
    }
}

/// `(n+2)/(n-2)`; infinite for `n <= 2`.
pub fn sobolev_critical(n: usize) -> f64 {
    if n <= 2 {
        f64::INFINITY
    } else {
        (n as f64 + 2.0) / (n as f64 - 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub n: usize,
    pub p: f64,
    pub m: f64,
    pub mu: f64,
    pub c: f64,
}

impl PhysicalParams {
    pub fn new(n: usize, p: f64, m: f64, mu: f64, c: f64) -> Result<Self> {
        validate_common(n, p)?;
        positive("m", m)?;
        positive("mu", mu)?;
        positive("c", c)?;
        Ok(Self { n, p, m, mu, c })
    }

    /// The reduced problem viewed as a physical one (`m = 1/2`, `μ = 1`).
    pub fn from_reduced(rp: &ReducedParams) -> Self {
        Self { n: rp.n, p: rp.p, m: 0.5, mu: 1.0, c: rp.c_tilde }
    }

    /// True iff `n <= 2`, or `n >= 3` and `p < (n+2)/(n-2)`.
    pub fn subcritical_for_construction(&self) -> bool {
        self.p < sobolev_critical(self.n)
    }

    /// `c̃ = c sqrt(2m/μ)`.
    pub fn reduce(&self) -> ReducedParams {
        ReducedParams { n: self.n, p: self.p, c_tilde: self.c * (2.0 * self.m / self.mu).sqrt() }
    }

    /// `μ^{1/(p-1)}`.
    pub fn amplitude_factor(&self) -> f64 {
        self.mu.powf(1.0 / (self.p - 1.0))
    }

    /// `sqrt(2mμ)`.
    pub fn coordinate_factor(&self) -> f64 {
        (2.0 * self.m * self.mu).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedParams {
    pub n: usize,
    pub p: f64,
    pub c_tilde: f64,
}

impl ReducedParams {
    pub fn new(n: usize, p: f64, c_tilde: f64) -> Result<Self> {
        validate_common(n, p)?;
        positive("c", c_tilde)?;
        Ok(Self { n, p, c_tilde })
    }

    pub fn subcritical_for_construction(&self) -> bool {
        self.p < sobolev_critical(self.n)
    }

    pub fn with_c(&self, c_tilde: f64) -> Self {
        Self { c_tilde, ..*self }
    }

    /// `c̃²/2 <= 1` (i.e. `mc² <= μ`) and `p >= (n+1)/(n-1)`.
    pub fn in_ultra_relativistic_supercritical_regime(&self) -> bool {
        self.n >= 2 && self.c_tilde * self.c_tilde / 2.0 <= 1.0 && self.p >= half_wave_critical(self.n)
    }

    /// `c̃²/2 > 1` and `p >= (n+2)/(n-2)`.
    pub fn in_energy_supercritical_regime(&self) -> bool {
        self.n >= 3 && self.c_tilde * self.c_tilde / 2.0 > 1.0 && self.p >= sobolev_critical(self.n)
    }
}

/// `u(x) = μ^{1/(p-1)} v(sqrt(2mμ) x)` sampled on `target` by trigonometric
/// interpolation of `v`.
pub fn lift_solution(v: &Field, params: &PhysicalParams, target: &Grid) -> Result<Field> {
    if v.grid().dim() != params.n {
        return Err(Error::GridMismatch(format!(
            "field is {}-dimensional, parameters say n = {}",
            v.grid().dim(),
            params.n
        )));
    }
    let dilated = resample_dilated(v, target, params.coordinate_factor())?;
    Ok(dilated.scale(params.amplitude_factor()))
}
