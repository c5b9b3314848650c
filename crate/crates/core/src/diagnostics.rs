//! Extension identities, trace inequality, rate fits, the action functional
//! and non-existence certificates.
//!
//! The extension `U(x,t)` of `u` has `Û(ξ,t) = û(ξ) e^{-tσ(ξ)}` with
//! `σ = sqrt(|ξ|² + c²/4)`, so every bulk integral reduces to a weighted
//! Plancherel sum after integrating `e^{-2tσ}` in `t`.

use crate::error::{Error, Result};
use crate::params::{sobolev_critical, PhysicalParams, ReducedParams};
use crate::spectral::{forward, norm_lq, Field};
use crate::symbols::sigma_value;

const EPS: f64 = 1e-300;

/// Bulk integrals of the extension and the boundary mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionWeights {
    pub c: f64,
    /// `∫ c² |∇ₓU|²`.
    pub gradient_x: f64,
    /// `∫ c² |∂ₜU|²`.
    pub gradient_t: f64,
    /// `∫ (c⁴/4) |U|²`.
    pub mass: f64,
    /// `‖U‖₂²` on the half-space.
    pub bulk_l2: f64,
    /// `‖∂ₜU‖₂²` on the half-space.
    pub bulk_dt: f64,
    /// `‖u‖₂²`.
    pub trace_l2: f64,
}

impl ExtensionWeights {
    /// `c ‖u‖₂²`.
    pub fn boundary_mass(&self) -> f64 {
        self.c * self.trace_l2
    }
}

pub fn extension_weights(u: &Field, c: f64) -> ExtensionWeights {
    let grid = *u.grid();
    let xi2 = grid.frequency_norms_sq();
    let sigma: Vec<f64> = xi2.iter().map(|&k2| sigma_value(c, k2.sqrt())).collect();
    let s = forward(u);
    let bulk_l2 = s.weighted_energy(|k| 1.0 / (2.0 * sigma[k]));
    let grad = s.weighted_energy(|k| xi2[k] / (2.0 * sigma[k]));
    let bulk_dt = s.weighted_energy(|k| sigma[k] / 2.0);
    ExtensionWeights {
        c,
        gradient_x: c * c * grad,
        gradient_t: c * c * bulk_dt,
        mass: c.powi(4) / 4.0 * bulk_l2,
        bulk_l2,
        bulk_dt,
        trace_l2: s.weighted_energy(|_| 1.0),
    }
}

/// `c ‖u‖_{p+1}^{p+1}`.
pub fn boundary_power(u: &Field, c: f64, p: f64) -> f64 {
    c * norm_lq(u, p + 1.0).powf(p + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    Nehari,
    Poho1,
    Poho2,
}

impl Identity {
    pub fn label(self) -> &'static str {
        match self {
            Self::Nehari => "Nehari",
            Self::Poho1 => "Poho1",
            Self::Poho2 => "Poho2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityEntry {
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_mismatch: f64,
}

impl IdentityEntry {
    fn new(identity: Identity, lhs: f64, rhs: f64) -> Self {
        Self { identity, lhs, rhs, rel_mismatch: relative_mismatch(lhs, rhs) }
    }
}

pub fn relative_mismatch(lhs: f64, rhs: f64) -> f64 {
    if lhs == rhs {
        return 0.0;
    }
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(EPS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub entries: Vec<IdentityEntry>,
}

impl IdentityReport {
    pub fn max_mismatch(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_mismatch).fold(0.0, f64::max)
    }

    pub fn get(&self, identity: Identity) -> &IdentityEntry {
        self.entries.iter().find(|e| e.identity == identity).expect("all identities are evaluated")
    }
}

/// Both sides of the Nehari and the two Pohozaev identities for the reduced
/// equation (`m = 1/2`, `μ = 1`).
pub fn check_identities(u: &Field, rp: &ReducedParams) -> IdentityReport {
    let c = rp.c_tilde;
    let n = rp.n as f64;
    let p = rp.p;
    let w = extension_weights(u, c);
    let coeff = c * c / 2.0 - 1.0;
    let boundary = w.boundary_mass();
    let power = boundary_power(u, c, p);
    let nehari = IdentityEntry::new(
        Identity::Nehari,
        w.gradient_x + w.gradient_t + w.mass,
        coeff * boundary + power,
    );
    let poho_rhs = coeff * (n / 2.0) * boundary + n / (p + 1.0) * power;
    let poho1 = IdentityEntry::new(
        Identity::Poho1,
        (n - 1.0) / 2.0 * (w.gradient_x + w.gradient_t) + (n + 1.0) / 2.0 * w.mass,
        poho_rhs,
    );
    let poho2 = IdentityEntry::new(
        Identity::Poho2,
        (n - 2.0) / 2.0 * w.gradient_x + n / 2.0 * (w.gradient_t + w.mass),
        poho_rhs,
    );
    IdentityReport { entries: vec![nehari, poho1, poho2] }
}

/// `‖u‖₂² / (2 ‖U‖₂ ‖∂ₜU‖₂)`, at most one.
pub fn trace_inequality_check(u: &Field, c: f64) -> f64 {
    let w = extension_weights(u, c);
    if w.trace_l2 == 0.0 {
        return 0.0;
    }
    w.trace_l2 / (2.0 * w.bulk_l2.sqrt() * w.bulk_dt.sqrt())
}

/// `I_c(u) = ½ Σ (sqrt(c²|ξ|² + m²c⁴) - mc²)|û|² + (μ/2)‖u‖₂² - ‖u‖_{p+1}^{p+1}/(p+1)`.
pub fn action(u: &Field, params: &PhysicalParams) -> f64 {
    let grid = *u.grid();
    let xi2 = grid.frequency_norms_sq();
    let (m, c, mu, p) = (params.m, params.c, params.mu, params.p);
    let rest = m * c * c;
    // sqrt(c²r² + m²c⁴) - mc², rearranged to avoid cancellation
    let kinetic = forward(u).weighted_energy(|k| {
        let a = c * c * xi2[k];
        a / ((a + rest * rest).sqrt() + rest)
    });
    0.5 * kinetic + 0.5 * mu * norm_lq(u, 2.0).powi(2) - norm_lq(u, p + 1.0).powf(p + 1.0) / (p + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// `(c, distance)` sorted by `c`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log distance` against `log c`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 points, got {}", points.len())));
    }
    if let Some(&(c, d)) = points.iter().find(|(c, d)| !(*c > 0.0 && *d > 0.0 && c.is_finite() && d.is_finite())) {
        return Err(Error::DegenerateFit(format!("non-positive point ({c}, {d})")));
    }
    let mut points = points.to_vec();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 {
        return Err(Error::DegenerateFit("zero variance in log c".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit { points, slope, intercept, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `c²/2 <= 1` and `p >= (n+1)/(n-1)`.
    UltraRelativistic,
    /// `c²/2 > 1` and `p >= (n+2)/(n-2)`.
    EnergySupercritical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub regime: Regime,
    pub combined_lhs: f64,
    pub combined_rhs: f64,
    /// `combined_lhs - combined_rhs`; zero (A) or non-positive (B) for a true
    /// solution, strictly positive for any nonzero field.
    pub gap: f64,
    pub conclusion: String,
}

/// Combines the identities so that the coefficient signs force `U = 0`.
///
/// Regime A uses `Poho1 - n/(p+1) Nehari`; every left-hand coefficient is
/// non-negative and the right-hand side is non-positive. Regime B uses
/// `Poho2 - n/(p+1) Nehari` and bounds the boundary term by the trace
/// inequality and Young, leaving the slack
/// `((n-2)/2 - n/(p+1)) ∫c²|∇ₓU|² + (n/2 - n/(p+1))(c² - 1)‖U‖²`.
pub fn nonexistence_certificate(u: &Field, rp: &ReducedParams) -> Result<Certificate> {
    let regime = if rp.in_ultra_relativistic_supercritical_regime() {
        Regime::UltraRelativistic
    } else if rp.in_energy_supercritical_regime() {
        Regime::EnergySupercritical
    } else {
        return Err(Error::Precondition(format!(
            "(n, p, c) = ({}, {}, {}) is in neither non-existence regime",
            rp.n, rp.p, rp.c_tilde
        )));
    };
    let c = rp.c_tilde;
    let n = rp.n as f64;
    let p = rp.p;
    let w = extension_weights(u, c);
    let coeff = c * c / 2.0 - 1.0;
    let k = n / (p + 1.0);
    let (combined_lhs, combined_rhs, fired) = match regime {
        Regime::UltraRelativistic => {
            let lhs = ((n - 1.0) / 2.0 - k) * (w.gradient_x + w.gradient_t) + ((n + 1.0) / 2.0 - k) * w.mass;
            let rhs = coeff * (n / 2.0 - k) * w.boundary_mass();
            let fired = format!(
                "(n-1)/2 - n/(p+1) = {:.6} >= 0, (n+1)/2 - n/(p+1) = {:.6} > 0 and c^2/2 - 1 = {:.6} <= 0",
                (n - 1.0) / 2.0 - k,
                (n + 1.0) / 2.0 - k,
                coeff
            );
            (lhs, rhs, fired)
        }
        Regime::EnergySupercritical => {
            let lhs = ((n - 2.0) / 2.0 - k) * w.gradient_x + (n / 2.0 - k) * (w.gradient_t + w.mass);
            // (c²/2-1) c‖u‖² <= (c²/2-1) 2c‖U‖‖∂ₜU‖ <= c²‖∂ₜU‖² + (c²/2-1)²‖U‖²
            let rhs = (n / 2.0 - k) * (w.gradient_t + coeff * coeff * w.bulk_l2);
            let fired = format!(
                "(n-2)/2 - n/(p+1) = {:.6} >= 0 and c^2 - 1 = {:.6} > 0",
                (n - 2.0) / 2.0 - k,
                c * c - 1.0
            );
            (lhs, rhs, fired)
        }
    };
    let gap = combined_lhs - combined_rhs;
    let conclusion = if w.trace_l2 == 0.0 {
        "vacuously consistent".to_string()
    } else {
        format!("{fired}: forces U = 0, so a nonzero field misses the identity by {gap:.6e}")
    };
    Ok(Certificate { regime, combined_lhs, combined_rhs, gap, conclusion })
}

/// The regime-B slack computed directly from its closed form.
pub fn energy_supercritical_slack(u: &Field, rp: &ReducedParams) -> f64 {
    let n = rp.n as f64;
    let k = n / (rp.p + 1.0);
    let c = rp.c_tilde;
    let w = extension_weights(u, c);
    ((n - 2.0) / 2.0 - k) * w.gradient_x + (n / 2.0 - k) * (c * c - 1.0) * w.bulk_l2
}

/// Sign conditions behind each certificate, for reporting.
pub fn regime_coefficients(rp: &ReducedParams) -> [f64; 3] {
    let n = rp.n as f64;
    let k = n / (rp.p + 1.0);
    let c = rp.c_tilde;
    if rp.p >= sobolev_critical(rp.n) && c * c / 2.0 > 1.0 {
        [(n - 2.0) / 2.0 - k, n / 2.0 - k, c * c - 1.0]
    } else {
        [(n - 1.0) / 2.0 - k, (n + 1.0) / 2.0 - k, c * c / 2.0 - 1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_limit_equation;
    use crate::linsolve::random_band_limited;
    use crate::spectral::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_mode_weights() {
        let grid = Grid::new(1, 32, std::f64::consts::PI).unwrap();
        let c = 3.0;
        // cos(2x): energy split between ±2, ‖u‖₂² = L
        let u = Field::from_fn(grid, |x| (2.0 * x[0]).cos());
        let s = sigma_value(c, 2.0);
        let w = extension_weights(&u, c);
        let l2 = std::f64::consts::PI;
        assert!((w.trace_l2 - l2).abs() < 1e-12);
        assert!((w.bulk_l2 - l2 / (2.0 * s)).abs() < 1e-12);
        assert!((w.gradient_x - c * c * 4.0 * l2 / (2.0 * s)).abs() < 1e-11);
        assert!((w.gradient_t - c * c * s * l2 / 2.0).abs() < 1e-11);
        assert!((w.mass - c.powi(4) / 4.0 * l2 / (2.0 * s)).abs() < 1e-11);
        assert!((trace_inequality_check(&u, c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summand_identity_on_lattice() {
        let grid = Grid::new(2, 32, 5.0).unwrap();
        for c in [2.0, 7.0, 100.0] {
            for k2 in grid.frequency_norms_sq() {
                let s = sigma_value(c, k2.sqrt());
                let lhs = 2.0 * c * c * s * s;
                let rhs = c * c * k2 + c * c * s * s + c.powi(4) / 4.0;
                assert!((lhs - rhs).abs() <= 1e-12 * lhs);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let u = random_band_limited(&grid, 3.0, &mut rng);
            let w = extension_weights(&u, c);
            let xi2 = grid.frequency_norms_sq();
            let direct = forward(&u).weighted_energy(|k| c * (c * c * xi2[k] + c.powi(4) / 4.0).sqrt());
            assert!((w.gradient_x + w.gradient_t + w.mass - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn zero_field() {
        let grid = Grid::new(2, 16, 5.0).unwrap();
        let z = Field::zeros(grid);
        let rp = ReducedParams::new(2, 3.0, 16.0).unwrap();
        let report = check_identities(&z, &rp);
        assert!(report.entries.iter().all(|e| e.lhs == 0.0 && e.rhs == 0.0 && e.rel_mismatch == 0.0));
        assert_eq!(action(&z, &PhysicalParams::from_reduced(&rp)), 0.0);
        assert_eq!(trace_inequality_check(&z, 4.0), 0.0);
        let cert = nonexistence_certificate(&z, &rp.with_c(1.0)).unwrap();
        assert_eq!(cert.conclusion, "vacuously consistent");
        assert_eq!(cert.gap, 0.0);
    }

    #[test]
    fn synthetic_rate_fits() {
        let cs = [8.0, 16.0, 32.0, 64.0];
        let fit = fit_rate(&cs.map(|c| (c, 3.0 / (c * c)))).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_rate(&cs.map(|c| (c, 0.2 / c))).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 0.2f64.ln()).abs() < 1e-12);
        let unsorted = [(32.0, 1.0), (8.0, 2.0), (64.0, 0.5), (16.0, 1.5)];
        assert!(fit_rate(&unsorted).unwrap().points.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(fit_rate(&[(2.0, 1.0); 4]).is_err());
        assert!(fit_rate(&cs.map(|c| (c, 1.0))[..3]).is_err());
    }

    #[test]
    fn trace_ratio_bounded_for_random_fields() {
        let grid = Grid::new(2, 32, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for c in [0.5, 2.0, 16.0] {
            for _ in 0..5 {
                let u = random_band_limited(&grid, 4.0, &mut rng);
                assert!(trace_inequality_check(&u, c) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn limit_ground_state_certificates_and_negative_control() {
        let grid = Grid::new(2, 64, 12.0).unwrap();
        let rp = ReducedParams::new(2, 3.0, 1.0).unwrap();
        let gs = solve_limit_equation(&rp, &grid, 1e-11).unwrap();
        let cert = nonexistence_certificate(&gs.u, &rp).unwrap();
        assert_eq!(cert.regime, Regime::UltraRelativistic);
        assert!(cert.gap > 0.0);
        assert!(cert.combined_rhs <= 0.0);
        assert!(trace_inequality_check(&gs.u, 4.0) < 1.0);
        // u_∞ does not solve the finite-c equation
        let report = check_identities(&gs.u, &rp.with_c(2.0));
        assert!(report.get(Identity::Nehari).rel_mismatch > 1e-3);
        assert!(nonexistence_certificate(&gs.u, &rp.with_c(4.0)).is_err());
    }

    #[test]
    fn energy_supercritical_slack_matches_closed_form() {
        let grid = Grid::new(3, 16, 6.0).unwrap();
        let rp = ReducedParams::new(3, 5.0, 4.0).unwrap();
        let u = Field::from_fn(grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp());
        let cert = nonexistence_certificate(&u, &rp).unwrap();
        assert_eq!(cert.regime, Regime::EnergySupercritical);
        let slack = energy_supercritical_slack(&u, &rp);
        assert!((cert.gap - slack).abs() < 1e-10 * slack);
        assert!(slack > 0.0);
        assert!(regime_coefficients(&rp).iter().all(|&v| v >= 0.0));
    }
}
