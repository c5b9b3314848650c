//! The linearized operator `L_{c;∞} = P_c(D) - p u_∞^{p-1}` and its inverse.
//!
//! Inversion uses the factorization `L = {Id - V P_c(D)^{-1}} P_c(D)` with
//! `V = p u_∞^{p-1}`: GMRES solves `(Id - V P_c^{-1}) v = f` and the answer is
//! `w = P_c^{-1} v`. Every Krylov vector is symmetrized, which removes the
//! translation modes `∂_i u_∞` that sit in the kernel of `L_∞` on a
//! Cartesian grid.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ground_state::GroundState;
use crate::krylov::{gmres, GmresOptions};
use crate::params::ReducedParams;
use crate::spectral::{
    inverse_complex, norm_lq, norm_w1q, norm_w2q, radial_defect, symmetrize_radial, symmetry, Field, Grid, Multiplier,
    SpectralField,
};
use crate::symbols;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinSolveOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub stagnation_window: usize,
    /// Smallest admissible `c`.
    pub c_floor: f64,
    /// Project Krylov vectors onto symmetric fields. Turning this off is only
    /// meaningful for probing the kernel.
    pub symmetrize: bool,
}

impl Default for LinSolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, restart: 50, max_iter: 500, stagnation_window: 50, c_floor: 2.0, symmetrize: true }
    }
}

/// Threshold on `‖f - sym(f)‖_∞ / ‖f‖_∞` for right-hand sides.
pub const RADIAL_RHS_TOL: f64 = 1e-8;

/// The principal symbol of the operator: `P_c` or its limit `P_∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Finite(f64),
    Limit,
}

#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    p: f64,
    speed: Speed,
    potential: Field,
    symbol: Multiplier,
    symbol_inv: Multiplier,
    opts: LinSolveOptions,
}

#[derive(Debug, Clone)]
pub struct Inversion {
    pub w: Field,
    pub iterations: usize,
    /// `‖L w - f‖₂ / ‖f‖₂`, recomputed from `w`.
    pub residual: f64,
}

impl LinearizedOperator {
    pub fn new(rp: &ReducedParams, gs: &GroundState, opts: LinSolveOptions) -> Result<Self> {
        let c = rp.c_tilde;
        if c < opts.c_floor {
            return Err(Error::Precondition(format!("c = {c} below the configured floor {}", opts.c_floor)));
        }
        Self::build(rp.p, Speed::Finite(c), gs, opts)
    }

    /// `L_∞ = P_∞(D) - p u_∞^{p-1}`.
    pub fn limit(gs: &GroundState, opts: LinSolveOptions) -> Result<Self> {
        Self::build(gs.p, Speed::Limit, gs, opts)
    }

    fn build(p: f64, speed: Speed, gs: &GroundState, opts: LinSolveOptions) -> Result<Self> {
        let grid = *gs.grid();
        let symbol = match speed {
            Speed::Finite(c) => Multiplier::new(&symbols::p_c(c), &grid)?,
            Speed::Limit => Multiplier::new(&symbols::p_infty(), &grid)?,
        };
        let symbol_inv = symbol.recip()?;
        let potential = gs.u.map(|v| p * v.max(0.0).powf(p - 1.0));
        Ok(Self { p, speed, potential, symbol, symbol_inv, opts })
    }

    pub fn speed(&self) -> Speed {
        self.speed
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn symbol(&self) -> &Multiplier {
        &self.symbol
    }

    pub fn symbol_inverse(&self) -> &Multiplier {
        &self.symbol_inv
    }

    pub fn options(&self) -> &LinSolveOptions {
        &self.opts
    }

    /// `P_c(D) w - V w`.
    pub fn apply(&self, w: &Field) -> Result<Field> {
        w.check_grid(&self.potential)?;
        let head = self.symbol.apply(w)?;
        Ok(head.sub(&w.zip_map(&self.potential, |x, v| x * v)))
    }

    /// Solves `L w = f` to relative residual `tol`.
    pub fn invert(&self, f: &Field) -> Result<Inversion> {
        f.check_grid(&self.potential)?;
        let grid = *self.grid();
        let scale = f.max_abs();
        if scale == 0.0 {
            return Ok(Inversion { w: Field::zeros(grid), iterations: 0, residual: 0.0 });
        }
        if self.opts.symmetrize {
            let defect = radial_defect(f) / scale;
            if defect > RADIAL_RHS_TOL {
                return Err(Error::NotRadial { defect });
            }
        }
        let gm = GmresOptions {
            tol: self.opts.tol,
            restart: self.opts.restart,
            max_iter: self.opts.max_iter,
            stagnation_window: self.opts.stagnation_window,
        };
        let potential = self.potential.values();
        let apply = |x: &[f64], out: &mut [f64]| {
            let field = Field::from_vec_unchecked(grid, x.to_vec());
            let smoothed = self.symbol_inv.apply(&field).expect("radial symbol keeps fields real");
            for ((o, xi), (s, v)) in out.iter_mut().zip(x).zip(smoothed.values().iter().zip(potential)) {
                *o = xi - v * s;
            }
        };
        let symmetrize = self.opts.symmetrize;
        let project = |x: &mut [f64]| {
            if symmetrize {
                symmetry::symmetrize_in_place(&grid, x);
            }
        };
        let rhs = if symmetrize { symmetrize_radial(f) } else { f.clone() };
        let outcome = gmres(apply, project, rhs.values(), &gm)?;
        let v = Field::from_vec_unchecked(grid, outcome.x);
        let mut w = self.symbol_inv.apply(&v)?;
        if symmetrize {
            w = symmetrize_radial(&w);
        }
        let residual = norm_lq(&self.apply(&w)?.sub(f), 2.0) / norm_lq(f, 2.0);
        Ok(Inversion { w, iterations: outcome.iterations, residual })
    }
}

/// Observed suprema from [`operator_norm_probe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormProbe {
    pub c: f64,
    pub q: f64,
    /// `sup ‖f‖_{W^{1,q}} / ‖P_c f‖_q`.
    pub lower: f64,
    /// `sup ‖P_c f‖_q / ‖f‖_{W^{2,q}}`.
    pub upper: f64,
    /// `sup c² ‖(P_∞^{-1} - P_c^{-1}) f‖_q / ‖f‖_q`.
    pub inverse_difference: f64,
}

/// Real random field whose spectrum is supported in `|ξ| <= band`.
pub fn random_band_limited(grid: &Grid, band: f64, rng: &mut impl Rng) -> Field {
    let xi2 = grid.frequency_norms_sq();
    let coeffs: Vec<Complex64> = xi2
        .iter()
        .map(|&k2| {
            if k2 <= band * band {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let s = SpectralField::new(*grid, coeffs).expect("table has grid length");
    Field::from_vec_unchecked(*grid, inverse_complex(&s).into_iter().map(|c| c.re).collect())
}

/// `cos(ξ₀ x₁)` with `ξ₀ = (π/L) k`.
pub fn single_mode(grid: &Grid, k: usize) -> Field {
    let xi = std::f64::consts::PI * k as f64 / grid.half_width();
    Field::from_fn(*grid, |x| (xi * x[0]).cos())
}

/// `max_ξ c² |a(ξ)|` over the dual lattice.
pub fn lattice_sup_scaled_inverse_difference(c: f64, grid: &Grid) -> f64 {
    grid.frequency_norms_sq()
        .iter()
        .map(|&k2| c * c * symbols::inverse_difference_value(c, k2.sqrt()).abs())
        .fold(0.0, f64::max)
}

/// Ratios for one test field.
pub fn norm_ratios(c: f64, q: f64, f: &Field) -> Result<(f64, f64, f64)> {
    let grid = *f.grid();
    let pc = Multiplier::new(&symbols::p_c(c), &grid)?;
    let a = Multiplier::new(&symbols::inverse_difference(c), &grid)?;
    let pcf = pc.apply(f)?;
    let pc_norm = norm_lq(&pcf, q);
    let lower = norm_w1q(f, q) / pc_norm;
    let upper = pc_norm / norm_w2q(f, q);
    let diff = c * c * norm_lq(&a.apply(f)?, q) / norm_lq(f, q);
    Ok((lower, upper, diff))
}

/// Empirical operator norms over `trials` random fields band-limited to `|ξ| <= band`.
pub fn operator_norm_probe(c: f64, q: f64, trials: usize, grid: &Grid, band: f64, seed: u64) -> Result<NormProbe> {
    if !(2.0..f64::INFINITY).contains(&q) {
        return Err(Error::Precondition(format!("norm probe needs 2 <= q < inf, got {q}")));
    }
    if trials == 0 {
        return Err(Error::Precondition("norm probe needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = NormProbe { c, q, lower: 0.0, upper: 0.0, inverse_difference: 0.0 };
    for _ in 0..trials {
        let f = random_band_limited(grid, band, &mut rng);
        let (lower, upper, diff) = norm_ratios(c, q, &f)?;
        probe.lower = probe.lower.max(lower);
        probe.upper = probe.upper.max(upper);
        probe.inverse_difference = probe.inverse_difference.max(diff);
    }
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_limit_equation;
    use crate::spectral::gradient;

    fn ground_state_2d() -> GroundState {
        let rp = ReducedParams::new(2, 3.0, 8.0).unwrap();
        let grid = Grid::new(2, 128, 12.0).unwrap();
        solve_limit_equation(&rp, &grid, 1e-11).unwrap()
    }

    fn random_radial(grid: &Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = random_band_limited(grid, 3.0, &mut rng);
        let envelope = Field::from_fn(*grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / 8.0).exp());
        symmetrize_radial(&noise.zip_map(&envelope, |a, b| a * b))
    }

    #[test]
    fn apply_cases() {
        let gs = ground_state_2d();
        let rp = ReducedParams::new(2, 3.0, 8.0).unwrap();
        let op = LinearizedOperator::new(&rp, &gs, LinSolveOptions::default()).unwrap();
        assert_eq!(op.apply(&Field::zeros(*gs.grid())).unwrap().max_abs(), 0.0);

        // L_∞ u_∞ = (1 - p) u_∞^p
        let limit = LinearizedOperator::limit(&gs, LinSolveOptions::default()).unwrap();
        let expected = gs.u.map(|v| (1.0 - 3.0) * v.powi(3));
        assert!(limit.apply(&gs.u).unwrap().sub(&expected).max_abs() < 1e-8);

        let g = random_radial(gs.grid(), 2);
        let out = op.apply(&g).unwrap();
        assert!(radial_defect(&out) < 1e-12 * out.max_abs().max(1.0));
        assert!(op.potential().values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn invert_roundtrip() {
        let gs = ground_state_2d();
        for c in [4.0, 16.0] {
            let rp = ReducedParams::new(2, 3.0, c).unwrap();
            let op = LinearizedOperator::new(&rp, &gs, LinSolveOptions::default()).unwrap();
            for seed in 0..3 {
                let g = random_radial(gs.grid(), seed);
                let f = op.apply(&g).unwrap();
                let inv = op.invert(&f).unwrap();
                assert!(inv.residual < 1e-10);
                assert!(norm_lq(&inv.w.sub(&g), 2.0) < 1e-9 * norm_lq(&g, 2.0));
            }
        }
    }

    #[test]
    fn limit_operator_inverse_consistency() {
        let gs = ground_state_2d();
        let limit = LinearizedOperator::limit(&gs, LinSolveOptions::default()).unwrap();
        let inv = limit.invert(&gs.u).unwrap();
        let back = limit.apply(&inv.w).unwrap();
        assert!(norm_lq(&back.sub(&gs.u), 2.0) < 1e-9 * norm_lq(&gs.u, 2.0));
    }

    #[test]
    fn translation_mode_breaks_unsymmetrized_inversion() {
        let gs = ground_state_2d();
        let opts = LinSolveOptions { symmetrize: false, max_iter: 300, ..LinSolveOptions::default() };
        let limit = LinearizedOperator::limit(&gs, opts).unwrap();
        let mode = gradient(&gs.u).remove(0);
        // the kernel direction itself is (numerically) annihilated
        let image = limit.apply(&mode).unwrap();
        assert!(norm_lq(&image, 2.0) < 1e-3 * norm_lq(&mode, 2.0));
        match limit.invert(&mode) {
            Err(Error::Stagnation { .. }) | Err(Error::MaxIterations { .. }) => {}
            Ok(inv) => assert!(norm_lq(&inv.w, 2.0) > 1e3 * norm_lq(&mode, 2.0)),
            Err(other) => panic!("unexpected error {other}"),
        }
        // with the projection on, a non-radial right-hand side is refused
        let strict = LinearizedOperator::limit(&gs, LinSolveOptions::default()).unwrap();
        assert!(matches!(strict.invert(&mode), Err(Error::NotRadial { .. })));
    }

    #[test]
    fn rejects_c_below_floor() {
        let gs = ground_state_2d();
        let rp = ReducedParams::new(2, 3.0, 1.0).unwrap();
        assert!(LinearizedOperator::new(&rp, &gs, LinSolveOptions::default()).is_err());
    }

    #[test]
    fn single_mode_ratio_is_symbol_value() {
        let grid = Grid::new(2, 32, 2.0 * std::f64::consts::PI).unwrap();
        let c = 4.0;
        let k = 3;
        let f = single_mode(&grid, k);
        let xi0 = k as f64 / 2.0;
        let expected = c * c * symbols::inverse_difference_value(c, xi0).abs();
        for q in [2.0, 4.0] {
            let (_, _, diff) = norm_ratios(c, q, &f).unwrap();
            assert!((diff - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn low_band_q2_bound() {
        let grid = Grid::new(2, 32, 4.0 * std::f64::consts::PI).unwrap();
        for c in [4.0, 16.0] {
            let probe = operator_norm_probe(c, 2.0, 5, &grid, 1.0, 9).unwrap();
            assert!(probe.inverse_difference <= 2.0);
            assert!(probe.inverse_difference <= lattice_sup_scaled_inverse_difference(c, &grid) * (1.0 + 1e-10));
        }
        assert!(operator_norm_probe(4.0, 1.5, 1, &grid, 1.0, 0).is_err());
    }
}
