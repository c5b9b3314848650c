//! Perturbative construction `u_c = u_∞ + w` where `w` is the fixed point of
//! `Φ_c(w) = R_c + L_{c;∞}^{-1} Q(w)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::check_identities;
use crate::error::Error;
use crate::ground_state::{nehari_gaussian, renormalized_iteration, solve_limit_equation, GroundState, RenormOptions};
use crate::linsolve::{random_band_limited, LinSolveOptions, LinearizedOperator};
use crate::params::ReducedParams;
use crate::spectral::{norm_h1, norm_h1_w1q, norm_lq, signed_power, symmetrize_radial, Field, Grid, Multiplier};
use crate::symbols;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol_step: f64,
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Tolerance for the Petviashvili ground state.
    pub tol_ground_state: f64,
    pub linear: LinSolveOptions,
    /// Run outside the construction regime; outcomes are data, not errors.
    pub probe: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_step: 1e-10,
            tol_residual: 1e-8,
            max_iter: 200,
            tol_ground_state: 1e-12,
            linear: LinSolveOptions::default(),
            probe: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub w_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub c: f64,
    pub iterations: usize,
    pub per_iteration: Vec<IterationRecord>,
    /// Largest ratio of consecutive steps, from the second step on.
    pub contraction_estimate: f64,
    /// `‖P_c(D)u_c - |u_c|^{p-1}u_c‖₂`.
    pub final_residual: f64,
    pub r_c_norm: f64,
    pub w_norm: f64,
    pub converged: bool,
    /// Samples of `u_c` that are not strictly positive.
    pub nonpositive: usize,
}

impl SolveReport {
    fn empty(c: f64, r_c_norm: f64) -> Self {
        Self {
            c,
            iterations: 0,
            per_iteration: Vec::new(),
            contraction_estimate: 0.0,
            final_residual: f64::NAN,
            r_c_norm,
            w_norm: 0.0,
            converged: false,
            nonpositive: 0,
        }
    }

    /// Step ratios `s_{k+1} / s_k` for `k >= 1`.
    pub fn step_ratios(&self) -> Vec<f64> {
        self.per_iteration.windows(2).map(|w| w[1].step / w[0].step).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("iterate left the ball of radius {ceiling:.3e}: {report:?}")]
    Divergence { ceiling: f64, report: Box<SolveReport> },
    #[error("u_c collapsed to zero after {} iterations", report.iterations)]
    Collapse { report: Box<SolveReport> },
    #[error("no convergence within {} iterations", report.iterations)]
    MaxIterations { report: Box<SolveReport> },
    #[error("step converged but residual {:.3e} exceeds tolerance", report.final_residual)]
    ResidualTooHigh { report: Box<SolveReport> },
    #[error("linear solve failed: {source}")]
    Linear { source: Error, report: Box<SolveReport> },
    #[error("ground state: {0}")]
    GroundState(Error),
    #[error(transparent)]
    Setup(Error),
}

impl SolveError {
    pub fn report(&self) -> Option<&SolveReport> {
        match self {
            Self::Divergence { report, .. }
            | Self::Collapse { report }
            | Self::MaxIterations { report }
            | Self::ResidualTooHigh { report }
            | Self::Linear { report, .. } => Some(report),
            Self::GroundState(_) | Self::Setup(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    pub w: Field,
    pub report: SolveReport,
}

/// `|u_∞+w|^{p-1}(u_∞+w) - u_∞^p - p u_∞^{p-1} w`.
pub fn nonlinear_q(gs: &GroundState, w: &Field) -> Field {
    let p = gs.p;
    gs.u.zip_map(w, |u, w| signed_power(u + w, p) - signed_power(u, p) - p * signed_power(u, p - 1.0) * w)
}

/// `R_c = L_{c;∞}^{-1} (P_∞(D) - P_c(D)) u_∞`. Zero for the limit operator.
pub fn remainder_rc(op: &LinearizedOperator, gs: &GroundState) -> Result<Field, Error> {
    let grid = *gs.grid();
    let c = match op.speed() {
        crate::linsolve::Speed::Finite(c) => c,
        crate::linsolve::Speed::Limit => return Ok(Field::zeros(grid)),
    };
    let difference = Multiplier::new(&symbols::limit_defect(c), &grid)?;
    let rhs = symmetrize_radial(&difference.apply(&gs.u)?);
    Ok(op.invert(&rhs)?.w)
}

/// `Φ_c(w) = R_c + L_{c;∞}^{-1} Q(w)`.
pub fn phi(op: &LinearizedOperator, gs: &GroundState, r_c: &Field, w: &Field) -> Result<Field, Error> {
    let q = symmetrize_radial(&nonlinear_q(gs, w));
    Ok(r_c.add(&op.invert(&q)?.w))
}

/// `‖P_c(D)u - |u|^{p-1}u‖₂`.
pub fn equation_residual(u: &Field, p: f64, c: f64) -> Result<f64, Error> {
    let pc = Multiplier::new(&symbols::p_c(c), u.grid())?;
    let lhs = pc.apply(u)?;
    Ok(norm_lq(&lhs.sub(&u.map(|v| signed_power(v, p))), 2.0))
}

/// Exponent of the stopping norm `H¹ ∩ W^{1,q}`.
pub fn stopping_exponent(n: usize) -> f64 {
    2.0 * n as f64
}

/// Operator, ground state and `R_c` for one `(n, p, c)`; reused across starts.
#[derive(Debug, Clone)]
pub struct FixedPointProblem {
    rp: ReducedParams,
    gs: GroundState,
    op: LinearizedOperator,
    r_c: Field,
    q: f64,
    ceiling: f64,
}

impl FixedPointProblem {
    pub fn new(rp: &ReducedParams, gs: GroundState, opts: &SolveOptions) -> Result<Self, SolveError> {
        if !opts.probe && !rp.subcritical_for_construction() {
            return Err(SolveError::Setup(Error::Precondition(format!(
                "p = {} is not H^1-subcritical for n = {}; use probe mode",
                rp.p, rp.n
            ))));
        }
        if gs.grid().dim() != rp.n || gs.p != rp.p {
            return Err(SolveError::Setup(Error::GridMismatch(format!(
                "ground state (n = {}, p = {}) does not match parameters (n = {}, p = {})",
                gs.grid().dim(),
                gs.p,
                rp.n,
                rp.p
            ))));
        }
        let op = LinearizedOperator::new(rp, &gs, opts.linear).map_err(SolveError::Setup)?;
        let q = stopping_exponent(rp.n);
        let ceiling = norm_h1(&gs.u);
        let r_c = remainder_rc(&op, &gs).map_err(|source| SolveError::Linear {
            source,
            report: Box::new(SolveReport::empty(rp.c_tilde, f64::NAN)),
        })?;
        Ok(Self { rp: *rp, gs, op, r_c, q, ceiling })
    }

    /// Probe-mode problem: no subcriticality check and no `c` floor.
    pub fn for_probe(rp: &ReducedParams, gs: GroundState) -> Result<Self, SolveError> {
        let opts = SolveOptions {
            probe: true,
            linear: LinSolveOptions { c_floor: 0.0, ..LinSolveOptions::default() },
            ..SolveOptions::default()
        };
        Self::new(rp, gs, &opts)
    }

    pub fn params(&self) -> &ReducedParams {
        &self.rp
    }

    pub fn ground_state(&self) -> &GroundState {
        &self.gs
    }

    pub fn operator(&self) -> &LinearizedOperator {
        &self.op
    }

    pub fn remainder(&self) -> &Field {
        &self.r_c
    }

    /// `‖u_∞‖_{H¹}`, the radius beyond which the iteration is declared divergent.
    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn norm(&self, f: &Field) -> f64 {
        norm_h1_w1q(f, self.q)
    }

    pub fn phi(&self, w: &Field) -> Result<Field, Error> {
        phi(&self.op, &self.gs, &self.r_c, w)
    }

    /// Iterates `w_{k+1} = Φ(w_k)` from `w0`.
    pub fn iterate(&self, w0: &Field, opts: &SolveOptions) -> Result<Solution, SolveError> {
        let c = self.rp.c_tilde;
        let mut report = SolveReport::empty(c, self.norm(&self.r_c));
        let mut w = symmetrize_radial(w0);
        let peak = self.gs.peak();
        for k in 1..=opts.max_iter {
            let next = match self.phi(&w) {
                Ok(next) => next,
                Err(source) => return Err(SolveError::Linear { source, report: Box::new(report) }),
            };
            let step = self.norm(&next.sub(&w));
            let w_norm = self.norm(&next);
            report.iterations = k;
            report.per_iteration.push(IterationRecord { w_norm, step });
            report.w_norm = w_norm;
            if let [.., prev, last] = report.per_iteration.as_slice() {
                if prev.step > 0.0 {
                    report.contraction_estimate = report.contraction_estimate.max(last.step / prev.step);
                }
            }
            if !w_norm.is_finite() || norm_h1(&next) > self.ceiling {
                return Err(SolveError::Divergence { ceiling: self.ceiling, report: Box::new(report) });
            }
            w = next;
            if self.gs.u.add(&w).max_abs() < 1e-6 * peak {
                return Err(SolveError::Collapse { report: Box::new(report) });
            }
            if step < opts.tol_step {
                let u = self.gs.u.add(&w);
                report.final_residual = equation_residual(&u, self.rp.p, c).map_err(SolveError::Setup)?;
                report.nonpositive = u.values().iter().filter(|&&v| v <= 0.0).count();
                if report.final_residual > opts.tol_residual {
                    return Err(SolveError::ResidualTooHigh { report: Box::new(report) });
                }
                report.converged = report.contraction_estimate < 1.0;
                if !report.converged {
                    return Err(SolveError::MaxIterations { report: Box::new(report) });
                }
                return Ok(Solution { u, w, report });
            }
        }
        Err(SolveError::MaxIterations { report: Box::new(report) })
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<Solution, SolveError> {
        self.iterate(&Field::zeros(*self.gs.grid()), opts)
    }
}

/// Ground state plus fixed-point iteration from `w₀ = 0`.
pub fn solve(rp: &ReducedParams, grid: &Grid, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let gs = solve_limit_equation(rp, grid, opts.tol_ground_state).map_err(SolveError::GroundState)?;
    FixedPointProblem::new(rp, gs, opts)?.solve(opts)
}

/// Seeded radial field with `‖f‖_{H¹∩W^{1,2n}} = radius`.
pub fn random_radial_perturbation(grid: &Grid, radius: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = random_band_limited(grid, 2.0, &mut rng);
    let width: f64 = rng.random_range(1.0..3.0);
    let envelope = Field::from_fn(*grid, |x| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * width * width)).exp());
    let f = symmetrize_radial(&noise.zip_map(&envelope, |a, b| a * b));
    let norm = norm_h1_w1q(&f, stopping_exponent(grid.dim()));
    if norm == 0.0 {
        f
    } else {
        f.scale(radius / norm)
    }
}

/// Runs from `w₀ = 0` and from seeded perturbations of size `radius`;
/// returns the solutions and the largest `‖u - u_0‖_∞` against the first.
pub fn multistart(
    problem: &FixedPointProblem,
    seeds: &[u64],
    radius: f64,
    opts: &SolveOptions,
) -> Result<(Vec<Solution>, f64), SolveError> {
    let base = problem.solve(opts)?;
    let grid = *problem.ground_state().grid();
    let mut spread = 0.0f64;
    let mut all = vec![];
    for &seed in seeds {
        let w0 = random_radial_perturbation(&grid, radius, seed);
        let sol = problem.iterate(&w0, opts)?;
        spread = spread.max(sol.u.sub(&base.u).max_abs());
        all.push(sol);
    }
    all.insert(0, base);
    Ok((all, spread))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeOutcome {
    /// A nonzero discrete solution; `identity_mismatch` is the largest of the
    /// three extension identities.
    Converged { peak: f64, residual: f64, identity_mismatch: f64 },
    Collapse,
    Divergence,
    Stalled,
    SolverFailure(String),
}

impl ProbeOutcome {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Converged { .. } => "converged",
            Self::Collapse => "collapse",
            Self::Divergence => "divergence",
            Self::Stalled => "stalled",
            Self::SolverFailure(_) => "solver-failure",
        }
    }

    /// True for a converged nonzero field that satisfies the identities to `tol`.
    pub fn is_genuine_solution(&self, tol: f64) -> bool {
        matches!(self, Self::Converged { identity_mismatch, .. } if *identity_mismatch < tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRun {
    pub seed: u64,
    pub iterations: usize,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub max_iter: usize,
    /// Step tolerance for either iteration.
    pub tol: f64,
    /// Radius of the random start for the perturbative route.
    pub radius: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-10, radius: 0.1 }
    }
}

fn classify_converged(u: &Field, rp: &ReducedParams, residual: f64) -> ProbeOutcome {
    let report = check_identities(u, rp);
    ProbeOutcome::Converged { peak: u.max_abs(), residual, identity_mismatch: report.max_mismatch() }
}

/// Perturbative probe: `Φ_c` iteration from a random radial start, with the
/// `c` floor removed. Requires a ground state of the limit equation.
pub fn probe_perturbative(problem: &FixedPointProblem, seed: u64, opts: &ProbeOptions) -> ProbeRun {
    let grid = *problem.ground_state().grid();
    let w0 = random_radial_perturbation(&grid, opts.radius * problem.ceiling(), seed);
    let solve_opts = SolveOptions {
        tol_step: opts.tol,
        tol_residual: f64::INFINITY,
        max_iter: opts.max_iter,
        probe: true,
        ..SolveOptions::default()
    };
    let (iterations, outcome) = match problem.iterate(&w0, &solve_opts) {
        Ok(sol) => (sol.report.iterations, classify_converged(&sol.u, problem.params(), sol.report.final_residual)),
        Err(err) => {
            let iterations = err.report().map_or(0, |r| r.iterations);
            let outcome = match err {
                SolveError::Divergence { .. } => ProbeOutcome::Divergence,
                SolveError::Collapse { .. } => ProbeOutcome::Collapse,
                SolveError::MaxIterations { .. } | SolveError::ResidualTooHigh { .. } => ProbeOutcome::Stalled,
                other => ProbeOutcome::SolverFailure(other.to_string()),
            };
            (iterations, outcome)
        }
    };
    ProbeRun { seed, iterations, outcome }
}

/// Direct probe: renormalized iteration for `P_c(D)u = u^p` from a seeded
/// Gaussian of random width and amplitude.
pub fn probe_renormalized(rp: &ReducedParams, grid: &Grid, seed: u64, opts: &ProbeOptions) -> ProbeRun {
    let operator = match Multiplier::new(&symbols::p_c(rp.c_tilde), grid) {
        Ok(m) => m,
        Err(e) => return ProbeRun { seed, iterations: 0, outcome: ProbeOutcome::SolverFailure(e.to_string()) },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width: f64 = rng.random_range(0.5..2.0);
    let amplitude: f64 = rng.random_range(0.5..2.0);
    let init = nehari_gaussian(&operator, rp.p, width).scale(amplitude);
    let renorm = RenormOptions { tol: opts.tol, max_iter: opts.max_iter, width };
    match renormalized_iteration(&operator, rp.p, init, &renorm) {
        Ok(out) => ProbeRun { seed, iterations: out.iterations, outcome: classify_converged(&out.u, rp, out.residual) },
        Err(Error::Collapse { iterations }) => ProbeRun { seed, iterations, outcome: ProbeOutcome::Collapse },
        Err(Error::Convergence { iterations, last_change }) => {
            let outcome = if last_change.is_finite() { ProbeOutcome::Stalled } else { ProbeOutcome::Divergence };
            ProbeRun { seed, iterations, outcome }
        }
        Err(e) => ProbeRun { seed, iterations: 0, outcome: ProbeOutcome::SolverFailure(e.to_string()) },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kappa0Estimate {
    /// Smallest `c` found to converge.
    pub c: f64,
    /// `c²`.
    pub kappa0: f64,
    /// Every `(c, converged)` evaluated, in order.
    pub evaluations: Vec<(f64, bool)>,
}

/// Bisection in `log c` on `[c_lo, c_hi]` for the smallest `c` at which the
/// fixed-point solve converges. The configured `c` floor is lowered to `c_lo`.
pub fn empirical_kappa0(
    rp: &ReducedParams,
    gs: &GroundState,
    c_lo: f64,
    c_hi: f64,
    steps: usize,
    opts: &SolveOptions,
) -> Result<Kappa0Estimate, Error> {
    if !(c_lo > 0.0 && c_hi > c_lo) {
        return Err(Error::InvalidParameter(format!("need 0 < c_lo < c_hi, got [{c_lo}, {c_hi}]")));
    }
    let opts = SolveOptions { linear: LinSolveOptions { c_floor: c_lo, ..opts.linear }, ..*opts };
    let mut evaluations = vec![];
    let mut converges = |c: f64| {
        let ok = FixedPointProblem::new(&rp.with_c(c), gs.clone(), &opts).and_then(|p| p.solve(&opts)).is_ok();
        evaluations.push((c, ok));
        ok
    };
    if !converges(c_hi) {
        return Err(Error::Precondition(format!("solve does not converge at the upper end c = {c_hi}")));
    }
    let (mut lo, mut hi) = (c_lo, c_hi);
    if converges(lo) {
        hi = lo;
    } else {
        for _ in 0..steps {
            let mid = (lo * hi).sqrt();
            if converges(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(Kappa0Estimate { c: hi, kappa0: hi * hi, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::soliton_1d;

    fn gs(n: usize, p: f64, grid: Grid) -> GroundState {
        solve_limit_equation(&ReducedParams::new(n, p, 10.0).unwrap(), &grid, 1e-12).unwrap()
    }

    #[test]
    fn q_cases() {
        let grid = Grid::new(2, 64, 12.0).unwrap();
        let g = gs(2, 3.0, grid);
        assert_eq!(nonlinear_q(&g, &Field::zeros(grid)).max_abs(), 0.0);
        let w = random_radial_perturbation(&grid, 0.5, 3);
        let exact = g.u.zip_map(&w, |u, w| 3.0 * u * w * w + w * w * w);
        let q = nonlinear_q(&g, &w);
        assert!(q.sub(&exact).max_abs() < 1e-12 * exact.max_abs().max(1.0));
    }

    #[test]
    fn q_is_superlinear() {
        let grid = Grid::new(1, 256, 20.0).unwrap();
        for p in [1.5, 3.0] {
            let g = gs(1, p, grid);
            let v = random_radial_perturbation(&grid, 1.0, 7);
            let eps = [1e-2, 1e-3, 1e-4];
            let logs: Vec<f64> = eps.iter().map(|&e| norm_lq(&nonlinear_q(&g, &v.scale(e)), 2.0).ln()).collect();
            let slope = (logs[2] - logs[0]) / (eps[2].ln() - eps[0].ln());
            assert!(slope >= p.min(2.0) - 0.1, "p = {p}: slope {slope}");
        }
    }

    #[test]
    fn phi_at_zero_is_remainder_and_limit_remainder_vanishes() {
        let grid = Grid::new(2, 64, 12.0).unwrap();
        let g = gs(2, 3.0, grid);
        let rp = ReducedParams::new(2, 3.0, 8.0).unwrap();
        let problem = FixedPointProblem::new(&rp, g.clone(), &SolveOptions::default()).unwrap();
        let phi0 = problem.phi(&Field::zeros(grid)).unwrap();
        assert!(phi0.sub(problem.remainder()).max_abs() < 1e-14);
        let limit = LinearizedOperator::limit(&g, LinSolveOptions::default()).unwrap();
        assert_eq!(remainder_rc(&limit, &g).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn contraction_on_small_ball() {
        let grid = Grid::new(2, 64, 12.0).unwrap();
        let g = gs(2, 3.0, grid);
        let rp = ReducedParams::new(2, 3.0, 32.0).unwrap();
        let problem = FixedPointProblem::new(&rp, g, &SolveOptions::default()).unwrap();
        let radius = 0.05 * problem.ceiling();
        for seed in 0..3 {
            let w1 = random_radial_perturbation(&grid, radius, 2 * seed);
            let w2 = random_radial_perturbation(&grid, radius, 2 * seed + 1);
            let num = problem.norm(&problem.phi(&w1).unwrap().sub(&problem.phi(&w2).unwrap()));
            let den = problem.norm(&w1.sub(&w2));
            assert!(num < 0.5 * den, "kappa = {}", num / den);
        }
    }

    #[test]
    fn one_dimensional_large_c_matches_soliton() {
        let grid = Grid::default_for(1).unwrap();
        let rp = ReducedParams::new(1, 3.0, 1e4).unwrap();
        let sol = solve(&rp, &grid, &SolveOptions::default()).unwrap();
        let exact = Field::from_fn(grid, |x| soliton_1d(3.0, x[0]));
        assert!(sol.u.sub(&exact).max_abs() < 1e-6);
        assert!(sol.report.converged);
        assert!(sol.report.final_residual < 1e-8);
        assert!(sol.report.contraction_estimate < 1.0);
    }

    #[test]
    fn fixed_point_property_and_step_decay() {
        let grid = Grid::new(2, 64, 12.0).unwrap();
        let rp = ReducedParams::new(2, 3.0, 8.0).unwrap();
        let problem = FixedPointProblem::new(&rp, gs(2, 3.0, grid), &SolveOptions::default()).unwrap();
        let sol = problem.solve(&SolveOptions::default()).unwrap();
        let again = problem.phi(&sol.w).unwrap();
        assert!(problem.norm(&again.sub(&sol.w)) < 1e-9);
        assert!(sol.report.step_ratios().iter().all(|&r| r < 1.0));
        assert!(crate::spectral::radial_defect(&sol.u) < 1e-10);
        assert_eq!(sol.report.nonpositive, 0);
    }

    #[test]
    fn refuses_floor_and_critical_exponent() {
        let grid = Grid::new(2, 32, 10.0).unwrap();
        let g = gs(2, 3.0, grid);
        let low = ReducedParams::new(2, 3.0, 1.0).unwrap();
        assert!(matches!(FixedPointProblem::new(&low, g, &SolveOptions::default()), Err(SolveError::Setup(_))));
        let critical = ReducedParams::new(3, 5.0, 4.0).unwrap();
        let grid3 = Grid::new(3, 16, 10.0).unwrap();
        assert!(solve(&critical, &grid3, &SolveOptions::default()).is_err());
    }
}
