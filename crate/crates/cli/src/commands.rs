//! One function per subcommand. Each writes its artifacts into the output
//! directory and reports whether the mathematics went through.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use prnls_core::diagnostics::{self, action, check_identities, fit_rate, nonexistence_certificate};
use prnls_core::fixed_point::{
    probe_perturbative, probe_renormalized, FixedPointProblem, ProbeOptions, ProbeOutcome, ProbeRun, Solution,
    SolveError, SolveOptions, SolveReport,
};
use prnls_core::ground_state::{nehari_gaussian, solve_limit_equation, GroundState};
use prnls_core::linsolve::{lattice_sup_scaled_inverse_difference, operator_norm_probe, LinSolveOptions};
use prnls_core::spectral::io::{write_dump, DumpMeta};
use prnls_core::spectral::{norm_lq, Multiplier};
use prnls_core::symbols::{self, check_derivative_bounds, check_difference_bound, check_pointwise_bounds, DerivativeTarget};
use prnls_core::{Field, PhysicalParams, ReducedParams};
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::output::{flag, num, text, Table};

/// Identity mismatch below which a probe result counts as a genuine solution.
pub const GENUINE_TOL: f64 = 1e-6;

#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    pub timings: Vec<(&'static str, Duration)>,
    /// False when a solver did not converge or a certificate was contradicted.
    pub success: bool,
    pub summary: Vec<String>,
}

impl Outcome {
    fn ok() -> Self {
        Self { success: true, ..Default::default() }
    }

    fn time<T>(&mut self, label: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((label, start.elapsed()));
        out
    }

    fn table(&mut self, dir: &Path, name: &str, table: &Table) -> Result<()> {
        self.artifacts.push(table.write(dir, name)?);
        Ok(())
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match config.command {
        Command::GroundState => ground_state(config),
        Command::Solve => solve(config),
        Command::Sweep => sweep(config),
        Command::RateSweep => rate_sweep(config),
        Command::IdentityCheck => identity_check(config),
        Command::Certify => certify(config),
        Command::SymbolCheck => symbol_check(config),
        Command::NormProbe => norm_probe(config),
    }
}

fn dump(dir: &Path, name: &str, field: &Field, p: f64, c: f64, label: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_dump(&mut out, field, &DumpMeta { p, c, label: label.to_string() })?;
    out.flush()?;
    Ok(path)
}

fn reduced(config: &RunConfig, c: f64) -> Result<(PhysicalParams, ReducedParams)> {
    let pp = config.physical(c)?;
    Ok((pp, pp.reduce()))
}

fn limit_ground_state(config: &RunConfig) -> Result<GroundState> {
    let rp = ReducedParams::new(config.n, config.p, 1.0)?;
    Ok(solve_limit_equation(&rp, &config.grid(), config.tolerances.ground_state)?)
}

fn solve_options(config: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol_step: config.tolerances.step,
        tol_residual: config.tolerances.residual,
        tol_ground_state: config.tolerances.ground_state,
        linear: LinSolveOptions { tol: config.tolerances.linear, ..LinSolveOptions::default() },
        ..SolveOptions::default()
    }
}

fn solve_rung(gs: &GroundState, rp: &ReducedParams, opts: &SolveOptions) -> Result<Solution, SolveError> {
    FixedPointProblem::new(rp, gs.clone(), opts)?.solve(opts)
}

const SWEEP_HEADER: [&str; 9] = ["n", "p", "c", "iterations", "kappa", "residual", "w_norm", "rc_norm", "converged"];

fn sweep_row(config: &RunConfig, c: f64, report: Option<&SolveReport>) -> Vec<String> {
    let nan = f64::NAN;
    let r = |f: fn(&SolveReport) -> f64| num(report.map_or(nan, f));
    vec![
        config.n.to_string(),
        num(config.p),
        num(c),
        report.map_or(0, |r| r.iterations).to_string(),
        r(|r| r.contraction_estimate),
        r(|r| r.final_residual),
        r(|r| r.w_norm),
        r(|r| r.r_c_norm),
        flag(report.is_some_and(|r| r.converged)),
    ]
}

fn ground_state(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let dir = &config.output_dir;
    let gs = out.time("ground_state", || limit_ground_state(config))?;
    out.artifacts.push(dump(dir, "u_inf.field", &gs.u, config.p, f64::INFINITY, "u_inf")?);
    let (kinetic, potential) = gs.nehari_sides();
    let mut report = String::new();
    report.push_str(&format!("n = {}\np = {}\ngrid = \"{}\"\n", config.n, num(config.p), gs.grid()));
    report.push_str(&format!("iterations = {}\n", gs.iterations));
    report.push_str(&format!("residual = {}\n", num(gs.residual)));
    report.push_str(&format!("stabilizing_factor = {}\n", num(gs.factor)));
    report.push_str(&format!("clamped_samples = {}\n", gs.clamped));
    report.push_str(&format!("peak = {}\n", num(gs.peak())));
    report.push_str(&format!("nehari_lhs = {}\nnehari_rhs = {}\n", num(kinetic), num(potential)));
    report.push_str(&format!("nehari_mismatch = {}\n", num(gs.nehari_mismatch())));
    report.push_str(&format!("radial_defect = {}\n", num(gs.radial_defect())));
    for (s, value) in gs.regularity_report() {
        report.push_str(&format!("norm_h{} = {}\n", s as usize, num(value)));
    }
    let path = dir.join("ground_state.txt");
    std::fs::write(&path, report)?;
    out.artifacts.push(path);
    out.summary.push(format!("ground state: peak {:.10}, residual {:.3e}", gs.peak(), gs.residual));
    Ok(out)
}

fn solve(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let dir = &config.output_dir;
    let c = config.require_c()?;
    let (_, rp) = reduced(config, c)?;
    let gs = out.time("ground_state", || limit_ground_state(config))?;
    let opts = solve_options(config);
    let result = out.time("fixed_point", || solve_rung(&gs, &rp, &opts));
    let report = match &result {
        Ok(sol) => Some(&sol.report),
        Err(e) => e.report(),
    };
    let mut table = Table::new(&SWEEP_HEADER);
    table.push(sweep_row(config, c, report));
    out.table(dir, "solve.csv", &table)?;
    if let Some(report) = report {
        let mut iters = Table::new(&["iteration", "w_norm", "step"]);
        for (k, rec) in report.per_iteration.iter().enumerate() {
            iters.push(vec![(k + 1).to_string(), num(rec.w_norm), num(rec.step)]);
        }
        out.table(dir, "iterations.csv", &iters)?;
    }
    match result {
        Ok(sol) => {
            out.artifacts.push(dump(dir, "u_c.field", &sol.u, config.p, rp.c_tilde, "u_c")?);
            out.artifacts.push(dump(dir, "w.field", &sol.w, config.p, rp.c_tilde, "w")?);
            if sol.report.nonpositive > 0 {
                out.summary.push(format!("warning: u_c has {} non-positive samples", sol.report.nonpositive));
            }
            out.summary.push(format!(
                "converged in {} iterations, residual {:.3e}, kappa {:.3e}",
                sol.report.iterations, sol.report.final_residual, sol.report.contraction_estimate
            ));
        }
        Err(e) => {
            out.success = false;
            out.summary.push(format!("did not converge: {e}"));
        }
    }
    Ok(out)
}

fn ladder(config: &RunConfig) -> Result<Vec<f64>> {
    Ok(config.sweep.context("this command needs a [sweep] section")?.ladder())
}

fn solve_ladder(config: &RunConfig, gs: &GroundState, cs: &[f64]) -> Result<Vec<Result<Solution, SolveError>>> {
    let opts = solve_options(config);
    let rps = cs.iter().map(|&c| reduced(config, c).map(|r| r.1)).collect::<Result<Vec<_>>>()?;
    Ok(rps.par_iter().map(|rp| solve_rung(gs, rp, &opts)).collect())
}

fn sweep(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let cs = ladder(config)?;
    let gs = out.time("ground_state", || limit_ground_state(config))?;
    let results = out.time("sweep", || solve_ladder(config, &gs, &cs))?;
    let mut table = Table::new(&SWEEP_HEADER);
    for (&c, result) in cs.iter().zip(&results) {
        let report = match result {
            Ok(sol) => Some(&sol.report),
            Err(e) => e.report(),
        };
        table.push(sweep_row(config, c, report));
        if let Err(e) = result {
            out.success = false;
            out.summary.push(format!("c = {c}: {e}"));
        }
    }
    out.table(&config.output_dir, "sweep.csv", &table)?;
    out.summary.push(format!("{} rungs written", table.len()));
    Ok(out)
}

fn rate_sweep(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let dir = &config.output_dir;
    let cs = ladder(config)?;
    let gs = out.time("ground_state", || limit_ground_state(config))?;
    let results = out.time("sweep", || solve_ladder(config, &gs, &cs))?;
    let mut table = Table::new(&["c", "distance", "rc_norm", "iterations", "residual", "converged"]);
    let mut points = vec![];
    for (&c, result) in cs.iter().zip(&results) {
        match result {
            Ok(sol) => {
                points.push((c, sol.report.w_norm));
                table.push(vec![
                    num(c),
                    num(sol.report.w_norm),
                    num(sol.report.r_c_norm),
                    sol.report.iterations.to_string(),
                    num(sol.report.final_residual),
                    flag(true),
                ]);
            }
            Err(e) => {
                out.success = false;
                out.summary.push(format!("c = {c}: {e}"));
                let it = e.report().map_or(0, |r| r.iterations);
                table.push(vec![num(c), num(f64::NAN), num(f64::NAN), it.to_string(), num(f64::NAN), flag(false)]);
            }
        }
    }
    out.table(dir, "rate.csv", &table)?;
    let mut fit_table = Table::new(&["n", "p", "points", "slope", "intercept", "r_squared"]);
    match fit_rate(&points) {
        Ok(fit) => {
            fit_table.push(vec![
                config.n.to_string(),
                num(config.p),
                fit.points.len().to_string(),
                num(fit.slope),
                num(fit.intercept),
                num(fit.r_squared),
            ]);
            out.summary.push(format!("slope {:.4}, R^2 {:.6}", fit.slope, fit.r_squared));
        }
        Err(e) => {
            out.success = false;
            out.summary.push(format!("no fit: {e}"));
        }
    }
    out.table(dir, "rate_fit.csv", &fit_table)?;
    Ok(out)
}

fn identity_check(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let dir = &config.output_dir;
    let cs = match config.sweep {
        Some(s) => s.ladder(),
        None => vec![config.require_c()?],
    };
    let gs = out.time("ground_state", || limit_ground_state(config))?;
    let results = out.time("solve", || solve_ladder(config, &gs, &cs))?;
    let mut ids = Table::new(&["c", "identity", "lhs", "rhs", "rel_mismatch"]);
    let mut ext = Table::new(&["c", "trace_ratio", "action", "action_nehari", "action_mismatch"]);
    for (&c, result) in cs.iter().zip(&results) {
        let sol = match result {
            Ok(sol) => sol,
            Err(e) => {
                out.success = false;
                out.summary.push(format!("c = {c}: {e}"));
                continue;
            }
        };
        let (pp, rp) = reduced(config, c)?;
        let report = check_identities(&sol.u, &rp);
        for e in &report.entries {
            ids.push(vec![num(c), e.identity.label().into(), num(e.lhs), num(e.rhs), num(e.rel_mismatch)]);
        }
        // the field lives in reduced units, so the action is evaluated there too
        let reduced_pp = PhysicalParams::from_reduced(&rp);
        let value = action(&sol.u, &reduced_pp);
        let nehari = (0.5 - 1.0 / (pp.p + 1.0)) * norm_lq(&sol.u, pp.p + 1.0).powf(pp.p + 1.0);
        ext.push(vec![
            num(c),
            num(diagnostics::trace_inequality_check(&sol.u, rp.c_tilde)),
            num(value),
            num(nehari),
            num(diagnostics::relative_mismatch(value, nehari)),
        ]);
        out.summary.push(format!("c = {c}: max identity mismatch {:.3e}", report.max_mismatch()));
    }
    out.table(dir, "identities.csv", &ids)?;
    out.table(dir, "extension.csv", &ext)?;
    Ok(out)
}

fn certify(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let dir = &config.output_dir;
    let c = config.require_c()?;
    let (_, rp) = reduced(config, c)?;
    let grid = config.grid();
    let gs = if rp.subcritical_for_construction() { Some(out.time("ground_state", || limit_ground_state(config))?) } else { None };
    let candidate = match &gs {
        Some(gs) => gs.u.clone(),
        None => nehari_gaussian(&Multiplier::new(&symbols::p_c(rp.c_tilde), &grid)?, rp.p, 1.0),
    };
    let cert = nonexistence_certificate(&candidate, &rp)?;
    let mut table = Table::new(&["n", "p", "c", "regime", "combined_lhs", "combined_rhs", "gap", "conclusion"]);
    table.push(vec![
        config.n.to_string(),
        num(config.p),
        num(c),
        format!("{:?}", cert.regime),
        num(cert.combined_lhs),
        num(cert.combined_rhs),
        num(cert.gap),
        text(&cert.conclusion),
    ]);
    out.table(dir, "certificate.csv", &table)?;

    let probe = ProbeOptions { max_iter: config.probe.max_iter, tol: config.tolerances.step, ..ProbeOptions::default() };
    let seeds: Vec<u64> = (0..config.probe.runs as u64).map(|k| config.seed.wrapping_add(k)).collect();
    let (route, runs): (&str, Vec<ProbeRun>) = match gs {
        Some(gs) => {
            let problem = match FixedPointProblem::for_probe(&rp, gs) {
                Ok(problem) => problem,
                Err(e) => bail!("probe setup failed: {e}"),
            };
            ("perturbative", out.time("probes", || seeds.par_iter().map(|&s| probe_perturbative(&problem, s, &probe)).collect()))
        }
        None => (
            "renormalized",
            out.time("probes", || seeds.par_iter().map(|&s| probe_renormalized(&rp, &grid, s, &probe)).collect()),
        ),
    };
    let mut probes = Table::new(&["seed", "route", "outcome", "iterations", "peak", "residual", "identity_mismatch"]);
    let mut genuine = 0;
    for run in &runs {
        let (peak, residual, mismatch) = match run.outcome {
            ProbeOutcome::Converged { peak, residual, identity_mismatch } => (peak, residual, identity_mismatch),
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        if run.outcome.is_genuine_solution(GENUINE_TOL) {
            genuine += 1;
        }
        probes.push(vec![
            run.seed.to_string(),
            route.into(),
            run.outcome.tag().into(),
            run.iterations.to_string(),
            num(peak),
            num(residual),
            num(mismatch),
        ]);
    }
    out.table(dir, "probes.csv", &probes)?;
    let count = |tag: &str| runs.iter().filter(|r| r.outcome.tag() == tag).count();
    out.summary.push(format!(
        "{} probes: {} collapse, {} divergence, {} stalled, {} solver failure, {} converged ({} genuine)",
        runs.len(),
        count("collapse"),
        count("divergence"),
        count("stalled"),
        count("solver-failure"),
        count("converged"),
        genuine
    ));
    out.summary.push(cert.conclusion);
    out.success = genuine == 0;
    Ok(out)
}

fn default_ladder(config: &RunConfig, lo: f64, rungs: usize) -> Vec<f64> {
    match config.sweep {
        Some(s) => s.ladder(),
        None => (0..rungs).map(|k| lo * 2f64.powi(k as i32)).collect(),
    }
}

fn symbol_check(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let cs = default_ladder(config, 2.0, 10);
    let samples = config.probe.samples;
    let seed = config.seed;
    let n = config.n;
    let rows: Vec<Result<Vec<symbols::BoundReport>>> = out.time("symbols", || {
        cs.par_iter()
            .map(|&c| {
                let mut reports = vec![check_pointwise_bounds(c, samples, seed)?, check_difference_bound(c, samples, seed)?];
                for target in [DerivativeTarget::InverseDifference, DerivativeTarget::Ratio] {
                    reports.extend(check_derivative_bounds(c, target, 2, samples, n, seed)?);
                }
                Ok(reports)
            })
            .collect()
    });
    let mut table = Table::new(&["c", "alpha", "worst_ratio", "argmax_xi", "violations"]);
    let mut violations = 0;
    for reports in rows {
        for r in reports? {
            violations += r.violations;
            table.push(vec![num(r.c), r.check.clone(), num(r.worst_ratio), num(r.argmax_xi), r.violations.to_string()]);
        }
    }
    out.table(&config.output_dir, "symbols.csv", &table)?;
    out.summary.push(format!("{} checks, {violations} violations", table.len()));
    out.success = violations == 0;
    Ok(out)
}

fn norm_probe(config: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::ok();
    let grid = config.grid();
    let cs = default_ladder(config, 4.0, 7);
    let mut qs = vec![2.0, 2.0 * config.n as f64];
    qs.dedup();
    let jobs: Vec<(f64, f64)> = cs.iter().flat_map(|&c| qs.iter().map(move |&q| (c, q))).collect();
    let trials = config.probe.trials;
    let seed = config.seed;
    let results: Vec<Result<_>> = out.time("probe", || {
        jobs.par_iter()
            .map(|&(c, q)| Ok((operator_norm_probe(c, q, trials, &grid, 4.0, seed)?, lattice_sup_scaled_inverse_difference(c, &grid))))
            .collect()
    });
    let mut table = Table::new(&["c", "q", "lower", "upper", "inverse_difference", "lattice_sup"]);
    for result in results {
        let (probe, sup) = result?;
        table.push(vec![num(probe.c), num(probe.q), num(probe.lower), num(probe.upper), num(probe.inverse_difference), num(sup)]);
    }
    out.table(&config.output_dir, "norm_probe.csv", &table)?;
    out.summary.push(format!("{} (c, q) pairs", table.len()));
    Ok(out)
}
