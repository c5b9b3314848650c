//! The symbols `P_c`, `P_∞` and their combinations, plus sampling checks of
//! the pointwise and derivative bounds relating them.
//!
//! All evaluations avoid the cancellation in `sqrt(c²r² + c⁴/4) - c²/2` by
//! writing `P_c(r) - 1 = 2r² / (sqrt(1 + 4r²/c²) + 1)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type SymbolFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A real Fourier symbol `ξ ↦ m(ξ)`.
#[derive(Clone)]
pub struct Symbol {
    label: String,
    eval: Arc<SymbolFn>,
}

impl Symbol {
    pub fn new(label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), eval: Arc::new(eval) }
    }

    /// Symbol depending on `|ξ|` only.
    pub fn radial(label: impl Into<String>, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, move |xi: &[f64]| profile(radius(xi)))
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("{value}"), move |_: &[f64]| value)
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        (self.eval)(xi)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn product(&self, other: &Symbol) -> Symbol {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Symbol::new(format!("({})*({})", self.label, other.label), move |xi: &[f64]| a(xi) * b(xi))
    }

    pub fn recip(&self) -> Symbol {
        let a = self.eval.clone();
        Symbol::new(format!("1/({})", self.label), move |xi: &[f64]| 1.0 / a(xi))
    }

    pub fn powf(&self, exponent: f64) -> Symbol {
        let a = self.eval.clone();
        Symbol::new(format!("({})^{exponent}", self.label), move |xi: &[f64]| a(xi).powf(exponent))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol").field("label", &self.label).finish()
    }
}

fn radius(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relativistic_root(c: f64, r: f64) -> f64 {
    (1.0 + 4.0 * (r / c) * (r / c)).sqrt()
}

/// `P_c(r) = sqrt(c²r² + c⁴/4) - c²/2 + 1`, cancellation-free.
pub fn pc_value(c: f64, r: f64) -> f64 {
    2.0 * r * r / (relativistic_root(c, r) + 1.0) + 1.0
}

/// `P_∞(r) = r² + 1`.
pub fn p_infty_value(r: f64) -> f64 {
    r * r + 1.0
}

/// `P_c(r) - P_∞(r) = -4 r⁴ / (c² (1 + s)²)` with `s = sqrt(1 + 4r²/c²)`.
pub fn difference_value(c: f64, r: f64) -> f64 {
    let s = relativistic_root(c, r);
    -(r.powi(4) / (c * c)) * (4.0 / ((1.0 + s) * (1.0 + s)))
}

/// `a(r) = 1/P_∞(r) - 1/P_c(r)`; never positive.
pub fn inverse_difference_value(c: f64, r: f64) -> f64 {
    difference_value(c, r) / (pc_value(c, r) * p_infty_value(r))
}

/// `σ(r) = sqrt(r² + c²/4)`, decay rate of the half-space extension.
pub fn sigma_value(c: f64, r: f64) -> f64 {
    (r * r + c * c / 4.0).sqrt()
}

pub fn p_c(c: f64) -> Symbol {
    Symbol::radial(format!("P_{c}"), move |r| pc_value(c, r))
}

pub fn p_infty() -> Symbol {
    Symbol::radial("P_inf", p_infty_value)
}

/// `P_∞ - P_c`.
pub fn limit_defect(c: f64) -> Symbol {
    Symbol::radial(format!("P_inf-P_{c}"), move |r| -difference_value(c, r))
}

pub fn inverse_difference(c: f64) -> Symbol {
    Symbol::radial(format!("a_{c}"), move |r| inverse_difference_value(c, r))
}

pub fn ratio(c: f64) -> Symbol {
    Symbol::radial(format!("P_{c}/P_inf"), move |r| pc_value(c, r) / p_infty_value(r))
}

pub fn sigma(c: f64) -> Symbol {
    Symbol::radial(format!("sigma_{c}"), move |r| sigma_value(c, r))
}

/// `|ξ|²`, i.e. `-Δ`.
pub fn laplacian() -> Symbol {
    Symbol::radial("|xi|^2", |r| r * r)
}

/// `(1 + |ξ|²)^{s/2}`.
pub fn bessel(s: f64) -> Symbol {
    Symbol::radial(format!("<xi>^{s}"), move |r| (1.0 + r * r).powf(s / 2.0))
}

/// Result of one sampling check. `worst_ratio <= 1` means every sampled
/// inequality held; for derivative checks it is the empirical constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub check: String,
    pub c: f64,
    pub samples: usize,
    pub worst_ratio: f64,
    pub argmax_xi: f64,
    pub violations: usize,
    pub first_violation: Option<f64>,
}

impl BoundReport {
    fn new(check: impl Into<String>, c: f64, samples: usize) -> Self {
        Self {
            check: check.into(),
            c,
            samples,
            worst_ratio: 0.0,
            argmax_xi: 0.0,
            violations: 0,
            first_violation: None,
        }
    }

    fn record(&mut self, ratio: f64, xi: f64, violated: bool) {
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
            self.argmax_xi = xi;
        }
        if violated {
            self.violations += 1;
            self.first_violation.get_or_insert(xi);
        }
    }
}

/// Log-uniform radii in `[1e-6, 1e6]`.
pub fn log_uniform_radii(samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| 10f64.powf(rng.random_range(-6.0..6.0))).collect()
}

fn require_c(c: f64) -> Result<()> {
    if c >= 2.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Precondition(format!("symbol checks assume c >= 2, got {c}")))
    }
}

/// Two-sided comparability of `P_c` with `|ξ|² + 1` inside `|ξ| <= √3 c/2`
/// and with `c|ξ| + 1` outside, plus `P_c <= P_∞` everywhere.
pub fn check_pointwise_bounds(c: f64, samples: usize, seed: u64) -> Result<BoundReport> {
    require_c(c)?;
    let threshold = 3f64.sqrt() * c / 2.0;
    let mut report = BoundReport::new("pointwise", c, samples);
    for r in log_uniform_radii(samples, seed) {
        let value = pc_value(c, r);
        let (lower, upper) = if r <= threshold {
            ((r * r + 1.0) / 2.0, r * r + 1.0)
        } else {
            ((c * r + 1.0) / 2.0, c * r + 1.0)
        };
        let below = lower / value;
        let above = value / upper;
        let global = value / p_infty_value(r);
        let worst = below.max(above).max(global);
        let violated = value < lower || value > upper || value > p_infty_value(r);
        report.record(worst, r, violated);
    }
    Ok(report)
}

/// `|P_c(ξ) - P_∞(ξ)| <= |ξ|⁴ / c²`.
pub fn check_difference_bound(c: f64, samples: usize, seed: u64) -> Result<BoundReport> {
    require_c(c)?;
    let mut report = BoundReport::new("difference", c, samples);
    for r in log_uniform_radii(samples, seed) {
        let bound = r.powi(4) / (c * c);
        let diff = difference_value(c, r).abs();
        let ratio = if bound > 0.0 { diff / bound } else { 0.0 };
        report.record(ratio, r, diff > bound);
    }
    Ok(report)
}

/// Which function the derivative check differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeTarget {
    /// `a = 1/P_∞ - 1/P_c`, weighted by `|ξ|^{|α|} max{c², c(|ξ|²+1)^{1/2}}`.
    InverseDifference,
    /// `P_c / P_∞`, weighted by `|ξ|^{|α|}`.
    Ratio,
}

impl DerivativeTarget {
    pub fn tag(self) -> &'static str {
        match self {
            DerivativeTarget::InverseDifference => "a",
            DerivativeTarget::Ratio => "ratio",
        }
    }
}

fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    // each entry lists the axes differentiated, e.g. [0, 1] = ∂₀∂₁
    match order {
        0 => vec![vec![]],
        1 => (0..dim).map(|i| vec![i]).collect(),
        2 => (0..dim).flat_map(|i| (i..dim).map(move |j| vec![i, j])).collect(),
        _ => unreachable!("orders above 2 are rejected earlier"),
    }
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, xi: &[f64], axes: &[usize], step: f64) -> f64 {
    let shifted = |offsets: &[(usize, f64)]| {
        let mut p = xi.to_vec();
        for &(axis, delta) in offsets {
            p[axis] += delta;
        }
        f(&p)
    };
    match axes {
        [] => f(xi),
        [i] => (shifted(&[(*i, step)]) - shifted(&[(*i, -step)])) / (2.0 * step),
        [i, j] if i == j => {
            (shifted(&[(*i, step)]) - 2.0 * f(xi) + shifted(&[(*i, -step)])) / (step * step)
        }
        [i, j] => {
            (shifted(&[(*i, step), (*j, step)]) - shifted(&[(*i, step), (*j, -step)])
                - shifted(&[(*i, -step), (*j, step)])
                + shifted(&[(*i, -step), (*j, -step)]))
                / (4.0 * step * step)
        }
        _ => unreachable!(),
    }
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = radius(&v);
        if (0.1..=1.0).contains(&norm) {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Empirical constants `sup |∇^α m(ξ)| |ξ|^{|α|} w(ξ)` for every order
/// `0..=max_order`, by central differences with step `1e-4 max(|ξ|, 1)`.
/// Returns one report per order; `violations` stays zero (the check is about
/// uniformity in `c`, asserted by callers).
pub fn check_derivative_bounds(
    c: f64,
    target: DerivativeTarget,
    max_order: usize,
    samples: usize,
    dim: usize,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    require_c(c)?;
    if max_order > 2 {
        return Err(Error::Precondition(format!("derivative order {max_order} > 2")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::Precondition(format!("dimension {dim} not in 1..=3")));
    }
    let f: Box<dyn Fn(&[f64]) -> f64> = match target {
        DerivativeTarget::InverseDifference => Box::new(move |xi: &[f64]| inverse_difference_value(c, radius(xi))),
        DerivativeTarget::Ratio => Box::new(move |xi: &[f64]| {
            let r = radius(xi);
            pc_value(c, r) / p_infty_value(r)
        }),
    };
    let mut reports: Vec<BoundReport> = (0..=max_order)
        .map(|k| BoundReport::new(format!("{}{k}", target.tag()), c, samples))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1ff);
    for r in log_uniform_radii(samples, seed) {
        let dir = random_direction(&mut rng, dim);
        let xi: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let step = 1e-4 * r.max(1.0);
        let weight = match target {
            DerivativeTarget::InverseDifference => (c * c).max(c * (r * r + 1.0).sqrt()),
            DerivativeTarget::Ratio => 1.0,
        };
        for (order, report) in reports.iter_mut().enumerate() {
            let mut sup: f64 = 0.0;
            for axes in multi_indices(dim, order) {
                let d = central_difference(&*f, &xi, &axes, step);
                if !d.is_finite() {
                    return Err(Error::StepSize { xi: r, step });
                }
                sup = sup.max(d.abs());
            }
            report.record(sup * r.powi(order as i32) * weight, r, false);
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `P_c(r) - 1 = (c²/2) Σ_{k>=1} binom(1/2, k) t^k`, `t = 4r²/c²`; valid for `t < 1`.
    fn pc_series(c: f64, r: f64) -> f64 {
        let t = 4.0 * r * r / (c * c);
        assert!(t < 0.5);
        let mut coeff = 0.5;
        let mut power = t;
        let mut sum = 0.0;
        for k in 1..60 {
            sum += coeff * power;
            coeff *= (0.5 - k as f64) / (k as f64 + 1.0);
            power *= t;
        }
        c * c / 2.0 * sum + 1.0
    }

    #[test]
    fn pc_examples() {
        for c in [0.5, 2.0, 100.0] {
            assert_eq!(pc_value(c, 0.0), 1.0);
        }
        assert!((pc_value(2.0, 1.0) - 1.828_427_124_746_190).abs() < 1e-15);
        let large = pc_value(1e6, 1.0);
        assert!((large - 2.0).abs() < 1e-11);
        assert!((large - pc_series(1e6, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn stable_matches_series_and_naive() {
        for &c in &[2.0, 10.0, 1e3] {
            for &r in &[1e-3 * c, 0.05 * c, 0.2 * c] {
                assert!((pc_value(c, r) - pc_series(c, r)).abs() <= 1e-14 * pc_value(c, r));
            }
            for k in 0..50 {
                let r = c / 100.0 * 1.2f64.powi(k);
                let naive = (c * c * r * r + c.powi(4) / 4.0).sqrt() - c * c / 2.0 + 1.0;
                let stable = pc_value(c, r);
                assert!((naive - stable).abs() <= 1e-9 * stable, "c={c} r={r}");
            }
        }
    }

    #[test]
    fn p_infty_examples() {
        let s = p_infty();
        assert_eq!(s.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(s.eval(&[2.0]), 5.0);
        let a = s.eval(&[0.6, 0.8, 0.0]);
        let b = s.eval(&[0.0, 0.0, 1.0]);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn pointwise_examples() {
        let v = pc_value(2.0, 1.0);
        assert!(1.0 <= v && v <= 2.0);
        let v10 = pc_value(2.0, 10.0);
        assert!((v10 - (404f64.sqrt() - 1.0)).abs() < 1e-13);
        assert!(10.5 <= v10 && v10 <= 21.0);
    }

    #[test]
    fn difference_examples() {
        let d = difference_value(2.0, 1.0).abs();
        assert!((d - (2.0 - 1.828_427_124_746_190)).abs() < 1e-14);
        assert!(d <= 0.25);
        assert_eq!(difference_value(2.0, 0.0), 0.0);
    }

    #[test]
    fn inverse_difference_is_nonpositive_and_small() {
        let a = inverse_difference_value(2.0, 1.0);
        assert!((a.abs() - (1.0 / (8f64.sqrt() - 1.0) - 0.5)).abs() < 1e-14);
        assert!(a.abs() <= 4.0 * (0.25f64).min(1.0 / (2.0 * 2f64.sqrt())));
        for r in log_uniform_radii(10_000, 4) {
            for c in [2.0, 16.0, 512.0] {
                assert!(inverse_difference_value(c, r) <= 0.0);
                assert!(pc_value(c, r) / p_infty_value(r) <= 1.0);
            }
        }
    }

    #[test]
    fn small_sweeps_have_no_violations() {
        for c in [2.0, 3.0, 64.0] {
            assert_eq!(check_pointwise_bounds(c, 5000, 1).unwrap().violations, 0);
            assert_eq!(check_difference_bound(c, 5000, 2).unwrap().violations, 0);
        }
        assert!(check_pointwise_bounds(1.0, 10, 1).is_err());
    }

    #[test]
    fn derivative_check_matches_analytic_first_derivative() {
        // ∂_r (P_c/P_∞) in closed form along the first axis for n = 1
        let c = 4.0;
        let f = |r: f64| pc_value(c, r) / p_infty_value(r);
        let df = |r: f64| {
            let dpc = c * c * r / (c * c * r * r + c.powi(4) / 4.0).sqrt();
            (dpc * p_infty_value(r) - pc_value(c, r) * 2.0 * r) / p_infty_value(r).powi(2)
        };
        let r: f64 = 1.7;
        let step = 1e-4 * r.max(1.0);
        let g = |x: &[f64]| f(x[0].abs());
        let fd = central_difference(&g, &[r], &[0], step);
        assert!((fd - df(r)).abs() < 1e-8);
        let reports = check_derivative_bounds(c, DerivativeTarget::Ratio, 2, 200, 2, 3).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports[0].worst_ratio <= 1.0);
        assert!(check_derivative_bounds(c, DerivativeTarget::Ratio, 3, 10, 2, 3).is_err());
    }
}
