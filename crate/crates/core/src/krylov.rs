//! Restarted GMRES for real, matrix-free operators.
//!
//! An optional projection is applied to every residual and Krylov vector so
//! the iteration stays inside an invariant subspace (here: the fields
//! invariant under the lattice symmetry group).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Target relative residual `‖b - A x‖ / ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Fails with [`Error::Stagnation`] when the residual drops by less than
    /// 0.1% over this many iterations.
    pub stagnation_window: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-10, restart: 50, max_iter: 500, stagnation_window: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual of the returned `x`.
    pub residual: f64,
    /// Relative residual estimate after each inner iteration.
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn gmres(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut project: impl FnMut(&mut [f64]),
    b: &[f64],
    opts: &GmresOptions,
) -> Result<GmresOutcome> {
    let len = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; len];
    let mut history = Vec::new();
    if b_norm == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, residual: 0.0, history });
    }
    let restart = opts.restart.max(1);
    let mut total = 0;
    let mut scratch = vec![0.0; len];

    loop {
        // true residual r = b - A x
        apply(&x, &mut scratch);
        let mut r: Vec<f64> = b.iter().zip(&scratch).map(|(bi, ai)| bi - ai).collect();
        project(&mut r);
        let beta = norm(&r);
        let relative = beta / b_norm;
        if relative <= opts.tol {
            return Ok(GmresOutcome { x, iterations: total, residual: relative, history });
        }
        if total >= opts.max_iter {
            return Err(Error::MaxIterations { iterations: total, residual: relative });
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns after rotation, stored as R (upper triangle)
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;

        let mut inner = 0;
        while inner < restart && total < opts.max_iter {
            let mut w = vec![0.0; len];
            apply(&basis[inner], &mut w);
            project(&mut w);
            let mut column = vec![0.0; inner + 2];
            for (i, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                column[i] = h;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= h * vk;
                }
            }
            let h_next = norm(&w);
            column[inner + 1] = h_next;

            for i in 0..inner {
                let temp = cs[i] * column[i] + sn[i] * column[i + 1];
                column[i + 1] = -sn[i] * column[i] + cs[i] * column[i + 1];
                column[i] = temp;
            }
            let denom = column[inner].hypot(column[inner + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (column[inner] / denom, column[inner + 1] / denom) };
            column[inner] = denom;
            column[inner + 1] = 0.0;
            g[inner + 1] = -s * g[inner];
            g[inner] *= c;
            cs.push(c);
            sn.push(s);
            hess.push(column);

            inner += 1;
            total += 1;
            let estimate = g[inner].abs() / b_norm;
            history.push(estimate);

            let window = opts.stagnation_window;
            if window > 0 && history.len() > window {
                let before = history[history.len() - 1 - window];
                if estimate > 0.999 * before {
                    return Err(Error::Stagnation { iterations: total, residual: estimate });
                }
            }
            if estimate <= opts.tol || h_next <= 1e-14 * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back-substitution for the least-squares coefficients
        let mut y = vec![0.0; inner];
        for i in (0..inner).rev() {
            let mut acc = g[i];
            for j in i + 1..inner {
                acc -= hess[j][i] * y[j];
            }
            y[i] = if hess[i][i] == 0.0 { 0.0 } else { acc / hess[i][i] };
        }
        for (j, yj) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&basis[j]) {
                *xk += yj * vk;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        // A = I + 0.3 * shift - 0.2 * diag
        let n = 40;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = x[i] * (1.0 - 0.2 * (i as f64 / n as f64)) + 0.3 * x[(i + 1) % n];
            }
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&truth, &mut b);
        let out = gmres(apply, |_| {}, &b, &GmresOptions { tol: 1e-12, restart: 10, ..Default::default() }).unwrap();
        assert!(out.residual <= 1e-12);
        let err: f64 = out.x.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn indefinite_diagonal() {
        let diag: Vec<f64> = (0..30).map(|i| if i == 3 { -0.5 } else { 1.0 + i as f64 * 0.1 }).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..x.len() {
                out[i] = diag[i] * x[i];
            }
        };
        let b = vec![1.0; 30];
        let out = gmres(apply, |_| {}, &b, &GmresOptions::default()).unwrap();
        assert!((out.x[3] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn zero_rhs_and_stagnation() {
        let apply = |x: &[f64], out: &mut [f64]| out.copy_from_slice(x);
        let out = gmres(apply, |_| {}, &[0.0; 5], &GmresOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);

        // down-shift: e0 is orthogonal to the range, so no progress is possible
        let singular = |x: &[f64], out: &mut [f64]| {
            out[0] = 0.0;
            out[1..].copy_from_slice(&x[..x.len() - 1]);
        };
        let mut b = vec![0.0; 8];
        b[0] = 1.0;
        let opts = GmresOptions { stagnation_window: 5, restart: 3, ..Default::default() };
        assert!(matches!(gmres(singular, |_| {}, &b, &opts), Err(Error::Stagnation { .. })));
    }
}
