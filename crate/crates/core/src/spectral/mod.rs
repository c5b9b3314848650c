//! Periodic Cartesian lattice, discrete Fourier transforms, Fourier multipliers,
//! spectral derivatives and discrete Sobolev norms.
//!
//! Real space is `[-L, L)^n` sampled at `x_j = -L + j h`, `h = 2L/N`. The dual
//! lattice is `ξ = (π/L) k` for `k ∈ {-N/2, …, N/2 - 1}`, stored in FFT order.
//! Spectral coefficients are Fourier-series coefficients, so a constant field
//! `1` has `coeff(0) = 1` and Parseval reads `‖f‖₂² = (2L)^n Σ |coeff|²`.

mod fft;
pub mod io;
pub(crate) mod symmetry;

use std::fmt;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::symbols::Symbol;

pub use symmetry::{radial_defect, symmetrize_radial};

/// Relative threshold on the imaginary part left after a multiplier is applied.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-12;

/// Periodic lattice on `[-L, L)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("grid dimension {dim} not in 1..=3")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 16, got {points}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!("half-width must be positive, got {half_width}")));
        }
        Ok(Self { dim, points, half_width })
    }

    /// Desk-scale defaults: `n=1: N=1024, L=20π`; `n=2: N=256, L=20`; `n=3: N=64, L=15`.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            1 => Self::new(1, 1024, 20.0 * std::f64::consts::PI),
            2 => Self::new(2, 256, 20.0),
            3 => Self::new(3, 64, 15.0),
            _ => Err(Error::InvalidParameter(format!("grid dimension {dim} not in 1..=3"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Total number of samples, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(2L)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// `h^n`, the quadrature weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Physical coordinates along one axis.
    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|j| -self.half_width + j as f64 * h).collect()
    }

    /// Angular frequencies along one axis in FFT order.
    pub fn freqs(&self) -> Vec<f64> {
        let n = self.points as i64;
        let scale = std::f64::consts::PI / self.half_width;
        (0..n)
            .map(|k| {
                let signed = if k < n / 2 { k } else { k - n };
                scale * signed as f64
            })
            .collect()
    }

    /// Index along each axis of flat index `idx`.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = idx;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.points;
            rest /= self.points;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Physical position of flat index `idx` (unused axes are zero).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let multi = self.multi_index(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = -self.half_width + multi[axis] as f64 * h;
        }
        x
    }

    /// Frequency vector of the flat spectral index `idx` (unused axes are zero).
    pub fn frequency(&self, idx: usize) -> [f64; 3] {
        let multi = self.multi_index(idx);
        let n = self.points as i64;
        let scale = std::f64::consts::PI / self.half_width;
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            let k = multi[axis] as i64;
            let signed = if k < n / 2 { k } else { k - n };
            xi[axis] = scale * signed as f64;
        }
        xi
    }

    /// `|ξ|²` on the whole dual lattice, flat FFT order.
    pub fn frequency_norms_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| self.frequency(idx).iter().map(|x| x * x).sum())
            .collect()
    }

    /// `|x|` on the whole lattice.
    pub fn radii(&self) -> Vec<f64> {
        (0..self.len())
            .map(|idx| self.position(idx).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    fn is_nyquist(&self, k: usize) -> bool {
        k == self.points / 2
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} N={} L={}", self.dim, self.points, self.half_width)
    }
}

/// Real samples on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample at index {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Samples `f(x)` at every lattice point; `x` has `grid.dim()` entries.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|idx| f(&grid.position(idx)[..dim])).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn add(&self, other: &Field) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature inner product `h^n Σ f g`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{} vs {}", self.grid, other.grid)))
        }
    }
}

/// Fourier-series coefficients on the dual lattice, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} samples",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `∫ m(ξ) |f̂(ξ)|² dξ / (2π)^n` on the lattice, i.e. `(2L)^n Σ m_k |coeff_k|²`.
    pub fn weighted_energy(&self, weight: impl Fn(usize) -> f64) -> f64 {
        let sum: f64 = self.coeffs.iter().enumerate().map(|(k, c)| weight(k) * c.norm_sqr()).sum();
        self.grid.volume() * sum
    }

    /// Largest `|coeff(k) - conj(coeff(-k))|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.grid.points;
        let dim = self.grid.dim;
        let mut worst: f64 = 0.0;
        for idx in 0..self.coeffs.len() {
            let multi = self.grid.multi_index(idx);
            let mut mirror = [0usize; 3];
            for axis in 0..dim {
                mirror[axis] = (n - multi[axis]) % n;
            }
            let partner = self.coeffs[self.grid.flat_index(&mirror)];
            worst = worst.max((self.coeffs[idx] - partner.conj()).norm());
        }
        worst
    }
}

/// Forward transform; `inverse(forward(f)) == f` up to roundoff.
pub fn forward(f: &Field) -> SpectralField {
    let grid = f.grid;
    let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform(&mut data, grid.dim, grid.points, FftDirection::Forward);
    let norm = 1.0 / grid.len() as f64;
    for c in &mut data {
        *c *= norm;
    }
    SpectralField { grid, coeffs: data }
}

/// Complex-valued inverse transform.
pub fn inverse_complex(s: &SpectralField) -> Vec<Complex64> {
    let mut data = s.coeffs.clone();
    fft::transform(&mut data, s.grid.dim, s.grid.points, FftDirection::Inverse);
    data
}

/// Inverse transform onto a real field; fails if the imaginary part is not roundoff.
pub fn inverse(s: &SpectralField) -> Result<Field> {
    let data = inverse_complex(s);
    real_part_checked(s.grid, data, None)
}

fn real_part_checked(grid: Grid, data: Vec<Complex64>, reference: Option<f64>) -> Result<Field> {
    let mut re_max: f64 = 0.0;
    let mut im_max: f64 = 0.0;
    for c in &data {
        re_max = re_max.max(c.re.abs());
        im_max = im_max.max(c.im.abs());
    }
    let scale = reference.unwrap_or(re_max).max(re_max);
    let threshold = IMAGINARY_RESIDUE_TOL * scale;
    if im_max > threshold && im_max > f64::MIN_POSITIVE {
        return Err(Error::SymmetryViolation { residue: im_max, threshold });
    }
    Ok(Field { grid, values: data.into_iter().map(|c| c.re).collect() })
}

/// A symbol tabulated on one grid's dual lattice.
#[derive(Debug, Clone)]
pub struct Multiplier {
    grid: Grid,
    label: String,
    table: Vec<f64>,
}

impl Multiplier {
    pub fn new(symbol: &Symbol, grid: &Grid) -> Result<Self> {
        let dim = grid.dim;
        let mut table = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let value = symbol.eval(&grid.frequency(idx)[..dim]);
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "symbol {} not finite at lattice index {idx}",
                    symbol.label()
                )));
            }
            table.push(value);
        }
        Ok(Self { grid: *grid, label: symbol.label().to_string(), table })
    }

    pub fn from_table(grid: Grid, label: impl Into<String>, table: Vec<f64>) -> Result<Self> {
        if table.len() != grid.len() {
            return Err(Error::GridMismatch("multiplier table length".into()));
        }
        Ok(Self { grid, label: label.into(), table })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn sup_abs(&self) -> f64 {
        self.table.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise reciprocal; every entry must be nonzero.
    pub fn recip(&self) -> Result<Self> {
        if self.table.iter().any(|&v| v == 0.0) {
            return Err(Error::InvalidParameter(format!("{} vanishes on the lattice", self.label)));
        }
        Ok(Self {
            grid: self.grid,
            label: format!("1/({})", self.label),
            table: self.table.iter().map(|v| 1.0 / v).collect(),
        })
    }

    pub fn apply_spectral(&self, s: &mut SpectralField) {
        for (c, m) in s.coeffs.iter_mut().zip(&self.table) {
            *c *= *m;
        }
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", f.grid, self.grid)));
        }
        let mut s = forward(f);
        self.apply_spectral(&mut s);
        let data = inverse_complex(&s);
        real_part_checked(f.grid, data, Some(f.max_abs()))
    }

    /// `(2L)^n Σ m_k |f̂_k|²`, i.e. `⟨m(D) f, f⟩`.
    pub fn quadratic_form(&self, f: &Field) -> f64 {
        let s = forward(f);
        s.weighted_energy(|k| self.table[k])
    }
}

/// Applies `sym(D)` to `f`.
pub fn apply_multiplier(sym: &Symbol, f: &Field) -> Result<Field> {
    Multiplier::new(sym, &f.grid)?.apply(f)
}

fn derivative_along(s: &SpectralField, axis: usize, order: u32) -> Result<Field> {
    let grid = s.grid;
    let mut out = s.clone();
    let scale = std::f64::consts::PI / grid.half_width;
    let n = grid.points as i64;
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let k = grid.multi_index(idx)[axis];
        if order % 2 == 1 && grid.is_nyquist(k) {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let ki = k as i64;
        let signed = if ki < n / 2 { ki } else { ki - n };
        let ik = Complex64::new(0.0, scale * signed as f64);
        *c *= ik.powu(order);
    }
    let data = inverse_complex(&out);
    Ok(Field { grid, values: data.into_iter().map(|c| c.re).collect() })
}

/// Spectral partial derivatives `∂_i f`, one field per axis.
pub fn gradient(f: &Field) -> Vec<Field> {
    let s = forward(f);
    (0..f.grid.dim)
        .map(|axis| derivative_along(&s, axis, 1).expect("derivative of a real field is real"))
        .collect()
}

/// Mixed second derivatives `∂_i ∂_j f` for `i <= j`, in lexicographic order.
pub fn hessian(f: &Field) -> Vec<Field> {
    let grad = gradient(f);
    let mut out = Vec::new();
    for (i, gi) in grad.iter().enumerate() {
        let gs = forward(gi);
        for j in i..f.grid.dim {
            out.push(derivative_along(&gs, j, 1).expect("derivative of a real field is real"));
        }
    }
    out
}

/// Discrete `L^q` norm `(h^n Σ |f|^q)^{1/q}`; `q = ∞` gives the max norm.
pub fn norm_lq(f: &Field, q: f64) -> f64 {
    assert!(q >= 1.0, "L^q norm needs q >= 1");
    if q.is_infinite() {
        return f.max_abs();
    }
    let sum: f64 = if q == 2.0 {
        f.values.iter().map(|v| v * v).sum()
    } else {
        f.values.iter().map(|v| v.abs().powf(q)).sum()
    };
    (f.grid.cell_volume() * sum).powf(1.0 / q)
}

/// `‖f‖_q + Σ_i ‖∂_i f‖_q`.
pub fn norm_w1q(f: &Field, q: f64) -> f64 {
    norm_lq(f, q) + gradient(f).iter().map(|g| norm_lq(g, q)).sum::<f64>()
}

/// `‖f‖_q + Σ_i ‖∂_i f‖_q + Σ_{i<=j} ‖∂_i ∂_j f‖_q`.
pub fn norm_w2q(f: &Field, q: f64) -> f64 {
    norm_w1q(f, q) + hessian(f).iter().map(|g| norm_lq(g, q)).sum::<f64>()
}

/// `(‖f‖₂² + ‖∇f‖₂²)^{1/2}`.
pub fn norm_h1(f: &Field) -> f64 {
    let base = norm_lq(f, 2.0).powi(2);
    let grad: f64 = gradient(f).iter().map(|g| norm_lq(g, 2.0).powi(2)).sum();
    (base + grad).sqrt()
}

/// The solution-space norm `‖f‖_{H¹} + ‖f‖_{W^{1,q}}`.
pub fn norm_h1_w1q(f: &Field, q: f64) -> f64 {
    norm_h1(f) + norm_w1q(f, q)
}

/// `‖f‖_{H^s}` through the multiplier `(1 + |ξ|²)^{s/2}`.
pub fn norm_hs(f: &Field, s: f64) -> f64 {
    let xi2 = f.grid.frequency_norms_sq();
    forward(f).weighted_energy(|k| (1.0 + xi2[k]).powf(s)).sqrt()
}

/// Conventional sampling of `sign(v) |v|^p`.
pub fn signed_power(v: f64, p: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(p)
    }
}

/// Orthogonal projection onto the band `|k_i| < N/3` on every axis (2/3 rule),
/// for use with integer exponents.
pub fn dealias_two_thirds(f: &Field) -> Field {
    let grid = f.grid;
    let mut s = forward(f);
    let n = grid.points;
    let cutoff = n / 3;
    for (idx, c) in s.coeffs.iter_mut().enumerate() {
        let multi = grid.multi_index(idx);
        let outside = (0..grid.dim).any(|axis| {
            let k = multi[axis];
            let signed = if k < n / 2 { k } else { n - k };
            signed > cutoff
        });
        if outside {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let data = inverse_complex(&s);
    Field { grid, values: data.into_iter().map(|c| c.re).collect() }
}

/// Evaluates the trigonometric interpolant of `f` at the dilated lattice
/// `scale · x` of `target`, i.e. returns `g(x) = f(scale·x)` sampled on `target`.
pub fn resample_dilated(f: &Field, target: &Grid, scale: f64) -> Result<Field> {
    let source = f.grid;
    if source.dim != target.dim {
        return Err(Error::GridMismatch(format!("{} vs {}", source, target)));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!("dilation factor {scale}")));
    }
    let needed = scale * target.half_width;
    if needed > source.half_width * (1.0 + 1e-12) {
        return Err(Error::DomainOverflow { needed, available: source.half_width });
    }
    let ns = source.points;
    let nt = target.points;
    let xs = source.coords();
    let freqs: Vec<f64> = (1..ns / 2).map(|k| std::f64::consts::PI * k as f64 / source.half_width).collect();
    let nyquist = std::f64::consts::PI * (ns / 2) as f64 / source.half_width;
    let kernel = |d: f64| {
        let mut acc = 1.0 + (nyquist * d).cos();
        for &xi in &freqs {
            acc += 2.0 * (xi * d).cos();
        }
        acc / ns as f64
    };
    let matrix: Vec<f64> = target
        .coords()
        .iter()
        .flat_map(|&x| {
            let y = scale * x;
            xs.iter().map(move |&xj| (y, xj)).collect::<Vec<_>>()
        })
        .map(|(y, xj)| kernel(y - xj))
        .collect();

    // contract one axis at a time; shape[a] is the current extent of axis a
    let mut shape = vec![ns; source.dim];
    let mut data = f.values.clone();
    for axis in 0..source.dim {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut next = vec![0.0; outer * nt * inner];
        for o in 0..outer {
            for t in 0..nt {
                let row = &matrix[t * ns..(t + 1) * ns];
                for i in 0..inner {
                    let mut acc = 0.0;
                    for (j, w) in row.iter().enumerate() {
                        acc += w * data[(o * ns + j) * inner + i];
                    }
                    next[(o * nt + t) * inner + i] = acc;
                }
            }
        }
        shape[axis] = nt;
        data = next;
    }
    Field::new(*target, data)
}
