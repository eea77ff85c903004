use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::{GridSpec, Mode};
use crate::error::{invalid, Result};

/// Values `phi(eps l)` on the sites of the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl LatticeField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "lattice field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(LatticeField { grid, values })
    }

    pub fn from_real(grid: GridSpec, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_fn(grid: GridSpec, f: impl FnMut(Mode) -> Complex64) -> Self {
        LatticeField {
            grid,
            values: grid.modes().map(f).collect(),
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        LatticeField {
            grid,
            values: vec![Complex64::new(c, 0.0); grid.len()],
        }
    }

    /// Indicator of a single site.
    pub fn indicator(grid: GridSpec, site: Mode) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
        values[grid.index_wrapped(site)] = Complex64::new(1.0, 0.0);
        LatticeField { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn get(&self, site: Mode) -> Complex64 {
        self.values[self.grid.index_wrapped(site)]
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &LatticeField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// `(2 pi)^{-2} int phi` via the lattice Riemann sum, i.e. the site average.
    pub fn average(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn pointwise_mul(&self, other: &LatticeField) -> LatticeField {
        LatticeField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> LatticeField {
        LatticeField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Fourier coefficients on a centred odd box of modes; every mode outside the
/// box is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(invalid(format!(
                "spectral field needs {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl FnMut(Mode) -> Complex64) -> Self {
        SpectralField {
            grid,
            coeffs: grid.modes().map(f).collect(),
        }
    }

    /// `c e^{i<k,x>}` scaled so that its coefficient at `k` equals `c`.
    pub fn single_mode(grid: GridSpec, k: Mode, c: Complex64) -> Result<Self> {
        let idx = grid
            .index(k)
            .ok_or_else(|| invalid(format!("mode {k:?} outside box of side {}", grid.n())))?;
        let mut f = Self::zeros(grid);
        f.coeffs[idx] = c;
        Ok(f)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at `k`, zero outside the box.
    pub fn coeff(&self, k: Mode) -> Complex64 {
        self.grid
            .index(k)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    /// Apply `c_k -> m(k) c_k`.
    pub fn map_modes(&self, m: impl Fn(Mode, Complex64) -> Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| m(self.grid.mode(i), c))
                .collect(),
        }
    }

    /// Same field on a box of side `grid`; modes that do not fit are dropped.
    pub fn resized(&self, grid: GridSpec) -> SpectralField {
        SpectralField::from_fn(grid, |k| self.coeff(k))
    }

    /// Largest `|c_k - conj(c_{-k})|`; zero for real-valued fields.
    pub fn hermitian_defect(&self) -> f64 {
        self.grid.modes().fold(0.0, |m, k| {
            m.max((self.coeff(k) - self.coeff([-k[0], -k[1]]).conj()).norm())
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest coefficient difference, comparing on the union of both boxes.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        let big = if self.grid.n() >= other.grid.n() { self.grid } else { other.grid };
        big.modes()
            .fold(0.0, |m, k| m.max((self.coeff(k) - other.coeff(k)).norm()))
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }

    fn combine(&self, other: &SpectralField, op: impl Fn(Complex64, Complex64) -> Complex64) -> SpectralField {
        if self.grid == other.grid {
            return SpectralField {
                grid: self.grid,
                coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| op(a, b)).collect(),
            };
        }
        let big = if self.grid.n() >= other.grid.n() { self.grid } else { other.grid };
        SpectralField::from_fn(big, |k| op(self.coeff(k), other.coeff(k)))
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.combine(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.combine(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(Complex64::new(rhs, 0.0))
    }
}
