use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{GridSpec, LatticeField, Mode, SpectralField};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized two-dimensional FFT on an `n x n` row-major buffer.
pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            Fft2 {
                n,
                fwd: p.plan_fft_forward(n),
                inv: p.plan_fft_inverse(n),
            }
        })
    }

    /// `F[q] = sum_m a[m] e^{-2 pi i <q, m> / n}`.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.fwd, data);
    }

    /// `a[m] = sum_q F[q] e^{+2 pi i <q, m> / n}` (no `1/n^2`).
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inv, data);
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        plan.process(data);
        transpose(data, self.n);
        plan.process(data);
        transpose(data, self.n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Smallest integer `>= min` whose only prime factors are 2, 3 and 5.
pub fn fast_len(min: usize) -> usize {
    let mut m = min.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[inline]
fn wrap(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// Lattice Fourier transform `F phi(k) = eps^2 sum_l phi(eps l) e^{-i<k, eps l>}`
/// for `k` in the centred box of side `N`.
pub fn dft_lattice(phi: &LatticeField) -> SpectralField {
    let grid = phi.grid();
    let n = grid.n();
    let h = grid.half();
    let eps = grid.epsilon();
    let mut data = phi.values().to_vec();
    Fft2::new(n).forward(&mut data);
    SpectralField::from_fn(grid, |k| {
        let phase = Complex64::from_polar(eps * eps, eps * (h * (k[0] + k[1])) as f64);
        phase * data[wrap(k[0], n) * n + wrap(k[1], n)]
    })
}

/// Direct `O(N^4)` evaluation of the lattice Fourier transform.
pub fn dft_lattice_naive(phi: &LatticeField) -> SpectralField {
    let grid = phi.grid();
    let eps = grid.epsilon();
    SpectralField::from_fn(grid, |k| {
        grid.modes()
            .zip(phi.values())
            .map(|(l, v)| v * Complex64::from_polar(1.0, -eps * (k[0] * l[0] + k[1] * l[1]) as f64))
            .sum::<Complex64>()
            * (eps * eps)
    })
}

/// Values of the extension `E phi` at the sites of `grid`.
///
/// Coefficients outside the box of `grid` fold onto it: the extension of a
/// wider spectrum evaluated on the lattice only sees modes modulo `N`.
pub fn idft_lattice(phi_hat: &SpectralField, grid: GridSpec) -> LatticeField {
    let n = grid.n();
    let h = grid.half();
    let eps = grid.epsilon();
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
    let src = phi_hat.grid();
    for (i, &c) in phi_hat.coeffs().iter().enumerate() {
        let k = src.mode(i);
        let phase = Complex64::from_polar(1.0, -eps * (h * (k[0] + k[1])) as f64);
        data[wrap(k[0], n) * n + wrap(k[1], n)] += c * phase;
    }
    Fft2::new(n).inverse(&mut data);
    let s = 1.0 / (4.0 * PI * PI);
    for v in data.iter_mut() {
        *v *= s;
    }
    LatticeField::new(grid, data).expect("length matches grid")
}

/// `E phi(x) = (2 pi)^{-2} sum_k c_k e^{i<k, x>}`.
pub fn extension_eval(phi_hat: &SpectralField, x: [f64; 2]) -> Complex64 {
    let g = phi_hat.grid();
    phi_hat
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k: Mode = g.mode(i);
            c * Complex64::from_polar(1.0, k[0] as f64 * x[0] + k[1] as f64 * x[1])
        })
        .sum::<Complex64>()
        / (4.0 * PI * PI)
}

/// Values of the extension on the uniform `m x m` grid `x = 2 pi (a, b) / m`.
/// Exact when `m` is at least the side of the mode box.
pub(crate) fn to_grid_values(phi_hat: &SpectralField, fft: &Fft2, m: usize) -> Vec<Complex64> {
    let src = phi_hat.grid();
    debug_assert!(m >= src.n());
    let mut data = vec![Complex64::new(0.0, 0.0); m * m];
    for (i, &c) in phi_hat.coeffs().iter().enumerate() {
        let k = src.mode(i);
        data[wrap(k[0], m) * m + wrap(k[1], m)] += c;
    }
    fft.inverse(&mut data);
    let s = 1.0 / (4.0 * PI * PI);
    for v in data.iter_mut() {
        *v *= s;
    }
    data
}

/// Inverse of [`to_grid_values`] for fields whose spectrum fits in `out`.
pub(crate) fn from_grid_values(mut values: Vec<Complex64>, fft: &Fft2, m: usize, out: GridSpec) -> SpectralField {
    debug_assert!(m >= out.n());
    fft.forward(&mut values);
    let s = 4.0 * PI * PI / (m * m) as f64;
    SpectralField::from_fn(out, |k| values[wrap(k[0], m) * m + wrap(k[1], m)] * s)
}
