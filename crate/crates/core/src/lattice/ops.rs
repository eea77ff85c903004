use num_complex::Complex64;

use super::{fold_mode, GridSpec, LatticeField, Mode, SpectralField, WalkMeasure};
use crate::error::{invalid, Result};

/// Fold arbitrary modes onto the box of side `N`: `(Pi_N phi)(k) = sum_{m} phi(k + N m)`.
pub fn fold_spectrum(modes: impl IntoIterator<Item = (Mode, Complex64)>, grid: GridSpec) -> SpectralField {
    let mut out = SpectralField::zeros(grid);
    for (k, c) in modes {
        let idx = grid.index_unchecked(fold_mode(k, grid.n()));
        out.coeffs_mut()[idx] += c;
    }
    out
}

/// Periodization `Pi_N` of a spectrum supported on any odd box.
pub fn pi_n(phi_hat: &SpectralField, grid: GridSpec) -> SpectralField {
    let src = phi_hat.grid();
    fold_spectrum(phi_hat.coeffs().iter().enumerate().map(|(i, &c)| (src.mode(i), c)), grid)
}

/// Sharp projector `P_K`: keep the modes with `|k|_inf < K / 2`.
/// `lattice` is the grid the field belongs to; `K` may not exceed its side.
pub fn project_below(phi_hat: &SpectralField, k: usize, lattice: GridSpec) -> Result<SpectralField> {
    if k == 0 || k > lattice.n() {
        return Err(invalid(format!("projection size K = {k} must satisfy 1 <= K <= N = {}", lattice.n())));
    }
    // Largest admissible |k_i| is ceil(K/2) - 1.
    let half = (k as i64 + 1) / 2 - 1;
    let side = (2 * half + 1).min(phi_hat.grid().n() as i64) as usize;
    let out = GridSpec::mode_box(side)?;
    Ok(phi_hat.resized(out))
}

/// Fourier multiplier `c_k -> m(k) c_k`.
pub fn apply_multiplier(phi_hat: &SpectralField, m: impl Fn(Mode) -> f64) -> SpectralField {
    phi_hat.map_modes(|k, c| c * m(k))
}

/// Random-walk Laplacian in Fourier variables, `c_k -> -|k|^2 f(eps k) c_k`,
/// for a field on the lattice box.
pub fn apply_laplacian_spectral(phi_hat: &SpectralField, mu: &WalkMeasure) -> SpectralField {
    let grid = phi_hat.grid();
    apply_multiplier(phi_hat, |k| mu.laplacian_symbol(grid, k))
}

/// Random-walk Laplacian as a periodic stencil on lattice values.
pub fn laplacian_stencil(phi: &LatticeField, mu: &WalkMeasure) -> LatticeField {
    let grid = phi.grid();
    let eps2 = grid.epsilon().powi(2);
    LatticeField::from_fn(grid, |x| {
        mu.atoms()
            .iter()
            .map(|a| phi.get([x[0] + a.site[0], x[1] + a.site[1]]) * a.weight)
            .sum::<Complex64>()
            / eps2
    })
}

/// Heat semigroup `e^{t Delta}` of the random-walk Laplacian on a lattice field.
pub fn heat_semigroup(phi_hat: &SpectralField, t: f64, mu: &WalkMeasure) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat semigroup time must be >= 0, got {t}")));
    }
    let grid = phi_hat.grid();
    Ok(apply_multiplier(phi_hat, |k| (t * mu.laplacian_symbol(grid, k)).exp()))
}
