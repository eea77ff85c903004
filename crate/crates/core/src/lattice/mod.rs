//! Periodic lattice `(eps Z / 2 pi Z)^2` with `eps = 2 pi / N`, its Fourier
//! modes, random-walk Laplacians and the associated spectral operators.
//!
//! Sites `l` and modes `k` both live in the centred box `{-h, .., h}^2`,
//! `h = (N - 1) / 2`, stored row-major with the first component slow.

mod fft;
mod field;
pub mod io;
mod ops;
mod walk;

pub use fft::{dft_lattice, dft_lattice_naive, extension_eval, fast_len, idft_lattice};
pub(crate) use fft::{from_grid_values, to_grid_values, Fft2};
pub use field::{LatticeField, SpectralField};
pub use ops::{
    apply_laplacian_spectral, apply_multiplier, fold_spectrum, heat_semigroup, laplacian_stencil, pi_n,
    project_below,
};
pub use walk::{WalkAtom, WalkMeasure, WalkReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A lattice site or a Fourier mode.
pub type Mode = [i64; 2];

/// Odd side length of a centred square box of sites or modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct GridSpec {
    n: usize,
}

impl TryFrom<usize> for GridSpec {
    type Error = crate::error::PamError;
    fn try_from(n: usize) -> Result<Self> {
        GridSpec::new(n)
    }
}

impl From<GridSpec> for usize {
    fn from(g: GridSpec) -> usize {
        g.n
    }
}

impl GridSpec {
    /// Lattice of side `n`; `n` must be odd and at least 3.
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(invalid(format!("grid size N must be odd and >= 3, got {n}")));
        }
        Ok(GridSpec { n })
    }

    /// Any odd side, including 1. Used for mode boxes of products and projections.
    pub fn mode_box(n: usize) -> Result<Self> {
        if n % 2 == 0 {
            return Err(invalid(format!("mode box side must be odd, got {n}")));
        }
        Ok(GridSpec { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half(&self) -> i64 {
        (self.n as i64 - 1) / 2
    }

    /// Lattice spacing `2 pi / N`.
    pub fn epsilon(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn contains(&self, k: Mode) -> bool {
        let h = self.half();
        k[0].abs() <= h && k[1].abs() <= h
    }

    pub fn index(&self, k: Mode) -> Option<usize> {
        self.contains(k).then(|| self.index_unchecked(k))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, k: Mode) -> usize {
        let h = self.half();
        ((k[0] + h) as usize) * self.n + (k[1] + h) as usize
    }

    /// Index of the site `l` reduced periodically into the box.
    pub fn index_wrapped(&self, l: Mode) -> usize {
        self.index_unchecked(fold_mode(l, self.n))
    }

    pub fn mode(&self, idx: usize) -> Mode {
        let h = self.half();
        [(idx / self.n) as i64 - h, (idx % self.n) as i64 - h]
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }

    /// Largest Euclidean norm of a mode in the box.
    pub fn max_radius(&self) -> f64 {
        self.half() as f64 * std::f64::consts::SQRT_2
    }

    /// Box holding all sums `k + l` of modes from `self` and `other`.
    pub fn sum_box(&self, other: &GridSpec) -> GridSpec {
        GridSpec { n: self.n + other.n - 1 }
    }
}

/// Fold a mode into the centred representative of its class modulo `n`
/// (component-wise into `(-n/2, n/2)` for odd `n`).
pub fn fold_mode(k: Mode, n: usize) -> Mode {
    let n = n as i64;
    let h = (n - 1) / 2;
    [(k[0] + h).rem_euclid(n) - h, (k[1] + h).rem_euclid(n) - h]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_even_and_tiny_grids() {
        assert!(GridSpec::new(4).is_err());
        assert!(GridSpec::new(1).is_err());
        assert!(GridSpec::new(3).is_ok());
        assert!(GridSpec::mode_box(1).is_ok());
    }

    #[test]
    fn row_major_layout() {
        let g = GridSpec::new(5).unwrap();
        assert_eq!(g.index([-2, -2]), Some(0));
        assert_eq!(g.index([-2, -1]), Some(1));
        assert_eq!(g.index([-1, -2]), Some(5));
        assert_eq!(g.index([2, 2]), Some(24));
        assert_eq!(g.index([3, 0]), None);
        for i in 0..g.len() {
            assert_eq!(g.index(g.mode(i)), Some(i));
        }
    }

    #[test]
    fn fold_examples() {
        assert_eq!(fold_mode([5, 0], 9), [-4, 0]);
        assert_eq!(fold_mode([-5, 13], 9), [4, 4]);
        assert_eq!(fold_mode([4, -4], 9), [4, -4]);
    }

    proptest! {
        #[test]
        fn fold_is_congruent_and_centred(a in -1000i64..1000, b in -1000i64..1000, n in (1usize..20).prop_map(|m| 2 * m + 1)) {
            let f = fold_mode([a, b], n);
            let ni = n as i64;
            prop_assert_eq!((a - f[0]).rem_euclid(ni), 0);
            prop_assert_eq!((b - f[1]).rem_euclid(ni), 0);
            prop_assert!(2 * f[0].abs() < ni && 2 * f[1].abs() < ni);
            prop_assert_eq!(fold_mode(f, n), f);
        }
    }
}
