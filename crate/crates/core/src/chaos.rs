//! Discrete multiple stochastic integrals of order one and two against the
//! disorder, exact moment oracles, and moment-bound diagnostics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::GridSpec;
use crate::noise::{draw_sequence, PotentialSpec};
use crate::rng::rng_from_seed;
use crate::stats::{bootstrap_ci, mean, mean_se};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Kernel `f(k_1, .., k_n)` over site indices, `n` in `{1, 2}`. Second-order
/// kernels vanish on the diagonal; their symmetrization is cached.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosKernel {
    order: usize,
    sites: usize,
    coeffs: Vec<Complex64>,
    sym: Vec<Complex64>,
}

impl ChaosKernel {
    pub fn first_order(coeffs: Vec<Complex64>) -> Self {
        ChaosKernel {
            order: 1,
            sites: coeffs.len(),
            sym: coeffs.clone(),
            coeffs,
        }
    }

    /// Second-order kernel from a row-major `sites x sites` table.
    pub fn second_order(sites: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != sites * sites {
            return Err(invalid(format!("kernel needs {} entries, got {}", sites * sites, coeffs.len())));
        }
        if let Some(k) = (0..sites).find(|&k| coeffs[k * sites + k] != ZERO) {
            return Err(invalid(format!("kernel is nonzero on the diagonal at site {k}")));
        }
        let sym = (0..sites * sites)
            .map(|i| {
                let (a, b) = (i / sites, i % sites);
                (coeffs[a * sites + b] + coeffs[b * sites + a]) * 0.5
            })
            .collect();
        Ok(ChaosKernel {
            order: 2,
            sites,
            coeffs,
            sym,
        })
    }

    pub fn from_fn2(sites: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        Self::second_order(sites, (0..sites * sites).map(|i| f(i / sites, i % sites)).collect())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn symmetrized(&self) -> ChaosKernel {
        ChaosKernel {
            order: self.order,
            sites: self.sites,
            coeffs: self.sym.clone(),
            sym: self.sym.clone(),
        }
    }

    /// `||f||^2_{l^2}`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `||f~||^2_{l^2}`.
    pub fn sym_norm_sq(&self) -> f64 {
        self.sym.iter().map(|c| c.norm_sqr()).sum()
    }

    fn map(&self, g: impl Fn(Complex64) -> Complex64) -> ChaosKernel {
        let coeffs = self.coeffs.iter().map(|&c| g(c)).collect();
        match self.order {
            1 => ChaosKernel::first_order(coeffs),
            _ => ChaosKernel::second_order(self.sites, coeffs).expect("diagonal stays zero"),
        }
    }

    pub fn real_part(&self) -> ChaosKernel {
        self.map(|c| Complex64::new(c.re, 0.0))
    }

    pub fn imag_part(&self) -> ChaosKernel {
        self.map(|c| Complex64::new(c.im, 0.0))
    }
}

fn check_len(f: &ChaosKernel, eta: &[f64]) -> Result<()> {
    if eta.len() < f.sites {
        return Err(invalid(format!("kernel uses {} sites, disorder has {}", f.sites, eta.len())));
    }
    Ok(())
}

/// `I_n(f) = sum f(k_1, .., k_n) eta(k_1) .. eta(k_n)`.
pub fn multiple_integral(f: &ChaosKernel, eta: &[f64]) -> Result<Complex64> {
    check_len(f, eta)?;
    Ok(integral_unchecked(&f.coeffs, f.order, f.sites, eta))
}

fn integral_unchecked(coeffs: &[Complex64], order: usize, sites: usize, eta: &[f64]) -> Complex64 {
    match order {
        1 => coeffs.iter().zip(eta).map(|(c, e)| c * e).sum(),
        _ => {
            let mut s = ZERO;
            for a in 0..sites {
                let row: Complex64 = coeffs[a * sites..(a + 1) * sites]
                    .iter()
                    .zip(eta)
                    .map(|(c, e)| c * e)
                    .sum();
                s += row * eta[a];
            }
            s
        }
    }
}

/// `n! sum_{k_1 < .. < k_n} f~(k) eta(k_1) .. eta(k_n)`.
pub fn multiple_integral_ordered(f: &ChaosKernel, eta: &[f64]) -> Result<Complex64> {
    check_len(f, eta)?;
    Ok(match f.order {
        1 => integral_unchecked(&f.sym, 1, f.sites, eta),
        _ => {
            let n = f.sites;
            let mut s = ZERO;
            for a in 0..n {
                for b in (a + 1)..n {
                    s += f.sym[a * n + b] * eta[a] * eta[b];
                }
            }
            s * 2.0
        }
    })
}

/// Monte Carlo estimate of `E|I_n(f)|^p` against the bound `||f||^p M^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub p: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Draw `samples` disorder sequences and estimate `E|I_n(f)|^p`; the
/// interval is a 95% percentile bootstrap for `lhs`.
pub fn moment_bound_check(f: &ChaosKernel, spec: &PotentialSpec, p: f64, samples: usize, seed: u64) -> Result<MomentReport> {
    if !(p >= 2.0) {
        return Err(invalid(format!("moment order must be >= 2, got {p}")));
    }
    if samples < 500 {
        return Err(invalid(format!("need at least 500 samples, got {samples}")));
    }
    spec.distribution.validate()?;
    let mut rng = rng_from_seed(seed);
    let vals: Vec<f64> = (0..samples)
        .map(|_| {
            let eta = draw_sequence(spec, f.sites, &mut rng);
            integral_unchecked(&f.coeffs, f.order, f.sites, &eta).norm().powf(p)
        })
        .collect();
    let est = mean_se(&vals);
    let (lo, hi) = bootstrap_ci(&vals, mean, 500, 0.95, &mut rng);
    let rhs = f.norm_sq().sqrt().powf(p) * spec.moment_bound.powi(f.order as i32);
    Ok(MomentReport {
        n: f.order,
        p,
        lhs: est.mean,
        lhs_se: est.se,
        rhs,
        ratio: est.mean / rhs,
        ci_low: lo,
        ci_high: hi,
        samples,
        seed,
    })
}

/// All perfect matchings of `0..2m`.
fn pairings(m: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &mut Vec<usize>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for i in 0..free.len() {
            let b = free.remove(i);
            cur.push((a, b));
            rec(free, cur, out);
            cur.pop();
            free.insert(i, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    rec(&mut (0..2 * m).collect(), &mut Vec::new(), &mut out);
    out
}

/// `E[(eta^T A eta)^4]` for i.i.d. standard Gaussian `eta`, by summing over
/// all 105 Wick pairings of the eight factors.
pub fn gaussian_fourth_moment_wick(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for pairing in pairings(4) {
        // Slot s of the product A[i0 i1] A[i2 i3] A[i4 i5] A[i6 i7] gets the
        // index of its pair.
        let mut class = [0usize; 8];
        for (c, &(x, y)) in pairing.iter().enumerate() {
            class[x] = c;
            class[y] = c;
        }
        let mut idx = [0usize; 4];
        loop {
            let v = |s: usize| idx[class[s]];
            total += a[(v(0), v(1))] * a[(v(2), v(3))] * a[(v(4), v(5))] * a[(v(6), v(7))];
            let mut d = 0;
            while d < 4 {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == 4 {
                break;
            }
        }
    }
    total
}

/// Same moment from the cumulants `k_r = 2^{r-1} (r-1)! tr(S^r)`, `S` the
/// symmetric part of `A`.
pub fn gaussian_fourth_moment_cumulant(a: &DMatrix<f64>) -> f64 {
    let s = (a + a.transpose()) * 0.5;
    let s2 = &s * &s;
    let s3 = &s2 * &s;
    let s4 = &s2 * &s2;
    let k1 = s.trace();
    let k2 = 2.0 * s2.trace();
    let k3 = 8.0 * s3.trace();
    let k4 = 48.0 * s4.trace();
    k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4)
}

/// `E|I_n(f)|^p` for Rademacher disorder by enumerating all sign patterns.
pub fn rademacher_moment_enumeration(f: &ChaosKernel, p: f64) -> Result<f64> {
    if f.sites > 20 {
        return Err(invalid(format!("enumeration over {} sites is too large", f.sites)));
    }
    let n = f.sites;
    let mut eta = vec![0.0; n];
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        for (i, e) in eta.iter_mut().enumerate() {
            *e = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        total += integral_unchecked(&f.coeffs, f.order, n, &eta).norm().powf(p);
    }
    Ok(total / f64::from(1u32 << n))
}

/// `E[(eta^T A eta)^4]` for Rademacher disorder by expanding the product over
/// all index tuples and keeping those where every site occurs an even number
/// of times.
pub fn rademacher_fourth_moment_expansion(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    let mut parity = vec![false; n];
    for i0 in 0..n {
        for i1 in 0..n {
            let p01 = a[(i0, i1)];
            if p01 == 0.0 {
                continue;
            }
            for i2 in 0..n {
                for i3 in 0..n {
                    let p23 = p01 * a[(i2, i3)];
                    if p23 == 0.0 {
                        continue;
                    }
                    for i4 in 0..n {
                        for i5 in 0..n {
                            let p45 = p23 * a[(i4, i5)];
                            if p45 == 0.0 {
                                continue;
                            }
                            for i6 in 0..n {
                                for i7 in 0..n {
                                    for &i in &[i0, i1, i2, i3, i4, i5, i6, i7] {
                                        parity[i] ^= true;
                                    }
                                    if parity.iter().all(|&odd| !odd) {
                                        total += p45 * a[(i6, i7)];
                                    }
                                    parity.iter_mut().for_each(|x| *x = false);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    total
}

/// Kernel indexed by Fourier modes of the lattice, order one or two.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeKernel {
    pub order: usize,
    pub grid: GridSpec,
    /// `N^2` entries for order one, `N^4` (row-major in the two mode indices) for order two.
    pub coeffs: Vec<Complex64>,
}

impl ModeKernel {
    pub fn new(order: usize, grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        let need = match order {
            1 => grid.len(),
            2 => grid.len() * grid.len(),
            _ => return Err(invalid(format!("chaos order must be 1 or 2, got {order}"))),
        };
        if coeffs.len() != need {
            return Err(invalid(format!("mode kernel needs {need} entries, got {}", coeffs.len())));
        }
        Ok(ModeKernel { order, grid, coeffs })
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `F xi(k) = eps sum_l E(k, l) eta(l)` with `E(k, l) = e^{-i<k, eps l>}`.
    fn site_matrix(&self) -> DMatrix<Complex64> {
        let g = self.grid;
        let eps = g.epsilon();
        DMatrix::from_fn(g.len(), g.len(), |ki, li| {
            let (k, l) = (g.mode(ki), g.mode(li));
            Complex64::from_polar(1.0, -eps * (k[0] * l[0] + k[1] * l[1]) as f64)
        })
    }

    /// Site kernel `g` with `sum f(k) F xi(k)..` equal to `sum g(l) eta(l)..`.
    pub fn site_kernel(&self) -> DMatrix<Complex64> {
        let e = self.site_matrix();
        let eps = self.grid.epsilon();
        let m = self.grid.len();
        match self.order {
            1 => {
                let f = DMatrix::from_row_slice(1, m, &self.coeffs);
                (f * e) * Complex64::new(eps, 0.0)
            }
            _ => {
                let f = DMatrix::from_row_slice(m, m, &self.coeffs);
                (e.transpose() * f * e) * Complex64::new(eps * eps, 0.0)
            }
        }
    }
}

/// Per-sample comparison of a Fourier functional with its chaos expansion,
/// and its moment against `(sum |f|^2)^{p / 2n} M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierChaosReport {
    pub n: usize,
    pub p: f64,
    pub max_decomposition_error: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub mean_se: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Evaluate the centred functional `sum f(k) (F xi(k_1) .. F xi(k_n) - E[..])`
/// directly from `F xi`, and again as `I_n` of the site kernel plus, for
/// `n = 2`, the diagonal term `sum_l g(l, l) (eta(l)^2 - 1)`.
pub fn fourier_chaos_check(f: &ModeKernel, spec: &PotentialSpec, p: f64, samples: usize, seed: u64) -> Result<FourierChaosReport> {
    spec.distribution.validate()?;
    let grid = f.grid;
    let m = grid.len();
    let n_modes = m;
    let eps = grid.epsilon();
    let e = f.site_matrix();
    let g = f.site_kernel();
    let off_diag = match f.order {
        1 => ChaosKernel::first_order(g.iter().copied().collect()),
        _ => ChaosKernel::from_fn2(m, |a, b| if a == b { ZERO } else { g[(a, b)] })?,
    };
    let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
    let mut rng = rng_from_seed(seed);
    let mut max_err: f64 = 0.0;
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let eta = draw_sequence(spec, m, &mut rng);
        let eta_c = nalgebra::DVector::from_iterator(m, eta.iter().map(|&v| Complex64::new(v, 0.0)));
        let fxi = (&e * eta_c) * Complex64::new(eps, 0.0);
        let direct = match f.order {
            1 => (0..n_modes).map(|k| f.coeffs[k] * fxi[k]).sum::<Complex64>(),
            _ => {
                let mut s = ZERO;
                for k1 in 0..n_modes {
                    let km = grid.mode(k1);
                    let neg = grid.index_unchecked([-km[0], -km[1]]);
                    for k2 in 0..n_modes {
                        let mut prod = fxi[k1] * fxi[k2];
                        if k2 == neg {
                            prod -= four_pi2;
                        }
                        s += f.coeffs[k1 * n_modes + k2] * prod;
                    }
                }
                s
            }
        };
        let mut chaos = integral_unchecked(&off_diag.coeffs, off_diag.order, m, &eta);
        if f.order == 2 {
            chaos += (0..m).map(|l| g[(l, l)] * (eta[l] * eta[l] - 1.0)).sum::<Complex64>();
        }
        let scale = direct.norm().max(1.0);
        max_err = max_err.max((direct - chaos).norm() / scale);
        vals.push(direct);
    }
    let re: Vec<f64> = vals.iter().map(|v| v.re).collect();
    let im: Vec<f64> = vals.iter().map(|v| v.im).collect();
    let sq: Vec<f64> = vals.iter().map(|v| v.norm_sqr()).collect();
    let pw: Vec<f64> = vals.iter().map(|v| v.norm().powf(p / f.order as f64)).collect();
    let se_re = mean_se(&re);
    let se_im = mean_se(&im);
    let second = mean_se(&sq);
    let lhs = mean(&pw);
    let rhs = f.norm_sq().powf(p / (2.0 * f.order as f64)) * spec.moment_bound;
    Ok(FourierChaosReport {
        n: f.order,
        p,
        max_decomposition_error: max_err,
        mean_re: se_re.mean,
        mean_im: se_im.mean,
        mean_se: se_re.se.hypot(se_im.se),
        second_moment: second.mean,
        second_moment_se: second.se,
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::Distribution;
    use rand::Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_kernel(sites: usize, seed: u64) -> ChaosKernel {
        let mut rng = rng_from_seed(seed);
        let vals: Vec<Complex64> = (0..sites * sites)
            .map(|i| if i / sites == i % sites { ZERO } else { Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) })
            .collect();
        ChaosKernel::second_order(sites, vals).unwrap()
    }

    #[test]
    fn indicator_pair() {
        let f = ChaosKernel::from_fn2(4, |a, b| if (a, b) == (1, 3) || (a, b) == (3, 1) { c(1.0) } else { ZERO }).unwrap();
        let eta = [0.3, -1.2, 0.7, 2.0];
        assert!((multiple_integral(&f, &eta).unwrap() - c(2.0 * -1.2 * 2.0)).norm() < 1e-15);
        let zero = ChaosKernel::second_order(4, vec![ZERO; 16]).unwrap();
        assert_eq!(multiple_integral(&zero, &eta).unwrap(), ZERO);
    }

    #[test]
    fn diagonal_is_rejected() {
        assert!(ChaosKernel::from_fn2(3, |a, b| if a == b { c(1.0) } else { ZERO }).is_err());
    }

    #[test]
    fn symmetrization_and_ordered_form() {
        let f = random_kernel(7, 1);
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let eta: Vec<f64> = (0..7).map(|_| rng.random::<f64>() - 0.5).collect();
            let a = multiple_integral(&f, &eta).unwrap();
            let b = multiple_integral(&f.symmetrized(), &eta).unwrap();
            let o = multiple_integral_ordered(&f, &eta).unwrap();
            assert!((a - b).norm() < 1e-13 && (a - o).norm() < 1e-13);
            let split = multiple_integral(&f.real_part(), &eta).unwrap()
                + Complex64::i() * multiple_integral(&f.imag_part(), &eta).unwrap();
            assert!((a - split).norm() < 1e-13);
        }
    }

    #[test]
    fn wick_and_cumulant_agree() {
        let mut rng = rng_from_seed(9);
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { rng.random::<f64>() - 0.5 });
        let w = gaussian_fourth_moment_wick(&a);
        let k = gaussian_fourth_moment_cumulant(&a);
        assert!((w - k).abs() < 1e-9 * k.abs());
        // One off-diagonal pair: Q = 2 x y, E Q^4 = 16 (E x^4)^2 = 144.
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        assert!((gaussian_fourth_moment_wick(&a) - 144.0).abs() < 1e-12);
    }

    #[test]
    fn rademacher_routes_agree() {
        let mut rng = rng_from_seed(5);
        let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { rng.random::<f64>() - 0.5 });
        let f = ChaosKernel::from_fn2(5, |i, j| c(a[(i, j)])).unwrap();
        let enumerated = rademacher_moment_enumeration(&f, 4.0).unwrap();
        let expanded = rademacher_fourth_moment_expansion(&a);
        assert!((enumerated - expanded).abs() < 1e-9 * expanded);
    }

    #[test]
    fn second_moments_match_orthogonality() {
        let spec = PotentialSpec::iid(Distribution::Uniform);
        let f1 = ChaosKernel::first_order((0..6).map(|i| c(i as f64 - 2.5)).collect());
        let r = moment_bound_check(&f1, &spec, 2.0, 4000, 1).unwrap();
        assert!((r.lhs - f1.norm_sq()).abs() < 4.0 * r.lhs_se);
        let f2 = random_kernel(6, 3);
        let r = moment_bound_check(&f2, &spec, 2.0, 4000, 2).unwrap();
        assert!((r.lhs - 2.0 * f2.sym_norm_sq()).abs() < 4.0 * r.lhs_se);
        assert!(r.ci_low < r.lhs && r.lhs < r.ci_high);
        assert!(moment_bound_check(&f2, &spec, 2.0, 100, 2).is_err());
    }

    #[test]
    fn single_fourier_mode() {
        let g = GridSpec::new(5).unwrap();
        let mut coeffs = vec![ZERO; g.len()];
        coeffs[g.index([1, 2]).unwrap()] = c(1.0);
        let f = ModeKernel::new(1, g, coeffs).unwrap();
        let r = fourier_chaos_check(&f, &PotentialSpec::iid(Distribution::Gaussian), 2.0, 3000, 4).unwrap();
        let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
        assert!(r.max_decomposition_error < 1e-9);
        assert!(r.mean_re.hypot(r.mean_im) < 4.0 * r.mean_se);
        assert!((r.second_moment - four_pi2).abs() < 4.0 * r.second_moment_se);
    }

    #[test]
    fn opposite_mode_pair() {
        let g = GridSpec::new(5).unwrap();
        let m = g.len();
        let mut coeffs = vec![ZERO; m * m];
        coeffs[g.index([1, 0]).unwrap() * m + g.index([-1, 0]).unwrap()] = c(1.0);
        let f = ModeKernel::new(2, g, coeffs).unwrap();
        let r = fourier_chaos_check(&f, &PotentialSpec::iid(Distribution::Rademacher), 4.0, 2000, 5).unwrap();
        assert!(r.max_decomposition_error < 1e-9);
        assert!(r.mean_re.abs() < 4.0 * r.mean_se + 1e-12);

        let zero = ModeKernel::new(2, g, vec![ZERO; m * m]).unwrap();
        let r = fourier_chaos_check(&zero, &PotentialSpec::iid(Distribution::Gaussian), 4.0, 500, 5).unwrap();
        assert_eq!(r.second_moment, 0.0);
        assert_eq!(r.second_moment_se, 0.0);
    }
}
