//! Low spectrum of the lattice Anderson Hamiltonian `H = -Delta_rw + eps eta`
//! and the statistics of its shifted eigenvalues `eps^{-2} Lambda_j + c_N`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PamError, Result};
use crate::lattice::{Fft2, GridSpec, WalkMeasure};
use crate::noise::{renorm_constant, sample_potential, Potential, PotentialSpec};
use crate::rng::{rng_from_seed, stream_seed, tag};
use crate::stats::{ks_two_sample_tol, mean_se, non_increasing, McEstimate};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Matrix-free `v -> -sum_j mu(j) v(. + j) + eps eta v`.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    grid: GridSpec,
    weights: Vec<f64>,
    /// `shifts[a][i]`: index of site `i + j_a`.
    shifts: Vec<Vec<usize>>,
    diag: Vec<f64>,
    /// Fourier symbol of `-Delta_rw`, in FFT order.
    kinetic: Vec<f64>,
}

pub fn assemble_hamiltonian(eta: &Potential, mu: &WalkMeasure) -> Result<Hamiltonian> {
    mu.require_valid()?;
    let grid = eta.grid;
    if eta.values.len() != grid.len() {
        return Err(invalid(format!("potential needs {} values, got {}", grid.len(), eta.values.len())));
    }
    let eps = grid.epsilon();
    let shifts = mu
        .atoms()
        .iter()
        .map(|a| {
            (0..grid.len())
                .map(|i| {
                    let x = grid.mode(i);
                    grid.index_wrapped([x[0] + a.site[0], x[1] + a.site[1]])
                })
                .collect()
        })
        .collect();
    let n = grid.n();
    let h = grid.half();
    let centred = |q: usize| if q as i64 <= h { q as i64 } else { q as i64 - n as i64 };
    let mut kinetic = vec![0.0; grid.len()];
    for q1 in 0..n {
        for q2 in 0..n {
            let theta = [eps * centred(q1) as f64, eps * centred(q2) as f64];
            kinetic[q1 * n + q2] = -mu.symbol(theta);
        }
    }
    Ok(Hamiltonian {
        grid,
        weights: mu.atoms().iter().map(|a| a.weight).collect(),
        shifts,
        diag: eta.values.iter().map(|v| eps * v).collect(),
        kinetic,
    })
}

impl Hamiltonian {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.diag[i] * v[i];
        }
        for (w, idx) in self.weights.iter().zip(&self.shifts) {
            for (o, &j) in out.iter_mut().zip(idx) {
                *o -= w * v[j];
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] += self.diag[i];
            for (w, idx) in self.weights.iter().zip(&self.shifts) {
                m[(i, idx[i])] -= w;
            }
        }
        m
    }

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            self.apply_into(x.column(c).as_slice(), out.column_mut(c).as_mut_slice());
        }
        out
    }

    /// `(-Delta_rw + shift)^{-1}` applied to each column.
    fn precondition(&self, r: &DMatrix<f64>, shift: f64, fft: &Fft2) -> DMatrix<f64> {
        let len = self.dim() as f64;
        let mut out = DMatrix::zeros(r.nrows(), r.ncols());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.dim()];
        for c in 0..r.ncols() {
            for (b, v) in buf.iter_mut().zip(r.column(c).iter()) {
                *b = Complex64::new(*v, 0.0);
            }
            fft.forward(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.kinetic) {
                *b /= (s + shift) * len;
            }
            fft.inverse(&mut buf);
            for (o, b) in out.column_mut(c).iter_mut().zip(&buf) {
                *o = b.re;
            }
        }
        out
    }
}

/// Eigenpairs with residual certificates `|Hv - lambda v|` (unit `v`).
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn residuals(h: &Hamiltonian, vectors: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
    let hv = h.apply_block(vectors);
    values
        .iter()
        .enumerate()
        .map(|(c, l)| (hv.column(c) - vectors.column(c) * *l).norm() / vectors.column(c).norm())
        .collect()
}

/// All eigenpairs by full diagonalization, lowest `k` returned; `N <= 15`.
pub fn dense_lowest_eigenvalues(h: &Hamiltonian, k: usize) -> Result<EigenResult> {
    if h.grid.n() > 15 {
        return Err(invalid("dense diagonalization is limited to N <= 15"));
    }
    check_k(h, k)?;
    let eig = SymmetricEigen::new(h.dense());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(&order[..k].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    let residuals = residuals(h, &vectors, &values);
    Ok(EigenResult {
        values,
        vectors,
        residuals,
        iterations: 0,
    })
}

fn check_k(h: &Hamiltonian, k: usize) -> Result<()> {
    if k == 0 || k > h.dim() {
        return Err(invalid(format!("k must lie in 1..={}, got {k}", h.dim())));
    }
    Ok(())
}

/// Orthonormalize columns by two passes of modified Gram-Schmidt, dropping
/// columns that are numerically in the span of their predecessors.
fn orthonormalize(cols: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for mut v in cols {
        let before = v.norm();
        if !(before > 0.0) || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v.axpy(-d, b, 1.0);
            }
        }
        let after = v.norm();
        if after > 1e-10 * before {
            basis.push(v / after);
        }
    }
    basis
}

struct Ritz {
    x: DMatrix<f64>,
    hx: DMatrix<f64>,
    theta: Vec<f64>,
}

fn rayleigh_ritz(h: &Hamiltonian, s: &DMatrix<f64>, m: usize) -> Ritz {
    let hs = h.apply_block(s);
    let mut g = s.transpose() * &hs;
    g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let m = m.min(order.len());
    let y = DMatrix::from_columns(&order[..m].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    Ritz {
        x: s * &y,
        hx: hs * &y,
        theta: order[..m].iter().map(|&i| eig.eigenvalues[i]).collect(),
    }
}

/// The `k` smallest eigenvalues by locally optimal block preconditioned
/// conjugate gradients with a Fourier-diagonal preconditioner. The iteration
/// stops once every wanted residual is at most `tol`; the cap is `10 N^2`.
/// Very small lattices, where the search space would fill the whole space,
/// are diagonalized densely.
pub fn lowest_eigenvalues(h: &Hamiltonian, k: usize, tol: f64) -> Result<EigenResult> {
    check_k(h, k)?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let n = h.dim();
    let m = (k + 4).max(2 * k).min(n);
    if 3 * m >= n {
        return dense_lowest_eigenvalues(h, k);
    }
    let cap = 10 * n;
    let fft = Fft2::new(h.grid.n());
    let shift = h.diag.iter().fold(0.0f64, |a, v| a.max(v.abs())) + h.grid.epsilon().powi(2);

    let mut rng = rng_from_seed(stream_seed(0x5eed, &[tag("lobpcg"), n as u64, k as u64]));
    let mut start = vec![DVector::from_element(n, 1.0)];
    start.extend((1..m).map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))));
    let s = DMatrix::from_columns(&orthonormalize(start));
    let mut ritz = rayleigh_ritz(h, &s, m);
    let mut p: Option<DMatrix<f64>> = None;
    let mut worst = f64::INFINITY;
    for it in 1..=cap {
        let r = &ritz.hx - &ritz.x * DMatrix::from_diagonal(&DVector::from_vec(ritz.theta.clone()));
        let res: Vec<f64> = (0..ritz.x.ncols()).map(|c| r.column(c).norm()).collect();
        worst = res[..k].iter().fold(0.0, |a, &b| a.max(b));
        if worst <= tol {
            let values = ritz.theta[..k].to_vec();
            let vectors = ritz.x.columns(0, k).into_owned();
            let residuals = residuals(h, &vectors, &values);
            return Ok(EigenResult {
                values,
                vectors,
                residuals,
                iterations: it - 1,
            });
        }
        let w = h.precondition(&r, shift, &fft);
        let mut cols: Vec<DVector<f64>> = ritz.x.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(w.column_iter().map(|c| c.into_owned()));
        if let Some(p) = &p {
            cols.extend(p.column_iter().map(|c| c.into_owned()));
        }
        let s = DMatrix::from_columns(&orthonormalize(cols));
        let next = rayleigh_ritz(h, &s, m);
        let overlap = ritz.x.transpose() * &next.x;
        p = Some(&next.x - &ritz.x * overlap);
        ritz = next;
    }
    Err(PamError::SolverFailure {
        iterations: cap,
        residual: worst,
    })
}

/// One disorder sample of the shifted spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub n: usize,
    pub seed: u64,
    pub raw: Vec<f64>,
    /// `eps^{-2} raw + c_N`.
    pub shifted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl SpectrumSample {
    pub fn from_raw(n: usize, seed: u64, raw: Vec<f64>, residuals: Vec<f64>) -> Result<Self> {
        let eps2 = GridSpec::new(n)?.epsilon().powi(2);
        let c = renorm_constant(n);
        let shifted = raw.iter().map(|l| l / eps2 + c).collect();
        Ok(SpectrumSample {
            n,
            seed,
            raw,
            shifted,
            residuals,
        })
    }

    /// `eps^{-2} Lambda_j` without the shift.
    pub fn unshifted(&self) -> Vec<f64> {
        let eps2 = GridSpec::new(self.n).expect("valid N").epsilon().powi(2);
        self.raw.iter().map(|l| l / eps2).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub spec: PotentialSpec,
    pub walk: WalkMeasure,
    pub ns: Vec<usize>,
    pub k: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Multiplies the disorder; `0` gives the free Laplacian.
    pub disorder_scale: f64,
}

pub fn spectrum_seed(master: u64, n: usize, index: usize) -> u64 {
    stream_seed(master, &[tag("spectrum"), n as u64, index as u64])
}

pub fn spectrum_sample(cfg: &SpectrumConfig, n: usize, index: usize) -> Result<SpectrumSample> {
    let grid = GridSpec::new(n)?;
    if cfg.k > grid.len() {
        return Err(invalid(format!("k = {} exceeds the {} lattice sites at N = {n}", cfg.k, grid.len())));
    }
    let seed = spectrum_seed(cfg.seed, n, index);
    let mut eta = sample_potential(&cfg.spec, grid, seed)?;
    eta.values.iter_mut().for_each(|v| *v *= cfg.disorder_scale);
    let h = assemble_hamiltonian(&eta, &cfg.walk)?;
    let eig = lowest_eigenvalues(&h, cfg.k, cfg.tol)?;
    SpectrumSample::from_raw(n, seed, eig.values, eig.residuals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub ns: Vec<usize>,
    pub k: usize,
    pub c_n: Vec<f64>,
    /// `ks[i][j]`: KS distance of coordinate `j` between `ns[i]` and `ns[i + 1]`.
    pub ks: Vec<Vec<f64>>,
    pub ks_non_increasing: Vec<bool>,
    /// Mean shifted and unshifted lowest eigenvalue per N.
    pub shifted_mean: Vec<McEstimate>,
    pub unshifted_mean: Vec<McEstimate>,
    /// Unshifted means strictly decrease along `ns`.
    pub unshifted_drifts_down: bool,
    /// Each consecutive shifted drift is smaller in size than the unshifted one.
    pub shift_reduces_drift: bool,
}

pub fn summarize_spectrum(ns: &[usize], samples: &[Vec<SpectrumSample>], k: usize) -> SpectrumReport {
    let coord = |s: &[SpectrumSample], j: usize| s.iter().map(|x| x.shifted[j]).collect::<Vec<f64>>();
    let ks: Vec<Vec<f64>> = samples
        .windows(2)
        .map(|w| (0..k).map(|j| ks_two_sample_tol(&coord(&w[0], j), &coord(&w[1], j), 1e-12)).collect())
        .collect();
    let ks_non_increasing = (0..k).map(|j| non_increasing(&ks.iter().map(|r| r[j]).collect::<Vec<_>>(), 0.0)).collect();
    let shifted_mean: Vec<McEstimate> = samples.iter().map(|s| mean_se(&coord(s, 0))).collect();
    let unshifted_mean: Vec<McEstimate> = samples
        .iter()
        .map(|s| mean_se(&s.iter().map(|x| x.unshifted()[0]).collect::<Vec<_>>()))
        .collect();
    let unshifted_drifts_down = unshifted_mean.windows(2).all(|w| w[1].mean < w[0].mean);
    let shift_reduces_drift = shifted_mean
        .windows(2)
        .zip(unshifted_mean.windows(2))
        .all(|(s, u)| (s[1].mean - s[0].mean).abs() < (u[1].mean - u[0].mean).abs());
    SpectrumReport {
        ns: ns.to_vec(),
        k,
        c_n: ns.iter().map(|&n| renorm_constant(n)).collect(),
        ks,
        ks_non_increasing,
        shifted_mean,
        unshifted_mean,
        unshifted_drifts_down,
        shift_reduces_drift,
    }
}

/// Shifted spectra for every N and sample, with trend diagnostics.
pub fn spectrum_statistics(cfg: &SpectrumConfig) -> Result<(SpectrumReport, Vec<Vec<SpectrumSample>>)> {
    if cfg.ns.len() < 3 {
        return Err(invalid(format!("spectrum statistics need at least 3 lattice sizes, got {}", cfg.ns.len())));
    }
    if cfg.samples < 200 {
        return Err(invalid(format!("spectrum statistics need at least 200 samples, got {}", cfg.samples)));
    }
    let samples = cfg
        .ns
        .iter()
        .map(|&n| (0..cfg.samples).map(|i| spectrum_sample(cfg, n, i)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((summarize_spectrum(&cfg.ns, &samples, cfg.k), samples))
}

/// CSV with header `N,seed,j,lambda_raw,lambda_shifted`; `j` counts from 1.
pub fn write_spectrum_csv<W: Write>(w: &mut W, samples: &[SpectrumSample]) -> Result<()> {
    writeln!(w, "N,seed,j,lambda_raw,lambda_shifted")?;
    for s in samples {
        for (j, (raw, shifted)) in s.raw.iter().zip(&s.shifted).enumerate() {
            writeln!(w, "{},{},{},{raw},{shifted}", s.n, s.seed, j + 1)?;
        }
    }
    Ok(())
}
