//! Disorder `eta`, the rescaled noise `xi = eps^{-1} eta`, its renormalized
//! enhancement `(xi, X, X <> xi)` and the random operator `A_N`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::besov::{besov_norm, bilinear, block, Bilinear, DyadicPartition, Exponent};
use crate::error::{invalid, Result};
use crate::lattice::{dft_lattice, extension_eval, io, pi_n, project_below, GridSpec, LatticeField, Mode, SpectralField, WalkMeasure};
use crate::rng::{rng_from_seed, LabRng};
use crate::stats::{mean_se, variance_se, McEstimate};

/// Law of the standardized single-site variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    Rademacher,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    Uniform,
    /// Finite law given by atoms and probabilities.
    Tabulated { values: Vec<f64>, probs: Vec<f64> },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        if let Distribution::Tabulated { values, probs } = self {
            if values.is_empty() || values.len() != probs.len() {
                return Err(invalid("tabulated distribution needs matching non-empty values and probs"));
            }
            if probs.iter().any(|&p| !(p >= 0.0)) {
                return Err(invalid("tabulated distribution has a negative probability"));
            }
            let total: f64 = probs.iter().sum();
            let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
            let var: f64 = values.iter().zip(probs).map(|(v, p)| v * v * p).sum::<f64>() - mean * mean;
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("tabulated probabilities sum to {total}, expected 1")));
            }
            if mean.abs() > 1e-9 {
                return Err(invalid(format!("tabulated distribution has mean {mean}, expected 0")));
            }
            if (var - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("tabulated distribution has variance {var}, expected 1")));
            }
        }
        Ok(())
    }

    /// Exact `E|X|^p`.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self {
            Distribution::Gaussian => (p / 2.0 * 2f64.ln() + ln_gamma((p + 1.0) / 2.0)).exp() / PI.sqrt(),
            Distribution::Rademacher => 1.0,
            Distribution::Uniform => 3f64.sqrt().powf(p) / (p + 1.0),
            Distribution::Tabulated { values, probs } => {
                values.iter().zip(probs).map(|(v, q)| v.abs().powf(p) * q).sum()
            }
        }
    }

    pub fn sample(&self, rng: &mut LabRng) -> f64 {
        match self {
            Distribution::Gaussian => StandardNormal.sample(rng),
            Distribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            Distribution::Tabulated { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Iid,
    /// `eta(zeta(k)) = s_k e_k` with `e_k` i.i.d. and the sign `s_k` equal to
    /// the sign of the previously enumerated value (`s_0 = 1`).
    Martingale,
}

/// Recipe for the disorder field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(default = "default_kind")]
    pub kind: PotentialKind,
    pub distribution: Distribution,
    /// Enumeration of the sites as row-major indices; row-major when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration: Option<Vec<usize>>,
    #[serde(default = "default_moment_order")]
    pub moment_order: f64,
    #[serde(default = "default_moment_bound")]
    pub moment_bound: f64,
}

fn default_kind() -> PotentialKind {
    PotentialKind::Iid
}

fn default_moment_order() -> f64 {
    8.0
}

fn default_moment_bound() -> f64 {
    1e3
}

impl PotentialSpec {
    pub fn iid(distribution: Distribution) -> Self {
        PotentialSpec {
            kind: PotentialKind::Iid,
            distribution,
            enumeration: None,
            moment_order: default_moment_order(),
            moment_bound: default_moment_bound(),
        }
    }

    pub fn validate(&self, grid: GridSpec) -> Result<()> {
        self.distribution.validate()?;
        if !(self.moment_order > 6.0) {
            return Err(invalid(format!("moment order must exceed 6, got {}", self.moment_order)));
        }
        let m = self.distribution.abs_moment(self.moment_order);
        if !(m <= self.moment_bound) {
            return Err(invalid(format!(
                "E|eta|^{} = {m} exceeds the declared bound {}",
                self.moment_order, self.moment_bound
            )));
        }
        if let Some(e) = &self.enumeration {
            let mut seen = vec![false; grid.len()];
            if e.len() != grid.len() {
                return Err(invalid(format!("enumeration has {} entries, lattice has {}", e.len(), grid.len())));
            }
            for &i in e {
                if i >= grid.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(invalid("enumeration is not a bijection onto the lattice sites"));
                }
            }
        }
        Ok(())
    }
}

/// Disorder values `eta(l)` over the lattice, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: Option<u64>,
    pub spec: Option<PotentialSpec>,
}

impl Potential {
    /// Deterministic potential from explicit values.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!("potential needs {} values, got {}", grid.len(), values.len())));
        }
        Ok(Potential {
            grid,
            values,
            seed: None,
            spec: None,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Potential {
            grid,
            values: vec![0.0; grid.len()],
            seed: None,
            spec: None,
        }
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.values)
    }

    pub fn variance(&self) -> f64 {
        crate::stats::variance(&self.values)
    }

    /// `xi = eta / eps` at the lattice sites.
    pub fn xi_values(&self) -> Vec<f64> {
        let eps = self.grid.epsilon();
        self.values.iter().map(|v| v / eps).collect()
    }
}

pub fn sample_potential(spec: &PotentialSpec, grid: GridSpec, seed: u64) -> Result<Potential> {
    spec.validate(grid)?;
    let order: Vec<usize> = spec.enumeration.clone().unwrap_or_else(|| (0..grid.len()).collect());
    let mut values = vec![0.0; grid.len()];
    for (&site, v) in order.iter().zip(draw_sequence(spec, order.len(), &mut rng_from_seed(seed))) {
        values[site] = v;
    }
    Ok(Potential {
        grid,
        values,
        seed: Some(seed),
        spec: Some(spec.clone()),
    })
}

/// Disorder values in enumeration order.
pub(crate) fn draw_sequence(spec: &PotentialSpec, len: usize, rng: &mut LabRng) -> Vec<f64> {
    let mut sign = 1.0;
    (0..len)
        .map(|_| {
            let e = spec.distribution.sample(rng);
            let v = match spec.kind {
                PotentialKind::Iid => e,
                PotentialKind::Martingale => sign * e,
            };
            sign = if v >= 0.0 { 1.0 } else { -1.0 };
            v
        })
        .collect()
}

/// `F xi(k) = eps sum_l e^{-i<k, eps l>} eta(l)`.
pub fn build_xi(eta: &Potential) -> SpectralField {
    let lat = LatticeField::from_real(eta.grid, &eta.values).expect("potential length matches grid");
    dft_lattice(&lat).scale(Complex64::new(1.0 / eta.grid.epsilon(), 0.0))
}

/// `F X(k) = 1_{k != 0} F xi(k) / (f(eps k) |k|^2)`.
pub fn build_x(xi: &SpectralField, mu: &WalkMeasure) -> SpectralField {
    let eps = xi.grid().epsilon();
    xi.map_modes(|k, c| {
        if k == [0, 0] {
            Complex64::new(0.0, 0.0)
        } else {
            c / (mu.multiplier([eps * k[0] as f64, eps * k[1] as f64]) * norm2(k))
        }
    })
}

fn norm2(k: Mode) -> f64 {
    (k[0] * k[0] + k[1] * k[1]) as f64
}

/// `c_K = (2 pi)^{-2} sum_{0 < |k|_inf < K/2} 1 / |k|^2`.
pub fn renorm_constant(k: usize) -> f64 {
    let h = (k as i64 + 1) / 2 - 1;
    let mut s = 0.0;
    for a in -h..=h {
        for b in -h..=h {
            if a != 0 || b != 0 {
                s += 1.0 / norm2([a, b]);
            }
        }
    }
    s / (4.0 * PI * PI)
}

/// `c~ = (2 pi)^{-2} sum_{0 < |k|_inf < K/2} 1 / (f(eps k) |k|^2)` with the
/// lattice spacing `eps = 2 pi / N` of `grid`; `K = N` gives `c~_N`.
pub fn renorm_constant_tilde_truncated(grid: GridSpec, k: usize, mu: &WalkMeasure) -> f64 {
    let eps = grid.epsilon();
    let h = (k as i64 + 1) / 2 - 1;
    let mut s = 0.0;
    for a in -h..=h {
        for b in -h..=h {
            if a != 0 || b != 0 {
                s += 1.0 / (mu.multiplier([eps * a as f64, eps * b as f64]) * norm2([a, b]));
            }
        }
    }
    s / (4.0 * PI * PI)
}

pub fn renorm_constant_tilde(grid: GridSpec, mu: &WalkMeasure) -> f64 {
    renorm_constant_tilde_truncated(grid, grid.n(), mu)
}

fn shift_constant(f: &SpectralField, c: f64) -> SpectralField {
    let mut out = f.clone();
    let idx = out.grid().index([0, 0]).expect("boxes contain the zero mode");
    out.coeffs_mut()[idx] += 4.0 * PI * PI * c;
    out
}

/// The enhanced noise of one disorder sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancedNoise {
    pub grid: GridSpec,
    pub xi: SpectralField,
    pub x: SpectralField,
    /// `X o xi - c~_N` on the box of side `2N - 1`.
    pub area: SpectralField,
    pub c_n: f64,
    pub c_tilde_n: f64,
    pub seed: Option<u64>,
    pub spec: Option<PotentialSpec>,
}

pub fn enhanced_noise(eta: &Potential, mu: &WalkMeasure, part: &DyadicPartition) -> EnhancedNoise {
    let grid = eta.grid;
    let xi = build_xi(eta);
    let x = build_x(&xi, mu);
    let c_tilde_n = renorm_constant_tilde(grid, mu);
    let area = shift_constant(&bilinear(part, &x, &xi, Bilinear::Resonant), -c_tilde_n);
    EnhancedNoise {
        grid,
        xi,
        x,
        area,
        c_n: renorm_constant(grid.n()),
        c_tilde_n,
        seed: eta.seed,
        spec: eta.spec.clone(),
    }
}

/// `P_K X o P_K xi - c_K`.
pub fn coarse_resonant(en: &EnhancedNoise, k: usize, part: &DyadicPartition) -> Result<SpectralField> {
    let xk = project_below(&en.x, k, en.grid)?;
    let xik = project_below(&en.xi, k, en.grid)?;
    Ok(shift_constant(&bilinear(part, &xk, &xik, Bilinear::Resonant), -renorm_constant(k)))
}

/// `C^gamma_inf` distance between the area term and its `K`-truncation.
pub fn cauchy_diagnostic(en: &EnhancedNoise, k: usize, gamma: f64, part: &DyadicPartition) -> Result<f64> {
    let coarse = coarse_resonant(en, k, part)?;
    besov_norm(part, &(&en.area - &coarse), gamma, Exponent::Infinite, Exponent::Infinite)
}

/// `A_N u = Pi_N[(Pi_N(u < X)) o xi] - P_N[(u < X) o xi]`.
pub fn random_operator_apply(u: &SpectralField, en: &EnhancedNoise, part: &DyadicPartition) -> Result<SpectralField> {
    if u.grid() != en.grid {
        return Err(invalid(format!(
            "test field must live on the lattice modes (side {}), got side {}",
            en.grid.n(),
            u.grid().n()
        )));
    }
    let ux = bilinear(part, u, &en.x, Bilinear::Para);
    let folded = bilinear(part, &pi_n(&ux, en.grid), &en.xi, Bilinear::Resonant);
    let first = pi_n(&folded, en.grid);
    let wide = bilinear(part, &ux, &en.xi, Bilinear::Resonant);
    let second = project_below(&wide, en.grid.n(), en.grid)?;
    Ok(&first - &second)
}

/// Real random field with Gaussian coefficients damped by `2^{-j alpha}` on
/// block `j`, normalized to unit `C^alpha_1` norm.
pub fn random_test_field(grid: GridSpec, alpha: f64, part: &DyadicPartition, rng: &mut LabRng) -> Result<SpectralField> {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in grid.modes() {
        let neg = [-k[0], -k[1]];
        if k > neg {
            continue;
        }
        let r = (norm2(k)).sqrt();
        let j_max = part.j_max(grid);
        let w: f64 = (-1..=j_max).map(|j| part.rho_j(j, r) * (-(j as f64) * alpha).exp2()).sum();
        let g1: f64 = StandardNormal.sample(rng);
        let g2: f64 = StandardNormal.sample(rng);
        let c = if k == neg { Complex64::new(g1, 0.0) } else { Complex64::new(g1, g2) } * w;
        coeffs[grid.index_unchecked(k)] = c;
        coeffs[grid.index_unchecked(neg)] = c.conj();
    }
    let u = SpectralField::new(grid, coeffs)?;
    let n = besov_norm(part, &u, alpha, Exponent::Finite(1.0), Exponent::Infinite)?;
    Ok(&u * (1.0 / n))
}

/// Largest `||A_N u||_{C^{2 alpha - 2}_1}` over `trials` random unit test
/// fields: a lower bound for the operator norm.
pub fn random_operator_norm_estimate(
    en: &EnhancedNoise,
    alpha: f64,
    trials: usize,
    seed: u64,
    part: &DyadicPartition,
) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(invalid(format!("regularity alpha must lie in (1/2, 1), got {alpha}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let u = random_test_field(en.grid, alpha, part, &mut rng)?;
        let a = random_operator_apply(&u, en, part)?;
        best = best.max(besov_norm(part, &a, 2.0 * alpha - 2.0, Exponent::Finite(1.0), Exponent::Infinite)?);
    }
    Ok(best)
}

/// `S_N(phi) = eps sum_l phi(eps l) eta(l)`, the white-noise pairing.
pub fn white_noise_pairing(eta: &Potential, phi: impl Fn([f64; 2]) -> f64) -> f64 {
    let eps = eta.grid.epsilon();
    eta.grid
        .modes()
        .zip(&eta.values)
        .map(|(l, v)| phi([eps * l[0] as f64, eps * l[1] as f64]) * v)
        .sum::<f64>()
        * eps
}

/// Pointwise area-term observables of one disorder sample at a point `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaSample {
    pub n: usize,
    pub seed: u64,
    /// `(X o xi)(x)`, i.e. the area term before the `c~_N` subtraction.
    pub resonant_at_x: f64,
    /// `Delta_q (X <> xi)(x)` for `q = -1, 0, ...`.
    pub blocks: Vec<f64>,
    /// `(K, C^gamma distance to the K-truncation)`.
    pub cauchy: Vec<(usize, f64)>,
}

pub fn area_sample(
    spec: &PotentialSpec,
    mu: &WalkMeasure,
    grid: GridSpec,
    seed: u64,
    x: [f64; 2],
    truncations: &[usize],
    gamma: f64,
    part: &DyadicPartition,
) -> Result<AreaSample> {
    let eta = sample_potential(spec, grid, seed)?;
    let en = enhanced_noise(&eta, mu, part);
    let blocks = (-1..=part.j_max(en.area.grid()))
        .map(|q| Ok(extension_eval(&block(part, q, &en.area)?, x).re))
        .collect::<Result<Vec<_>>>()?;
    let cauchy = truncations
        .iter()
        .map(|&k| Ok((k, cauchy_diagnostic(&en, k, gamma, part)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AreaSample {
        n: grid.n(),
        seed,
        resonant_at_x: extension_eval(&en.area, x).re + en.c_tilde_n,
        blocks,
        cauchy,
    })
}

/// Cross-sample summary of [`AreaSample`]s at one lattice size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaSummary {
    pub n: usize,
    pub samples: usize,
    pub c_tilde_n: f64,
    pub resonant_mean: McEstimate,
    /// Sample variance of each block value, with standard errors.
    pub block_variance: Vec<McEstimate>,
    pub cauchy_mean: Vec<(usize, McEstimate)>,
}

impl AreaSummary {
    /// `|mean - c~_N| / se`.
    pub fn z_score(&self) -> f64 {
        (self.resonant_mean.mean - self.c_tilde_n).abs() / self.resonant_mean.se
    }
}

pub fn summarize_area(n: usize, mu: &WalkMeasure, samples: &[AreaSample]) -> Result<AreaSummary> {
    let grid = GridSpec::new(n)?;
    let first = samples.first().ok_or_else(|| invalid("no area samples"))?;
    let values: Vec<f64> = samples.iter().map(|s| s.resonant_at_x).collect();
    let block_variance = (0..first.blocks.len())
        .map(|q| variance_se(&samples.iter().map(|s| s.blocks[q]).collect::<Vec<_>>()))
        .collect();
    let cauchy_mean = first
        .cauchy
        .iter()
        .enumerate()
        .map(|(i, &(k, _))| (k, mean_se(&samples.iter().map(|s| s.cauchy[i].1).collect::<Vec<_>>())))
        .collect();
    Ok(AreaSummary {
        n,
        samples: samples.len(),
        c_tilde_n: renorm_constant_tilde(grid, mu),
        resonant_mean: mean_se(&values),
        block_variance,
        cauchy_mean,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(rename = "N")]
    n: usize,
    seed: Option<u64>,
    c_n: f64,
    c_tilde_n: f64,
    spec: &'a Option<PotentialSpec>,
}

/// Write `xi.pamf`, `x.pamf`, `area.pamf` and `noise.json` into `dir`.
pub fn write_enhanced_noise(dir: &Path, en: &EnhancedNoise) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, f) in [("xi.pamf", &en.xi), ("x.pamf", &en.x), ("area.pamf", &en.area)] {
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        io::write_spectral(&mut w, f)?;
        w.flush()?;
    }
    let sidecar = Sidecar {
        n: en.grid.n(),
        seed: en.seed,
        c_n: en.c_n,
        c_tilde_n: en.c_tilde_n,
        spec: &en.spec,
    };
    std::fs::write(dir.join("noise.json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn gaussian_moments() {
        // E|X|^2 = 1, E|X|^4 = 3, E|X| = sqrt(2/pi).
        let g = Distribution::Gaussian;
        assert!((g.abs_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((g.abs_moment(4.0) - 3.0).abs() < 1e-12);
        assert!((g.abs_moment(1.0) - (2.0 / PI).sqrt()).abs() < 1e-12);
        assert!((Distribution::Uniform.abs_moment(2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_is_checked() {
        let bad = Distribution::Tabulated { values: vec![0.0, 2.0], probs: vec![0.5, 0.5] };
        assert!(bad.validate().is_err());
        let good = Distribution::Tabulated { values: vec![-2.0, 0.5], probs: vec![0.2, 0.8] };
        assert!(good.validate().is_ok());
    }

    #[test]
    fn spec_validation() {
        let mut s = PotentialSpec::iid(Distribution::Gaussian);
        assert!(s.validate(grid(3)).is_ok());
        s.moment_order = 6.0;
        assert!(s.validate(grid(3)).is_err());
        s.moment_order = 8.0;
        s.moment_bound = 10.0; // E|X|^8 = 105
        assert!(s.validate(grid(3)).is_err());
        let mut s = PotentialSpec::iid(Distribution::Rademacher);
        s.enumeration = Some(vec![0, 1, 2, 3, 4, 5, 6, 7, 7]);
        assert!(s.validate(grid(3)).is_err());
    }

    #[test]
    fn sampling_examples() {
        let g = grid(27);
        let spec = PotentialSpec::iid(Distribution::Gaussian);
        let a = sample_potential(&spec, g, 5).unwrap();
        assert_eq!(a, sample_potential(&spec, g, 5).unwrap());
        assert_ne!(a.values, sample_potential(&spec, g, 6).unwrap().values);
        assert!((a.variance() - 1.0).abs() < 3.0 / 27.0);
        let r = sample_potential(&PotentialSpec::iid(Distribution::Rademacher), g, 1).unwrap();
        assert!(r.values.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn martingale_signs_follow_the_past() {
        let g = grid(9);
        let mut spec = PotentialSpec::iid(Distribution::Tabulated { values: vec![-2.0, 0.5], probs: vec![0.2, 0.8] });
        spec.kind = PotentialKind::Martingale;
        let p = sample_potential(&spec, g, 3).unwrap();
        let mut sign = 1.0;
        for &v in &p.values {
            let e = v * sign;
            assert!(e == -2.0 || e == 0.5);
            sign = v.signum();
        }
    }

    #[test]
    fn xi_examples() {
        let g = grid(9);
        let ones = Potential::from_values(g, vec![1.0; 81]).unwrap();
        let xi = build_xi(&ones);
        assert!((xi.coeff([0, 0]) - Complex64::new(2.0 * PI * 9.0, 0.0)).norm() < 1e-10);
        assert!(g.modes().filter(|&k| k != [0, 0]).all(|k| xi.coeff(k).norm() < 1e-10));
        assert_eq!(build_xi(&Potential::zeros(g)).max_abs(), 0.0);
    }

    #[test]
    fn xi_matches_direct_sum() {
        let g = grid(5);
        let eta = sample_potential(&PotentialSpec::iid(Distribution::Gaussian), g, 2).unwrap();
        let xi = build_xi(&eta);
        let eps = g.epsilon();
        for k in g.modes() {
            let direct: Complex64 = g
                .modes()
                .zip(&eta.values)
                .map(|(l, v)| Complex64::from_polar(*v, -eps * (k[0] * l[0] + k[1] * l[1]) as f64))
                .sum::<Complex64>()
                * eps;
            assert!((direct - xi.coeff(k)).norm() < 1e-12);
        }
        // Parseval: sum |F xi|^2 = eps^2 N^2 sum eta^2.
        let lhs: f64 = xi.coeffs().iter().map(|c| c.norm_sqr()).sum();
        let rhs = eps * eps * 25.0 * eta.values.iter().map(|v| v * v).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10 * rhs);
    }

    #[test]
    fn constants() {
        assert!((renorm_constant(3) - 6.0 / (4.0 * PI * PI)).abs() < 1e-12);
        assert_eq!(renorm_constant(1), 0.0);
        // Nearest-neighbour f on the 8 nonzero modes of N = 3:
        // f(eps e1) = 2 (1 - cos eps) / eps^2, f(eps (1,1)) = 4 (1 - cos eps) / (2 eps^2).
        let g = grid(3);
        let eps = g.epsilon();
        let f1 = 2.0 * (1.0 - eps.cos()) / (eps * eps);
        let f2 = 4.0 * (1.0 - eps.cos()) / (2.0 * eps * eps);
        let expected = (4.0 / f1 + 4.0 / (2.0 * f2)) / (4.0 * PI * PI);
        let got = renorm_constant_tilde(g, &WalkMeasure::nearest_neighbor());
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn zero_disorder_area_is_constant() {
        let g = grid(9);
        let part = DyadicPartition::default();
        let mu = WalkMeasure::nearest_neighbor();
        let en = enhanced_noise(&Potential::zeros(g), &mu, &part);
        assert_eq!(en.xi.max_abs(), 0.0);
        assert_eq!(en.x.max_abs(), 0.0);
        let v = extension_eval(&en.area, [0.4, 2.0]);
        assert!((v.re + en.c_tilde_n).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn x_relation_and_realness() {
        let g = grid(9);
        let part = DyadicPartition::default();
        let mu = WalkMeasure::range_two(0.5);
        let eta = sample_potential(&PotentialSpec::iid(Distribution::Uniform), g, 8).unwrap();
        let en = enhanced_noise(&eta, &mu, &part);
        assert_eq!(en.x.coeff([0, 0]), Complex64::new(0.0, 0.0));
        let eps = g.epsilon();
        for k in g.modes().filter(|&k| k != [0, 0]) {
            let back = en.x.coeff(k) * mu.multiplier([eps * k[0] as f64, eps * k[1] as f64]) * norm2(k);
            assert!((back - en.xi.coeff(k)).norm() <= 1e-12 * en.xi.coeff(k).norm());
        }
        for f in [&en.xi, &en.x, &en.area] {
            assert!(f.hermitian_defect() < 1e-9 * f.max_abs().max(1.0));
        }
    }

    #[test]
    fn random_operator_vanishes_without_noise_and_is_linear() {
        let g = grid(9);
        let part = DyadicPartition::default();
        let mu = WalkMeasure::nearest_neighbor();
        let mut rng = rng_from_seed(4);
        let u = random_test_field(g, 0.75, &part, &mut rng).unwrap();
        let v = random_test_field(g, 0.75, &part, &mut rng).unwrap();
        let zero = enhanced_noise(&Potential::zeros(g), &mu, &part);
        assert_eq!(random_operator_apply(&u, &zero, &part).unwrap().max_abs(), 0.0);

        let eta = sample_potential(&PotentialSpec::iid(Distribution::Gaussian), g, 1).unwrap();
        let en = enhanced_noise(&eta, &mu, &part);
        assert_eq!(random_operator_apply(&SpectralField::zeros(g), &en, &part).unwrap().max_abs(), 0.0);
        let (a, b) = (1.7, -0.4);
        let lhs = random_operator_apply(&(&(&u * a) + &(&v * b)), &en, &part).unwrap();
        let rhs = &(&random_operator_apply(&u, &en, &part).unwrap() * a) + &(&random_operator_apply(&v, &en, &part).unwrap() * b);
        assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * rhs.max_abs());
        assert!(random_operator_apply(&SpectralField::zeros(grid(7)), &en, &part).is_err());
        assert!(random_operator_norm_estimate(&en, 0.4, 1, 0, &part).is_err());
    }

    #[test]
    fn test_field_is_real_and_normalized() {
        let g = grid(9);
        let part = DyadicPartition::default();
        let u = random_test_field(g, 0.75, &part, &mut rng_from_seed(0)).unwrap();
        assert!(u.hermitian_defect() < 1e-14);
        let n = besov_norm(&part, &u, 0.75, Exponent::Finite(1.0), Exponent::Infinite).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_truncation_of_unit_multiplier_has_no_distance() {
        // With K = N the truncation only differs by c_N versus c~_N.
        let g = grid(9);
        let part = DyadicPartition::default();
        let mu = WalkMeasure::nearest_neighbor();
        let eta = sample_potential(&PotentialSpec::iid(Distribution::Gaussian), g, 3).unwrap();
        let en = enhanced_noise(&eta, &mu, &part);
        let coarse = coarse_resonant(&en, 9, &part).unwrap();
        let diff = &en.area - &coarse;
        let shift = 4.0 * PI * PI * (en.c_n - en.c_tilde_n);
        assert!((diff.coeff([0, 0]).re - shift).abs() < 1e-9);
        assert!(g.sum_box(&g).modes().filter(|&k| k != [0, 0]).all(|k| diff.coeff(k).norm() < 1e-9));
        assert!(coarse_resonant(&en, 11, &part).is_err());
    }

    #[test]
    fn enhanced_noise_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid(5);
        let part = DyadicPartition::default();
        let eta = sample_potential(&PotentialSpec::iid(Distribution::Gaussian), g, 1).unwrap();
        let en = enhanced_noise(&eta, &WalkMeasure::nearest_neighbor(), &part);
        write_enhanced_noise(dir.path(), &en).unwrap();
        let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("noise.json")).unwrap()).unwrap();
        assert_eq!(meta["N"], 5);
        assert_eq!(meta["seed"], 1);
        let mut f = File::open(dir.path().join("area.pamf")).unwrap();
        match io::read_field(&mut f).unwrap() {
            io::FieldData::Spectral(a) => assert_eq!(a, en.area),
            other => panic!("unexpected {other:?}"),
        }
    }
    #[test]
    fn area_blocks_resum_to_the_area_term() {
        let part = DyadicPartition::default();
        let mu = WalkMeasure::nearest_neighbor();
        let spec = PotentialSpec::iid(Distribution::Gaussian);
        let samples: Vec<AreaSample> = (0..4)
            .map(|s| area_sample(&spec, &mu, grid(9), s, [0.3, -1.1], &[3], -0.5, &part).unwrap())
            .collect();
        let c = renorm_constant_tilde(grid(9), &mu);
        for s in &samples {
            let total: f64 = s.blocks.iter().sum();
            assert!((total + c - s.resonant_at_x).abs() < 1e-9);
            assert_eq!(s.cauchy.len(), 1);
        }
        let summary = summarize_area(9, &mu, &samples).unwrap();
        assert_eq!(summary.samples, 4);
        assert_eq!(summary.c_tilde_n, c);
        assert!(summarize_area(9, &mu, &[]).is_err());
    }

}
