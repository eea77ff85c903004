//! Discrete directed polymer: continuous-time random walks reweighted by
//! `exp(int_0^T xi(B_s) ds)`, and the two-solve kernel representation
//!
//! ```text
//! K_T(s,t) f(x) = u^{f u1(T-t)}(t-s, x) / u1(T-s, x),   u1 = solution from 1.
//! ```
//!
//! The kernel is built on a fixed time grid; every query time must be a grid
//! point. On that grid the discrete propagators compose exactly, so
//! Chapman-Kolmogorov holds up to rounding.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PamError, Result};
use crate::lattice::{GridSpec, LatticeField, Mode, WalkMeasure};
use crate::rng::{rng_from_seed, LabRng};
use crate::solver::{resolve_dt, DtPolicy, PamOperator, Propagator, WalkSampler};
use crate::stats::quantile_sorted;

/// A rescaled CTRW trajectory on the torus lattice, stored as its jump chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtrwPath {
    pub start: Mode,
    pub jump_times: Vec<f64>,
    /// Lattice displacements, one per jump.
    pub jumps: Vec<Mode>,
    pub horizon: f64,
    pub n: usize,
}

impl CtrwPath {
    /// Lattice site (centred, wrapped) occupied at time `t`.
    pub fn site_at(&self, t: f64) -> Mode {
        let grid = GridSpec::new(self.n).expect("path built on a valid grid");
        let taken = self.jump_times.partition_point(|&s| s <= t);
        let mut pos = self.start;
        for j in &self.jumps[..taken] {
            pos = [pos[0] + j[0], pos[1] + j[1]];
        }
        grid.mode(grid.index_wrapped(pos))
    }

    /// Sites visited, starting with `start`.
    pub fn sites(&self) -> Vec<Mode> {
        let grid = GridSpec::new(self.n).expect("path built on a valid grid");
        let mut pos = grid.mode(grid.index_wrapped(self.start));
        let mut out = vec![pos];
        for j in &self.jumps {
            pos = grid.mode(grid.index_wrapped([pos[0] + j[0], pos[1] + j[1]]));
            out.push(pos);
        }
        out
    }
}

/// Sample a path with jump rate `eps^{-2} lambda` on `[0, horizon]`.
pub fn sample_ctrw(mu: &WalkMeasure, grid: GridSpec, x0: Mode, horizon: f64, seed: u64) -> Result<CtrwPath> {
    mu.require_valid()?;
    if !(horizon >= 0.0) {
        return Err(invalid(format!("horizon must be nonnegative, got {horizon}")));
    }
    let walk = WalkSampler::new(mu, grid);
    Ok(sample_with(&walk, grid, x0, horizon, &mut rng_from_seed(seed)))
}

fn sample_with(walk: &WalkSampler, grid: GridSpec, x0: Mode, horizon: f64, rng: &mut LabRng) -> CtrwPath {
    let mut jump_times = Vec::new();
    let mut jumps = Vec::new();
    let mut t = 0.0;
    loop {
        t += walk.holding_time(rng);
        if t > horizon {
            break;
        }
        jump_times.push(t);
        jumps.push(walk.jump(rng));
    }
    CtrwPath {
        start: x0,
        jump_times,
        jumps,
        horizon,
        n: grid.n(),
    }
}

/// `exp(int_0^T xi(path(s)) ds)` with `xi` given by its lattice values.
pub fn path_weight(path: &CtrwPath, xi: &[f64]) -> Result<f64> {
    let grid = GridSpec::new(path.n)?;
    if xi.len() != grid.len() {
        return Err(invalid(format!("potential needs {} values, got {}", grid.len(), xi.len())));
    }
    let sites = path.sites();
    let mut integral = 0.0;
    let mut prev = 0.0;
    for (i, site) in sites.iter().enumerate() {
        let next = path.jump_times.get(i).copied().unwrap_or(path.horizon);
        integral += xi[grid.index_wrapped(*site)] * (next - prev);
        prev = next;
    }
    Ok(integral.exp())
}

/// A kernel query `K_T(s,t) f`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolymerKernelQuery {
    pub s: f64,
    pub t: f64,
    pub horizon: f64,
    pub f: LatticeField,
}

impl PolymerKernelQuery {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.s && self.s <= self.t && self.t <= self.horizon) {
            return Err(invalid(format!(
                "kernel query needs 0 <= s <= t <= T, got s={}, t={}, T={}",
                self.s, self.t, self.horizon
            )));
        }
        Ok(())
    }
}

/// Polymer transition kernels for a fixed horizon, on a uniform time grid.
pub struct PolymerKernel {
    grid: GridSpec,
    horizon: f64,
    dt: f64,
    steps: usize,
    prop: Propagator,
    /// `u1` at times `k dt`, real lattice values.
    ones: Vec<Vec<f64>>,
    cap: f64,
}

impl PolymerKernel {
    pub fn new(op: &PamOperator, horizon: f64, policy: DtPolicy) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        let (dt, steps) = resolve_dt(op, policy, horizon)?;
        let grid = op.grid();
        let prop = Propagator::new(op, dt)?;
        let cap = f64::MAX;
        let mut ones = vec![vec![1.0; grid.len()]];
        let mut u = vec![Complex64::new(1.0, 0.0); grid.len()];
        prop.run(&mut u, steps, Some(1), cap, 0.0, |_, state| {
            ones.push(state.iter().map(|v| v.re).collect());
        })?;
        Ok(PolymerKernel {
            grid,
            horizon,
            dt,
            steps,
            prop,
            ones,
            cap,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Grid times `k dt`, `k = 0..=steps`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// Index of a grid time.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if !(k >= 0.0 && k <= self.steps as f64) || (k * self.dt - t).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(invalid(format!("time {t} is not on the kernel grid (dt = {})", self.dt)));
        }
        Ok(k as usize)
    }

    /// `u1(r)` for a grid time `r`.
    pub fn partition_field(&self, r: f64) -> Result<&[f64]> {
        Ok(&self.ones[self.step_of(r)?])
    }

    fn denominator(&self, k: usize) -> Result<&[f64]> {
        let d = &self.ones[k];
        if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
            return Err(PamError::DegenerateMeasure(format!(
                "u1({}) is not positive at site {:?}",
                self.time(k),
                self.grid.mode(i)
            )));
        }
        Ok(d)
    }

    /// `K_T(s,t) f` at every lattice site.
    pub fn apply(&self, s: f64, t: f64, f: &LatticeField) -> Result<LatticeField> {
        PolymerKernelQuery {
            s,
            t,
            horizon: self.horizon,
            f: f.clone(),
        }
        .validate()?;
        if f.grid() != self.grid {
            return Err(invalid("test function lives on a different lattice"));
        }
        let (ks, kt) = (self.step_of(s)?, self.step_of(t)?);
        let weight = &self.ones[self.steps - kt];
        let den = self.denominator(self.steps - ks)?;
        let g = LatticeField::new(self.grid, f.values().iter().zip(weight).map(|(v, w)| v * w).collect())?;
        let v = self.prop.advance(&g, kt - ks, self.cap)?;
        LatticeField::new(self.grid, v.values().iter().zip(den).map(|(v, d)| v / d).collect())
    }

    /// Law of the polymer at time `t` given it sits at `x` at time `s`:
    /// `p(y) = K_T(s,t) 1_y (x)`. Uses the symmetry of the discrete propagator.
    pub fn transition_law(&self, s: f64, t: f64, x: Mode) -> Result<Vec<f64>> {
        PolymerKernelQuery {
            s,
            t,
            horizon: self.horizon,
            f: LatticeField::constant(self.grid, 0.0),
        }
        .validate()?;
        let (ks, kt) = (self.step_of(s)?, self.step_of(t)?);
        let den = self.denominator(self.steps - ks)?[self.grid.index_wrapped(x)];
        let weight = &self.ones[self.steps - kt];
        let g = self.prop.advance(&LatticeField::indicator(self.grid, self.grid.mode(self.grid.index_wrapped(x))), kt - ks, self.cap)?;
        Ok(g.values().iter().zip(weight).map(|(v, w)| (v.re * w / den).max(0.0)).collect())
    }

    /// Marginal of the polymer started at `x` at time `t`.
    pub fn marginal(&self, x: Mode, t: f64) -> Result<Vec<f64>> {
        self.transition_law(0.0, t, x)
    }
}

/// `K_T(s,t) f` from a fresh two-solve construction.
pub fn transition_kernel(op: &PamOperator, query: &PolymerKernelQuery, policy: DtPolicy) -> Result<LatticeField> {
    query.validate()?;
    PolymerKernel::new(op, query.horizon, policy)?.apply(query.s, query.t, &query.f)
}

/// Grid path of the polymer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolymerPath {
    pub times: Vec<f64>,
    pub sites: Vec<Mode>,
}

/// Sample `n_paths` polymer paths on `times` (grid times, increasing) by
/// drawing each step from the transition law of the previous site.
pub fn sample_polymer_paths(kernel: &PolymerKernel, x: Mode, times: &[f64], n_paths: usize, seed: u64) -> Result<Vec<PolymerPath>> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("path times must be nonnegative and strictly increasing"));
    }
    let g = kernel.grid;
    let x = g.mode(g.index_wrapped(x));
    let mut grid_times = vec![0.0];
    grid_times.extend(times.iter().copied().filter(|&t| t > 0.0));
    for &t in &grid_times {
        kernel.step_of(t)?;
    }
    let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut rng = rng_from_seed(seed);
    let mut paths = Vec::with_capacity(n_paths);
    for _ in 0..n_paths {
        let mut sites = vec![x];
        for (i, w) in grid_times.windows(2).enumerate() {
            let cur = *sites.last().expect("nonempty");
            let key = (i, g.index_wrapped(cur));
            if !cache.contains_key(&key) {
                let law = kernel.transition_law(w[0], w[1], cur)?;
                cache.insert(key, cumulative(&law));
            }
            let cdf = &cache[&key];
            sites.push(g.mode(draw(cdf, &mut rng)));
        }
        paths.push(PolymerPath {
            times: grid_times.clone(),
            sites,
        });
    }
    Ok(paths)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn draw(cdf: &[f64], rng: &mut LabRng) -> usize {
    let u = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// CSV with header `t,site1,site2`.
pub fn write_path_csv<W: Write>(w: &mut W, path: &PolymerPath) -> Result<()> {
    writeln!(w, "t,site1,site2")?;
    for (t, s) in path.times.iter().zip(&path.sites) {
        writeln!(w, "{t},{},{}", s[0], s[1])?;
    }
    Ok(())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Weighted CTRW marginal versus kernel marginal at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalComparison {
    pub t: f64,
    pub tv: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mc_marginal: Vec<f64>,
    pub kernel_marginal: Vec<f64>,
}

impl MarginalComparison {
    pub fn ci_width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheckReport {
    pub n: usize,
    pub start: Mode,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Mean path weight, the Monte Carlo estimate of `Z_{N,T,x}` (unrenormalized).
    pub partition_estimate: f64,
    pub effective_sample_size: f64,
    pub warning: Option<String>,
    pub rows: Vec<MarginalComparison>,
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_EFFECTIVE_SAMPLES: f64 = 50.0;

/// Compare importance-weighted CTRW marginals with kernel marginals at the
/// given grid times; the TV interval comes from a percentile bootstrap over paths.
pub fn mc_vs_kernel_check(
    op: &PamOperator,
    kernel: &PolymerKernel,
    x: Mode,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<MarginalCheckReport> {
    if n_paths < 2 {
        return Err(invalid(format!("need at least 2 paths, got {n_paths}")));
    }
    let g = op.grid();
    if kernel.grid != g {
        return Err(invalid("kernel and operator live on different lattices"));
    }
    let horizon = kernel.horizon;
    let walk = WalkSampler::new(op.walk(), g);
    let mut rng = rng_from_seed(seed);
    let mut weights = Vec::with_capacity(n_paths);
    let mut positions: Vec<Vec<usize>> = vec![Vec::with_capacity(n_paths); times.len()];
    for _ in 0..n_paths {
        let path = sample_with(&walk, g, x, horizon, &mut rng);
        weights.push(path_weight(&path, op.xi())?);
        for (slot, &t) in positions.iter_mut().zip(times) {
            slot.push(g.index_wrapped(path.site_at(t)));
        }
    }
    let sum_w: f64 = weights.iter().sum();
    let sum_w2: f64 = weights.iter().map(|w| w * w).sum();
    let ess = sum_w * sum_w / sum_w2;
    let warning = (ess < MIN_EFFECTIVE_SAMPLES)
        .then(|| format!("unreliable estimate: effective sample size {ess:.1} < {MIN_EFFECTIVE_SAMPLES}"));
    let resamples: Vec<Vec<usize>> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| (0..n_paths).map(|_| rng.random_range(0..n_paths)).collect())
        .collect();
    let mut rows = Vec::with_capacity(times.len());
    for (pos, &t) in positions.iter().zip(times) {
        let exact = kernel.marginal(x, t)?;
        let hist = |idx: &mut dyn Iterator<Item = usize>| {
            let mut h = vec![0.0; g.len()];
            let mut total = 0.0;
            for i in idx {
                h[pos[i]] += weights[i];
                total += weights[i];
            }
            h.iter_mut().for_each(|v| *v /= total);
            h
        };
        let mc = hist(&mut (0..n_paths));
        let tv = total_variation(&mc, &exact);
        let mut boot: Vec<f64> = resamples
            .iter()
            .map(|r| total_variation(&hist(&mut r.iter().copied()), &exact))
            .collect();
        boot.sort_by(f64::total_cmp);
        rows.push(MarginalComparison {
            t,
            tv,
            ci_low: quantile_sorted(&boot, 0.025),
            ci_high: quantile_sorted(&boot, 0.975),
            mc_marginal: mc,
            kernel_marginal: exact,
        });
    }
    Ok(MarginalCheckReport {
        n: g.n(),
        start: x,
        horizon,
        n_paths,
        seed,
        partition_estimate: sum_w / n_paths as f64,
        effective_sample_size: ess,
        warning,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{dft_lattice, heat_semigroup, idft_lattice};
    use crate::noise::{sample_potential, Distribution, PotentialSpec};
    use crate::stats::mean_se;
    use proptest::prelude::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    fn gaussian_op(n: usize, seed: u64) -> PamOperator {
        let eta = sample_potential(&PotentialSpec::iid(Distribution::Gaussian), grid(n), seed).unwrap();
        PamOperator::from_potential(&eta, &WalkMeasure::nearest_neighbor()).unwrap()
    }

    fn bump(g: GridSpec) -> LatticeField {
        LatticeField::from_fn(g, |l| Complex64::new(1.0 + (l[0] as f64 * 0.7).sin().powi(2) + 0.1 * l[1] as f64 * l[1] as f64, 0.0))
    }

    #[test]
    fn zero_horizon_has_no_jumps() {
        let p = sample_ctrw(&WalkMeasure::nearest_neighbor(), grid(9), [1, 2], 0.0, 3).unwrap();
        assert!(p.jumps.is_empty());
        assert_eq!(p.site_at(0.0), [1, 2]);
    }

    #[test]
    fn jump_count_matches_poisson_mean() {
        let g = grid(9);
        let mu = WalkMeasure::range_two(0.4);
        let t = 0.3;
        let counts: Vec<f64> = (0..10_000).map(|s| sample_ctrw(&mu, g, [0, 0], t, s).unwrap().jumps.len() as f64).collect();
        let est = mean_se(&counts);
        let expected = mu.jump_rate() / g.epsilon().powi(2) * t;
        assert!((est.mean - expected).abs() < 4.0 * est.se, "{} vs {expected}", est.mean);
    }

    #[test]
    fn displacement_variance_is_diffusive() {
        // Unwrapped displacement of the rescaled walk has variance 2T per coordinate.
        let g = grid(81);
        let mu = WalkMeasure::nearest_neighbor();
        let t = 0.5;
        let eps = g.epsilon();
        let xs: Vec<f64> = (0..10_000)
            .map(|s| {
                let p = sample_ctrw(&mu, g, [0, 0], t, 100 + s).unwrap();
                eps * p.jumps.iter().map(|j| j[0] as f64).sum::<f64>()
            })
            .collect();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let est = mean_se(&sq);
        assert!((est.mean - 2.0 * t).abs() < 4.0 * est.se, "{} (se {})", est.mean, est.se);
    }

    #[test]
    fn path_weights() {
        let g = grid(5);
        let path = CtrwPath {
            start: [0, 0],
            jump_times: vec![0.3],
            jumps: vec![[1, 0]],
            horizon: 1.0,
            n: 5,
        };
        assert_eq!(path_weight(&path, &vec![0.0; g.len()]).unwrap(), 1.0);
        let c = path_weight(&path, &vec![0.4; g.len()]).unwrap();
        assert!((c - 0.4f64.exp()).abs() < 1e-15);
        let mut xi = vec![0.0; g.len()];
        xi[g.index([0, 0]).unwrap()] = 2.0;
        xi[g.index([1, 0]).unwrap()] = -1.0;
        let w = path_weight(&path, &xi).unwrap();
        assert!((w - (2.0 * 0.3 - 0.7f64).exp()).abs() < 1e-14);
        let wrap = CtrwPath { start: [2, 0], ..path.clone() };
        assert_eq!(wrap.site_at(0.5), [-2, 0]);
    }

    #[test]
    fn normalization_and_zero_disorder_heat_kernel() {
        let g = grid(9);
        let op = gaussian_op(9, 5);
        let k = PolymerKernel::new(&op, 0.5, DtPolicy::Fixed { dt: 0.01 }).unwrap();
        let one = k.apply(0.1, 0.4, &LatticeField::constant(g, 1.0)).unwrap();
        assert!(one.values().iter().all(|v| (v - 1.0).norm() < 1e-8));

        let mu = WalkMeasure::range_two(0.3);
        let free = PamOperator::new(g, &mu, vec![0.0; g.len()], 1.7).unwrap();
        let kf = PolymerKernel::new(&free, 1.0, DtPolicy::Fixed { dt: 0.05 }).unwrap();
        let f = bump(g);
        let got = kf.apply(0.2, 0.7, &f).unwrap();
        let heat = idft_lattice(&heat_semigroup(&dft_lattice(&f), 0.5, &mu).unwrap(), g);
        assert!(got.max_abs_diff(&heat) < 1e-8);
    }

    #[test]
    fn chapman_kolmogorov() {
        let g = grid(9);
        let op = gaussian_op(9, 8);
        let k = PolymerKernel::new(&op, 1.0, DtPolicy::Fixed { dt: 0.01 }).unwrap();
        let f = bump(g);
        for (s, t, u) in [(0.0, 0.3, 1.0), (0.1, 0.5, 0.6), (0.2, 0.2, 0.9)] {
            let inner = k.apply(t, u, &f).unwrap();
            let lhs = k.apply(s, t, &inner).unwrap();
            let rhs = k.apply(s, u, &f).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-6, "({s},{t},{u})");
        }
    }

    #[test]
    fn transition_law_is_a_kernel_row() {
        let g = grid(7);
        let op = gaussian_op(7, 2);
        let k = PolymerKernel::new(&op, 0.6, DtPolicy::Fixed { dt: 0.02 }).unwrap();
        let x = [1, -2];
        let law = k.transition_law(0.2, 0.5, x).unwrap();
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let y = [0, 3];
        let direct = k.apply(0.2, 0.5, &LatticeField::indicator(g, y)).unwrap().get(x).re;
        assert!((law[g.index(y).unwrap()] - direct).abs() < 1e-12);
    }

    #[test]
    fn query_errors() {
        let g = grid(5);
        let op = gaussian_op(5, 1);
        let k = PolymerKernel::new(&op, 0.5, DtPolicy::Fixed { dt: 0.1 }).unwrap();
        let f = LatticeField::constant(g, 1.0);
        assert!(k.apply(0.3, 0.2, &f).is_err());
        assert!(k.apply(0.0, 0.25, &f).is_err());
        assert!(k.apply(0.0, 0.6, &f).is_err());
        let neg = PamOperator::new(g, &WalkMeasure::nearest_neighbor(), vec![0.0; g.len()], 0.0).unwrap();
        let mut kn = PolymerKernel::new(&neg, 0.5, DtPolicy::Fixed { dt: 0.1 }).unwrap();
        kn.ones[5][3] = -1.0;
        assert!(matches!(kn.apply(0.0, 0.2, &f), Err(PamError::DegenerateMeasure(_))));
    }

    #[test]
    fn sampled_paths_follow_the_kernel() {
        let g = grid(5);
        let op = gaussian_op(5, 4);
        let k = PolymerKernel::new(&op, 0.4, DtPolicy::Fixed { dt: 0.02 }).unwrap();
        let paths = sample_polymer_paths(&k, [0, 0], &[0.2, 0.4], 20_000, 9).unwrap();
        let exact = k.marginal([0, 0], 0.4).unwrap();
        let mut hist = vec![0.0; g.len()];
        for p in &paths {
            assert_eq!(p.times, vec![0.0, 0.2, 0.4]);
            hist[g.index(p.sites[2]).unwrap()] += 1.0 / paths.len() as f64;
        }
        assert!(total_variation(&hist, &exact) < 0.03);
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &paths[0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,site1,site2\n0,0,0\n"));
        assert!(sample_polymer_paths(&k, [0, 0], &[0.3, 0.2], 1, 1).is_err());
    }

    #[test]
    fn zero_disorder_weights_are_trivial() {
        let g = grid(5);
        let free = PamOperator::new(g, &WalkMeasure::nearest_neighbor(), vec![0.0; g.len()], 0.0).unwrap();
        let k = PolymerKernel::new(&free, 0.5, DtPolicy::Fixed { dt: 0.05 }).unwrap();
        let r = mc_vs_kernel_check(&free, &k, [0, 0], &[0.25, 0.5], 4000, 3).unwrap();
        assert_eq!(r.effective_sample_size, 4000.0);
        assert!(r.warning.is_none());
        assert_eq!(r.partition_estimate, 1.0);
        for row in &r.rows {
            assert!(row.tv <= 3.0 * row.ci_width() + 1e-12, "tv {} width {}", row.tv, row.ci_width());
        }
    }

    #[test]
    fn ci_width_scales_like_inverse_root_n() {
        let op = gaussian_op(5, 6);
        let k = PolymerKernel::new(&op, 0.5, DtPolicy::Adaptive { fraction: 0.01 }).unwrap();
        let w = |n| mc_vs_kernel_check(&op, &k, [0, 0], &[0.5], n, 12).unwrap().rows[0].ci_width();
        let ratio = w(2000) / w(8000);
        assert!((1.5..2.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn low_ess_warns() {
        let g = grid(5);
        let mut xi = vec![0.0; g.len()];
        xi[g.index([1, 0]).unwrap()] = 60.0;
        let op = PamOperator::new(g, &WalkMeasure::nearest_neighbor(), xi, 0.0).unwrap();
        let k = PolymerKernel::new(&op, 0.5, DtPolicy::Fixed { dt: 0.01 }).unwrap();
        let r = mc_vs_kernel_check(&op, &k, [0, 0], &[0.5], 200, 1).unwrap();
        assert!(r.warning.is_some(), "ess {}", r.effective_sample_size);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn kernel_preserves_positivity(seed in 0u64..1000, s in 0usize..5, len in 0usize..5) {
            let g = grid(5);
            let op = gaussian_op(5, seed);
            let k = PolymerKernel::new(&op, 1.0, DtPolicy::Fixed { dt: 0.1 }).unwrap();
            let f = LatticeField::from_fn(g, |l| Complex64::new(((l[0] * 3 + l[1]) as f64 + seed as f64).sin().abs(), 0.0));
            let (s, t) = (s as f64 * 0.1, (s + len) as f64 * 0.1);
            let out = k.apply(s, t, &f).unwrap();
            prop_assert!(out.values().iter().all(|v| v.re >= -1e-12));
        }
    }
}
