//! Semidiscrete renormalized PAM `du = Delta_rw u + Pi_N(u xi) - c_N u` on the
//! lattice, its Feynman-Kac representation, and cross-N convergence studies.
//!
//! On lattice values `Pi_N(E u . E xi)` is the pointwise product `u xi`, so the
//! potential half of the splitting is an exact pointwise exponential and the
//! Laplacian half is an exact Fourier multiplier.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution as _, Exp};
use serde::{Deserialize, Serialize};

use crate::besov::{besov_norm, DyadicPartition, Exponent};
use crate::error::{invalid, PamError, Result};
use crate::lattice::{dft_lattice, extension_eval, idft_lattice, io, Fft2, GridSpec, LatticeField, Mode, SpectralField, WalkMeasure};
use crate::noise::{renorm_constant, sample_potential, EnhancedNoise, Potential, PotentialSpec};
use crate::rng::{rng_from_seed, stream_seed, tag, LabRng};
use crate::stats::{ks_two_sample_tol, mean_se, non_increasing, McEstimate};

/// Initial datum `u0 = eps^theta v0` built from lattice data `v0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `u0 = c`, `theta = 0`.
    Constant { value: f64 },
    /// `v0 = 1_{l = 0}`, `theta = -2`.
    KroneckerDelta,
    /// Explicit real lattice values in row-major order.
    Custom { values: Vec<f64>, theta: f64 },
}

impl InitialCondition {
    pub fn theta(&self) -> f64 {
        match self {
            InitialCondition::Constant { .. } => 0.0,
            InitialCondition::KroneckerDelta => -2.0,
            InitialCondition::Custom { theta, .. } => *theta,
        }
    }

    pub fn lattice_values(&self, grid: GridSpec) -> Result<LatticeField> {
        let scale = grid.epsilon().powf(self.theta());
        match self {
            InitialCondition::Constant { value } => Ok(LatticeField::constant(grid, *value)),
            InitialCondition::KroneckerDelta => Ok(LatticeField::indicator(grid, [0, 0]).scale(scale)),
            InitialCondition::Custom { values, .. } => Ok(LatticeField::from_real(grid, values)?.scale(scale)),
        }
    }
}

/// The linear generator `Delta_rw + xi - c` acting on lattice values.
#[derive(Clone, Debug, PartialEq)]
pub struct PamOperator {
    grid: GridSpec,
    mu: WalkMeasure,
    xi: Vec<f64>,
    c_n: f64,
}

impl PamOperator {
    pub fn new(grid: GridSpec, mu: &WalkMeasure, xi: Vec<f64>, c_n: f64) -> Result<Self> {
        mu.require_valid()?;
        if xi.len() != grid.len() {
            return Err(invalid(format!("potential needs {} values, got {}", grid.len(), xi.len())));
        }
        Ok(PamOperator {
            grid,
            mu: mu.clone(),
            xi,
            c_n,
        })
    }

    /// `xi = eta / eps`, renormalized by `c_N`.
    pub fn from_potential(eta: &Potential, mu: &WalkMeasure) -> Result<Self> {
        Self::new(eta.grid, mu, eta.xi_values(), renorm_constant(eta.grid.n()))
    }

    pub fn from_enhanced(en: &EnhancedNoise, mu: &WalkMeasure) -> Result<Self> {
        let xi = idft_lattice(&en.xi, en.grid).real_parts();
        Self::new(en.grid, mu, xi, en.c_n)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn walk(&self) -> &WalkMeasure {
        &self.mu
    }

    pub fn xi_sup(&self) -> f64 {
        self.xi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense real matrix of the generator; row-major site indices.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let g = self.grid;
        let eps2 = g.epsilon().powi(2);
        let mut m = DMatrix::zeros(g.len(), g.len());
        for i in 0..g.len() {
            let x = g.mode(i);
            for a in self.mu.atoms() {
                let j = g.index_wrapped([x[0] + a.site[0], x[1] + a.site[1]]);
                m[(i, j)] += a.weight / eps2;
            }
            m[(i, i)] += self.xi[i] - self.c_n;
        }
        m
    }
}

/// Time-step selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed { dt: f64 },
    /// Largest step with `dt sup|xi| <= fraction`.
    Adaptive { fraction: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Adaptive { fraction: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub dt: DtPolicy,
    /// Store the state every this many steps (the final state is always stored).
    pub record_every: Option<usize>,
    pub blowup_cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            dt: DtPolicy::default(),
            record_every: None,
            blowup_cap: 1e12,
        }
    }
}

/// Stored solution states.
#[derive(Clone, Debug, PartialEq)]
pub struct PamTrajectory {
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub dt: f64,
    pub scheme: &'static str,
    pub c_n: f64,
    pub seed: Option<u64>,
}

impl PamTrajectory {
    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_lattice(&self) -> LatticeField {
        idft_lattice(self.final_state(), self.grid)
    }
}

/// Strang propagator with a fixed step.
pub struct Propagator {
    dt: f64,
    half: Vec<f64>,
    full: Vec<f64>,
    potential: Vec<f64>,
    fft: Fft2,
}

impl Propagator {
    pub fn new(op: &PamOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let g = op.grid;
        let n = g.n();
        let h = g.half();
        let mut half = vec![0.0; g.len()];
        let mut full = vec![0.0; g.len()];
        for q1 in 0..n {
            for q2 in 0..n {
                let k: Mode = [centred(q1, n, h), centred(q2, n, h)];
                let s = op.mu.laplacian_symbol(g, k);
                half[q1 * n + q2] = (0.5 * dt * s).exp() / (n * n) as f64;
                full[q1 * n + q2] = (dt * s).exp() / (n * n) as f64;
            }
        }
        let potential = op.xi.iter().map(|x| (dt * (x - op.c_n)).exp()).collect();
        Ok(Propagator {
            dt,
            half,
            full,
            potential,
            fft: Fft2::new(n),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `steps` Strang steps, calling `record(step, state)` after the
    /// steps selected by `record_every` and after the last one. Fails if the
    /// sup norm exceeds `cap`; `t0` is only used to report the time.
    pub fn run(
        &self,
        u: &mut [Complex64],
        steps: usize,
        record_every: Option<usize>,
        cap: f64,
        t0: f64,
        mut record: impl FnMut(usize, &[Complex64]),
    ) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        // u holds lattice values; between steps we carry the Fourier data after
        // a pending half step so that consecutive halves merge into one.
        let mut scratch = u.to_vec();
        self.fft.forward(&mut scratch);
        mul(&mut scratch, &self.half);
        for step in 1..=steps {
            self.fft.inverse(&mut scratch);
            let mut sup: f64 = 0.0;
            for (v, p) in scratch.iter_mut().zip(&self.potential) {
                *v *= p;
                sup = sup.max(v.norm());
            }
            if !(sup <= cap) {
                return Err(PamError::BlowUp {
                    time: t0 + (step as f64 - 0.5) * self.dt,
                    cap,
                });
            }
            self.fft.forward(&mut scratch);
            let emit = step == steps || record_every.is_some_and(|r| r > 0 && step % r == 0);
            if emit {
                let mut out = scratch.clone();
                mul(&mut out, &self.half);
                self.fft.inverse(&mut out);
                let sup = out.iter().fold(0.0f64, |m, v| m.max(v.norm()));
                if !(sup <= cap) {
                    return Err(PamError::BlowUp {
                        time: t0 + step as f64 * self.dt,
                        cap,
                    });
                }
                record(step, &out);
                if step == steps {
                    u.copy_from_slice(&out);
                    return Ok(());
                }
            }
            mul(&mut scratch, &self.full);
        }
        Ok(())
    }

    /// Propagate lattice values over `steps` steps.
    pub fn advance(&self, u: &LatticeField, steps: usize, cap: f64) -> Result<LatticeField> {
        let mut v = u.values().to_vec();
        self.run(&mut v, steps, None, cap, 0.0, |_, _| {})?;
        LatticeField::new(u.grid(), v)
    }
}

fn centred(q: usize, n: usize, h: i64) -> i64 {
    if q as i64 <= h {
        q as i64
    } else {
        q as i64 - n as i64
    }
}

fn mul(data: &mut [Complex64], m: &[f64]) {
    for (v, s) in data.iter_mut().zip(m) {
        *v *= s;
    }
}

/// Resolve the step for a horizon `t_final` so that it divides `t_final`.
pub fn resolve_dt(op: &PamOperator, policy: DtPolicy, t_final: f64) -> Result<(f64, usize)> {
    let dt_max = match policy {
        DtPolicy::Fixed { dt } => dt,
        DtPolicy::Adaptive { fraction } => {
            let s = op.xi_sup();
            if s == 0.0 {
                t_final
            } else {
                fraction / s
            }
        }
    };
    if !(dt_max > 0.0) {
        return Err(invalid(format!("time step must be positive, got {dt_max}")));
    }
    let steps = ((t_final / dt_max) - 1e-9).ceil().max(1.0) as usize;
    Ok((t_final / steps as f64, steps))
}

pub fn solve_pam(op: &PamOperator, u0: &InitialCondition, t_final: f64, opts: &SolveOptions) -> Result<PamTrajectory> {
    solve_pam_field(op, &u0.lattice_values(op.grid)?, t_final, opts)
}

/// Solve from explicit (possibly complex) lattice values.
pub fn solve_pam_field(op: &PamOperator, u0: &LatticeField, t_final: f64, opts: &SolveOptions) -> Result<PamTrajectory> {
    if !(t_final > 0.0) {
        return Err(invalid(format!("final time must be positive, got {t_final}")));
    }
    if u0.grid() != op.grid {
        return Err(invalid("initial datum lives on a different lattice"));
    }
    let (dt, steps) = resolve_dt(op, opts.dt, t_final)?;
    let prop = Propagator::new(op, dt)?;
    let mut times = vec![0.0];
    let mut states = vec![dft_lattice(u0)];
    let mut u = u0.values().to_vec();
    prop.run(&mut u, steps, opts.record_every, opts.blowup_cap, 0.0, |step, state| {
        times.push(if step == steps { t_final } else { step as f64 * dt });
        states.push(dft_lattice(&LatticeField::new(op.grid, state.to_vec()).expect("lattice length")));
    })?;
    Ok(PamTrajectory {
        grid: op.grid,
        times,
        states,
        dt,
        scheme: "strang",
        c_n: op.c_n,
        seed: None,
    })
}

/// `e^{t L} u0` by diagonalizing the symmetric generator; for `N <= 15`.
pub fn dense_solution(op: &PamOperator, u0: &LatticeField, t: f64) -> Result<LatticeField> {
    if op.grid.n() > 15 {
        return Err(invalid("dense propagator is limited to N <= 15"));
    }
    let eig = SymmetricEigen::new(op.dense_matrix());
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (t * l).exp()));
    let p = q * d * q.transpose();
    let re = nalgebra::DVector::from_iterator(u0.grid().len(), u0.values().iter().map(|v| v.re));
    let im = nalgebra::DVector::from_iterator(u0.grid().len(), u0.values().iter().map(|v| v.im));
    let (a, b) = (&p * re, &p * im);
    LatticeField::new(u0.grid(), a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect())
}

/// Sampler for the rescaled continuous-time random walk: jumps at rate
/// `eps^{-2} lambda`, displacement `j` with probability `mu(j) / lambda`.
pub struct WalkSampler {
    rate: f64,
    jumps: Vec<Mode>,
    cumulative: Vec<f64>,
}

impl WalkSampler {
    pub fn new(mu: &WalkMeasure, grid: GridSpec) -> Self {
        let law = mu.jump_law();
        let mut acc = 0.0;
        let cumulative = law
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        WalkSampler {
            rate: mu.jump_rate() / grid.epsilon().powi(2),
            jumps: law.into_iter().map(|(j, _)| j).collect(),
            cumulative,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn holding_time(&self, rng: &mut LabRng) -> f64 {
        Exp::new(self.rate).expect("positive rate").sample(rng)
    }

    pub fn jump(&self, rng: &mut LabRng) -> Mode {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.jumps.len() - 1);
        self.jumps[i]
    }
}

/// `E[u0(B_t) exp(int_0^t xi(B_s) ds)] e^{-c_N t}` with `B_0 = x`.
pub fn feynman_kac_estimate(
    op: &PamOperator,
    u0: &InitialCondition,
    t: f64,
    x: Mode,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(t > 0.0) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    if n_paths < 2 {
        return Err(invalid(format!("need at least 2 paths, got {n_paths}")));
    }
    let g = op.grid;
    let init = u0.lattice_values(g)?.real_parts();
    let walk = WalkSampler::new(&op.mu, g);
    let mut rng = rng_from_seed(seed);
    let damp = (-op.c_n * t).exp();
    let vals: Vec<f64> = (0..n_paths)
        .map(|_| {
            let mut pos = x;
            let mut time = 0.0;
            let mut integral = 0.0;
            loop {
                let i = g.index_wrapped(pos);
                let tau = walk.holding_time(&mut rng);
                if time + tau >= t {
                    integral += op.xi[i] * (t - time);
                    return init[g.index_wrapped(pos)] * integral.exp() * damp;
                }
                integral += op.xi[i] * tau;
                time += tau;
                let j = walk.jump(&mut rng);
                pos = [pos[0] + j[0], pos[1] + j[1]];
                pos = g.mode(g.index_wrapped(pos));
            }
        })
        .collect();
    Ok(mean_se(&vals))
}

/// Parameters of a cross-N convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub spec: PotentialSpec,
    pub walk: WalkMeasure,
    pub ns: Vec<usize>,
    pub u0: InitialCondition,
    pub t_final: f64,
    pub samples: usize,
    pub seed: u64,
    pub dt: DtPolicy,
    /// Point at which the extension of `u(T)` is recorded.
    pub probe: [f64; 2],
    /// Multiplies the disorder; the renormalization scales with its square.
    pub disorder_scale: f64,
}

/// Scalar observables of `u_N(T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    /// `(2 pi)^{-2} int u`.
    pub average: f64,
    pub probe_value: f64,
    pub besov_b0_1inf: f64,
}

pub const OBSERVABLE_NAMES: [&str; 3] = ["average", "probe_value", "besov_b0_1inf"];

impl Observables {
    pub fn as_array(&self) -> [f64; 3] {
        [self.average, self.probe_value, self.besov_b0_1inf]
    }
}

/// Seed of disorder sample `index` at lattice size `n`.
pub fn convergence_seed(master: u64, n: usize, index: usize) -> u64 {
    stream_seed(master, &[tag("pam-convergence"), n as u64, index as u64])
}

/// Solve one disorder sample of the study and record its observables.
pub fn convergence_sample(cfg: &ConvergenceConfig, n: usize, index: usize, part: &DyadicPartition) -> Result<Observables> {
    let grid = GridSpec::new(n)?;
    let seed = convergence_seed(cfg.seed, n, index);
    let eta = sample_potential(&cfg.spec, grid, seed)?;
    let s = cfg.disorder_scale;
    let xi: Vec<f64> = eta.xi_values().iter().map(|v| s * v).collect();
    let op = PamOperator::new(grid, &cfg.walk, xi, s * s * renorm_constant(n))?;
    let opts = SolveOptions {
        dt: cfg.dt,
        ..SolveOptions::default()
    };
    let traj = solve_pam(&op, &cfg.u0, cfg.t_final, &opts)?;
    let u = traj.final_state();
    Ok(Observables {
        average: u.coeff([0, 0]).re / (4.0 * std::f64::consts::PI.powi(2)),
        probe_value: extension_eval(u, cfg.probe).re,
        besov_b0_1inf: besov_norm(part, u, 0.0, Exponent::Finite(1.0), Exponent::Infinite)?,
    })
}

/// Per-N summaries and consecutive-N KS distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ns: Vec<usize>,
    /// `means[i][o]`: mean of observable `o` at `ns[i]` with its standard error.
    pub means: Vec<[McEstimate; 3]>,
    /// `ks[i][o]`: KS distance between `ns[i]` and `ns[i + 1]`.
    pub ks: Vec<[f64; 3]>,
    pub non_increasing: [bool; 3],
}

pub fn summarize_convergence(ns: &[usize], samples: &[Vec<Observables>]) -> ConvergenceReport {
    let column = |s: &[Observables], o: usize| s.iter().map(|x| x.as_array()[o]).collect::<Vec<f64>>();
    let means = samples
        .iter()
        .map(|s| [0, 1, 2].map(|o| mean_se(&column(s, o))))
        .collect();
    let ks: Vec<[f64; 3]> = samples
        .windows(2)
        .map(|w| [0, 1, 2].map(|o| ks_two_sample_tol(&column(&w[0], o), &column(&w[1], o), 1e-12)))
        .collect();
    let non_increasing = [0, 1, 2].map(|o| non_increasing(&ks.iter().map(|k| k[o]).collect::<Vec<_>>(), 0.0));
    ConvergenceReport {
        ns: ns.to_vec(),
        means,
        ks,
        non_increasing,
    }
}

pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.ns.len() < 3 {
        return Err(invalid(format!("a convergence study needs at least 3 lattice sizes, got {}", cfg.ns.len())));
    }
    let part = DyadicPartition::default();
    let samples = cfg
        .ns
        .iter()
        .map(|&n| (0..cfg.samples).map(|i| convergence_sample(cfg, n, i, &part)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_convergence(&cfg.ns, &samples))
}

#[derive(Serialize)]
struct TrajectoryManifest<'a> {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: f64,
    dt: f64,
    times: &'a [f64],
    seed: Option<u64>,
    c_n: f64,
    scheme: &'a str,
    files: Vec<String>,
}

/// Write `state_XXXX.pamf` files and `trajectory.json` into `dir`.
pub fn write_trajectory(dir: &Path, traj: &PamTrajectory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (i, s) in traj.states.iter().enumerate() {
        let name = format!("state_{i:04}.pamf");
        let mut w = BufWriter::new(File::create(dir.join(&name))?);
        io::write_spectral(&mut w, s)?;
        w.flush()?;
        files.push(name);
    }
    let manifest = TrajectoryManifest {
        n: traj.grid.n(),
        t: *traj.times.last().unwrap_or(&0.0),
        dt: traj.dt,
        times: &traj.times,
        seed: traj.seed,
        c_n: traj.c_n,
        scheme: traj.scheme,
        files,
    };
    std::fs::write(dir.join("trajectory.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
