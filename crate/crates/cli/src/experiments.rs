use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::Context;
use num_complex::Complex64;
use pamlab::besov::DyadicPartition;
use pamlab::chaos::{moment_bound_check, ChaosKernel, MomentReport};
use pamlab::lattice::{io as field_io, GridSpec, LatticeField};
use pamlab::noise::{
    area_sample, enhanced_noise, random_operator_norm_estimate, sample_potential, summarize_area, white_noise_pairing, write_enhanced_noise,
};
use pamlab::polymer::{mc_vs_kernel_check, sample_polymer_paths, write_path_csv, PolymerKernel};
use pamlab::rng::{rng_from_seed, stream_seed, tag};
use pamlab::solver::{convergence_sample, summarize_convergence, ConvergenceConfig, DtPolicy, PamOperator, OBSERVABLE_NAMES};
use pamlab::spectrum::{spectrum_sample, summarize_spectrum, write_spectrum_csv, SpectrumConfig};
use pamlab::stats::{mean_se, median, normality_test, variance_se};
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentKind, Resolved};
use crate::output::Sink;

fn stage<T>(name: impl FnOnce() -> String, r: pamlab::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow::Error::new(e).context(format!("stage {}", name())))
}

fn jobs(ns: &[usize], samples: usize) -> Vec<(usize, usize)> {
    ns.iter().flat_map(|&n| (0..samples).map(move |i| (n, i))).collect()
}

fn sample_seed(cfg: &Resolved, n: usize, index: usize) -> u64 {
    stream_seed(cfg.seed, &[tag(cfg.experiment.name()), n as u64, index as u64])
}

fn seed_note(cfg: &Resolved) -> String {
    format!("stream_seed({}, [tag(\"{}\"), N, sample])", cfg.seed, cfg.experiment.name())
}

pub fn run(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    match cfg.experiment {
        ExperimentKind::NoiseDiagnostics => noise_diagnostics(cfg, sink),
        ExperimentKind::PamConvergence => pam_convergence(cfg, sink),
        ExperimentKind::OperatorNorm => operator_norm(cfg, sink),
        ExperimentKind::ChaosMoments => chaos_moments(cfg, sink),
        ExperimentKind::Polymer => polymer(cfg, sink),
        ExperimentKind::Spectrum => spectrum(cfg, sink),
    }?;
    sink.finish_plot()
}

/// Smooth test function of the white-noise pairing; `int phi^2 = 5 pi^2 / 2`.
fn test_function(x: [f64; 2]) -> f64 {
    x[0].cos() + 0.5 * (2.0 * x[1]).sin()
}

fn noise_diagnostics(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    let part = DyadicPartition::default();
    let mut area_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut block_rows = Vec::new();
    let mut cauchy_rows = Vec::new();
    let mut wn_rows = Vec::new();
    let mut wn_summary = Vec::new();
    for &n in &cfg.ns {
        let grid = stage(|| format!("noise-diagnostics grid (N={n})"), GridSpec::new(n))?;
        let truncations: Vec<usize> = (3..=n).step_by(2).filter(|k| k * k <= n).collect();
        let samples = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let seed = sample_seed(cfg, n, i);
                stage(
                    || format!("noise-diagnostics area sample (N={n}, sample {i})"),
                    area_sample(&cfg.disorder, &cfg.walk, grid, seed, cfg.probe, &truncations, cfg.gamma, &part),
                )
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let summary = stage(|| format!("noise-diagnostics summary (N={n})"), summarize_area(n, &cfg.walk, &samples))?;
        for (i, s) in samples.iter().enumerate() {
            area_rows.push(format!("{n},{i},{},{}", s.seed, s.resonant_at_x));
        }
        let m = summary.resonant_mean;
        summary_rows.push(format!("{n},{},{},{},{},{}", summary.samples, summary.c_tilde_n, m.mean, m.se, summary.z_score()));
        sink.plot(n as f64, m.mean, "resonant_mean");
        sink.plot(n as f64, summary.c_tilde_n, "c_tilde");
        for (q, v) in summary.block_variance.iter().enumerate() {
            let q = q as i64 - 1;
            block_rows.push(format!("{n},{q},{},{}", v.mean, v.se));
            sink.plot(q as f64, v.mean, format!("block_variance_N{n}"));
        }
        for (k, c) in &summary.cauchy_mean {
            cauchy_rows.push(format!("{n},{k},{},{}", c.mean, c.se));
            sink.plot(*k as f64, c.mean, format!("cauchy_N{n}"));
        }

        let pairings: Vec<(u64, f64)> = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let seed = stream_seed(sample_seed(cfg, n, i), &[tag("white-noise")]);
                let eta = stage(|| format!("noise-diagnostics disorder (N={n}, sample {i})"), sample_potential(&cfg.disorder, grid, seed))?;
                Ok((seed, white_noise_pairing(&eta, test_function)))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let values: Vec<f64> = pairings.iter().map(|p| p.1).collect();
        for (i, (seed, v)) in pairings.iter().enumerate() {
            wn_rows.push(format!("{n},{i},{seed},{v}"));
        }
        let target = 2.5 * PI * PI;
        let var = variance_se(&values);
        let (stat, p_value) = normality_test(&values, 0.0, target);
        wn_summary.push(format!("{n},{},{target},{},{},{stat},{p_value}", values.len(), var.mean, var.se));
        sink.plot(n as f64, var.mean, "white_noise_variance");

        let seed0 = sample_seed(cfg, n, 0);
        let eta = stage(|| format!("noise-diagnostics dump (N={n})"), sample_potential(&cfg.disorder, grid, seed0))?;
        let en = enhanced_noise(&eta, &cfg.walk, &part);
        let dir = format!("noise/N{n}");
        stage(|| format!("noise-diagnostics dump (N={n})"), write_enhanced_noise(&sink.path(&dir)?, &en))?;
        sink.record(&dir, "noise_enhancement", "enhanced_noise", format!("sample 0: seed {seed0}"));
    }
    let seeds = seed_note(cfg);
    sink.csv("area_samples.csv", "N,sample,seed,resonant_at_x", area_rows, "noise_enhancement", "enhanced_noise", seeds.clone())?;
    sink.csv("area_summary.csv", "N,samples,c_tilde,mean,se,z", summary_rows, "noise_enhancement", "enhanced_noise", seeds.clone())?;
    sink.csv("block_variance.csv", "N,q,variance,se", block_rows, "besov_calculus", "block", seeds.clone())?;
    sink.csv("cauchy.csv", "N,K,mean_distance,se", cauchy_rows, "noise_enhancement", "cauchy_diagnostic", seeds.clone())?;
    sink.csv(
        "white_noise.csv",
        "N,sample,seed,pairing",
        wn_rows,
        "noise_enhancement",
        "white_noise_pairing",
        format!("stream_seed(sample seed, [tag(\"white-noise\")]) with sample seed {seeds}"),
    )?;
    sink.csv(
        "white_noise_summary.csv",
        "N,samples,target_variance,variance,se,ks_statistic,p_value",
        wn_summary,
        "noise_enhancement",
        "white_noise_pairing",
        "see white_noise.csv",
    )
}

fn dt_policy(cfg: &Resolved) -> DtPolicy {
    cfg.dt.map_or(DtPolicy::default(), |dt| DtPolicy::Fixed { dt })
}

fn pam_convergence(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    let conv = ConvergenceConfig {
        spec: cfg.disorder.clone(),
        walk: cfg.walk.clone(),
        ns: cfg.ns.clone(),
        u0: cfg.u0.clone(),
        t_final: cfg.t_final,
        samples: cfg.samples,
        seed: cfg.seed,
        dt: dt_policy(cfg),
        probe: cfg.probe,
        disorder_scale: cfg.disorder_scale,
    };
    let part = DyadicPartition::default();
    let flat = jobs(&cfg.ns, cfg.samples)
        .into_par_iter()
        .map(|(n, i)| stage(|| format!("pam-convergence solve (N={n}, sample {i})"), convergence_sample(&conv, n, i, &part)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let per_n: Vec<Vec<_>> = flat.chunks(cfg.samples).map(|c| c.to_vec()).collect();
    let report = summarize_convergence(&cfg.ns, &per_n);
    let mut rows = Vec::new();
    for (&n, samples) in cfg.ns.iter().zip(&per_n) {
        for (i, o) in samples.iter().enumerate() {
            let seed = pamlab::solver::convergence_seed(cfg.seed, n, i);
            rows.push(format!("{n},{i},{seed},{},{},{}", o.average, o.probe_value, o.besov_b0_1inf));
        }
    }
    let mut ks_rows = Vec::new();
    for (w, ks) in cfg.ns.windows(2).zip(&report.ks) {
        for (name, d) in OBSERVABLE_NAMES.iter().zip(ks) {
            ks_rows.push(format!("{},{},{name},{d}", w[0], w[1]));
            sink.plot(w[1] as f64, *d, format!("ks_{name}"));
        }
    }
    for (&n, means) in cfg.ns.iter().zip(&report.means) {
        for (name, m) in OBSERVABLE_NAMES.iter().zip(means) {
            sink.plot(n as f64, m.mean, format!("mean_{name}"));
        }
    }
    let seeds = format!("convergence_seed({}, N, sample)", cfg.seed);
    sink.csv("convergence.csv", "N,sample,seed,average,probe_value,besov_b0_1inf", rows, "pam_solver", "convergence_study", seeds.clone())?;
    sink.csv("ks.csv", "N_a,N_b,observable,ks", ks_rows, "pam_solver", "convergence_study", seeds.clone())?;
    sink.json("convergence_summary.json", &report, "pam_solver", "convergence_study", seeds)
}

#[derive(Serialize)]
struct NormSummary {
    ns: Vec<usize>,
    medians: Vec<f64>,
    strictly_decreasing: bool,
    alpha: f64,
    trials: usize,
}

fn operator_norm(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    let part = DyadicPartition::default();
    let flat = jobs(&cfg.ns, cfg.samples)
        .into_par_iter()
        .map(|(n, i)| {
            let name = || format!("operator-norm estimate (N={n}, sample {i})");
            let grid = stage(name, GridSpec::new(n))?;
            let seed = sample_seed(cfg, n, i);
            let eta = stage(name, sample_potential(&cfg.disorder, grid, seed))?;
            let en = enhanced_noise(&eta, &cfg.walk, &part);
            let est = stage(name, random_operator_norm_estimate(&en, cfg.alpha, cfg.trials, stream_seed(seed, &[tag("test-fields")]), &part))?;
            Ok((n, i, seed, est))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = flat.iter().map(|(n, i, seed, v)| format!("{n},{i},{seed},{v}"));
    let rows: Vec<String> = rows.collect();
    let medians: Vec<f64> = flat.chunks(cfg.samples).map(|c| median(&c.iter().map(|r| r.3).collect::<Vec<_>>())).collect();
    for (&n, m) in cfg.ns.iter().zip(&medians) {
        sink.plot(n as f64, *m, "median_norm");
    }
    let seeds = seed_note(cfg);
    sink.csv("operator_norm.csv", "N,sample,seed,norm_estimate", rows, "noise_enhancement", "random_operator_norm_estimate", seeds.clone())?;
    let summary = NormSummary {
        ns: cfg.ns.clone(),
        strictly_decreasing: medians.windows(2).all(|w| w[1] < w[0]),
        medians,
        alpha: cfg.alpha,
        trials: cfg.trials,
    };
    sink.json("operator_norm_summary.json", &summary, "noise_enhancement", "random_operator_norm_estimate", seeds)
}

/// Deterministic and random kernels on the `N^2` sites of the first lattice.
fn chaos_kernels(grid: GridSpec, seed: u64) -> anyhow::Result<Vec<(&'static str, ChaosKernel)>> {
    let eps = grid.epsilon();
    let m = grid.len();
    let pos = |i: usize| {
        let l = grid.mode(i);
        [eps * l[0] as f64, eps * l[1] as f64]
    };
    let c = |v: f64| Complex64::new(v, 0.0);
    let mut rng = rng_from_seed(stream_seed(seed, &[tag("chaos-kernels")]));
    let random1: Vec<Complex64> = (0..m).map(|_| c(eps * { let v: f64 = StandardNormal.sample(&mut rng); v })).collect();
    let random2: Vec<f64> = (0..m * m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let off = |a: usize, b: usize, v: f64| if a == b { c(0.0) } else { c(v) };
    let build = |r: pamlab::Result<ChaosKernel>| stage(|| "chaos-moments kernel".to_string(), r);
    Ok(vec![
        ("cosine", ChaosKernel::first_order((0..m).map(|i| c(eps * pos(i)[0].cos())).collect())),
        ("gaussian_bump", ChaosKernel::first_order((0..m).map(|i| c(eps * (-(pos(i)[0].powi(2) + pos(i)[1].powi(2))).exp())).collect())),
        ("random", ChaosKernel::first_order(random1)),
        ("cosine", build(ChaosKernel::from_fn2(m, |a, b| off(a, b, eps * eps * (pos(a)[0] - pos(b)[0]).cos())))?),
        (
            "gaussian_bump",
            build(ChaosKernel::from_fn2(m, |a, b| {
                let (x, y) = (pos(a), pos(b));
                off(a, b, eps * eps * (-((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))).exp())
            }))?,
        ),
        ("random", build(ChaosKernel::from_fn2(m, |a, b| off(a, b, eps * eps * random2[a * m + b])))?),
    ])
}

fn moment_row(name: &str, expected: f64, r: &MomentReport) -> String {
    format!(
        "{name},{},{},{},{},{},{},{},{},{expected},{},{}",
        r.n, r.p, r.lhs, r.lhs_se, r.rhs, r.ratio, r.ci_low, r.ci_high, r.samples, r.seed
    )
}

fn chaos_moments(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    let n = cfg.ns[0];
    let grid = stage(|| "chaos-moments grid".to_string(), GridSpec::new(n))?;
    let kernels = chaos_kernels(grid, cfg.seed)?;
    let rows = kernels
        .par_iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let seed = sample_seed(cfg, n, i);
            let label = || format!("chaos-moments {name} order {}", f.order());
            let iso = stage(label, moment_bound_check(f, &cfg.disorder, 2.0, cfg.samples, seed))?;
            let hyper = stage(label, moment_bound_check(f, &cfg.disorder, cfg.p, cfg.samples, stream_seed(seed, &[tag("p")])))?;
            let expected = match f.order() {
                1 => f.norm_sq(),
                _ => 2.0 * f.sym_norm_sq(),
            };
            Ok((*name, expected, iso, hyper))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut lines = Vec::new();
    for (name, expected, iso, hyper) in &rows {
        lines.push(moment_row(name, *expected, iso));
        lines.push(moment_row(name, f64::NAN, hyper));
        sink.plot(hyper.n as f64, hyper.ratio, format!("ratio_{name}"));
    }
    sink.csv(
        "chaos_moments.csv",
        "kernel,n,p,lhs,lhs_se,rhs,ratio,ci_low,ci_high,isometry_expected,samples,seed",
        lines,
        "stochastic_integrals",
        "moment_bound_check",
        seed_note(cfg),
    )
}

/// Smallest step count, starting from the one the step policy asks for,
/// that puts every requested time on the grid.
fn aligned_steps(base: usize, horizon: f64, times: &[f64]) -> Option<usize> {
    (base..=base.saturating_mul(64)).find(|&s| {
        let dt = horizon / s as f64;
        times.iter().all(|t| ((t / dt).round() * dt - t).abs() <= 1e-9 * horizon.max(1.0))
    })
}

#[derive(Serialize)]
struct PolymerSummary<'a> {
    n: usize,
    disorder_seed: u64,
    start: [i64; 2],
    horizon: f64,
    dt: f64,
    n_paths: usize,
    partition_estimate: f64,
    effective_sample_size: f64,
    warning: &'a Option<String>,
}

fn polymer(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    let n = cfg.ns[0];
    let name = || format!("polymer kernel (N={n})");
    let grid = stage(name, GridSpec::new(n))?;
    let seed = sample_seed(cfg, n, 0);
    let eta = stage(name, sample_potential(&cfg.disorder, grid, seed))?;
    let s = cfg.disorder_scale;
    let xi: Vec<f64> = eta.xi_values().iter().map(|v| s * v).collect();
    let op = stage(name, PamOperator::new(grid, &cfg.walk, xi, s * s * pamlab::noise::renorm_constant(n)))?;
    let policy = cfg.dt.map_or(DtPolicy::Adaptive { fraction: 0.01 }, |dt| DtPolicy::Fixed { dt });
    let (_, base) = stage(name, pamlab::solver::resolve_dt(&op, policy, cfg.t_final))?;
    let steps = aligned_steps(base, cfg.t_final, &cfg.times)
        .with_context(|| format!("stage {}: requested times do not fit a time grid of T/{base}..T/{}", name(), base * 64))?;
    let kernel = stage(name, PolymerKernel::new(&op, cfg.t_final, DtPolicy::Fixed { dt: cfg.t_final / steps as f64 }))?;
    let mc_seed = stream_seed(seed, &[tag("ctrw")]);
    let report = stage(
        || format!("polymer mc-vs-kernel (N={n})"),
        mc_vs_kernel_check(&op, &kernel, cfg.start, &cfg.times, cfg.paths, mc_seed),
    )?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    let mut rows = Vec::new();
    for (i, r) in report.rows.iter().enumerate() {
        rows.push(format!("{},{},{},{},{}", r.t, r.tv, r.ci_low, r.ci_high, r.ci_width()));
        sink.plot(r.t, r.tv, "tv");
        sink.plot(r.t, r.ci_width(), "ci_width");
        for (label, values) in [("kernel", &r.kernel_marginal), ("mc", &r.mc_marginal)] {
            let rel = format!("marginals/{label}_t{i:02}.pamf");
            let field = stage(name, LatticeField::from_real(grid, values))?;
            let mut w = BufWriter::new(File::create(sink.path(&rel)?)?);
            stage(name, field_io::write_lattice(&mut w, &field))?;
            w.flush()?;
            sink.record(&rel, "polymer", "mc_vs_kernel_check", format!("disorder seed {seed}, paths seed {mc_seed}"));
        }
    }
    sink.csv(
        "polymer_marginals.csv",
        "t,tv,ci_low,ci_high,ci_width",
        rows,
        "polymer",
        "mc_vs_kernel_check",
        format!("disorder seed {seed}, paths seed {mc_seed}"),
    )?;
    let path_seed = stream_seed(seed, &[tag("grid-paths")]);
    let paths = stage(
        || format!("polymer path sampling (N={n})"),
        sample_polymer_paths(&kernel, cfg.start, &cfg.times, cfg.export_paths, path_seed),
    )?;
    for (i, p) in paths.iter().enumerate() {
        let rel = format!("paths/path_{i:04}.csv");
        let mut w = BufWriter::new(File::create(sink.path(&rel)?)?);
        stage(name, write_path_csv(&mut w, p))?;
        w.flush()?;
        sink.record(&rel, "polymer", "sample_polymer_paths", format!("seed {path_seed}"));
    }
    let summary = PolymerSummary {
        n,
        disorder_seed: seed,
        start: cfg.start,
        horizon: cfg.t_final,
        dt: kernel.dt(),
        n_paths: cfg.paths,
        partition_estimate: report.partition_estimate,
        effective_sample_size: report.effective_sample_size,
        warning: &report.warning,
    };
    sink.json("polymer_summary.json", &summary, "polymer", "mc_vs_kernel_check", format!("disorder seed {seed}"))
}

#[derive(Serialize)]
struct SpectrumSummary {
    trend_assessed: bool,
    report: Option<pamlab::spectrum::SpectrumReport>,
    max_residual: f64,
}

fn spectrum(cfg: &Resolved, sink: &mut Sink) -> anyhow::Result<()> {
    let spec = SpectrumConfig {
        spec: cfg.disorder.clone(),
        walk: cfg.walk.clone(),
        ns: cfg.ns.clone(),
        k: cfg.k,
        samples: cfg.samples,
        seed: cfg.seed,
        tol: cfg.tol,
        disorder_scale: cfg.disorder_scale,
    };
    let flat = jobs(&cfg.ns, cfg.samples)
        .into_par_iter()
        .map(|(n, i)| stage(|| format!("spectrum eigensolve (N={n}, sample {i})"), spectrum_sample(&spec, n, i)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    stage(|| "spectrum csv".to_string(), write_spectrum_csv(&mut buf, &flat))?;
    std::fs::write(sink.path("spectrum.csv")?, buf).context("writing spectrum.csv")?;
    let seeds = format!("spectrum_seed({}, N, sample)", cfg.seed);
    sink.record("spectrum.csv", "anderson_spectrum", "lowest_eigenvalues", seeds.clone());
    let per_n: Vec<Vec<_>> = flat.chunks(cfg.samples).map(|c| c.to_vec()).collect();
    for (&n, samples) in cfg.ns.iter().zip(&per_n) {
        for j in 0..cfg.k {
            let m = mean_se(&samples.iter().map(|s| s.shifted[j]).collect::<Vec<_>>());
            sink.plot(n as f64, m.mean, format!("shifted_mean_{}", j + 1));
        }
        let u = mean_se(&samples.iter().map(|s| s.unshifted()[0]).collect::<Vec<_>>());
        sink.plot(n as f64, u.mean, "unshifted_mean_1");
    }
    let summary = SpectrumSummary {
        trend_assessed: cfg.ns.len() >= 3 && cfg.samples >= 200,
        report: (cfg.ns.len() >= 2).then(|| summarize_spectrum(&cfg.ns, &per_n, cfg.k)),
        max_residual: flat.iter().flat_map(|s| s.residuals.iter().copied()).fold(0.0, f64::max),
    };
    sink.json("spectrum_summary.json", &summary, "anderson_spectrum", "spectrum_statistics", seeds)
}
