use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pamlab::lattice::{GridSpec, WalkMeasure};
use pamlab::noise::{Distribution, PotentialSpec};
use pamlab::solver::InitialCondition;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NoiseDiagnostics,
    PamConvergence,
    OperatorNorm,
    ChaosMoments,
    Polymer,
    Spectrum,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NoiseDiagnostics => "noise-diagnostics",
            ExperimentKind::PamConvergence => "pam-convergence",
            ExperimentKind::OperatorNorm => "operator-norm",
            ExperimentKind::ChaosMoments => "chaos-moments",
            ExperimentKind::Polymer => "polymer",
            ExperimentKind::Spectrum => "spectrum",
        }
    }
}

/// Walk measure as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WalkConfig {
    /// `"nearest_neighbor"`.
    Named(String),
    RangeTwo { range_two: f64 },
    Atoms { atoms: Vec<pamlab::lattice::WalkAtom> },
}

impl WalkConfig {
    fn build(&self) -> Result<WalkMeasure, String> {
        match self {
            WalkConfig::Named(name) if name == "nearest_neighbor" => Ok(WalkMeasure::nearest_neighbor()),
            WalkConfig::Named(name) => Err(format!("unknown walk preset {name:?} (expected \"nearest_neighbor\")")),
            WalkConfig::RangeTwo { range_two } => Ok(WalkMeasure::range_two(*range_two)),
            WalkConfig::Atoms { atoms } => Ok(WalkMeasure::from_atoms(atoms.iter().map(|a| (a.site, a.weight)))),
        }
    }
}

/// Every tunable of every experiment; absent fields take per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    #[serde(rename = "N")]
    pub ns: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub k: Option<usize>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub disorder: Option<PotentialSpec>,
    pub disorder_scale: Option<f64>,
    pub walk: Option<WalkConfig>,
    pub u0: Option<InitialCondition>,
    /// Probe point of the convergence study and the area statistics.
    pub probe: Option<[f64; 2]>,
    pub paths: Option<usize>,
    pub export_paths: Option<usize>,
    pub times: Option<Vec<f64>>,
    pub start: Option<[i64; 2]>,
    pub alpha: Option<f64>,
    pub trials: Option<usize>,
    pub gamma: Option<f64>,
    pub p: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))
        }
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            experiment,
            ns,
            seed,
            samples,
            k,
            t_final,
            dt,
            disorder,
            disorder_scale,
            walk,
            u0,
            probe,
            paths,
            export_paths,
            times,
            start,
            alpha,
            trials,
            gamma,
            p,
            tol,
            out
        );
        self
    }
}

/// A configuration after defaults and validation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: ExperimentKind,
    #[serde(rename = "N")]
    pub ns: Vec<usize>,
    pub seed: u64,
    pub samples: usize,
    pub k: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: Option<f64>,
    pub disorder: PotentialSpec,
    pub disorder_scale: f64,
    pub walk: WalkMeasure,
    pub u0: InitialCondition,
    pub probe: [f64; 2],
    pub paths: usize,
    pub export_paths: usize,
    pub times: Vec<f64>,
    pub start: [i64; 2],
    pub alpha: f64,
    pub trials: usize,
    pub gamma: f64,
    pub p: f64,
    pub tol: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Field-level validation failures.
#[derive(Debug, Default)]
pub struct ConfigErrors(pub Vec<(String, String)>);

impl ConfigErrors {
    fn push(&mut self, field: &str, msg: impl Into<String>) {
        self.0.push((field.to_string(), msg.into()));
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for (field, msg) in &self.0 {
            writeln!(f, "  {field}: {msg}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Defaults {
    ns: &'static [usize],
    samples: usize,
    t_final: f64,
}

fn defaults(kind: ExperimentKind) -> Defaults {
    match kind {
        ExperimentKind::NoiseDiagnostics => Defaults { ns: &[9, 27, 81], samples: 200, t_final: 0.5 },
        ExperimentKind::PamConvergence => Defaults { ns: &[9, 27, 81], samples: 100, t_final: 0.5 },
        ExperimentKind::OperatorNorm => Defaults { ns: &[9, 27, 81], samples: 20, t_final: 0.5 },
        ExperimentKind::ChaosMoments => Defaults { ns: &[5], samples: 2000, t_final: 0.5 },
        ExperimentKind::Polymer => Defaults { ns: &[5], samples: 1, t_final: 0.5 },
        ExperimentKind::Spectrum => Defaults { ns: &[9, 27], samples: 50, t_final: 0.5 },
    }
}

pub fn resolve(kind: ExperimentKind, cfg: ExperimentConfig) -> Result<Resolved, ConfigErrors> {
    let mut errs = ConfigErrors::default();
    if let Some(e) = cfg.experiment {
        if e != kind {
            errs.push("experiment", format!("config is for {:?} but the subcommand is {}", e.name(), kind.name()));
        }
    }
    let d = defaults(kind);
    let ns = cfg.ns.unwrap_or_else(|| d.ns.to_vec());
    if ns.is_empty() {
        errs.push("N", "at least one lattice size is required");
    }
    for &n in &ns {
        if let Err(e) = GridSpec::new(n) {
            errs.push("N", e.to_string());
        }
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        errs.push("N", "lattice sizes must be strictly increasing");
    }
    if kind == ExperimentKind::PamConvergence && ns.len() < 3 {
        errs.push("N", format!("a convergence study needs at least 3 lattice sizes, got {}", ns.len()));
    }
    let samples = cfg.samples.unwrap_or(d.samples);
    if samples == 0 {
        errs.push("samples", "must be at least 1");
    }
    if kind == ExperimentKind::ChaosMoments && samples < 500 {
        errs.push("samples", format!("moment checks need at least 500 samples, got {samples}"));
    }
    let k = cfg.k.unwrap_or(3);
    let smallest = ns.iter().copied().min().unwrap_or(3);
    if k == 0 || k > smallest * smallest {
        errs.push("k", format!("must lie in 1..={} for the smallest lattice", smallest * smallest));
    }
    let t_final = cfg.t_final.unwrap_or(d.t_final);
    if !(t_final > 0.0 && t_final.is_finite()) {
        errs.push("T", format!("must be positive, got {t_final}"));
    }
    if let Some(dt) = cfg.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            errs.push("dt", format!("must be positive, got {dt}"));
        }
    }
    let disorder = cfg.disorder.unwrap_or_else(|| PotentialSpec::iid(Distribution::Gaussian));
    for &n in &ns {
        if let Ok(g) = GridSpec::new(n) {
            if let Err(e) = disorder.validate(g) {
                errs.push("disorder", format!("N = {n}: {e}"));
            }
        }
    }
    let disorder_scale = cfg.disorder_scale.unwrap_or(1.0);
    if !disorder_scale.is_finite() {
        errs.push("disorder_scale", "must be finite");
    }
    let walk = match cfg.walk.as_ref().map_or(Ok(WalkMeasure::nearest_neighbor()), WalkConfig::build) {
        Ok(w) => {
            match w.validate() {
                Ok(report) => {
                    for v in report.violations {
                        errs.push("walk", format!("admissibility violated: {v}"));
                    }
                }
                Err(e) => errs.push("walk", e.to_string()),
            }
            w
        }
        Err(e) => {
            errs.push("walk", e);
            WalkMeasure::nearest_neighbor()
        }
    };
    let u0 = cfg.u0.unwrap_or(InitialCondition::Constant { value: 1.0 });
    for &n in &ns {
        if let Ok(g) = GridSpec::new(n) {
            if let Err(e) = u0.lattice_values(g) {
                errs.push("u0", format!("N = {n}: {e}"));
            }
        }
    }
    let probe = cfg.probe.unwrap_or([0.0, 0.0]);
    let paths = cfg.paths.unwrap_or(10_000);
    if paths < 2 {
        errs.push("paths", format!("need at least 2 paths, got {paths}"));
    }
    let export_paths = cfg.export_paths.unwrap_or(10);
    let times = cfg.times.unwrap_or_else(|| (1..=4).map(|i| t_final * i as f64 / 4.0).collect());
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| !(t > 0.0 && t <= t_final)) {
        errs.push("times", "must be strictly increasing and lie in (0, T]");
    }
    let start = cfg.start.unwrap_or([0, 0]);
    let alpha = cfg.alpha.unwrap_or(0.75);
    if !(alpha > 0.5 && alpha < 1.0) {
        errs.push("alpha", format!("must lie in (1/2, 1), got {alpha}"));
    }
    let trials = cfg.trials.unwrap_or(50);
    if trials == 0 {
        errs.push("trials", "must be at least 1");
    }
    let gamma = cfg.gamma.unwrap_or(-0.5);
    if !(gamma < 0.0) {
        errs.push("gamma", format!("must be negative, got {gamma}"));
    }
    let p = cfg.p.unwrap_or(4.0);
    if !(p >= 2.0 && p.is_finite()) {
        errs.push("p", format!("must be at least 2, got {p}"));
    }
    let tol = cfg.tol.unwrap_or(pamlab::spectrum::DEFAULT_TOL);
    if !(tol > 0.0) {
        errs.push("tol", format!("must be positive, got {tol}"));
    }
    let out = cfg.out.unwrap_or_else(|| PathBuf::from("pamlab-out"));
    if !errs.0.is_empty() {
        return Err(errs);
    }
    Ok(Resolved {
        experiment: kind,
        ns,
        seed: cfg.seed.unwrap_or(0),
        samples,
        k,
        t_final,
        dt: cfg.dt,
        disorder,
        disorder_scale,
        walk,
        u0,
        probe,
        paths,
        export_paths,
        times,
        start,
        alpha,
        trials,
        gamma,
        p,
        tol,
        out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config_with_overrides() {
        let text = r#"
            N = [9, 27, 81]
            seed = 5
            walk = { range_two = 0.5 }
            [disorder]
            kind = "iid"
            distribution = { type = "rademacher" }
        "#;
        let file: ExperimentConfig = toml::from_str(text).unwrap();
        let flags = ExperimentConfig { seed: Some(7), ..Default::default() };
        let r = resolve(ExperimentKind::Spectrum, file.overlay(flags)).unwrap();
        assert_eq!(r.seed, 7);
        assert_eq!(r.ns, vec![9, 27, 81]);
        assert_eq!(r.walk, WalkMeasure::range_two(0.5));
        assert_eq!(r.disorder.distribution, Distribution::Rademacher);
    }

    #[test]
    fn field_errors_are_collected() {
        let cfg = ExperimentConfig {
            ns: Some(vec![8, 9]),
            samples: Some(0),
            alpha: Some(0.3),
            walk: Some(WalkConfig::Atoms {
                atoms: vec![
                    pamlab::lattice::WalkAtom { site: [0, 0], weight: -4.0 },
                    pamlab::lattice::WalkAtom { site: [1, 0], weight: 1.2 },
                    pamlab::lattice::WalkAtom { site: [-1, 0], weight: 1.2 },
                    pamlab::lattice::WalkAtom { site: [0, 1], weight: 0.8 },
                    pamlab::lattice::WalkAtom { site: [0, -1], weight: 0.8 },
                ],
            }),
            ..Default::default()
        };
        let errs = resolve(ExperimentKind::OperatorNorm, cfg).unwrap_err();
        let fields: Vec<&str> = errs.0.iter().map(|(f, _)| f.as_str()).collect();
        assert!(fields.contains(&"N") && fields.contains(&"samples") && fields.contains(&"alpha"));
        assert!(errs.0.iter().any(|(f, m)| f == "walk" && m.contains("radiality")));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("samplez = 3").is_err());
    }
}
