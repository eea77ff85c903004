use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{GridSpec, Mode};
use crate::error::{invalid, PamError, Result};

const TOL: f64 = 1e-12;

/// One atom `mu(site) = weight` of a walk measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkAtom {
    pub site: Mode,
    pub weight: f64,
}

/// Finitely supported signed measure `mu` on `Z^2` defining the random-walk
/// Laplacian `Delta phi(x) = eps^{-2} sum_j mu(j) phi(x + eps j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkMeasure {
    atoms: Vec<WalkAtom>,
}

/// Outcome of checking a walk measure against the admissibility conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkReport {
    pub mass: f64,
    pub first_moments: [f64; 2],
    pub mixed_moment: f64,
    pub second_moments: [f64; 2],
    pub sixth_moment: f64,
    pub violations: Vec<String>,
}

impl WalkReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl WalkMeasure {
    /// Measure from atoms; repeated sites are merged and zero weights dropped.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (Mode, f64)>) -> Self {
        let mut map: BTreeMap<Mode, f64> = BTreeMap::new();
        for (site, w) in atoms {
            *map.entry(site).or_insert(0.0) += w;
        }
        WalkMeasure {
            atoms: map
                .into_iter()
                .filter(|&(_, w)| w != 0.0)
                .map(|(site, weight)| WalkAtom { site, weight })
                .collect(),
        }
    }

    /// Simple random walk: `mu(+-e_i) = 1`, `mu(0) = -4`.
    pub fn nearest_neighbor() -> Self {
        Self::from_atoms([([0, 0], -4.0), ([1, 0], 1.0), ([-1, 0], 1.0), ([0, 1], 1.0), ([0, -1], 1.0)])
    }

    /// Axis walk with range two: `mu(+-e_i) = a`, `mu(+-2 e_i) = (1 - a) / 4`.
    pub fn range_two(a: f64) -> Self {
        let b = (1.0 - a) / 4.0;
        let mut atoms = vec![([0, 0], -4.0 * (a + b))];
        for (s, w) in [(1, a), (2, b)] {
            atoms.extend([([s, 0], w), ([-s, 0], w), ([0, s], w), ([0, -s], w)]);
        }
        Self::from_atoms(atoms)
    }

    pub fn atoms(&self) -> &[WalkAtom] {
        &self.atoms
    }

    pub fn weight(&self, site: Mode) -> f64 {
        self.atoms.iter().find(|a| a.site == site).map_or(0.0, |a| a.weight)
    }

    /// Check every admissibility condition. An empty or identically zero
    /// measure is rejected outright; other failures are listed in the report.
    pub fn validate(&self) -> Result<WalkReport> {
        if self.atoms.is_empty() {
            return Err(PamError::DegenerateMeasure("walk measure has no atoms".into()));
        }
        let mut mass = 0.0;
        let mut first = [0.0; 2];
        let mut mixed = 0.0;
        let mut second = [0.0; 2];
        let mut sixth = 0.0;
        let mut violations = Vec::new();
        for a in &self.atoms {
            let [j1, j2] = [a.site[0] as f64, a.site[1] as f64];
            mass += a.weight;
            first[0] += a.weight * j1;
            first[1] += a.weight * j2;
            mixed += a.weight * j1 * j2;
            second[0] += a.weight * j1 * j1;
            second[1] += a.weight * j2 * j2;
            sixth += a.weight.abs() * (j1 * j1 + j2 * j2).powi(3);
            if a.site != [0, 0] && a.weight < 0.0 {
                violations.push(format!("negative weight {} at {:?} off the origin", a.weight, a.site));
            }
        }
        if mass.abs() > TOL {
            violations.push(format!("total mass is {mass}, expected 0"));
        }
        if first[0].abs() > TOL || first[1].abs() > TOL {
            violations.push(format!("first moments are {first:?}, expected 0"));
        }
        if mixed.abs() > TOL {
            violations.push(format!("mixed second moment is {mixed}, expected 0"));
        }
        if (second[0] - 2.0).abs() > TOL || (second[1] - 2.0).abs() > TOL {
            violations.push(format!("second moments are {second:?}, expected 2"));
        }
        if !sixth.is_finite() {
            violations.push("sixth moment is not finite".into());
        }
        if let Some(msg) = self.radiality_violation() {
            violations.push(msg);
        }
        if self.weight([0, 1]) <= 0.0 {
            violations.push("weight at (0, 1) must be positive".into());
        }
        Ok(WalkReport {
            mass,
            first_moments: first,
            mixed_moment: mixed,
            second_moments: second,
            sixth_moment: sixth,
            violations,
        })
    }

    /// Ok when the measure passes validation, otherwise an invalid-input error
    /// listing the failed conditions.
    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate()?;
        if report.is_valid() {
            Ok(())
        } else {
            Err(invalid(format!("walk measure: {}", report.violations.join("; "))))
        }
    }

    fn radiality_violation(&self) -> Option<String> {
        for a in &self.atoms {
            let r2 = a.site[0] * a.site[0] + a.site[1] * a.site[1];
            let r = (r2 as f64).sqrt().ceil() as i64;
            for x in -r..=r {
                for y in -r..=r {
                    if x * x + y * y == r2 && (self.weight([x, y]) - a.weight).abs() > TOL {
                        return Some(format!(
                            "radiality: weight {} at {:?} differs from {} at {:?}",
                            a.weight,
                            a.site,
                            self.weight([x, y]),
                            [x, y]
                        ));
                    }
                }
            }
        }
        None
    }

    /// `sum_j mu(j) cos<theta, j>`.
    pub fn symbol(&self, theta: [f64; 2]) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * (theta[0] * a.site[0] as f64 + theta[1] * a.site[1] as f64).cos())
            .sum()
    }

    /// `f(x) = sum_j mu(j) (1 - cos<x, j>) / |x|^2`, with `f(0) = 1`.
    pub fn multiplier(&self, x: [f64; 2]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            return 1.0;
        }
        if r2 < 1e-4 {
            // 1 - cos t = t^2 (1/2 - t^2/24 + t^4/720 - t^6/40320 + ...)
            self.atoms
                .iter()
                .map(|a| {
                    let t = x[0] * a.site[0] as f64 + x[1] * a.site[1] as f64;
                    let t2 = t * t;
                    a.weight * (t2 / r2) * (0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0)
                })
                .sum()
        } else {
            self.atoms
                .iter()
                .map(|a| a.weight * (1.0 - (x[0] * a.site[0] as f64 + x[1] * a.site[1] as f64).cos()))
                .sum::<f64>()
                / r2
        }
    }

    /// Minimum of `f` over `[-pi, pi]^2` scanned on a `res x res` grid.
    pub fn multiplier_min(&self, res: usize) -> f64 {
        let step = 2.0 * std::f64::consts::PI / res as f64;
        let mut m = f64::INFINITY;
        for a in 0..=res {
            for b in 0..=res {
                let x = [-std::f64::consts::PI + a as f64 * step, -std::f64::consts::PI + b as f64 * step];
                m = m.min(self.multiplier(x));
            }
        }
        m
    }

    /// Fourier symbol of the lattice Laplacian at mode `k`:
    /// `eps^{-2} sum_j mu(j) cos<eps k, j> = -|k|^2 f(eps k)`.
    pub fn laplacian_symbol(&self, grid: GridSpec, k: Mode) -> f64 {
        let eps = grid.epsilon();
        self.symbol([eps * k[0] as f64, eps * k[1] as f64]) / (eps * eps)
    }

    /// Total jump rate `-mu(0)` of the walk in unit time.
    pub fn jump_rate(&self) -> f64 {
        self.atoms.iter().filter(|a| a.site != [0, 0]).map(|a| a.weight).sum()
    }

    /// Jump displacements with probabilities `mu(j) / jump_rate`.
    pub fn jump_law(&self) -> Vec<(Mode, f64)> {
        let rate = self.jump_rate();
        self.atoms
            .iter()
            .filter(|a| a.site != [0, 0])
            .map(|a| (a.site, a.weight / rate))
            .collect()
    }

    /// Largest `|j|_inf` in the support.
    pub fn range(&self) -> i64 {
        self.atoms.iter().map(|a| a.site[0].abs().max(a.site[1].abs())).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn standard_walks_are_admissible() {
        assert!(WalkMeasure::nearest_neighbor().validate().unwrap().is_valid());
        let r2 = WalkMeasure::range_two(0.5);
        assert!(r2.validate().unwrap().is_valid());
        assert_eq!(r2.weight([0, 0]), -2.5);
        assert_eq!(r2.weight([2, 0]), 0.125);
    }

    #[test]
    fn empty_measure_is_degenerate() {
        let m = WalkMeasure::from_atoms([]);
        assert!(matches!(m.validate(), Err(PamError::DegenerateMeasure(_))));
    }

    #[test]
    fn anisotropic_measure_fails_radiality() {
        let m = WalkMeasure::from_atoms([([0, 0], -4.0), ([1, 0], 1.5), ([-1, 0], 1.5), ([0, 1], 0.5), ([0, -1], 0.5)]);
        let r = m.validate().unwrap();
        assert!(r.violations.iter().any(|v| v.starts_with("radiality")));
        assert!(m.require_valid().is_err());
    }

    #[test]
    fn negative_off_origin_weight_is_reported() {
        let m = WalkMeasure::from_atoms([([0, 0], -4.0), ([1, 0], 1.0), ([-1, 0], 1.0), ([0, 1], 1.0), ([0, -1], 1.0), ([1, 1], -0.1), ([-1, -1], -0.1), ([1, -1], -0.1), ([-1, 1], -0.1)]);
        let r = m.validate().unwrap();
        assert!(r.violations.iter().any(|v| v.contains("negative weight")));
    }

    #[test]
    fn multiplier_values() {
        let nn = WalkMeasure::nearest_neighbor();
        assert_eq!(nn.multiplier([0.0, 0.0]), 1.0);
        assert!(nn.multiplier_min(64) > 0.3);
        assert!(WalkMeasure::range_two(0.5).multiplier_min(64) > 0.0);
        assert!((nn.multiplier([PI, PI]) - 4.0 / (PI * PI)).abs() < 1e-15);
        // The small-argument series agrees with the direct quotient.
        for mu in [nn.clone(), WalkMeasure::range_two(0.5)] {
            let x = [0.005, 0.003];
            let direct: f64 = mu
                .atoms()
                .iter()
                .map(|a| a.weight * (1.0 - (x[0] * a.site[0] as f64 + x[1] * a.site[1] as f64).cos()))
                .sum::<f64>()
                / (x[0] * x[0] + x[1] * x[1]);
            assert!((mu.multiplier(x) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_symbol_matches_multiplier() {
        let mu = WalkMeasure::range_two(0.5);
        let g = GridSpec::new(9).unwrap();
        let eps = g.epsilon();
        for k in g.modes() {
            let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
            let f = mu.multiplier([eps * k[0] as f64, eps * k[1] as f64]);
            assert!((mu.laplacian_symbol(g, k) + k2 * f).abs() < 1e-10);
        }
    }
}
