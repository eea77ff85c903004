//! Littlewood-Paley blocks, Besov norms and Bony's decomposition of products,
//! all realized as Fourier multipliers on mode boxes.
//!
//! `chi` is a smooth radial cutoff equal to 1 on `|x| <= a` and vanishing for
//! `|x| >= c`; `rho(x) = chi(x/2) - chi(x)` lives on the annulus `a <= |x| <= b`
//! with `b = 2c`. Block `j >= 0` uses `rho(2^{-j} .)`, block `-1` is `chi`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{apply_multiplier, fast_len, from_grid_values, to_grid_values, Fft2, GridSpec, Mode, SpectralField};

/// Radii `(a, b, c)` of the partition: plateau of `chi`, outer radius of the
/// annulus, support radius of `chi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionRadii {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for PartitionRadii {
    fn default() -> Self {
        PartitionRadii {
            a: 1.0,
            b: 8.0 / 3.0,
            c: 4.0 / 3.0,
        }
    }
}

/// Smooth dyadic partition of unity on `R^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicPartition {
    radii: PartitionRadii,
}

fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `u <= 0`, 0 for `u >= 1`.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let l = bump(1.0 - u);
        l / (l + bump(u))
    }
}

/// Result of the numerical checks run when a partition is built.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionCheck {
    pub unity_error: f64,
    pub overlap: f64,
}

impl DyadicPartition {
    /// Build and verify a partition. Radii violating the support conditions
    /// are rejected with the failed condition named.
    pub fn build(radii: PartitionRadii) -> Result<Self> {
        let PartitionRadii { a, b, c } = radii;
        if !(a > 0.0) {
            return Err(invalid(format!("partition radii: need a > 0, got a = {a}")));
        }
        if !(a < c) {
            return Err(invalid(format!("partition radii: need a < c, got a = {a}, c = {c}")));
        }
        if (b - 2.0 * c).abs() > 1e-12 * b.abs().max(1.0) {
            return Err(invalid(format!("partition radii: need b = 2c, got b = {b}, c = {c}")));
        }
        if !(c < 2.0 * a) {
            return Err(invalid(format!(
                "partition radii: blocks two apart must have disjoint supports (need c < 2a), got a = {a}, c = {c}"
            )));
        }
        let p = DyadicPartition { radii };
        let check = p.check(10_000);
        if check.unity_error > 1e-8 || check.overlap > 0.0 {
            return Err(invalid(format!(
                "partition radii: numerical check failed (unity error {:e}, overlap {:e})",
                check.unity_error, check.overlap
            )));
        }
        Ok(p)
    }

    pub fn radii(&self) -> PartitionRadii {
        self.radii
    }

    /// `chi(r)` for `r = |x|`.
    pub fn chi(&self, r: f64) -> f64 {
        let PartitionRadii { a, c, .. } = self.radii;
        smooth_step((r - a) / (c - a))
    }

    /// `rho(2^{-j} r)` for `j >= 0`, `chi(r)` for `j = -1`, zero otherwise.
    pub fn rho_j(&self, j: i32, r: f64) -> f64 {
        match j {
            -1 => self.chi(r),
            j if j >= 0 => {
                let s = (-j as f64).exp2() * r;
                self.chi(s / 2.0) - self.chi(s)
            }
            _ => 0.0,
        }
    }

    /// `sum_{i <= j} rho_i(r) = chi(2^{-(j+1)} r)`; zero for `j < -1`.
    pub fn low_pass(&self, j: i32, r: f64) -> f64 {
        if j < -1 {
            0.0
        } else {
            self.chi((-(j + 1) as f64).exp2() * r)
        }
    }

    /// Largest block index meeting the mode box, `-1` if only `chi` does.
    pub fn j_max(&self, grid: GridSpec) -> i32 {
        let r = grid.max_radius();
        let mut j = -1;
        while (j + 1) < 62 && ((j + 1) as f64).exp2() * self.radii.a < r {
            j += 1;
        }
        j
    }

    /// Partition-of-unity error and the largest product of two blocks whose
    /// indices differ by at least two, on `samples` radii in `[0, 2^12]`.
    pub fn check(&self, samples: usize) -> PartitionCheck {
        let r_max = 4096.0;
        let j_top = 13;
        let mut unity_error: f64 = 0.0;
        let mut overlap: f64 = 0.0;
        for s in 0..samples {
            let r = r_max * s as f64 / (samples - 1) as f64;
            let vals: Vec<f64> = (-1..=j_top).map(|j| self.rho_j(j, r)).collect();
            unity_error = unity_error.max((vals.iter().sum::<f64>() - 1.0).abs());
            for i in 0..vals.len() {
                for k in (i + 2)..vals.len() {
                    overlap = overlap.max(vals[i] * vals[k]);
                }
            }
        }
        PartitionCheck { unity_error, overlap }
    }
}

impl Default for DyadicPartition {
    fn default() -> Self {
        DyadicPartition::build(PartitionRadii::default()).expect("default radii are admissible")
    }
}

fn radius(k: Mode) -> f64 {
    ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt()
}

/// `Delta_j phi`.
pub fn block(part: &DyadicPartition, j: i32, phi_hat: &SpectralField) -> Result<SpectralField> {
    let j_max = part.j_max(phi_hat.grid());
    if j < -1 || j > j_max {
        return Err(invalid(format!("block index {j} outside [-1, {j_max}]")));
    }
    Ok(apply_multiplier(phi_hat, |k| part.rho_j(j, radius(k))))
}

/// All blocks `Delta_j phi`, `j = -1 ..= j_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub blocks: Vec<SpectralField>,
}

impl BlockDecomposition {
    pub fn new(part: &DyadicPartition, phi_hat: &SpectralField) -> Self {
        let j_max = part.j_max(phi_hat.grid());
        BlockDecomposition {
            blocks: (-1..=j_max)
                .map(|j| apply_multiplier(phi_hat, |k| part.rho_j(j, radius(k))))
                .collect(),
        }
    }

    pub fn j_max(&self) -> i32 {
        self.blocks.len() as i32 - 2
    }

    pub fn get(&self, j: i32) -> Option<&SpectralField> {
        usize::try_from(j + 1).ok().and_then(|i| self.blocks.get(i))
    }

    /// `sum_j Delta_j phi`.
    pub fn reconstruct(&self) -> SpectralField {
        let mut out = SpectralField::zeros(self.blocks[0].grid());
        for b in &self.blocks {
            for (o, c) in out.coeffs_mut().iter_mut().zip(b.coeffs()) {
                *o += c;
            }
        }
        out
    }
}

/// Integrability or summability exponent in `[1, inf]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    fn validate(self, name: &str) -> Result<()> {
        match self {
            Exponent::Finite(p) if !(p >= 1.0) => Err(invalid(format!("exponent {name} must be >= 1, got {p}"))),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

/// Quadrature grid for norms of a field on `grid`: 5-smooth and at least `2S + 1`.
fn quadrature_len(grid: GridSpec) -> usize {
    fast_len(2 * grid.n() + 1)
}

fn lp_from_values(values: &[Complex64], m: usize, p: Exponent) -> f64 {
    match p {
        Exponent::Infinite => values.iter().fold(0.0, |acc, v| acc.max(v.norm())),
        Exponent::Finite(p) => {
            let w = 4.0 * PI * PI / (m * m) as f64;
            (w * values.iter().map(|v| v.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
        }
    }
}

/// `L^p(T^2)` norm of the extension, by quadrature on a uniform grid
/// (grid maximum for `p = inf`).
pub fn lp_norm(phi_hat: &SpectralField, p: Exponent) -> Result<f64> {
    p.validate("p")?;
    let m = quadrature_len(phi_hat.grid());
    let fft = Fft2::new(m);
    Ok(lp_from_values(&to_grid_values(phi_hat, &fft, m), m, p))
}

/// `|| (2^{j alpha} ||Delta_j phi||_{L^p})_j ||_{l^q}`.
pub fn besov_norm(part: &DyadicPartition, phi_hat: &SpectralField, alpha: f64, p: Exponent, q: Exponent) -> Result<f64> {
    p.validate("p")?;
    q.validate("q")?;
    let m = quadrature_len(phi_hat.grid());
    let fft = Fft2::new(m);
    let j_max = part.j_max(phi_hat.grid());
    let terms: Vec<f64> = (-1..=j_max)
        .map(|j| {
            let b = apply_multiplier(phi_hat, |k| part.rho_j(j, radius(k)));
            (j as f64 * alpha).exp2() * lp_from_values(&to_grid_values(&b, &fft, m), m, p)
        })
        .collect();
    Ok(match q {
        Exponent::Infinite => terms.iter().fold(0.0, |a, &t| a.max(t)),
        Exponent::Finite(q) => terms.iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Bilinear {
    /// `f < g = sum_j Delta_{<= j-2} f Delta_j g`
    Para,
    /// `f o g = sum_{|i-j| <= 1} Delta_i f Delta_j g`
    Resonant,
    /// `f g`
    Full,
}

/// Bilinear products of fields on possibly different boxes, computed without
/// aliasing on a grid covering the sum box.
pub(crate) fn bilinear(part: &DyadicPartition, f: &SpectralField, g: &SpectralField, kind: Bilinear) -> SpectralField {
    let out = f.grid().sum_box(&g.grid());
    let m = fast_len(out.n());
    let fft = Fft2::new(m);
    let mut acc = vec![Complex64::new(0.0, 0.0); m * m];
    let mut add_product = |a: &SpectralField, b: &SpectralField| {
        let va = to_grid_values(a, &fft, m);
        let vb = to_grid_values(b, &fft, m);
        for ((s, x), y) in acc.iter_mut().zip(&va).zip(&vb) {
            *s += x * y;
        }
    };
    match kind {
        Bilinear::Full => add_product(f, g),
        Bilinear::Para => {
            for j in 1..=part.j_max(g.grid()) {
                let low = apply_multiplier(f, |k| part.low_pass(j - 2, radius(k)));
                if low.max_abs() == 0.0 {
                    continue;
                }
                let gj = apply_multiplier(g, |k| part.rho_j(j, radius(k)));
                add_product(&low, &gj);
            }
        }
        Bilinear::Resonant => {
            let top = part.j_max(f.grid()).min(part.j_max(g.grid()) + 1);
            for i in -1..=top {
                let fi = apply_multiplier(f, |k| part.rho_j(i, radius(k)));
                let gi = apply_multiplier(g, |k| {
                    let r = radius(k);
                    part.rho_j(i - 1, r) + part.rho_j(i, r) + part.rho_j(i + 1, r)
                });
                add_product(&fi, &gi);
            }
        }
    }
    from_grid_values(acc, &fft, m, out)
}

fn same_grid(f: &SpectralField, g: &SpectralField) -> Result<()> {
    if f.grid() != g.grid() {
        return Err(invalid(format!(
            "fields live on different grids ({} vs {})",
            f.grid().n(),
            g.grid().n()
        )));
    }
    Ok(())
}

/// `f < g`.
pub fn paraproduct_lt(part: &DyadicPartition, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    same_grid(f, g)?;
    Ok(bilinear(part, f, g, Bilinear::Para))
}

/// `f > g = g < f`.
pub fn paraproduct_gt(part: &DyadicPartition, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    same_grid(f, g)?;
    Ok(bilinear(part, g, f, Bilinear::Para))
}

/// `f o g`.
pub fn resonant(part: &DyadicPartition, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    same_grid(f, g)?;
    Ok(bilinear(part, f, g, Bilinear::Resonant))
}

/// Exact product `f g` of the extensions, on the sum box.
pub fn product(f: &SpectralField, g: &SpectralField) -> SpectralField {
    bilinear(&DyadicPartition::default(), f, g, Bilinear::Full)
}

/// Empirical ratio `||phi||_{B^{alpha - 2(1/p1 - 1/p2)}_{p2, inf}} / ||phi||_{B^alpha_{p1, inf}}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingReport {
    pub max_ratio: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

pub fn besov_embedding_check(
    part: &DyadicPartition,
    fields: &[SpectralField],
    p1: Exponent,
    p2: Exponent,
    alpha: f64,
) -> Result<EmbeddingReport> {
    let inv = |p: Exponent| match p {
        Exponent::Finite(p) => 1.0 / p,
        Exponent::Infinite => 0.0,
    };
    p1.validate("p1")?;
    p2.validate("p2")?;
    if inv(p2) > inv(p1) {
        return Err(invalid(format!("embedding needs p1 <= p2, got p1 = {p1}, p2 = {p2}")));
    }
    let beta = alpha - 2.0 * (inv(p1) - inv(p2));
    let mut report = EmbeddingReport {
        max_ratio: 0.0,
        evaluated: 0,
        excluded: 0,
    };
    for phi in fields {
        let den = besov_norm(part, phi, alpha, p1, Exponent::Infinite)?;
        if den == 0.0 {
            report.excluded += 1;
            continue;
        }
        let num = besov_norm(part, phi, beta, p2, Exponent::Infinite)?;
        report.max_ratio = report.max_ratio.max(num / den);
        report.evaluated += 1;
    }
    Ok(report)
}

/// One row of a norm table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormRow {
    pub field_id: String,
    pub alpha: f64,
    pub p: Exponent,
    pub q: Exponent,
    pub norm: f64,
}

pub fn write_norm_table<W: Write>(w: &mut W, rows: &[NormRow]) -> Result<()> {
    writeln!(w, "field_id,alpha,p,q,norm")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.field_id, r.alpha, r.p, r.q, r.norm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::extension_eval;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_field(side: usize, seed: u64) -> SpectralField {
        let mut rng = crate::rng::rng_from_seed(seed);
        SpectralField::from_fn(GridSpec::mode_box(side).unwrap(), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn default_partition_checks() {
        let p = DyadicPartition::default();
        let c = p.check(10_000);
        assert!(c.unity_error < 1e-8);
        assert_eq!(c.overlap, 0.0);
        // chi and rho_0 overlap on (a, c); they still sum to one there.
        let r = 1.2;
        assert!(p.chi(r) > 0.0 && p.rho_j(0, r) > 0.0);
        assert!((p.chi(r) + p.rho_j(0, r) - 1.0).abs() < 1e-15);
        // chi is disjoint from rho_j for j >= 1.
        for s in 0..1000 {
            let r = 10.0 * s as f64 / 999.0;
            for j in 1..5 {
                assert_eq!(p.chi(r) * p.rho_j(j, r), 0.0);
            }
        }
    }

    #[test]
    fn bad_radii_name_the_condition() {
        let err = DyadicPartition::build(PartitionRadii { a: 1.0, b: 6.0, c: 3.0 }).unwrap_err();
        assert!(err.to_string().contains("c < 2a"), "{err}");
        let err = DyadicPartition::build(PartitionRadii { a: 1.0, b: 3.0, c: 4.0 / 3.0 }).unwrap_err();
        assert!(err.to_string().contains("b = 2c"), "{err}");
        let err = DyadicPartition::build(PartitionRadii { a: 2.0, b: 2.0, c: 1.0 }).unwrap_err();
        assert!(err.to_string().contains("a < c"), "{err}");
    }

    #[test]
    fn j_max_examples() {
        let p = DyadicPartition::default();
        assert_eq!(p.j_max(GridSpec::mode_box(1).unwrap()), -1);
        assert_eq!(p.j_max(GridSpec::new(3).unwrap()), 0);
        // h = 4, max radius 5.66: rho_2 starts at 4.
        assert_eq!(p.j_max(GridSpec::new(9).unwrap()), 2);
    }

    #[test]
    fn block_examples() {
        let p = DyadicPartition::default();
        let g = GridSpec::new(9).unwrap();
        let constant = SpectralField::single_mode(g, [0, 0], Complex64::new(3.0, 0.0)).unwrap();
        assert_eq!(block(&p, -1, &constant).unwrap(), constant);
        let low = SpectralField::from_fn(g, |k| {
            if k[0] * k[0] + k[1] * k[1] <= 4 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        });
        let big = GridSpec::new(129).unwrap();
        assert_eq!(block(&p, 5, &low.resized(big)).unwrap().max_abs(), 0.0);
        assert!(block(&p, 3, &low).is_err());
        assert!(block(&p, -2, &low).is_err());
    }

    #[test]
    fn single_mode_norm() {
        let p = DyadicPartition::default();
        let g = GridSpec::new(9).unwrap();
        let c = Complex64::new(0.0, 2.5);
        let phi = SpectralField::single_mode(g, [3, 0], c).unwrap();
        // |k| = 3 lies where rho_1 = 1.
        assert_eq!(p.rho_j(1, 3.0), 1.0);
        let direct = extension_eval(&phi, [0.3, 1.1]).norm();
        let alpha: f64 = 0.7;
        let expected = alpha.exp2() * direct;
        let got = besov_norm(&p, &phi, alpha, Exponent::Infinite, Exponent::Infinite).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((direct - c.norm() / (4.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn l2_quadrature_is_parseval() {
        let phi = random_field(9, 3);
        let l2 = lp_norm(&phi, Exponent::Finite(2.0)).unwrap();
        let parseval = phi.coeff_l2() / (2.0 * PI);
        assert!((l2 - parseval).abs() < 1e-12);
    }

    #[test]
    fn exponents_below_one_are_rejected() {
        let p = DyadicPartition::default();
        let phi = random_field(5, 1);
        assert!(besov_norm(&p, &phi, 0.0, Exponent::Finite(0.5), Exponent::Infinite).is_err());
        assert!(besov_norm(&p, &phi, 0.0, Exponent::Infinite, Exponent::Finite(0.9)).is_err());
    }

    #[test]
    fn constants_multiply_resonantly() {
        let p = DyadicPartition::default();
        let g = GridSpec::new(9).unwrap();
        let a = SpectralField::single_mode(g, [0, 0], Complex64::new(2.0 * 4.0 * PI * PI, 0.0)).unwrap();
        let b = SpectralField::single_mode(g, [0, 0], Complex64::new(3.0 * 4.0 * PI * PI, 0.0)).unwrap();
        assert!(paraproduct_lt(&p, &a, &b).unwrap().max_abs() < 1e-12);
        assert!(paraproduct_gt(&p, &a, &b).unwrap().max_abs() < 1e-12);
        let r = resonant(&p, &a, &b).unwrap();
        // Value of the product is 6, i.e. coefficient 6 (2 pi)^2 at k = 0.
        assert!((r.coeff([0, 0]) - Complex64::new(6.0 * 4.0 * PI * PI, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = DyadicPartition::default();
        assert!(paraproduct_lt(&p, &random_field(5, 1), &random_field(7, 2)).is_err());
    }

    #[test]
    fn embedding_identity_and_exclusions() {
        let p = DyadicPartition::default();
        let fields = vec![random_field(9, 1), SpectralField::zeros(GridSpec::new(9).unwrap())];
        let r = besov_embedding_check(&p, &fields, Exponent::Finite(2.0), Exponent::Finite(2.0), 0.5).unwrap();
        assert!(r.max_ratio <= 1.0 + 1e-12);
        assert_eq!(r.excluded, 1);
        assert!(besov_embedding_check(&p, &fields, Exponent::Infinite, Exponent::Finite(1.0), 0.5).is_err());
    }

    #[test]
    fn norm_table_format() {
        let mut buf = Vec::new();
        let row = NormRow { field_id: "xi".into(), alpha: -1.0, p: Exponent::Infinite, q: Exponent::Finite(2.0), norm: 0.5 };
        write_norm_table(&mut buf, &[row]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "field_id,alpha,p,q,norm\nxi,-1,inf,2,0.5\n");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn blocks_reconstruct(side in (1usize..12).prop_map(|m| 2 * m + 1), seed in any::<u64>()) {
            let p = DyadicPartition::default();
            let phi = random_field(side, seed);
            let dec = BlockDecomposition::new(&p, &phi);
            prop_assert!(dec.reconstruct().max_abs_diff(&phi) <= 1e-10 * phi.max_abs());
        }

        #[test]
        fn distant_blocks_are_orthogonal(seed in any::<u64>()) {
            let p = DyadicPartition::default();
            let phi = random_field(41, seed);
            for i in -1..=p.j_max(phi.grid()) {
                for j in (i + 2)..=p.j_max(phi.grid()) {
                    let both = block(&p, i, &block(&p, j, &phi).unwrap()).unwrap();
                    prop_assert_eq!(both.max_abs(), 0.0);
                }
            }
        }

        #[test]
        fn bony_identity(seed in any::<u64>(), side in prop::sample::select(vec![3usize, 9, 15])) {
            let p = DyadicPartition::default();
            let f = random_field(side, seed);
            let g = random_field(side, seed ^ 0xabc);
            let sum = &(&paraproduct_lt(&p, &f, &g).unwrap() + &paraproduct_gt(&p, &f, &g).unwrap()) + &resonant(&p, &f, &g).unwrap();
            let fg = product(&f, &g);
            prop_assert!(sum.max_abs_diff(&fg) <= 1e-9 * fg.max_abs());
        }

        #[test]
        fn norm_axioms(seed in any::<u64>(), alpha in -1.5f64..1.5) {
            let p = DyadicPartition::default();
            let f = random_field(9, seed);
            let g = random_field(9, seed.wrapping_add(1));
            for (pp, qq) in [(Exponent::Infinite, Exponent::Infinite), (Exponent::Finite(1.0), Exponent::Finite(2.0))] {
                let nf = besov_norm(&p, &f, alpha, pp, qq).unwrap();
                let ng = besov_norm(&p, &g, alpha, pp, qq).unwrap();
                let nfg = besov_norm(&p, &(&f + &g), alpha, pp, qq).unwrap();
                prop_assert!(nfg <= nf + ng + 1e-8);
                let n2 = besov_norm(&p, &(&f * -2.0), alpha, pp, qq).unwrap();
                prop_assert!((n2 - 2.0 * nf).abs() <= 1e-10 * nf.max(1.0));
            }
        }
    }
}
