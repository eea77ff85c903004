use pamlab::lattice::{GridSpec, LatticeField, WalkMeasure};
use pamlab::noise::{sample_potential, Distribution, Potential, PotentialSpec};
use pamlab::polymer::{mc_vs_kernel_check, PolymerKernel};
use pamlab::solver::{dense_solution, solve_pam, DtPolicy, InitialCondition, PamOperator, SolveOptions};
use pamlab::spectrum::{assemble_hamiltonian, lowest_eigenvalues, SpectrumSample, DEFAULT_TOL};

fn setup(n: usize, seed: u64) -> (GridSpec, Potential, WalkMeasure) {
    let g = GridSpec::new(n).unwrap();
    let eta = sample_potential(&PotentialSpec::iid(Distribution::Gaussian), g, seed).unwrap();
    (g, eta, WalkMeasure::nearest_neighbor())
}

#[test]
fn partition_function_matches_pam_solution() {
    let (g, eta, mu) = setup(5, 31);
    let op = PamOperator::from_potential(&eta, &mu).unwrap();
    let horizon = 0.4;
    let kernel = PolymerKernel::new(&op, horizon, DtPolicy::Fixed { dt: 0.004 }).unwrap();
    let x = [1, 0];
    let report = mc_vs_kernel_check(&op, &kernel, x, &[horizon], 40_000, 8).unwrap();

    let u = dense_solution(&op, &LatticeField::constant(g, 1.0), horizon).unwrap();
    // The weights omit the counterterm, the PAM solution includes it.
    let z = u.get(x).re * (op.c_n() * horizon).exp();
    let rel = (report.partition_estimate - z).abs() / z;
    assert!(rel < 0.02, "Z estimate {} vs {z}", report.partition_estimate);
    assert!(report.warning.is_none());
}

#[test]
fn long_time_growth_is_the_shifted_ground_state() {
    let (g, eta, mu) = setup(9, 4);
    let op = PamOperator::from_potential(&eta, &mu).unwrap();
    // The generator carries +xi while the Hamiltonian carries +eps eta, so the growth
    // rate is governed by the Hamiltonian of the reflected potential.
    let reflected = Potential::from_values(g, eta.values.iter().map(|v| -v).collect()).unwrap();
    let h = assemble_hamiltonian(&reflected, &mu).unwrap();
    let eig = lowest_eigenvalues(&h, 2, DEFAULT_TOL).unwrap();
    let shifted = SpectrumSample::from_raw(9, 4, eig.values, eig.residuals).unwrap().shifted;

    let u0 = LatticeField::constant(g, 1.0);
    let mass = |t: f64| dense_solution(&op, &u0, t).unwrap().values().iter().map(|v| v.re).sum::<f64>();
    let (t1, t2) = (10.0, 12.0);
    let rate = (mass(t2) / mass(t1)).ln() / (t2 - t1);
    let gap = shifted[1] - shifted[0];
    assert!(gap > 0.1, "gap {gap}");
    assert!((rate + shifted[0]).abs() < 1e-3, "rate {rate} vs {}", -shifted[0]);
}

#[test]
fn splitting_solver_tracks_the_exponential_in_growth_regime() {
    let (g, eta, mu) = setup(9, 12);
    let op = PamOperator::from_potential(&eta, &mu).unwrap();
    let u0 = InitialCondition::Constant { value: 1.0 };
    let exact = dense_solution(&op, &u0.lattice_values(g).unwrap(), 1.0).unwrap();
    let opts = SolveOptions { dt: DtPolicy::Fixed { dt: 0.002 }, ..Default::default() };
    let approx = solve_pam(&op, &u0, 1.0, &opts).unwrap().final_lattice();
    assert!(approx.max_abs_diff(&exact) < 1e-4 * exact.max_abs());
    assert!(approx.values().iter().all(|v| v.re > 0.0 && v.im.abs() < 1e-9 * exact.max_abs()));
}
