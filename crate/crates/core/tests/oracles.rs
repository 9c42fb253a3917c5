//! Closed-form and convergence oracles for the solver.

use std::f64::consts::PI;

use boussinesq_core::boussinesq::{
    benchmark_params, initialize_with_lift, run, step_with, velocity_of, Coupling, Lift, Lifting,
    SimParams,
};
use boussinesq_core::diagnostics::CSV_COLUMNS;
use boussinesq_core::domain::{mesh_polygon_divisions, Polygon, TriMesh};
use boussinesq_core::elliptic::P1Space;
use boussinesq_core::estimates::{
    check_energy_identity, check_thermal_identity, regularity_series, stability_sweep, viscosity_sweep,
    default_perturbation,
};
use boussinesq_core::expr::Expr;
use boussinesq_core::field::{ScalarField, VectorField};

fn square(n: usize) -> TriMesh {
    mesh_polygon_divisions(&Polygon::unit_square(), n).unwrap()
}

fn expr(s: &str) -> Expr {
    Expr::parse(s).unwrap()
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn first_step_vorticity_matches_the_buoyancy_torque() {
    // From rest with θ = sin(πx)sin(πy) and ν = 0, one step gives
    // ω ≈ dt·∂_xθ = dt·π cos(πx) sin(πy).
    let mut errors = Vec::new();
    for n in [16, 32, 64] {
        let mesh = square(n);
        let space = P1Space::new(&mesh);
        let mut params = SimParams::new(1.0, 1e-3);
        params.nu = 0.0;
        params.theta0 = boussinesq_core::boussinesq::InitialTemperature::Perturbative(expr("sin(pi*x)*sin(pi*y)"));
        let (state, lift) = initialize_with_lift(&space, &params).unwrap();
        let dt = 1e-3;
        let next = step_with(&space, &state, &VectorField::zeros(&mesh), &lift, &params, dt).unwrap();
        let exact = ScalarField::sample(&mesh, |x, y| dt * PI * (PI * x).cos() * (PI * y).sin());
        let mut err = 0.0f64;
        for i in 0..mesh.num_nodes() {
            if !mesh.is_boundary(i) {
                err = err.max((next.omega.values[i] - exact.values[i]).abs());
            }
        }
        errors.push(err / (dt * PI));
    }
    assert!(errors[2] < 5e-3, "{errors:?}");
    assert!(order(errors[0], errors[1]) > 0.8 && order(errors[1], errors[2]) > 0.8, "{errors:?}");
}

#[test]
fn biot_savart_converges_on_a_manufactured_stream_function() {
    // ψ = sin(πx)sin(πy), ω = 2π²ψ, u = (∂_yψ, -∂_xψ).
    let mut errors = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = square(n);
        let space = P1Space::new(&mesh);
        let omega = ScalarField::sample(&mesh, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let u = space.biot_savart(&omega).unwrap().velocity;
        let exact = VectorField::sample_centroids(&mesh, |x, y| {
            [PI * (PI * x).sin() * (PI * y).cos(), -PI * (PI * x).cos() * (PI * y).sin()]
        });
        errors.push(u.sub(&exact).l2_norm(&mesh));
    }
    for w in errors.windows(2) {
        assert!(order(w[0], w[1]) > 0.9, "{errors:?}");
    }
}

#[test]
fn harmonic_lift_reproduces_harmonic_polynomials() {
    for n in [8, 16] {
        let mesh = mesh_polygon_divisions(&Polygon::right_triangle(), n).unwrap();
        let space = P1Space::new(&mesh);
        let linear = ScalarField::sample(&mesh, |x, y| 2.0 * x - y + 0.5);
        let lifted = space.harmonic_lift(&linear).unwrap();
        assert!(lifted.sub(&linear).max_abs() < 1e-9);
    }
    // On the structured square mesh the P1 stiffness is the five-point
    // stencil, which is exact on quadratics.
    for n in [8, 16, 32] {
        let mesh = square(n);
        let space = P1Space::new(&mesh);
        let exact = ScalarField::sample(&mesh, |x, y| x * x - y * y);
        let err = space.harmonic_lift(&exact).unwrap().sub(&exact).max_abs();
        assert!(err < 1e-9, "n = {n}: {err:e}");
    }
}

#[test]
fn lift_derivatives_match_an_analytic_lift() {
    let mesh = square(32);
    let space = P1Space::new(&mesh);
    let lift = Lift::build(&space, &Lifting::Analytic(expr("x*x + y"))).unwrap();
    for (i, g) in lift.grad.iter().enumerate() {
        let [x, y] = mesh.nodes()[i];
        let tol = if mesh.is_boundary(i) { 2.0 * mesh.h() } else { 1e-9 };
        assert!((g[0] - 2.0 * x).abs() < tol && (g[1] - 1.0).abs() < tol, "node {i}: {g:?}");
        assert!((lift.laplacian.values[i] - 2.0).abs() < 1e-9);
        assert!((lift.s.values[i] - (x * x + y)).abs() < 1e-12);
    }
}

/// Final vorticity of the reference flow on an `n × n` mesh, sampled on the
/// nodes of the coarsest mesh.
fn final_vorticity(n: usize, coarse: &TriMesh) -> Vec<f64> {
    let mesh = square(n);
    let space = P1Space::new(&mesh);
    let mut params = benchmark_params(n);
    params.t_end = 0.25;
    params.output_times = Vec::new();
    let traj = run(&space, &params).unwrap();
    let last = traj.snapshots.last().unwrap();
    assert!((last.t - 0.25).abs() < 1e-12);
    coarse.nodes().iter().map(|&p| mesh.interpolate(&last.omega.values, p).unwrap()).collect()
}

#[test]
fn time_stepping_converges_under_refinement() {
    let coarse = square(8);
    let levels: Vec<Vec<f64>> = [16, 32, 64, 128].iter().map(|&n| final_vorticity(n, &coarse)).collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let e1 = diff(&levels[0], &levels[1]);
    let e2 = diff(&levels[1], &levels[2]);
    let e3 = diff(&levels[2], &levels[3]);
    assert!(order(e1, e2) >= 0.8 && order(e2, e3) >= 0.8, "{e1:e} {e2:e} {e3:e}");
}

#[test]
fn a_quiescent_run_has_zero_diagnostics() {
    let mesh = square(12);
    let space = P1Space::new(&mesh);
    let mut params = SimParams::new(0.5, 0.05);
    params.nu = 0.1;
    params.keep_every_step = true;
    let traj = run(&space, &params).unwrap();
    assert_eq!(traj.step_states.len(), 11);
    for row in traj.diagnostics.to_csv_string().lines().skip(1) {
        let values: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(values.len(), CSV_COLUMNS.len());
        assert!(values[2..].iter().all(|&v| v == 0.0), "{row}");
    }
    assert!(check_energy_identity(&traj).residuals.iter().all(|&r| r == 0.0));
    assert!(check_thermal_identity(&traj).residuals.iter().all(|&r| r == 0.0));
    assert!(regularity_series(&space, &traj).unwrap().passed());
}

#[test]
fn zero_end_time_records_only_the_initial_state() {
    let mesh = square(8);
    let space = P1Space::new(&mesh);
    let mut params = benchmark_params(8);
    params.t_end = 0.0;
    params.output_times = Vec::new();
    let traj = run(&space, &params).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.diagnostics.rows().len(), 1);
    assert_eq!(check_energy_identity(&traj).residuals, vec![0.0]);
}

#[test]
fn snapshot_times_are_hit_exactly() {
    let mesh = square(8);
    let space = P1Space::new(&mesh);
    let mut params = benchmark_params(8);
    params.dt_max = 0.3;
    params.cfl = 10.0;
    let traj = run(&space, &params).unwrap();
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn regularity_needs_every_step() {
    let mesh = square(8);
    let space = P1Space::new(&mesh);
    let mut params = benchmark_params(8);
    params.t_end = 0.0;
    params.keep_every_step = true;
    let traj = run(&space, &params).unwrap();
    assert!(regularity_series(&space, &traj).is_err());
    params.t_end = 0.25;
    params.keep_every_step = false;
    let traj = run(&space, &params).unwrap();
    assert!(regularity_series(&space, &traj).is_err());
}

#[test]
fn sweeps_reject_malformed_grids() {
    let mesh = square(8);
    let space = P1Space::new(&mesh);
    let params = benchmark_params(8);
    for grid in [&[][..], &[0.1, 0.2][..], &[0.1, 0.1][..], &[0.1, -0.05][..], &[f64::NAN][..]] {
        assert!(viscosity_sweep(&space, &params, grid, Some(1)).is_err(), "{grid:?}");
        assert!(stability_sweep(&space, &params, grid, &default_perturbation(), Some(1)).is_err(), "{grid:?}");
    }
}

#[test]
fn transport_only_runs_keep_vorticity_norms_bounded() {
    let mesh = square(16);
    let space = P1Space::new(&mesh);
    let mut params = benchmark_params(16);
    params.coupling = Coupling::TransportOnly;
    let traj = run(&space, &params).unwrap();
    for p in [2.0, 4.0, 8.0, f64::INFINITY] {
        let bound = boussinesq_core::estimates::check_vorticity_transport_bound(&traj, p).unwrap();
        assert!(bound.passed(), "p = {p}: {:?}", bound.margins);
    }
    let u0 = velocity_of(&space, &traj.snapshots[0]).unwrap();
    assert!(space.max_boundary_normal(&u0.velocity) <= 1e-12 * u0.velocity.max_magnitude());
}
