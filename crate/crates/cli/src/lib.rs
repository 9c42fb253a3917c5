//! Command implementations behind the `boussinesq` binary: `mesh`, `run`,
//! `verify` and `sweep`, each driven by a [`config::Config`].

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use boussinesq_core::boussinesq::{run, Trajectory};
use boussinesq_core::domain::{compute_apertures, mesh_polygon, TriMesh};
use boussinesq_core::elliptic::P1Space;
use boussinesq_core::estimates::{
    check_energy_identity, check_thermal_identity, check_vorticity_transport_bound, gronwall_envelope_check,
    regularity_series, stability_sweep, viscosity_sweep, SweepKind,
};
use boussinesq_core::random::FieldSampler;
use boussinesq_core::vtk::write_vtk;

use config::{Check, Config, ConfigError, VerifyConfig};
use output::{Manifest, OutputDir};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] boussinesq_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<boussinesq_core::domain::DomainError> for CliError {
    fn from(e: boussinesq_core::domain::DomainError) -> Self {
        CliError::Core(e.into())
    }
}

/// Result of a command: whether every requested check passed, plus the
/// lines to print.
#[derive(Debug, Default)]
pub struct Report {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Report {
    fn ok() -> Self {
        Self {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, passed: bool, name: &str, detail: String) {
        self.passed &= passed;
        self.lines
            .push(format!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" }));
    }
}

struct Timer {
    timings: Vec<(String, f64)>,
}

impl Timer {
    fn new() -> Self {
        Self { timings: Vec::new() }
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((phase.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

pub fn build_mesh(config: &Config) -> Result<TriMesh, CliError> {
    let poly = config.domain.polygon()?;
    Ok(mesh_polygon(&poly, config.mesh.effective_h())?)
}

fn mesh_stats(config: &Config, mesh: &TriMesh) -> Result<Vec<(String, String)>, CliError> {
    let report = compute_apertures(mesh.polygon())?;
    let boundary = mesh.boundary_flags().iter().filter(|b| **b).count();
    Ok(vec![
        ("nodes".into(), mesh.num_nodes().to_string()),
        ("elements".into(), mesh.num_elements().to_string()),
        ("boundary_nodes".into(), boundary.to_string()),
        ("divisions".into(), mesh.divisions().to_string()),
        ("h".into(), format!("{:?}", mesh.h())),
        ("max_aperture".into(), format!("{:?}", report.max_aperture)),
        ("dt_max".into(), format!("{:?}", config.sim_params().dt_max)),
    ])
}

fn resolve_out(config: &Config, out: Option<&Path>) -> PathBuf {
    out.map_or_else(|| config.output.directory.clone(), Path::to_path_buf)
}

pub fn cmd_mesh(config: &Config, out: Option<&Path>) -> Result<Report, CliError> {
    let mut timer = Timer::new();
    let mesh = timer.time("mesh", || build_mesh(config))?;
    let mut dir = OutputDir::create(&resolve_out(config, out))?;
    let mut vtk = Vec::new();
    mesh.write_vtk(&mut vtk, "mesh").map_err(|e| CliError::io(dir.path(), e))?;
    dir.write("mesh.vtk", &vtk)?;
    let stats = mesh_stats(config, &mesh)?;
    let mut report = Report::ok();
    report.lines = stats.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    Manifest {
        command: "mesh".into(),
        config_echo: config.to_text(),
        mesh_stats: stats,
        timings: timer.timings,
    }
    .write(&mut dir)?;
    Ok(report)
}

fn write_snapshots(space: &P1Space<'_>, traj: &Trajectory, dir: &mut OutputDir) -> Result<(), CliError> {
    let mesh = space.mesh();
    for (k, state) in traj.snapshots.iter().enumerate() {
        let velocity = space.biot_savart(&state.omega)?;
        let temperature = state.theta.add(&traj.lift);
        let mut buf = Vec::new();
        write_vtk(
            &mut buf,
            mesh,
            &format!("t = {:?}", state.t),
            &[
                ("omega", &state.omega.values),
                ("theta", &state.theta.values),
                ("T", &temperature.values),
                ("psi", &velocity.stream.values),
            ],
            &[("u", &velocity.velocity.values)],
        )
        .map_err(|e| CliError::io(dir.path(), e))?;
        dir.write(&format!("snapshot_{k:03}.vtk"), &buf)?;
    }
    Ok(())
}

/// Simulation plus diagnostics CSV (and VTK snapshots when enabled).
fn simulate(
    config: &Config,
    keep_every_step: bool,
    timer: &mut Timer,
) -> Result<(TriMesh, Trajectory), CliError> {
    let mesh = timer.time("mesh", || build_mesh(config))?;
    let space = P1Space::new(&mesh);
    let mut params = config.sim_params();
    params.keep_every_step = keep_every_step;
    let traj = timer.time("simulate", || run(&space, &params))?;
    Ok((mesh, traj))
}

fn write_run_outputs(
    config: &Config,
    mesh: &TriMesh,
    traj: &Trajectory,
    dir: &mut OutputDir,
    timer: &mut Timer,
) -> Result<(), CliError> {
    dir.write("diagnostics.csv", traj.diagnostics.to_csv_string().as_bytes())?;
    if config.output.vtk {
        let space = P1Space::new(mesh);
        let start = Instant::now();
        write_snapshots(&space, traj, dir)?;
        timer.timings.push(("vtk".into(), start.elapsed().as_secs_f64()));
    }
    Ok(())
}

pub fn cmd_run(config: &Config, out: Option<&Path>) -> Result<Report, CliError> {
    let mut timer = Timer::new();
    let (mesh, traj) = simulate(config, false, &mut timer)?;
    let mut dir = OutputDir::create(&resolve_out(config, out))?;
    write_run_outputs(config, &mesh, &traj, &mut dir, &mut timer)?;
    let mut report = Report::ok();
    let last = traj.snapshots.last().expect("initial snapshot");
    report.lines.push(format!(
        "{} steps to t = {:?}; diagnostics in {}",
        traj.diagnostics.rows().len() - 1,
        last.t,
        dir.path().join("diagnostics.csv").display()
    ));
    Manifest {
        command: "run".into(),
        config_echo: config.to_text(),
        mesh_stats: mesh_stats(config, &mesh)?,
        timings: timer.timings,
    }
    .write(&mut dir)?;
    Ok(report)
}

fn elliptic_invariants(mesh: &TriMesh, v: &VerifyConfig, report: &mut Report) -> Result<(), CliError> {
    let space = P1Space::new(mesh);
    let mut sampler = FieldSampler::new(v.seed);
    let (mut tangency, mut flux, mut idempotence) = (0.0f64, 0.0f64, 0.0f64);
    let mut flux_ok = true;
    for _ in 0..v.samples {
        let mut omega = sampler.smooth_scalar(mesh);
        omega.zero_boundary(mesh);
        let u = space.biot_savart(&omega)?.velocity;
        tangency = tangency.max(space.max_boundary_normal(&u));
        let scale = 1e-10 * u.max_magnitude() * mesh.h();
        for (i, f) in space.patch_fluxes(&u).iter().enumerate() {
            if !mesh.is_boundary(i) {
                flux = flux.max(f.abs());
                flux_ok &= f.abs() <= scale;
            }
        }
        let w = sampler.smooth_vector(mesh);
        let pw = space.leray_project(&w)?.projected;
        let ppw = space.leray_project(&pw)?.projected;
        idempotence = idempotence.max(ppw.sub(&pw).l2_norm(mesh) / w.l2_norm(mesh));
    }
    let tol = 10.0 * space.solver().tolerance;
    report.check(
        tangency <= 1e-12 && flux_ok && idempotence <= tol,
        "elliptic",
        format!(
            "{} samples (seed {}): max |u·n| {tangency:.3e}, max patch flux {flux:.3e}, projection idempotence {idempotence:.3e}",
            v.samples, v.seed
        ),
    );
    Ok(())
}

fn run_checks(
    v: &VerifyConfig,
    mesh: &TriMesh,
    traj: &Trajectory,
    report: &mut Report,
) -> Result<(), CliError> {
    for check in &v.checks {
        match check {
            Check::Transport => {
                for &p in &v.p_list {
                    let tb = check_vorticity_transport_bound(traj, p)?;
                    let worst = tb
                        .times
                        .iter()
                        .zip(&tb.margins)
                        .map(|(&t, &m)| m + tb.tolerance(t))
                        .fold(f64::INFINITY, f64::min);
                    report.check(
                        tb.passed(),
                        &format!("transport p={p}"),
                        format!("min margin {:.6e}, min margin + tolerance {worst:.6e}", tb.min_margin()),
                    );
                }
            }
            Check::Energy => {
                let r = check_energy_identity(traj);
                report.check(
                    r.passes(v.kinetic_constant),
                    "energy",
                    format!("average residual {:.6e}, bound {:.6e}", r.average, r.bound(v.kinetic_constant)),
                );
            }
            Check::Thermal => {
                let r = check_thermal_identity(traj);
                report.check(
                    r.passes(v.thermal_constant),
                    "thermal",
                    format!("average residual {:.6e}, bound {:.6e}", r.average, r.bound(v.thermal_constant)),
                );
            }
            Check::Gronwall => {
                let g = gronwall_envelope_check(traj, v.gronwall_c);
                let violation = g.first_violation.map_or_else(|| "none".to_string(), |t| format!("t = {t:?}"));
                report.check(
                    g.passed,
                    "gronwall",
                    format!(
                        "C = {:?}, first violation {violation}, calibrated C {:.6e}",
                        v.gronwall_c, g.calibrated_c
                    ),
                );
            }
            Check::Regularity => {
                let space = P1Space::new(mesh);
                let detail = match regularity_series(&space, traj) {
                    Ok(series) => {
                        let bounded = series.bounded();
                        let ok = bounded.iter().all(|(_, b)| *b);
                        let text = bounded
                            .iter()
                            .map(|(n, b)| format!("{n} {}", if *b { "bounded" } else { "growing" }))
                            .collect::<Vec<_>>()
                            .join(", ");
                        (ok, text)
                    }
                    Err(e) => (false, e.to_string()),
                };
                report.check(detail.0, "regularity", detail.1);
            }
            Check::Elliptic => elliptic_invariants(mesh, v, report)?,
        }
    }
    Ok(())
}

pub fn cmd_verify(config: &Config, out: Option<&Path>) -> Result<Report, CliError> {
    let v = config
        .verify
        .clone()
        .ok_or_else(|| CliError::Usage("verify needs a [verify] section".into()))?;
    let mut timer = Timer::new();
    let (mesh, traj) = simulate(config, v.checks.contains(&Check::Regularity), &mut timer)?;
    let mut dir = OutputDir::create(&resolve_out(config, out))?;
    write_run_outputs(config, &mesh, &traj, &mut dir, &mut timer)?;
    let mut report = Report::ok();
    let start = Instant::now();
    run_checks(&v, &mesh, &traj, &mut report)?;
    timer.timings.push(("checks".into(), start.elapsed().as_secs_f64()));
    let mut text = report.lines.join("\n");
    text.push('\n');
    dir.write("verify_report.txt", text.as_bytes())?;
    Manifest {
        command: "verify".into(),
        config_echo: config.to_text(),
        mesh_stats: mesh_stats(config, &mesh)?,
        timings: timer.timings,
    }
    .write(&mut dir)?;
    Ok(report)
}

pub fn cmd_sweep(config: &Config, out: Option<&Path>, jobs: Option<usize>) -> Result<Report, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep needs a [sweep] section".into()))?;
    let jobs = jobs.or(sweep.jobs);
    let mut timer = Timer::new();
    let mesh = timer.time("mesh", || build_mesh(config))?;
    let space = P1Space::new(&mesh);
    let params = config.sim_params();
    let result = timer.time("sweep", || match sweep.kind {
        SweepKind::Viscosity => viscosity_sweep(&space, &params, &sweep.values, jobs),
        SweepKind::Stability => stability_sweep(&space, &params, &sweep.values, &sweep.profile, jobs),
    })?;
    let mut dir = OutputDir::create(&resolve_out(config, out))?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv).map_err(|e| CliError::io(dir.path(), e))?;
    dir.write("sweep.csv", &csv)?;
    let summary = result.summary();
    dir.write("sweep_summary.txt", summary.as_bytes())?;
    Manifest {
        command: format!("{} sweep", sweep.kind.name()),
        config_echo: config.to_text(),
        mesh_stats: mesh_stats(config, &mesh)?,
        timings: timer.timings,
    }
    .write(&mut dir)?;
    Ok(Report {
        passed: result.passed(),
        lines: summary.lines().map(str::to_string).collect(),
    })
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    config::parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
