//! Time integration of the viscous perturbative Boussinesq system in
//! vorticity–temperature form,
//!
//! ```text
//! ∂_t ω - ν Δω + u·∇ω = ∂_x(θ + S),            ω = 0 on ∂Ω,
//! ∂_t θ -   Δθ + u·∇θ = -u·∇S + ΔS,             θ = 0 on ∂Ω,
//! u = ∇⊥ψ,  -Δψ = ω,  ψ = 0 on ∂Ω,
//! ```
//!
//! with `ν = 0` giving the Euler–Boussinesq system. Each step is a
//! first-order Lie splitting: semi-Lagrangian transport followed by an
//! implicit (lumped-mass) diffusion solve carrying the explicit source.

use crate::diagnostics::{DiagnosticsRow, DiagnosticsSeries};
use crate::domain::{Location, TriMesh};
use crate::elliptic::{P1Space, VelocitySolve};
use crate::expr::Expr;
use crate::field::{FieldError, ScalarField, VectorField};
use crate::norms;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Full,
    /// Buoyancy torque switched off: vorticity is only transported (and
    /// diffused when `ν > 0`).
    TransportOnly,
}

/// How the boundary temperature is extended into the domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Lifting {
    /// Discrete harmonic extension of the boundary trace `η`; `ΔS = 0`.
    Harmonic(Expr),
    /// User-supplied `S`; `ΔS` is differentiated symbolically.
    Analytic(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialTemperature {
    /// `θ₀` directly.
    Perturbative(Expr),
    /// Total temperature `T₀`; `θ₀ = T₀ - S`.
    Total(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub nu: f64,
    pub kappa: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub lifting: Lifting,
    pub omega0: Expr,
    pub theta0: InitialTemperature,
    pub coupling: Coupling,
    /// Snapshot times in `(0, t_end]`; `0` and `t_end` are always recorded.
    pub output_times: Vec<f64>,
    /// Keep the state after every step (needed by the regularity series).
    pub keep_every_step: bool,
}

impl SimParams {
    /// Zero data, `ν = 0`, `cfl = 0.5`, full coupling.
    pub fn new(t_end: f64, dt_max: f64) -> Self {
        Self {
            nu: 0.0,
            kappa: 1.0,
            dt_max,
            cfl: 0.5,
            t_end,
            lifting: Lifting::Harmonic(Expr::zero()),
            omega0: Expr::zero(),
            theta0: InitialTemperature::Perturbative(Expr::zero()),
            coupling: Coupling::Full,
            output_times: Vec::new(),
            keep_every_step: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.nu) {
            return bad(format!("viscosity must satisfy 0 <= nu <= 1, got {}", self.nu));
        }
        if self.kappa != 1.0 {
            return bad(format!("diffusivity is fixed to 1, got {}", self.kappa));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return bad(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return bad(format!("cfl must be positive, got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if let Some(t) = self.output_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return bad(format!("invalid output time {t}"));
        }
        Ok(())
    }

    /// Sorted snapshot times including `0` and `t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .output_times
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < self.t_end)
            .collect();
        times.push(0.0);
        times.push(self.t_end);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// The reference scenario on the unit square with `n` divisions:
/// `ω₀ = sin(2πx)sin(2πy)`, `θ₀ = sin(πx)sin(πy)`, `η = 0`, `ν = 0`,
/// `t_end = 1`, `cfl = 0.5`, `dt_max = 1/n`, snapshots every quarter.
pub fn benchmark_params(divisions: usize) -> SimParams {
    let mut p = SimParams::new(1.0, 1.0 / divisions as f64);
    p.omega0 = Expr::parse("sin(2*pi*x)*sin(2*pi*y)").expect("valid expression");
    p.theta0 = InitialTemperature::Perturbative(Expr::parse("sin(pi*x)*sin(pi*y)").expect("valid expression"));
    p.output_times = vec![0.25, 0.5, 0.75];
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    /// Vorticity, zero on boundary nodes.
    pub omega: ScalarField,
    /// Perturbative temperature `T - S`, zero on boundary nodes.
    pub theta: ScalarField,
}

impl FlowState {
    pub fn zeros(mesh: &TriMesh) -> Self {
        Self {
            t: 0.0,
            omega: ScalarField::zeros(mesh),
            theta: ScalarField::zeros(mesh),
        }
    }
}

/// The lifted boundary temperature and the derived quantities the step uses.
#[derive(Debug, Clone)]
pub struct Lift {
    pub s: ScalarField,
    pub grad: Vec<Point>,
    pub laplacian: ScalarField,
}

impl Lift {
    pub fn build(space: &P1Space<'_>, lifting: &Lifting) -> Result<Self> {
        let mesh = space.mesh();
        let (s, laplacian) = match lifting {
            Lifting::Harmonic(eta) => {
                let mut trace = ScalarField::zeros(mesh);
                for (i, p) in mesh.nodes().iter().enumerate() {
                    if mesh.is_boundary(i) {
                        trace.values[i] = eta.eval_checked(p[0], p[1])?;
                    }
                }
                (space.harmonic_lift(&trace)?, ScalarField::zeros(mesh))
            }
            Lifting::Analytic(expr) => {
                let s = sample_expr(mesh, expr)?;
                let lap_node = expr.laplacian();
                let lap = ScalarField::sample(mesh, |x, y| lap_node.eval(x, y));
                lap.check(mesh, "laplacian of S")?;
                (s, lap)
            }
        };
        Ok(Self {
            grad: space.gradient_recover(&s),
            s,
            laplacian,
        })
    }
}

fn sample_expr(mesh: &TriMesh, expr: &Expr) -> Result<ScalarField> {
    let values = mesh
        .nodes()
        .iter()
        .map(|p| expr.eval_checked(p[0], p[1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScalarField::new(values))
}

/// Initial state (boundary values forced to zero) and the lift `S`.
pub fn initialize(space: &P1Space<'_>, params: &SimParams) -> Result<(FlowState, ScalarField)> {
    let (state, lift) = initialize_with_lift(space, params)?;
    Ok((state, lift.s))
}

pub fn initialize_with_lift(space: &P1Space<'_>, params: &SimParams) -> Result<(FlowState, Lift)> {
    params.validate()?;
    let mesh = space.mesh();
    let lift = Lift::build(space, &params.lifting)?;
    let mut omega = sample_expr(mesh, &params.omega0)?;
    let mut theta = match &params.theta0 {
        InitialTemperature::Perturbative(e) => sample_expr(mesh, e)?,
        InitialTemperature::Total(e) => sample_expr(mesh, e)?.sub(&lift.s),
    };
    omega.zero_boundary(mesh);
    theta.zero_boundary(mesh);
    Ok((FlowState { t: 0.0, omega, theta }, lift))
}

/// Biot–Savart velocity of the state's vorticity.
pub fn velocity_of(space: &P1Space<'_>, state: &FlowState) -> Result<VelocitySolve> {
    space.biot_savart(&state.omega)
}

/// `min(dt_max, cfl·h / (max|u| + 1e-12))`, clamped to the time left.
pub fn cfl_dt(mesh: &TriMesh, u: &VectorField, params: &SimParams, t: f64) -> f64 {
    let dt = params.dt_max.min(params.cfl * mesh.h() / (u.max_magnitude() + 1e-12));
    dt.min((params.t_end - t).max(0.0))
}

/// Treatment of characteristic feet that leave the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutsidePolicy {
    /// Homogeneous Dirichlet data: exterior feet and boundary nodes get 0.
    Zero,
    /// Feet are projected to the nearest boundary point and interpolated
    /// there; boundary nodes keep their values.
    Clamp,
}

/// One-step backward-characteristic transport with linear interpolation.
///
/// Each node is traced back with the velocity of its lowest-index element;
/// the interpolated value is clipped to the range of the three nodal values
/// it combines, so the update is a convex combination.
pub fn advect_semilagrangian(
    mesh: &TriMesh,
    f: &ScalarField,
    u: &VectorField,
    dt: f64,
    policy: OutsidePolicy,
) -> ScalarField {
    let nodes = mesh.nodes();
    let mut out = vec![0.0; mesh.num_nodes()];
    for (i, x) in nodes.iter().enumerate() {
        if mesh.is_boundary(i) {
            out[i] = match policy {
                OutsidePolicy::Zero => 0.0,
                OutsidePolicy::Clamp => f.values[i],
            };
            continue;
        }
        let owner = mesh.node_owner(i);
        let v = u.values[owner];
        if v == [0.0, 0.0] || dt == 0.0 {
            out[i] = f.values[i];
            continue;
        }
        let foot = [x[0] - dt * v[0], x[1] - dt * v[1]];
        out[i] = match mesh.locate_point_from(foot, owner) {
            Location::Inside { element, weights } => {
                let tri = mesh.elements()[element];
                let vals = tri.map(|k| f.values[k]);
                let lo = vals[0].min(vals[1]).min(vals[2]);
                let hi = vals[0].max(vals[1]).max(vals[2]);
                mesh.combine(element, weights, &f.values).clamp(lo, hi)
            }
            Location::Outside => match policy {
                OutsidePolicy::Zero => 0.0,
                OutsidePolicy::Clamp => boundary_value(mesh, &f.values, foot),
            },
        };
    }
    ScalarField::new(out)
}

fn boundary_value(mesh: &TriMesh, values: &[f64], p: Point) -> f64 {
    let nodes = mesh.nodes();
    let mut best = (f64::INFINITY, 0.0);
    for edge in mesh.boundary_edges() {
        let (a, b) = (nodes[edge.nodes[0]], nodes[edge.nodes[1]]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let s = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
        let q = [a[0] + s * d[0], a[1] + s * d[1]];
        let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
        if dist < best.0 {
            best = (dist, (1.0 - s) * values[edge.nodes[0]] + s * values[edge.nodes[1]]);
        }
    }
    best.1
}

/// Backward-Euler diffusion with explicit source and homogeneous Dirichlet
/// rows: `(M + dt·coeff·A) f_new = M (f + dt·source)`.
pub fn diffuse_implicit(
    space: &P1Space<'_>,
    f: &ScalarField,
    coeff: f64,
    dt: f64,
    source: &ScalarField,
) -> Result<ScalarField> {
    let mesh = space.mesh();
    f.check(mesh, "diffused field")?;
    source.check(mesh, "source")?;
    if coeff < 0.0 {
        return Err(Error::InvalidParams(format!("diffusion coefficient must be >= 0, got {coeff}")));
    }
    let explicit: Vec<f64> = f.values.iter().zip(&source.values).map(|(a, s)| a + dt * s).collect();
    if coeff == 0.0 || dt == 0.0 {
        let mut out = ScalarField::new(explicit);
        out.zero_boundary(mesh);
        return Ok(out);
    }
    let rhs: Vec<f64> = explicit.iter().zip(space.lumped_mass()).map(|(v, m)| v * m).collect();
    let zeros = vec![0.0; mesh.num_nodes()];
    let (x, _) = space.solve_dirichlet_system(1.0, dt * coeff, &rhs, &zeros, Some(&f.values))?;
    Ok(ScalarField::new(x))
}

/// Recovered `∂_x(θ + S)`, the buoyancy torque driving the vorticity.
pub fn buoyancy_torque(space: &P1Space<'_>, theta: &ScalarField, lift: &Lift) -> ScalarField {
    let total = theta.add(&lift.s);
    ScalarField::new(space.gradient_recover(&total).iter().map(|g| g[0]).collect())
}

/// `-u·∇S + ΔS` at nodes with the area-averaged nodal velocity.
pub fn lift_source(space: &P1Space<'_>, u: &VectorField, lift: &Lift) -> ScalarField {
    let un = space.average_to_nodes(u);
    ScalarField::new(
        un.iter()
            .zip(&lift.grad)
            .zip(&lift.laplacian.values)
            .map(|((u, g), lap)| -(u[0] * g[0] + u[1] * g[1]) + lap)
            .collect(),
    )
}

/// Vorticity forcing actually applied in a step: the buoyancy torque with
/// boundary rows removed, or zero when coupling is off.
pub fn applied_vorticity_forcing(
    space: &P1Space<'_>,
    theta: &ScalarField,
    lift: &Lift,
    coupling: Coupling,
) -> ScalarField {
    let mesh = space.mesh();
    match coupling {
        Coupling::Full => {
            let mut f = buoyancy_torque(space, theta, lift);
            f.zero_boundary(mesh);
            f
        }
        Coupling::TransportOnly => ScalarField::zeros(mesh),
    }
}

fn check_finite(field: &ScalarField, name: &'static str, step: usize) -> Result<()> {
    if field.values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { field: name, step })
    }
}

/// One Lie-splitting step of size `dt` from `state` with velocity `u`.
pub fn step_with(
    space: &P1Space<'_>,
    state: &FlowState,
    u: &VectorField,
    lift: &Lift,
    params: &SimParams,
    dt: f64,
) -> Result<FlowState> {
    let mesh = space.mesh();
    let forcing = applied_vorticity_forcing(space, &state.theta, lift, params.coupling);
    let omega_star = advect_semilagrangian(mesh, &state.omega, u, dt, OutsidePolicy::Zero);
    let mut omega = diffuse_implicit(space, &omega_star, params.nu, dt, &forcing)?;
    let theta_star = advect_semilagrangian(mesh, &state.theta, u, dt, OutsidePolicy::Zero);
    let mut theta = diffuse_implicit(space, &theta_star, params.kappa, dt, &lift_source(space, u, lift))?;
    omega.zero_boundary(mesh);
    theta.zero_boundary(mesh);
    Ok(FlowState {
        t: state.t + dt,
        omega,
        theta,
    })
}

/// One step with the CFL time step; recomputes the velocity and the lift
/// derivatives from scratch.
pub fn step(space: &P1Space<'_>, state: &FlowState, params: &SimParams) -> Result<FlowState> {
    let lift = Lift::build(space, &params.lifting)?;
    let u = velocity_of(space, state)?;
    let dt = cfl_dt(space.mesh(), &u.velocity, params, state.t);
    step_with(space, state, &u.velocity, &lift, params, dt)
}

/// `T = θ + S` nodewise.
pub fn reconstruct_temperature(state: &FlowState, s: &ScalarField) -> Result<ScalarField> {
    if state.theta.len() != s.len() {
        return Err(FieldError::LengthMismatch {
            what: "lift vs temperature",
            expected: state.theta.len(),
            got: s.len(),
        }
        .into());
    }
    Ok(state.theta.add(s))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States at the snapshot times, starting at `t = 0`.
    pub snapshots: Vec<FlowState>,
    /// Every step's state when requested, else empty.
    pub step_states: Vec<FlowState>,
    pub diagnostics: DiagnosticsSeries,
    pub lift: ScalarField,
}

/// Time loop from `t = 0` to `t_end`. Steps are shortened to land exactly on
/// snapshot times, so runs with identical snapshot times can be compared
/// state by state.
pub fn run(space: &P1Space<'_>, params: &SimParams) -> Result<Trajectory> {
    let mesh = space.mesh();
    let (mut state, lift) = initialize_with_lift(space, params)?;
    let mut velocity = velocity_of(space, &state)?;
    let targets = params.snapshot_times();
    let mut next_target = 1;
    let mut snapshots = vec![state.clone()];
    let mut step_states = Vec::new();
    if params.keep_every_step {
        step_states.push(state.clone());
    }
    let mut diagnostics = DiagnosticsSeries::new(space, params.nu, &lift);
    let mut step_index = 0;
    while next_target < targets.len() {
        let target = targets[next_target];
        let mut dt = cfl_dt(mesh, &velocity.velocity, params, state.t);
        // land on the snapshot time instead of leaving a sliver
        let reached = state.t + dt >= target - 1e-12 * params.t_end.max(1.0);
        if reached {
            dt = target - state.t;
        }
        diagnostics.push(DiagnosticsRow::compute(space, &state, &velocity, &lift, params.coupling, dt)?);
        let mut next = step_with(space, &state, &velocity.velocity, &lift, params, dt)
            .map_err(|e| Error::Step { step: step_index, source: Box::new(e) })?;
        check_finite(&next.omega, "vorticity", step_index)?;
        check_finite(&next.theta, "temperature", step_index)?;
        if reached {
            next.t = target;
            next_target += 1;
        }
        velocity = space
            .biot_savart_from(&next.omega, Some(&velocity.stream))
            .map_err(|e| Error::Step { step: step_index, source: Box::new(e) })?;
        state = next;
        if reached {
            snapshots.push(state.clone());
        }
        if params.keep_every_step {
            step_states.push(state.clone());
        }
        step_index += 1;
    }
    diagnostics.push(DiagnosticsRow::compute(space, &state, &velocity, &lift, params.coupling, 0.0)?);
    diagnostics.finalize();
    Ok(Trajectory {
        snapshots,
        step_states,
        diagnostics,
        lift: lift.s,
    })
}

/// Pointwise nodal maximum of `|f|` restricted to interior nodes.
pub fn interior_max_abs(mesh: &TriMesh, f: &ScalarField) -> f64 {
    f.values
        .iter()
        .enumerate()
        .filter(|(i, _)| !mesh.is_boundary(*i))
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// `‖u‖_{L²}` of the Biot–Savart velocity of a vorticity field.
pub fn velocity_l2(space: &P1Space<'_>, omega: &ScalarField) -> Result<f64> {
    Ok(space.biot_savart(omega)?.velocity.l2_norm(space.mesh()))
}

/// `‖θ‖_{L²}` with vertex quadrature.
pub fn temperature_l2(mesh: &TriMesh, theta: &ScalarField) -> Result<f64> {
    norms::lp_norm(mesh, theta, 2.0)
}
