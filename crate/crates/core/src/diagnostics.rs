//! Per-step diagnostics of a run and their CSV serialization.

use std::io::{self, Write};

use crate::boussinesq::{applied_vorticity_forcing, Coupling, FlowState, Lift};
use crate::elliptic::{P1Space, VelocitySolve};
use crate::field::ScalarField;
use crate::norms::{h1_seminorm, lp_norm};
use crate::Result;

/// Exponents at which vorticity and forcing norms are recorded.
pub const EXPONENTS: [f64; 4] = [2.0, 4.0, 8.0, f64::INFINITY];

/// Exponent used for the `transport_margin` CSV column.
pub const TRANSPORT_COLUMN_EXPONENT: usize = 3;

pub const CSV_COLUMNS: [&str; 18] = [
    "t",
    "dt",
    "u_L2",
    "grad_u_L2",
    "omega_L2",
    "omega_L4",
    "omega_L8",
    "omega_Linf",
    "theta_L2",
    "grad_theta_L2",
    "lap_theta_L2",
    "dx_T_L2",
    "dx_T_L4",
    "dx_T_L8",
    "dx_T_Linf",
    "kinetic_residual",
    "thermal_residual",
    "transport_margin",
];

pub fn exponent_index(p: f64) -> Option<usize> {
    EXPONENTS.iter().position(|&q| q == p)
}

/// Quantities recorded for the state at the start of each step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiagnosticsRow {
    pub t: f64,
    /// Size of the step taken from this state (0 on the final row).
    pub dt: f64,
    pub u_l2: f64,
    /// L² norm of the element gradients of the nodally recovered velocity.
    pub grad_u_l2: f64,
    pub omega_lp: [f64; 4],
    pub theta_l2: f64,
    pub grad_theta_l2: f64,
    pub lap_theta_l2: f64,
    /// Norms of the vorticity forcing `∂_x(θ + S)` applied in the step
    /// (zero when the buoyancy coupling is off).
    pub forcing_lp: [f64; 4],
    /// `<θ + S, u₂>`.
    pub buoyancy_work: f64,
    /// `-<u·∇S, θ> + <ΔS, θ>`.
    pub thermal_forcing: f64,
    pub kinetic_residual: f64,
    pub thermal_residual: f64,
    pub transport_margin: f64,
}

impl DiagnosticsRow {
    pub fn compute(
        space: &P1Space<'_>,
        state: &FlowState,
        velocity: &VelocitySolve,
        lift: &Lift,
        coupling: Coupling,
        dt: f64,
    ) -> Result<Self> {
        let mesh = space.mesh();
        let u = &velocity.velocity;
        let un = space.average_to_nodes(u);
        let u1 = ScalarField::new(un.iter().map(|v| v[0]).collect());
        let u2 = ScalarField::new(un.iter().map(|v| v[1]).collect());
        let grad_u = (h1_seminorm(mesh, &u1)?.powi(2) + h1_seminorm(mesh, &u2)?.powi(2)).sqrt();

        let forcing = applied_vorticity_forcing(space, &state.theta, lift, coupling);
        let mut omega_lp = [0.0; 4];
        let mut forcing_lp = [0.0; 4];
        for (k, &p) in EXPONENTS.iter().enumerate() {
            omega_lp[k] = lp_norm(mesh, &state.omega, p)?;
            forcing_lp[k] = lp_norm(mesh, &forcing, p)?;
        }

        let total = state.theta.add(&lift.s);
        let mut buoyancy_work = 0.0;
        for (e, tri) in mesh.elements().iter().enumerate() {
            let mean = (total.values[tri[0]] + total.values[tri[1]] + total.values[tri[2]]) / 3.0;
            buoyancy_work += mesh.area(e) * u.values[e][1] * mean;
        }
        let source: ScalarField = ScalarField::new(
            un.iter()
                .zip(&lift.grad)
                .zip(&lift.laplacian.values)
                .map(|((u, g), lap)| -(u[0] * g[0] + u[1] * g[1]) + lap)
                .collect(),
        );
        let thermal_forcing = space.mass_inner(&source, &state.theta);

        Ok(Self {
            t: state.t,
            dt,
            u_l2: u.l2_norm(mesh),
            grad_u_l2: grad_u,
            omega_lp,
            theta_l2: lp_norm(mesh, &state.theta, 2.0)?,
            grad_theta_l2: h1_seminorm(mesh, &state.theta)?,
            lap_theta_l2: lp_norm(mesh, &space.lumped_laplacian(&state.theta), 2.0)?,
            forcing_lp,
            buoyancy_work,
            thermal_forcing,
            ..Self::default()
        })
    }

    fn csv_values(&self) -> [f64; 18] {
        [
            self.t,
            self.dt,
            self.u_l2,
            self.grad_u_l2,
            self.omega_lp[0],
            self.omega_lp[1],
            self.omega_lp[2],
            self.omega_lp[3],
            self.theta_l2,
            self.grad_theta_l2,
            self.lap_theta_l2,
            self.forcing_lp[0],
            self.forcing_lp[1],
            self.forcing_lp[2],
            self.forcing_lp[3],
            self.kinetic_residual,
            self.thermal_residual,
            self.transport_margin,
        ]
    }
}

/// Diagnostics of one run plus the run constants the checks need.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSeries {
    rows: Vec<DiagnosticsRow>,
    pub nu: f64,
    /// Maximum element diameter.
    pub h: f64,
    /// `‖S‖²_{H²}` with the recovered Hessian.
    pub lift_h2_squared: f64,
}

impl DiagnosticsSeries {
    pub fn new(space: &P1Space<'_>, nu: f64, lift: &Lift) -> Self {
        let mesh = space.mesh();
        let s = &lift.s;
        let l2 = space.mass_inner(s, s);
        let grad: f64 = lift.grad.iter().zip(space.lumped_mass()).map(|(g, m)| m * (g[0] * g[0] + g[1] * g[1])).sum();
        let hess = space.hessian_recover(s).frobenius();
        let h2 = space.mass_inner(&hess, &hess);
        Self {
            rows: Vec::new(),
            nu,
            h: mesh.h(),
            lift_h2_squared: l2 + grad + h2,
        }
    }

    pub fn from_rows(rows: Vec<DiagnosticsRow>, nu: f64, h: f64, lift_h2_squared: f64) -> Self {
        let mut s = Self {
            rows,
            nu,
            h,
            lift_h2_squared,
        };
        s.finalize();
        s
    }

    pub fn push(&mut self, row: DiagnosticsRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[DiagnosticsRow] {
        &self.rows
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// Residual of `d/dt ½‖u‖² + ν‖∇u‖² = <θ+S, u₂>` per step, forward
    /// difference in time with left-endpoint terms; 0 on the final row.
    pub fn kinetic_residuals(&self) -> Vec<f64> {
        self.forward_residuals(|r| 0.5 * r.u_l2 * r.u_l2, |r| self.nu * r.grad_u_l2 * r.grad_u_l2 - r.buoyancy_work)
    }

    /// Residual of `d/dt ½‖θ‖² + ‖∇θ‖² = -<u·∇S, θ> + <ΔS, θ>`.
    pub fn thermal_residuals(&self) -> Vec<f64> {
        self.forward_residuals(|r| 0.5 * r.theta_l2 * r.theta_l2, |r| r.grad_theta_l2 * r.grad_theta_l2 - r.thermal_forcing)
    }

    fn forward_residuals(
        &self,
        energy: impl Fn(&DiagnosticsRow) -> f64,
        rest: impl Fn(&DiagnosticsRow) -> f64,
    ) -> Vec<f64> {
        let n = self.rows.len();
        (0..n)
            .map(|k| {
                if k + 1 == n || self.rows[k].dt == 0.0 {
                    return 0.0;
                }
                let (a, b) = (&self.rows[k], &self.rows[k + 1]);
                (energy(b) - energy(a)) / a.dt + rest(a)
            })
            .collect()
    }

    /// `‖ω₀‖_p + Σ dt‖forcing‖_p - ‖ω(t)‖_p` with left-endpoint quadrature.
    pub fn transport_margins(&self, exponent_idx: usize) -> Vec<f64> {
        let Some(first) = self.rows.first() else {
            return Vec::new();
        };
        let initial = first.omega_lp[exponent_idx];
        let mut integral = 0.0;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                if k > 0 {
                    let prev = &self.rows[k - 1];
                    integral += prev.dt * prev.forcing_lp[exponent_idx];
                }
                initial + integral - r.omega_lp[exponent_idx]
            })
            .collect()
    }

    /// Fills the residual and margin columns.
    pub fn finalize(&mut self) {
        let kin = self.kinetic_residuals();
        let th = self.thermal_residuals();
        let margin = self.transport_margins(TRANSPORT_COLUMN_EXPONENT);
        for (k, row) in self.rows.iter_mut().enumerate() {
            row.kinetic_residual = kin[k];
            row.thermal_residual = th[k];
            row.transport_margin = margin[k];
        }
    }

    /// Header plus one row per step, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", CSV_COLUMNS.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.csv_values().iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
