//! Runtime checks of the a-priori estimates on computed trajectories:
//! vorticity transport bound, kinetic and thermal energy identities, the
//! Gronwall energy envelope, higher-regularity time series, and the
//! vanishing-viscosity and continuous-dependence sweeps.
//!
//! Every check is a pure function of its inputs.

use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::boussinesq::{run, SimParams, Trajectory};
use crate::diagnostics::{exponent_index, DiagnosticsSeries};
use crate::elliptic::P1Space;
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::norms::{h1_seminorm, lp_norm};
use crate::{Error, Result};

/// Frozen regression constant for the kinetic-energy residual gate
/// `average ≤ C·(dt + h)`, calibrated on the benchmark (about 1.8e-3 at
/// `h = 1/32` and `h = 1/64`).
pub const KINETIC_RESIDUAL_CONSTANT: f64 = 2.5e-3;

/// Frozen regression constant for the thermal-energy residual gate
/// (benchmark value about 1.6).
pub const THERMAL_RESIDUAL_CONSTANT: f64 = 2.0;

/// Relative slack of the Gronwall envelope (floating-point noise only).
pub const GRONWALL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportBound {
    pub p: f64,
    pub times: Vec<f64>,
    /// `‖ω₀‖_p + Σ dt‖forcing‖_p − ‖ω(t)‖_p`.
    pub margins: Vec<f64>,
    pub initial_norm: f64,
}

impl TransportBound {
    /// `0.02·(1 + ‖ω₀‖_p)·(1 + t)`.
    pub fn tolerance(&self, t: f64) -> f64 {
        0.02 * (1.0 + self.initial_norm) * (1.0 + t)
    }

    pub fn passed(&self) -> bool {
        self.passes_with(|t| self.tolerance(t))
    }

    pub fn passes_with(&self, tol: impl Fn(f64) -> f64) -> bool {
        self.times.iter().zip(&self.margins).all(|(&t, &m)| m >= -tol(t))
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn check_vorticity_transport_bound(traj: &Trajectory, p: f64) -> Result<TransportBound> {
    check_transport_series(&traj.diagnostics, p)
}

pub fn check_transport_series(series: &DiagnosticsSeries, p: f64) -> Result<TransportBound> {
    let idx = exponent_index(p)
        .ok_or_else(|| Error::MissingDiagnostics(format!("no vorticity norms recorded for p = {p}")))?;
    let first = series
        .rows()
        .first()
        .ok_or_else(|| Error::MissingDiagnostics("empty diagnostics series".into()))?;
    Ok(TransportBound {
        p,
        times: series.times(),
        margins: series.transport_margins(idx),
        initial_norm: first.omega_lp[idx],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResiduals {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `Σ dt|r| / Σ dt`.
    pub average: f64,
    pub max_dt: f64,
    pub h: f64,
}

impl IdentityResiduals {
    fn from_series(series: &DiagnosticsSeries, residuals: Vec<f64>) -> Self {
        let rows = series.rows();
        let (mut weighted, mut span, mut max_dt) = (0.0, 0.0, 0.0f64);
        for (r, row) in residuals.iter().zip(rows) {
            weighted += row.dt * r.abs();
            span += row.dt;
            max_dt = max_dt.max(row.dt);
        }
        Self {
            times: series.times(),
            residuals,
            average: if span > 0.0 { weighted / span } else { 0.0 },
            max_dt,
            h: series.h,
        }
    }

    pub fn bound(&self, constant: f64) -> f64 {
        constant * (self.max_dt + self.h)
    }

    pub fn passes(&self, constant: f64) -> bool {
        self.average <= self.bound(constant)
    }
}

pub fn check_energy_identity(traj: &Trajectory) -> IdentityResiduals {
    let s = &traj.diagnostics;
    IdentityResiduals::from_series(s, s.kinetic_residuals())
}

pub fn check_thermal_identity(traj: &Trajectory) -> IdentityResiduals {
    let s = &traj.diagnostics;
    IdentityResiduals::from_series(s, s.thermal_residuals())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallCheck {
    pub passed: bool,
    pub first_violation: Option<f64>,
    /// Smallest constant for which the series satisfies the envelope
    /// (`INFINITY` if none up to `1e8`).
    pub calibrated_c: f64,
}

fn envelope_violation(series: &DiagnosticsSeries, c: f64) -> Option<f64> {
    let rows = series.rows();
    let first = rows.first()?;
    let s2 = series.lift_h2_squared;
    let e0 = first.u_l2.powi(2) + first.theta_l2.powi(2);
    rows.iter().find_map(|r| {
        let e = r.u_l2.powi(2) + r.theta_l2.powi(2);
        let bound = (c * r.t * (s2 + 1.0)).exp() * (e0 + c * r.t * s2);
        (e > bound * (1.0 + GRONWALL_SLACK) + f64::MIN_POSITIVE).then_some(r.t)
    })
}

/// Smallest `C ≥ 0` passing the envelope: 0 if it already holds there,
/// otherwise doubling to bracket and bisection to relative width 1e-10.
pub fn calibrate_gronwall(series: &DiagnosticsSeries) -> f64 {
    if envelope_violation(series, 0.0).is_none() {
        return 0.0;
    }
    let mut hi = 1.0;
    while envelope_violation(series, hi).is_some() {
        hi *= 2.0;
        if hi > 1e8 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if envelope_violation(series, mid).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `‖u‖² + ‖θ‖² ≤ e^{Ct(‖S‖²_{H²}+1)}(‖u₀‖² + ‖θ₀‖² + Ct‖S‖²_{H²})`.
pub fn gronwall_envelope_check(traj: &Trajectory, c: f64) -> GronwallCheck {
    gronwall_series_check(&traj.diagnostics, c)
}

pub fn gronwall_series_check(series: &DiagnosticsSeries, c: f64) -> GronwallCheck {
    let first_violation = envelope_violation(series, c);
    GronwallCheck {
        passed: first_violation.is_none(),
        first_violation,
        calibrated_c: calibrate_gronwall(series),
    }
}

/// Two calibrated constants agree within the relative band `rel`.
pub fn constants_stable(a: f64, b: f64, rel: f64) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return false;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularitySeries {
    /// Left endpoints of the steps.
    pub times: Vec<f64>,
    /// `‖θ(t+dt) − θ(t)‖/dt`.
    pub theta_t: Vec<f64>,
    /// Running `Σ dt‖∇θ_t‖²`.
    pub grad_theta_t_integral: Vec<f64>,
    /// `‖Δθ(t)‖` with the lumped Laplacian.
    pub lap_theta: Vec<f64>,
    /// Running `Σ dt‖∇Δθ‖²`.
    pub grad_lap_theta_integral: Vec<f64>,
}

impl RegularitySeries {
    pub fn named(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("theta_t_L2", &self.theta_t),
            ("int_grad_theta_t_sq", &self.grad_theta_t_integral),
            ("lap_theta_L2", &self.lap_theta),
            ("int_grad_lap_theta_sq", &self.grad_lap_theta_integral),
        ]
    }

    /// Per series: no value after `t_end/2` exceeds twice the value at
    /// `t_end/2` (with a floating-point floor).
    pub fn bounded(&self) -> Vec<(&'static str, bool)> {
        let Some(&t_last) = self.times.last() else {
            return Vec::new();
        };
        let half = 0.5 * t_last;
        let k = self.times.iter().position(|&t| t >= half).unwrap_or(0);
        self.named()
            .into_iter()
            .map(|(name, s)| {
                let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let cap = 2.0 * s[k].abs() + 1e-12 * scale + f64::MIN_POSITIVE;
                (name, s.iter().all(|v| v.is_finite()) && s[k..].iter().all(|v| v.abs() <= cap))
            })
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.bounded().iter().all(|(_, ok)| *ok)
    }
}

pub fn regularity_series(space: &P1Space<'_>, traj: &Trajectory) -> Result<RegularitySeries> {
    let states = &traj.step_states;
    if states.len() < 2 {
        return Err(Error::MissingDiagnostics(
            "regularity series needs the state after every step".into(),
        ));
    }
    let mesh = space.mesh();
    let mut out = RegularitySeries {
        times: Vec::new(),
        theta_t: Vec::new(),
        grad_theta_t_integral: Vec::new(),
        lap_theta: Vec::new(),
        grad_lap_theta_integral: Vec::new(),
    };
    let (mut int_grad_t, mut int_grad_lap) = (0.0, 0.0);
    for pair in states.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            continue;
        }
        let rate = b.theta.sub(&a.theta).scale(1.0 / dt);
        let lap = space.lumped_laplacian(&a.theta);
        int_grad_t += dt * h1_seminorm(mesh, &rate)?.powi(2);
        int_grad_lap += dt * h1_seminorm(mesh, &lap)?.powi(2);
        out.times.push(a.t);
        out.theta_t.push(lp_norm(mesh, &rate, 2.0)?);
        out.grad_theta_t_integral.push(int_grad_t);
        out.lap_theta.push(lp_norm(mesh, &lap, 2.0)?);
        out.grad_lap_theta_integral.push(int_grad_lap);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Viscosity,
    Stability,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Viscosity => "viscosity",
            SweepKind::Stability => "stability",
        }
    }

    fn parameter(self) -> &'static str {
        match self {
            SweepKind::Viscosity => "nu",
            SweepKind::Stability => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMember {
    pub parameter: f64,
    /// Difference norm per snapshot time; empty if the member failed.
    pub differences: Vec<f64>,
    pub sup: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub times: Vec<f64>,
    /// In the order of the (descending) parameter grid.
    pub members: Vec<SweepMember>,
    /// Least-squares log-log slope of `sup` against the parameter.
    pub slope: Option<f64>,
    /// Per snapshot time, fitted exponent `β(t)` (stability sweeps only).
    pub exponents: Vec<f64>,
    pub criteria: Vec<Criterion>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write!(out, "{},status,sup", self.kind.parameter())?;
        for t in &self.times {
            write!(out, ",t={t:.16e}")?;
        }
        writeln!(out)?;
        for m in &self.members {
            let status = if m.failure.is_some() { "failed" } else { "ok" };
            write!(out, "{:.16e},{status},{:.16e}", m.parameter, m.sup)?;
            for d in &m.differences {
                write!(out, ",{d:.16e}")?;
            }
            writeln!(out)?;
        }
        if !self.exponents.is_empty() {
            write!(out, "beta,fit,")?;
            let cols: Vec<String> = self.exponents.iter().map(|b| format!("{b:.16e}")).collect();
            writeln!(out, ",{}", cols.join(","))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} sweep", self.kind.name());
        for m in &self.members {
            match &m.failure {
                Some(f) => {
                    let _ = writeln!(s, "  {} = {:e}: failed: {f}", self.kind.parameter(), m.parameter);
                }
                None => {
                    let _ = writeln!(s, "  {} = {:e}: sup = {:.6e}", self.kind.parameter(), m.parameter, m.sup);
                }
            }
        }
        if let Some(slope) = self.slope {
            let _ = writeln!(s, "  log-log slope = {slope:.4}");
        }
        for c in &self.criteria {
            let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParams(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParams(format!("{what} grid must be positive and finite")));
    }
    if grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidParams(format!("{what} grid must be strictly descending")));
    }
    Ok(())
}

/// Runs independent members on a pool of `jobs` threads (`None`: all
/// cores); results come back in input order.
pub fn run_members(
    space: &P1Space<'_>,
    members: &[SimParams],
    jobs: Option<usize>,
) -> Result<Vec<Result<Trajectory>>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| members.par_iter().map(|p| run(space, p)).collect()))
}

/// Least-squares slope of `ln y` against `ln x` over positive pairs.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn velocity_difference_sq(space: &P1Space<'_>, a: &ScalarField, b: &ScalarField) -> Result<f64> {
    let d = a.sub(b);
    Ok(space.biot_savart(&d)?.velocity.l2_norm(space.mesh()).powi(2))
}

fn matching_snapshots<'a>(
    a: &'a Trajectory,
    b: &'a Trajectory,
) -> Result<impl Iterator<Item = (&'a crate::boussinesq::FlowState, &'a crate::boussinesq::FlowState)>> {
    let same_times = a.snapshots.len() == b.snapshots.len()
        && a.snapshots.iter().zip(&b.snapshots).all(|(x, y)| x.t == y.t);
    if !same_times {
        return Err(Error::InvalidParams("trajectories have different snapshot times".into()));
    }
    Ok(a.snapshots.iter().zip(&b.snapshots))
}

/// `max(‖u_a − u_b‖, ‖θ_a − θ_b‖)` at each snapshot time.
pub fn l2_differences(space: &P1Space<'_>, a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    matching_snapshots(a, b)?
        .map(|(x, y)| {
            let du = velocity_difference_sq(space, &x.omega, &y.omega)?.sqrt();
            let dth = lp_norm(space.mesh(), &x.theta.sub(&y.theta), 2.0)?;
            Ok(du.max(dth))
        })
        .collect()
}

/// `Y = ‖u_a − u_b‖² + ‖∇(θ_a − θ_b)‖²` at each snapshot time.
pub fn y_differences(space: &P1Space<'_>, a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    matching_snapshots(a, b)?
        .map(|(x, y)| {
            let du = velocity_difference_sq(space, &x.omega, &y.omega)?;
            let dth = h1_seminorm(space.mesh(), &x.theta.sub(&y.theta))?.powi(2);
            Ok(du + dth)
        })
        .collect()
}

/// Vanishing-viscosity study: each `ν` in the descending grid against the
/// `ν = 0` run of the same data.
pub fn viscosity_sweep(
    space: &P1Space<'_>,
    base: &SimParams,
    nu_list: &[f64],
    jobs: Option<usize>,
) -> Result<SweepReport> {
    check_grid(nu_list, "viscosity")?;
    let mut params = vec![SimParams { nu: 0.0, ..base.clone() }];
    params.extend(nu_list.iter().map(|&nu| SimParams { nu, ..base.clone() }));
    let mut results = run_members(space, &params, jobs)?.into_iter();
    let reference = results.next().expect("reference member")?;
    let times: Vec<f64> = reference.snapshots.iter().map(|s| s.t).collect();
    let reference_c = calibrate_gronwall(&reference.diagnostics);

    let mut members = Vec::new();
    let mut envelope_ok = true;
    for (&nu, result) in nu_list.iter().zip(results) {
        let member = result.and_then(|traj| {
            if !gronwall_envelope_check(&traj, reference_c).passed {
                envelope_ok = false;
            }
            l2_differences(space, &traj, &reference)
        });
        members.push(match member {
            Ok(diffs) => SweepMember {
                parameter: nu,
                sup: diffs.iter().copied().fold(0.0, f64::max),
                differences: diffs,
                failure: None,
            },
            Err(e) => {
                envelope_ok = false;
                SweepMember {
                    parameter: nu,
                    differences: Vec::new(),
                    sup: f64::NAN,
                    failure: Some(e.to_string()),
                }
            }
        });
    }

    let sups: Vec<f64> = members.iter().map(|m| m.sup).collect();
    let all_ok = members.iter().all(|m| m.failure.is_none());
    let all_zero = all_ok && sups.iter().all(|&s| s == 0.0);
    let decreasing = all_ok && (all_zero || sups.windows(2).all(|w| w[1] < w[0]));
    let slope = log_log_slope(nu_list, &sups);
    let slope_ok = all_zero || slope.is_some_and(|s| s > 0.3);
    let criteria = vec![
        Criterion {
            name: "viscosity differences strictly decreasing".into(),
            passed: decreasing,
            detail: format!("sup differences [{}]", sci_list(&sups)),
        },
        Criterion {
            name: "viscosity log-log slope > 0.3".into(),
            passed: slope_ok,
            detail: match slope {
                Some(s) => format!("slope {s:.4}"),
                None if all_zero => "all differences zero".into(),
                None => "slope undefined".into(),
            },
        },
        Criterion {
            name: "members within reference Gronwall envelope".into(),
            passed: envelope_ok,
            detail: format!("C = {reference_c:.6e}"),
        },
    ];
    Ok(SweepReport {
        kind: SweepKind::Viscosity,
        times,
        members,
        slope,
        exponents: Vec::new(),
        criteria,
    })
}

/// `sin(πx)·sin(πy)`.
pub fn default_perturbation() -> Expr {
    Expr::parse("sin(pi*x)*sin(pi*y)").expect("valid expression")
}

/// Continuous-dependence study: the base run against runs with
/// `ω₀ + δρ`, measuring `Y = ‖Δu‖² + ‖∇Δθ‖²` at the snapshot times.
pub fn stability_sweep(
    space: &P1Space<'_>,
    base: &SimParams,
    delta_list: &[f64],
    profile: &Expr,
    jobs: Option<usize>,
) -> Result<SweepReport> {
    check_grid(delta_list, "perturbation")?;
    let mut params = vec![base.clone()];
    for &d in delta_list {
        let mut p = base.clone();
        p.omega0 = perturbed(&base.omega0, profile, d)?;
        params.push(p);
    }
    let mut results = run_members(space, &params, jobs)?.into_iter();
    let reference = results.next().expect("reference member")?;
    let times: Vec<f64> = reference.snapshots.iter().map(|s| s.t).collect();

    let mut members = Vec::new();
    for (&delta, result) in delta_list.iter().zip(results) {
        let member = result.and_then(|traj| y_differences(space, &traj, &reference));
        members.push(match member {
            Ok(ys) => SweepMember {
                parameter: delta,
                sup: ys.iter().copied().fold(0.0, f64::max),
                differences: ys,
                failure: None,
            },
            Err(e) => SweepMember {
                parameter: delta,
                differences: Vec::new(),
                sup: f64::NAN,
                failure: Some(e.to_string()),
            },
        });
    }

    let all_ok = members.iter().all(|m| m.failure.is_none());
    let monotone = all_ok
        && (0..times.len()).all(|k| members.windows(2).all(|w| w[1].differences[k] < w[0].differences[k]));
    let halving = all_ok
        && members.windows(2).all(|w| {
            let ratio = w[0].parameter / w[1].parameter;
            let expected = 2.0f64.powf(ratio.log2());
            w[0].sup >= expected * w[1].sup
        });
    let mut exponents = Vec::new();
    if all_ok {
        let y0: Vec<f64> = members.iter().map(|m| m.differences[0]).collect();
        for k in 0..times.len() {
            let yk: Vec<f64> = members.iter().map(|m| m.differences[k]).collect();
            exponents.push(log_log_slope(&y0, &yk).unwrap_or(f64::NAN));
        }
    }
    let beta_ok = !exponents.is_empty() && exponents.iter().all(|&b| b > 0.0 && b <= 1.0 + BETA_SLACK);
    let sups: Vec<f64> = members.iter().map(|m| m.sup).collect();
    let slope = log_log_slope(delta_list, &sups);
    let criteria = vec![
        Criterion {
            name: "Y monotone in perturbation size at every output time".into(),
            passed: monotone,
            detail: format!("sup Y [{}]", sci_list(&sups)),
        },
        Criterion {
            name: "sup Y at least halves per halving of the perturbation".into(),
            passed: halving,
            detail: format!("sup Y [{}]", sci_list(&sups)),
        },
        Criterion {
            name: "fitted exponent beta(t) in (0, 1]".into(),
            passed: beta_ok,
            detail: format!("beta [{}]", exponents.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>().join(", ")),
        },
    ];
    Ok(SweepReport {
        kind: SweepKind::Stability,
        times,
        members,
        slope,
        exponents,
        criteria,
    })
}

/// Tolerance on `β ≤ 1`: the least-squares fit of an exactly linear
/// response scatters around 1 by the nonlinear remainder.
pub const BETA_SLACK: f64 = 0.05;

fn sci_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

fn perturbed(omega0: &Expr, profile: &Expr, delta: f64) -> Result<Expr> {
    let text = format!("({}) + ({delta:e})*({})", omega0.source(), profile.source());
    Ok(Expr::parse(&text)?)
}
