//! Piecewise-linear Galerkin realizations of the elliptic operators: the
//! Dirichlet solution operator, the Biot–Savart law `u = ∇⊥ψ`, the harmonic
//! lifting of boundary data, the Leray projection and derivative recovery.

use crate::domain::TriMesh;
use crate::field::{ScalarField, TensorField, VectorField};
use crate::sparse::{pcg, CsrMatrix, SolveStats, SolverConfig};
use crate::{Point, Result};

/// Velocity recovered from a vorticity field.
#[derive(Debug, Clone)]
pub struct VelocitySolve {
    pub velocity: VectorField,
    pub stream: ScalarField,
    pub stats: SolveStats,
}

#[derive(Debug, Clone)]
pub struct LerayProjection {
    /// `v - ∇π`.
    pub projected: VectorField,
    /// Zero-mean potential `π`.
    pub potential: ScalarField,
    pub stats: SolveStats,
}

/// Assembled P1 operators on a fixed mesh.
#[derive(Debug, Clone)]
pub struct P1Space<'m> {
    mesh: &'m TriMesh,
    stiffness: CsrMatrix,
    stiffness_diag: Vec<f64>,
    lumped_mass: Vec<f64>,
    solver: SolverConfig,
}

impl<'m> P1Space<'m> {
    pub fn new(mesh: &'m TriMesh) -> Self {
        Self::with_solver(mesh, SolverConfig::default())
    }

    pub fn with_solver(mesh: &'m TriMesh, solver: SolverConfig) -> Self {
        let stiffness = CsrMatrix::p1_stiffness(mesh);
        let stiffness_diag = stiffness.diagonal();
        let mut lumped_mass = vec![0.0; mesh.num_nodes()];
        for (e, tri) in mesh.elements().iter().enumerate() {
            let third = mesh.area(e) / 3.0;
            for &k in tri {
                lumped_mass[k] += third;
            }
        }
        Self {
            mesh,
            stiffness,
            stiffness_diag,
            lumped_mass,
            solver,
        }
    }

    pub fn mesh(&self) -> &'m TriMesh {
        self.mesh
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    /// Solves `(mass_coeff·M + stiff_coeff·A) x = rhs` on interior nodes
    /// with `x = boundary` on boundary nodes. Only the interior entries of
    /// `rhs` and the boundary entries of `boundary` are read.
    pub(crate) fn solve_dirichlet_system(
        &self,
        mass_coeff: f64,
        stiff_coeff: f64,
        rhs: &[f64],
        boundary: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats)> {
        let mesh = self.mesh;
        let n = mesh.num_nodes();
        let flags = mesh.boundary_flags();

        // move the boundary data to the right-hand side
        let lifted: Vec<f64> = (0..n).map(|i| if flags[i] { boundary[i] } else { 0.0 }).collect();
        let mut a_lift = vec![0.0; n];
        if lifted.iter().any(|&v| v != 0.0) {
            self.stiffness.matvec(&lifted, &mut a_lift);
        }
        let b: Vec<f64> = (0..n)
            .map(|i| if flags[i] { 0.0 } else { rhs[i] - stiff_coeff * a_lift[i] })
            .collect();
        let inv_diag: Vec<f64> = (0..n)
            .map(|i| {
                if flags[i] {
                    0.0
                } else {
                    1.0 / (mass_coeff * self.lumped_mass[i] + stiff_coeff * self.stiffness_diag[i])
                }
            })
            .collect();
        let mut x: Vec<f64> = match guess {
            Some(g) => (0..n).map(|i| if flags[i] { 0.0 } else { g[i] }).collect(),
            None => vec![0.0; n],
        };
        let apply = |v: &[f64], y: &mut [f64]| {
            self.stiffness.matvec(v, y);
            for i in 0..n {
                y[i] = if flags[i] {
                    0.0
                } else {
                    stiff_coeff * y[i] + mass_coeff * self.lumped_mass[i] * v[i]
                };
            }
        };
        let stats = pcg(apply, &inv_diag, &b, &mut x, &self.solver, false)?;
        for i in 0..n {
            if flags[i] {
                x[i] = boundary[i];
            }
        }
        Ok((x, stats))
    }

    /// Galerkin solution of `-ΔF = f` with `F = g` on boundary nodes
    /// (lumped load vector). Interior entries of `g` are ignored.
    pub fn dirichlet_poisson_solve(
        &self,
        f: &ScalarField,
        g: &ScalarField,
    ) -> Result<(ScalarField, SolveStats)> {
        self.dirichlet_poisson_solve_from(f, g, None)
    }

    /// As [`Self::dirichlet_poisson_solve`], starting CG from `guess`.
    pub fn dirichlet_poisson_solve_from(
        &self,
        f: &ScalarField,
        g: &ScalarField,
        guess: Option<&ScalarField>,
    ) -> Result<(ScalarField, SolveStats)> {
        f.check(self.mesh, "source")?;
        g.check(self.mesh, "boundary data")?;
        let rhs: Vec<f64> = f.values.iter().zip(&self.lumped_mass).map(|(f, m)| f * m).collect();
        let (x, stats) =
            self.solve_dirichlet_system(0.0, 1.0, &rhs, &g.values, guess.map(|g| g.values.as_slice()))?;
        Ok((ScalarField::new(x), stats))
    }

    /// `u = ∇⊥ψ = (∂_y ψ, -∂_x ψ)` with `-Δψ = ω`, `ψ = 0` on the boundary.
    pub fn biot_savart(&self, omega: &ScalarField) -> Result<VelocitySolve> {
        self.biot_savart_from(omega, None)
    }

    pub fn biot_savart_from(
        &self,
        omega: &ScalarField,
        stream_guess: Option<&ScalarField>,
    ) -> Result<VelocitySolve> {
        let zero = ScalarField::zeros(self.mesh);
        let (stream, stats) = self.dirichlet_poisson_solve_from(omega, &zero, stream_guess)?;
        Ok(VelocitySolve {
            velocity: self.perp_gradient(&stream),
            stream,
            stats,
        })
    }

    /// Discrete harmonic extension of boundary data `eta`.
    pub fn harmonic_lift(&self, eta: &ScalarField) -> Result<ScalarField> {
        let (s, _) = self.dirichlet_poisson_solve(&ScalarField::zeros(self.mesh), eta)?;
        Ok(s)
    }

    /// Splits `v = P v + ∇π` where `π` solves the weak Neumann problem
    /// `<∇π, ∇φ> = <v, ∇φ>` for all P1 `φ`, normalized to zero mean.
    pub fn leray_project(&self, v: &VectorField) -> Result<LerayProjection> {
        v.check(self.mesh, "vector field")?;
        let b = self.weak_divergence(v);
        let n = self.mesh.num_nodes();
        let inv_diag: Vec<f64> = self.stiffness_diag.iter().map(|d| 1.0 / d).collect();
        let mut pi = vec![0.0; n];
        let stats = pcg(
            |x, y| self.stiffness.matvec(x, y),
            &inv_diag,
            &b,
            &mut pi,
            &self.solver,
            true,
        )?;
        let total_mass: f64 = self.lumped_mass.iter().sum();
        let mean = pi.iter().zip(&self.lumped_mass).map(|(p, m)| p * m).sum::<f64>() / total_mass;
        pi.iter_mut().for_each(|p| *p -= mean);
        let potential = ScalarField::new(pi);
        let grad = self.element_gradient(&potential);
        Ok(LerayProjection {
            projected: v.sub(&grad),
            potential,
            stats,
        })
    }

    /// `b_i = Σ_e area_e v_e·∇φ_i`; equals `-½` times the flux of `v` out
    /// of the patch around node `i`.
    pub fn weak_divergence(&self, v: &VectorField) -> Vec<f64> {
        let mesh = self.mesh;
        let mut b = vec![0.0; mesh.num_nodes()];
        for (e, tri) in mesh.elements().iter().enumerate() {
            let g = mesh.basis_gradients(e);
            let a = mesh.area(e);
            let ve = v.values[e];
            for k in 0..3 {
                b[tri[k]] += a * (ve[0] * g[k][0] + ve[1] * g[k][1]);
            }
        }
        b
    }

    /// Flux of `v` through the outer boundary of each node's patch.
    pub fn patch_fluxes(&self, v: &VectorField) -> Vec<f64> {
        self.weak_divergence(v).into_iter().map(|b| -2.0 * b).collect()
    }

    /// `max |v·n|` over the elements carrying a boundary edge.
    pub fn max_boundary_normal(&self, v: &VectorField) -> f64 {
        self.mesh
            .boundary_edges()
            .iter()
            .map(|edge| {
                let u = v.values[edge.element];
                (u[0] * edge.normal[0] + u[1] * edge.normal[1]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Exact gradient of the piecewise-linear interpolant, per element.
    pub fn element_gradient(&self, f: &ScalarField) -> VectorField {
        let mesh = self.mesh;
        VectorField::new(
            mesh.elements()
                .iter()
                .enumerate()
                .map(|(e, tri)| {
                    let g = mesh.basis_gradients(e);
                    let mut out = [0.0; 2];
                    for k in 0..3 {
                        out[0] += f.values[tri[k]] * g[k][0];
                        out[1] += f.values[tri[k]] * g[k][1];
                    }
                    out
                })
                .collect(),
        )
    }

    /// `(∂_y f, -∂_x f)` per element.
    pub fn perp_gradient(&self, f: &ScalarField) -> VectorField {
        let mut v = self.element_gradient(f);
        for g in v.values.iter_mut() {
            *g = [g[1], -g[0]];
        }
        v
    }

    /// Area-weighted average of the incident element values at each node.
    pub fn average_to_nodes(&self, v: &VectorField) -> Vec<Point> {
        let mesh = self.mesh;
        (0..mesh.num_nodes())
            .map(|i| {
                let mut acc = [0.0; 2];
                let mut w = 0.0;
                for &e in mesh.node_elements(i) {
                    let a = mesh.area(e);
                    acc[0] += a * v.values[e][0];
                    acc[1] += a * v.values[e][1];
                    w += a;
                }
                [acc[0] / w, acc[1] / w]
            })
            .collect()
    }

    /// Lumped L²-projection of the element gradient onto nodes.
    pub fn gradient_recover(&self, f: &ScalarField) -> Vec<Point> {
        self.average_to_nodes(&self.element_gradient(f))
    }

    /// Recovered gradient applied twice, then symmetrized.
    pub fn hessian_recover(&self, f: &ScalarField) -> TensorField {
        let g = self.gradient_recover(f);
        let gx = self.gradient_recover(&ScalarField::new(g.iter().map(|v| v[0]).collect()));
        let gy = self.gradient_recover(&ScalarField::new(g.iter().map(|v| v[1]).collect()));
        TensorField {
            values: gx
                .iter()
                .zip(&gy)
                .map(|(rx, ry)| {
                    let off = 0.5 * (rx[1] + ry[0]);
                    [[rx[0], off], [off, ry[1]]]
                })
                .collect(),
        }
    }

    /// Discrete Laplacian `-M⁻¹ A f` at interior nodes, zero on the boundary.
    pub fn lumped_laplacian(&self, f: &ScalarField) -> ScalarField {
        let mut af = vec![0.0; f.len()];
        self.stiffness.matvec(&f.values, &mut af);
        let flags = self.mesh.boundary_flags();
        ScalarField::new(
            (0..f.len())
                .map(|i| if flags[i] { 0.0 } else { -af[i] / self.lumped_mass[i] })
                .collect(),
        )
    }

    /// Vertex-quadrature inner product `Σ_i m_i f_i g_i`.
    pub fn mass_inner(&self, f: &ScalarField, g: &ScalarField) -> f64 {
        f.values
            .iter()
            .zip(&g.values)
            .zip(&self.lumped_mass)
            .map(|((a, b), m)| a * b * m)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{mesh_polygon_divisions, Polygon};
    use std::f64::consts::PI;

    fn square(n: usize) -> TriMesh {
        mesh_polygon_divisions(&Polygon::unit_square(), n).unwrap()
    }

    #[test]
    fn homogeneous_problem_is_zero() {
        let mesh = square(8);
        let space = P1Space::new(&mesh);
        let z = ScalarField::zeros(&mesh);
        let (f, stats) = space.dirichlet_poisson_solve(&z, &z).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn harmonic_linear_is_reproduced() {
        let mesh = square(10);
        let space = P1Space::new(&mesh);
        let x = ScalarField::sample(&mesh, |x, _| x);
        let (f, _) = space.dirichlet_poisson_solve(&ScalarField::zeros(&mesh), &x).unwrap();
        for (a, b) in f.values.iter().zip(&x.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_lift() {
        let mesh = mesh_polygon_divisions(&Polygon::right_triangle(), 9).unwrap();
        let space = P1Space::new(&mesh);
        let s = space.harmonic_lift(&ScalarField::constant(&mesh, 3.5)).unwrap();
        for v in s.values {
            assert!((v - 3.5).abs() < 1e-9);
        }
    }

    #[test]
    fn lift_trace_is_exact() {
        let mesh = square(12);
        let space = P1Space::new(&mesh);
        let eta = ScalarField::sample(&mesh, |x, y| (3.0 * x).sin() + y * y);
        let s = space.harmonic_lift(&eta).unwrap();
        for i in 0..mesh.num_nodes() {
            if mesh.is_boundary(i) {
                assert_eq!(s.values[i], eta.values[i]);
            }
        }
    }

    #[test]
    fn zero_vorticity_gives_zero_velocity() {
        let mesh = square(6);
        let space = P1Space::new(&mesh);
        let u = space.biot_savart(&ScalarField::zeros(&mesh)).unwrap();
        assert!(u.velocity.values.iter().all(|v| v == &[0.0, 0.0]));
    }

    #[test]
    fn zero_field_projects_to_zero() {
        let mesh = square(6);
        let space = P1Space::new(&mesh);
        let p = space.leray_project(&VectorField::zeros(&mesh)).unwrap();
        assert!(p.projected.values.iter().all(|v| v == &[0.0, 0.0]));
        assert!(p.potential.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_gradient_recovery_is_exact() {
        let mesh = square(7);
        let space = P1Space::new(&mesh);
        let g = space.gradient_recover(&ScalarField::sample(&mesh, |x, y| x + 2.0 * y));
        for v in g {
            assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12);
        }
        let h = space.hessian_recover(&ScalarField::sample(&mesh, |x, y| 4.0 - x + 2.0 * y));
        for m in h.values {
            assert!(m.iter().flatten().all(|v| v.abs() < 1e-10));
        }
        let c = space.gradient_recover(&ScalarField::constant(&mesh, 2.0));
        assert!(c.iter().all(|v| v[0].abs() < 1e-14 && v[1].abs() < 1e-14));
    }

    #[test]
    fn quadratic_recovery_at_interior_nodes() {
        let mesh = square(32);
        let space = P1Space::new(&mesh);
        let g = space.gradient_recover(&ScalarField::sample(&mesh, |x, _| x * x));
        let h = space.hessian_recover(&ScalarField::sample(&mesh, |x, _| x * x));
        let hxy = space.hessian_recover(&ScalarField::sample(&mesh, |x, y| x * y));
        let hmax = mesh.h();
        for (i, p) in mesh.nodes().iter().enumerate() {
            // two rings away from the boundary for the double recovery
            let interior = p.iter().all(|&c| c > 2.5 / 32.0 && c < 1.0 - 2.5 / 32.0);
            if !interior {
                continue;
            }
            assert!((g[i][0] - 2.0 * p[0]).abs() < hmax, "grad at {p:?}");
            let m = h.values[i];
            assert!((m[0][0] - 2.0).abs() < 2.0 * hmax && m[1][1].abs() < 2.0 * hmax);
            assert!(m[0][1].abs() < 2.0 * hmax);
            assert!((hxy.values[i][0][1] - 1.0).abs() < 2.0 * hmax);
        }
    }

    #[test]
    fn lumped_laplacian_of_eigenfunction() {
        let mesh = square(32);
        let space = P1Space::new(&mesh);
        let f = ScalarField::sample(&mesh, |x, y| (PI * x).sin() * (PI * y).sin());
        let lap = space.lumped_laplacian(&f);
        let centre = mesh
            .nodes()
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12)
            .unwrap();
        assert!((lap.values[centre] + 2.0 * PI * PI).abs() < 0.05);
    }
}
