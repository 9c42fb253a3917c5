//! Compressed sparse row storage and Jacobi-preconditioned conjugate gradients.

use thiserror::Error;

use crate::domain::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Relative 2-norm of the algebraic residual, `|b - Ax| / |b|`.
    pub residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradients did not converge: {} iterations, relative residual {:e}", .stats.iterations, .stats.residual)]
    NotConverged { stats: SolveStats },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    /// The iteration cap is `cap_factor * unknowns`.
    pub cap_factor: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            cap_factor: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// P1 stiffness matrix `K_ij = ∫ ∇φ_i·∇φ_j`.
    pub fn p1_stiffness(mesh: &TriMesh) -> Self {
        let n = mesh.num_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        let mut row = Vec::new();
        for i in 0..n {
            row.clear();
            for &e in mesh.node_elements(i) {
                row.extend_from_slice(&mesh.elements()[e]);
            }
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(&row);
            row_ptr.push(cols.len());
        }
        let mut m = Self {
            vals: vec![0.0; cols.len()],
            row_ptr,
            cols,
        };
        for (e, tri) in mesh.elements().iter().enumerate() {
            let g = mesh.basis_gradients(e);
            let area = mesh.area(e);
            for a in 0..3 {
                for b in 0..3 {
                    let k = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    *m.entry_mut(tri[a], tri[b]) += k;
                }
            }
        }
        m
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let pos = self.cols[lo..hi]
            .binary_search(&j)
            .expect("entry outside sparsity pattern");
        &mut self.vals[lo + pos]
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for k in lo..hi {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v))
            .collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.matvec(x, &mut y);
        dot(x, &y)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Preconditioned CG for `A x = b`, starting from the contents of `x`.
///
/// `inv_diag` is the Jacobi preconditioner; a zero entry freezes that
/// unknown (Dirichlet rows). With `singular_constant` the constant vector is
/// projected out of every residual, for the pure Neumann operator.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    config: &SolverConfig,
    singular_constant: bool,
) -> Result<SolveStats, SolveError> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let cap = config.cap_factor * n.max(1);
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    if singular_constant {
        remove_mean(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    while rel > config.tolerance && iterations < cap {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if singular_constant {
            remove_mean(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        rel = dot(&r, &r).sqrt() / b_norm;
    }
    // report the true residual, not the recursively updated one
    apply(x, &mut ap);
    let mut true_r: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    if singular_constant {
        remove_mean(&mut true_r);
    }
    let stats = SolveStats {
        iterations,
        residual: dot(&true_r, &true_r).sqrt() / b_norm,
    };
    if stats.residual <= config.tolerance {
        Ok(stats)
    } else {
        Err(SolveError::NotConverged { stats })
    }
}
