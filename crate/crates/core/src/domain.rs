//! Admissible polygonal domains and their structured triangulations.
//!
//! A domain is admissible when every interior angle (aperture) is at most
//! π/2. Since interior angles of a simple n-gon sum to (n−2)π, this leaves
//! only triangles and rectangles, which are meshed by self-similar
//! subdivision and by a split bilinear grid respectively.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Write};

use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate at vertex {0}")]
    NonFinite(usize),
    #[error("consecutive vertices {0} and {1} coincide")]
    RepeatedVertex(usize, usize),
    #[error("edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("polygon has non-positive signed area {0} (vertices must be counterclockwise)")]
    NotCounterclockwise(f64),
    #[error("degenerate corner at vertex {vertex}: adjacent edges are collinear")]
    Degenerate { vertex: usize },
    #[error("polygon is not admissible: max aperture {max_aperture} rad exceeds π/2 (apertures {apertures:?})")]
    Inadmissible {
        apertures: Vec<f64>,
        max_aperture: f64,
    },
    #[error("target mesh size must be positive and finite, got {0}")]
    InvalidMeshSize(f64),
    #[error("point ({0}, {1}) lies outside the domain")]
    Outside(f64, f64),
    #[error("mesh invariant violated: {0}")]
    InvalidMesh(String),
}

/// Fixed geometric tolerances; every default can be overridden per call site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack on the aperture bound `max_aperture <= π/2`.
    pub aperture: f64,
    /// Slack on barycentric nonnegativity in point location.
    pub barycentric: f64,
    /// Distance slack for "lies on the boundary" and relative area checks.
    pub geometric: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            aperture: 1e-12,
            barycentric: 1e-12,
            geometric: 1e-12,
        }
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(sub(q2, q1), sub(p1, q1));
    let d2 = cross(sub(q2, q1), sub(p2, q1));
    let d3 = cross(sub(p2, p1), sub(q1, p1));
    let d4 = cross(sub(p2, p1), sub(q2, p1));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Point, b: Point, c: Point| {
        c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// A simple, counterclockwise polygon with straight edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, DomainError> {
        let n = vertices.len();
        if n < 3 {
            return Err(DomainError::TooFewVertices(n));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(DomainError::NonFinite(i));
            }
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(DomainError::RepeatedVertex(i, j));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (p1, p2) = (vertices[i], vertices[(i + 1) % n]);
                let (q1, q2) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(p1, p2, q1, q2) {
                    return Err(DomainError::SelfIntersecting(i, j));
                }
            }
        }
        let poly = Self { vertices };
        let area = poly.signed_area();
        if area <= 0.0 {
            return Err(DomainError::NotCounterclockwise(area));
        }
        Ok(poly)
    }

    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0)
    }

    /// Axis-aligned rectangle `[0, width] x [0, height]`.
    pub fn rectangle(width: f64, height: f64) -> Self {
        Self {
            vertices: vec![[0.0, 0.0], [width, 0.0], [width, height], [0.0, height]],
        }
    }

    /// The triangle (0,0), (1,0), (0,1).
    pub fn right_triangle() -> Self {
        Self {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                norm(sub(p, project_onto_segment(p, a, b)))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn project_onto_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let s = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [a[0] + s * ab[0], a[1] + s * ab[1]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// Interior angle at each vertex, radians.
    pub apertures: Vec<f64>,
    pub admissible: bool,
    pub max_aperture: f64,
}

pub fn compute_apertures(poly: &Polygon) -> Result<AdmissibilityReport, DomainError> {
    compute_apertures_with(poly, &Tolerances::default())
}

pub fn compute_apertures_with(
    poly: &Polygon,
    tol: &Tolerances,
) -> Result<AdmissibilityReport, DomainError> {
    let v = poly.vertices();
    let n = v.len();
    let mut apertures = Vec::with_capacity(n);
    for i in 0..n {
        let prev = v[(i + n - 1) % n];
        let next = v[(i + 1) % n];
        let e_in = sub(v[i], prev);
        let e_out = sub(next, v[i]);
        let c = cross(e_in, e_out);
        if c.abs() <= tol.geometric * norm(e_in) * norm(e_out) {
            return Err(DomainError::Degenerate { vertex: i });
        }
        let turn = c.atan2(dot(e_in, e_out));
        apertures.push(PI - turn);
    }
    let max_aperture = apertures.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AdmissibilityReport {
        admissible: max_aperture <= FRAC_PI_2 + tol.aperture,
        apertures,
        max_aperture,
    })
}

/// A straight boundary edge of a mesh, oriented counterclockwise around Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub element: usize,
    pub normal: Point,
}

/// Result of locating a point in a [`TriMesh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Inside { element: usize, weights: [f64; 3] },
    Outside,
}

/// Conforming triangulation of an admissible polygon.
#[derive(Debug, Clone)]
pub struct TriMesh {
    polygon: Polygon,
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    boundary_nodes: Vec<bool>,
    boundary_edges: Vec<BoundaryEdge>,
    /// Element across the edge opposite local vertex k.
    neighbors: Vec<[Option<usize>; 3]>,
    areas: Vec<f64>,
    /// Gradients of the three P1 hat functions on each element.
    basis_gradients: Vec<[Point; 3]>,
    node_elem_offsets: Vec<usize>,
    node_elems: Vec<usize>,
    h: f64,
    divisions: usize,
    tol: Tolerances,
}

pub fn mesh_polygon(poly: &Polygon, target_h: f64) -> Result<TriMesh, DomainError> {
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(DomainError::InvalidMeshSize(target_h));
    }
    let longest = longest_edge(poly);
    let divisions = ((longest / target_h).round() as usize).max(1);
    mesh_polygon_divisions(poly, divisions)
}

fn longest_edge(poly: &Polygon) -> f64 {
    let v = poly.vertices();
    let n = v.len();
    (0..n).map(|i| norm(sub(v[(i + 1) % n], v[i]))).fold(0.0, f64::max)
}

/// Mesh with a fixed number of subdivisions along the longest edge
/// (triangles) or along each side (rectangles).
pub fn mesh_polygon_divisions(poly: &Polygon, divisions: usize) -> Result<TriMesh, DomainError> {
    let report = compute_apertures(poly)?;
    if !report.admissible {
        return Err(DomainError::Inadmissible {
            apertures: report.apertures,
            max_aperture: report.max_aperture,
        });
    }
    let divisions = divisions.max(1);
    let v = poly.vertices();
    let (nodes, elements, divisions) = match v.len() {
        3 => {
            let (nodes, elements) = subdivide_triangle(v[0], v[1], v[2], divisions);
            (nodes, elements, divisions)
        }
        4 => {
            // sides scaled so the longest one gets `divisions` cells
            let longest = longest_edge(poly);
            let nx = ((divisions as f64 * norm(sub(v[1], v[0])) / longest).round() as usize).max(1);
            let ny = ((divisions as f64 * norm(sub(v[3], v[0])) / longest).round() as usize).max(1);
            let (nodes, elements) = split_grid(v, nx, ny);
            (nodes, elements, divisions)
        }
        // the angle sum rules out admissible polygons with more vertices
        n => unreachable!("admissible polygon with {n} vertices"),
    };
    TriMesh::from_parts(poly.clone(), nodes, elements, divisions, Tolerances::default())
}

#[allow(clippy::needless_range_loop)]
fn subdivide_triangle(a: Point, b: Point, c: Point, n: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let nf = n as f64;
    let mut index = vec![vec![0usize; n + 1]; n + 1];
    let mut nodes = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for j in 0..=n {
        for i in 0..=(n - j) {
            let (wa, wb, wc) = ((n - i - j) as f64, i as f64, j as f64);
            index[i][j] = nodes.len();
            nodes.push([
                (wa * a[0] + wb * b[0] + wc * c[0]) / nf,
                (wa * a[1] + wb * b[1] + wc * c[1]) / nf,
            ]);
        }
    }
    let mut elements = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..(n - j) {
            elements.push([index[i][j], index[i + 1][j], index[i][j + 1]]);
            if i + j + 1 < n {
                elements.push([index[i + 1][j], index[i + 1][j + 1], index[i][j + 1]]);
            }
        }
    }
    (nodes, elements)
}

fn split_grid(v: &[Point], nx: usize, ny: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let (s1, t1) = (i as f64, j as f64);
            let (s0, t0) = ((nx - i) as f64, (ny - j) as f64);
            let w = [s0 * t0, s1 * t0, s1 * t1, s0 * t1];
            let scale = (nx * ny) as f64;
            let x = (0..4).map(|k| w[k] * v[k][0]).sum::<f64>() / scale;
            let y = (0..4).map(|k| w[k] * v[k][1]).sum::<f64>() / scale;
            nodes.push([x, y]);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let d_main = norm(sub(nodes[p11], nodes[p00]));
            let d_anti = norm(sub(nodes[p01], nodes[p10]));
            if d_anti < d_main * (1.0 - 1e-12) {
                elements.push([p00, p10, p01]);
                elements.push([p10, p11, p01]);
            } else {
                elements.push([p00, p10, p11]);
                elements.push([p00, p11, p01]);
            }
        }
    }
    (nodes, elements)
}

impl TriMesh {
    /// Builds connectivity, boundary data and element geometry, then checks
    /// every mesh invariant.
    pub fn from_parts(
        polygon: Polygon,
        nodes: Vec<Point>,
        elements: Vec<[usize; 3]>,
        divisions: usize,
        tol: Tolerances,
    ) -> Result<Self, DomainError> {
        let n_nodes = nodes.len();
        if let Some(bad) = elements.iter().flatten().find(|&&k| k >= n_nodes) {
            return Err(DomainError::InvalidMesh(format!("node index {bad} out of range")));
        }

        let mut areas = Vec::with_capacity(elements.len());
        let mut basis_gradients = Vec::with_capacity(elements.len());
        let mut h: f64 = 0.0;
        for tri in &elements {
            let [p0, p1, p2] = tri.map(|k| nodes[k]);
            let twice = cross(sub(p1, p0), sub(p2, p0));
            areas.push(0.5 * twice);
            basis_gradients.push([
                [(p1[1] - p2[1]) / twice, (p2[0] - p1[0]) / twice],
                [(p2[1] - p0[1]) / twice, (p0[0] - p2[0]) / twice],
                [(p0[1] - p1[1]) / twice, (p1[0] - p0[0]) / twice],
            ]);
            h = h
                .max(norm(sub(p1, p0)))
                .max(norm(sub(p2, p1)))
                .max(norm(sub(p0, p2)));
        }

        let mut neighbors = vec![[None; 3]; elements.len()];
        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (e, tri) in elements.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                match edge_owner.get(&key) {
                    None => {
                        edge_owner.insert(key, (e, k));
                    }
                    Some(&(other, ko)) => {
                        if neighbors[other][ko].is_some() {
                            return Err(DomainError::InvalidMesh(format!(
                                "edge {key:?} shared by more than two elements"
                            )));
                        }
                        neighbors[other][ko] = Some(e);
                        neighbors[e][k] = Some(other);
                    }
                }
            }
        }

        let mut boundary_nodes = vec![false; n_nodes];
        let mut boundary_edges = Vec::new();
        for (e, tri) in elements.iter().enumerate() {
            for k in 0..3 {
                if neighbors[e][k].is_none() {
                    let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                    let d = sub(nodes[b], nodes[a]);
                    let len = norm(d);
                    boundary_nodes[a] = true;
                    boundary_nodes[b] = true;
                    boundary_edges.push(BoundaryEdge {
                        nodes: [a, b],
                        element: e,
                        normal: [d[1] / len, -d[0] / len],
                    });
                }
            }
        }

        let mut counts = vec![0usize; n_nodes + 1];
        for tri in &elements {
            for &k in tri {
                counts[k + 1] += 1;
            }
        }
        for i in 0..n_nodes {
            counts[i + 1] += counts[i];
        }
        let node_elem_offsets = counts.clone();
        let mut fill = counts;
        let mut node_elems = vec![0usize; node_elem_offsets[n_nodes]];
        for (e, tri) in elements.iter().enumerate() {
            for &k in tri {
                node_elems[fill[k]] = e;
                fill[k] += 1;
            }
        }

        let mesh = Self {
            polygon,
            nodes,
            elements,
            boundary_nodes,
            boundary_edges,
            neighbors,
            areas,
            basis_gradients,
            node_elem_offsets,
            node_elems,
            h,
            divisions,
            tol,
        };
        mesh.check_invariants()?;
        Ok(mesh)
    }

    pub fn check_invariants(&self) -> Result<(), DomainError> {
        if let Some((e, a)) = self.areas.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
            return Err(DomainError::InvalidMesh(format!(
                "element {e} has non-positive area {a}"
            )));
        }
        let total = self.total_area();
        let expected = self.polygon.signed_area();
        if ((total - expected) / expected).abs() > self.tol.geometric {
            return Err(DomainError::InvalidMesh(format!(
                "element areas sum to {total}, polygon area is {expected}"
            )));
        }
        for (i, p) in self.nodes.iter().enumerate() {
            if self.boundary_nodes[i] && self.polygon.boundary_distance(*p) > self.tol.geometric {
                return Err(DomainError::InvalidMesh(format!(
                    "boundary node {i} at {p:?} is off the polygon boundary"
                )));
            }
        }
        Ok(())
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_nodes[node]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_nodes
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn neighbors(&self, element: usize) -> [Option<usize>; 3] {
        self.neighbors[element]
    }

    pub fn area(&self, element: usize) -> f64 {
        self.areas[element]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn basis_gradients(&self, element: usize) -> &[Point; 3] {
        &self.basis_gradients[element]
    }

    /// Elements incident to `node`, in increasing index order.
    pub fn node_elements(&self, node: usize) -> &[usize] {
        &self.node_elems[self.node_elem_offsets[node]..self.node_elem_offsets[node + 1]]
    }

    /// The lowest-index element containing `node`.
    pub fn node_owner(&self, node: usize) -> usize {
        self.node_elems[self.node_elem_offsets[node]]
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Subdivisions along the longest polygon edge.
    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn centroid(&self, element: usize) -> Point {
        let [a, b, c] = self.elements[element].map(|k| self.nodes[k]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn barycentric(&self, element: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.elements[element].map(|k| self.nodes[k]);
        let twice = 2.0 * self.areas[element];
        let l1 = cross(sub(c, a), sub(p, a)) / -twice;
        let l2 = cross(sub(b, a), sub(p, a)) / twice;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn locate_point(&self, p: Point) -> Location {
        self.locate_point_from(p, 0)
    }

    /// Walks from `hint` toward `p`, falling back to a full scan when the
    /// walk leaves the mesh or fails to terminate.
    pub fn locate_point_from(&self, p: Point, hint: usize) -> Location {
        let tol = self.tol.barycentric;
        let mut e = hint.min(self.elements.len() - 1);
        for _ in 0..self.elements.len() {
            let w = self.barycentric(e, p);
            let (k, wmin) = w
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, x)| if x < acc.1 { (k, x) } else { acc });
            if wmin >= -tol {
                return Location::Inside { element: e, weights: w };
            }
            match self.neighbors[e][k] {
                Some(next) => e = next,
                None => break,
            }
        }
        self.locate_point_brute(p)
    }

    fn locate_point_brute(&self, p: Point) -> Location {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for e in 0..self.elements.len() {
            let w = self.barycentric(e, p);
            let wmin = w[0].min(w[1]).min(w[2]);
            if best.is_none_or(|(_, _, m)| wmin > m) {
                best = Some((e, w, wmin));
            }
        }
        match best {
            Some((element, weights, wmin)) if wmin >= -self.tol.barycentric => {
                Location::Inside { element, weights }
            }
            _ => Location::Outside,
        }
    }

    /// Closest point on the mesh boundary.
    pub fn nearest_boundary_point(&self, p: Point) -> Point {
        let mut best = p;
        let mut best_d = f64::INFINITY;
        for edge in &self.boundary_edges {
            let q = project_onto_segment(p, self.nodes[edge.nodes[0]], self.nodes[edge.nodes[1]]);
            let d = norm(sub(p, q));
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    /// Piecewise-linear value of nodal `values` at `p`.
    pub fn interpolate(&self, values: &[f64], p: Point) -> Result<f64, DomainError> {
        match self.locate_point(p) {
            Location::Inside { element, weights } => Ok(self.combine(element, weights, values)),
            Location::Outside => Err(DomainError::Outside(p[0], p[1])),
        }
    }

    /// Barycentric combination of the element's nodal values.
    pub fn combine(&self, element: usize, weights: [f64; 3], values: &[f64]) -> f64 {
        let tri = self.elements[element];
        weights[0] * values[tri[0]] + weights[1] * values[tri[1]] + weights[2] * values[tri[2]]
    }

    /// Legacy ASCII VTK unstructured grid (points and triangle cells only).
    pub fn write_vtk<W: Write>(&self, out: &mut W, title: &str) -> io::Result<()> {
        crate::vtk::write_header(out, self, title)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn unit_square_apertures() {
        let r = compute_apertures(&Polygon::unit_square()).unwrap();
        for a in &r.apertures {
            assert!((a - FRAC_PI_2).abs() < 1e-15);
        }
        assert!(r.admissible);
    }

    #[test]
    fn right_triangle_apertures() {
        let r = compute_apertures(&Polygon::right_triangle()).unwrap();
        let expect = [FRAC_PI_2, FRAC_PI_4, FRAC_PI_4];
        for (a, e) in r.apertures.iter().zip(expect) {
            assert!((a - e).abs() < 1e-15, "{a} vs {e}");
        }
        assert!(r.admissible);
    }

    #[test]
    fn l_shape_is_rejected() {
        let l = Polygon::new(vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 2.0],
            [0.0, 2.0],
        ])
        .unwrap();
        let r = compute_apertures(&l).unwrap();
        assert!((r.apertures[3] - 1.5 * PI).abs() < 1e-14);
        assert!(!r.admissible);
        assert!((r.apertures.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-10);
        assert!(matches!(
            mesh_polygon(&l, 0.5),
            Err(DomainError::Inadmissible { .. })
        ));
    }

    #[test]
    fn polygon_validation() {
        assert_eq!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 0.0]]),
            Err(DomainError::TooFewVertices(2))
        );
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]),
            Err(DomainError::RepeatedVertex(0, 1))
        ));
        // clockwise
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]),
            Err(DomainError::NotCounterclockwise(_))
        ));
        // bow tie
        assert!(matches!(
            Polygon::new(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]),
            Err(DomainError::SelfIntersecting(..))
        ));
    }

    #[test]
    fn collinear_corner_is_degenerate() {
        let p = Polygon::new(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(compute_apertures(&p), Err(DomainError::Degenerate { vertex: 1 }));
    }

    #[test]
    fn coarse_square_has_two_elements() {
        let m = mesh_polygon(&Polygon::unit_square(), 0.8).unwrap();
        assert_eq!(m.num_elements(), 2);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert_eq!(m.boundary_edges().len(), 4);
    }

    #[test]
    fn halving_target_roughly_quadruples_nodes() {
        let sq = Polygon::unit_square();
        let a = mesh_polygon(&sq, 0.1).unwrap();
        let b = mesh_polygon(&sq, 0.05).unwrap();
        let ratio = b.num_nodes() as f64 / a.num_nodes() as f64;
        assert!((3.0..4.5).contains(&ratio), "ratio {ratio}");
        assert!((b.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_refinement_gives_four_congruent_triangles() {
        let m = mesh_polygon_divisions(&Polygon::right_triangle(), 2).unwrap();
        assert_eq!(m.num_elements(), 4);
        for e in 0..4 {
            assert!((m.area(e) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn connectivity_counts() {
        let m = mesh_polygon_divisions(&Polygon::unit_square(), 5).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in m.elements() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary = count.values().filter(|&&c| c == 1).count();
        assert_eq!(boundary, m.boundary_edges().len());
        assert!(count.values().all(|&c| c == 1 || c == 2));
        for edge in m.boundary_edges() {
            let mid = [
                0.5 * (m.nodes()[edge.nodes[0]][0] + m.nodes()[edge.nodes[1]][0]),
                0.5 * (m.nodes()[edge.nodes[0]][1] + m.nodes()[edge.nodes[1]][1]),
            ];
            let c = m.centroid(edge.element);
            // outward: normal points away from the owning element
            assert!(dot(edge.normal, sub(mid, c)) > 0.0);
        }
    }

    #[test]
    fn locate_centroid_node_and_exterior() {
        let m = mesh_polygon_divisions(&Polygon::unit_square(), 4).unwrap();
        let c = m.centroid(7);
        match m.locate_point_from(c, 0) {
            Location::Inside { element, weights } => {
                assert_eq!(element, 7);
                for w in weights {
                    assert!((w - 1.0 / 3.0).abs() < 1e-12);
                }
            }
            Location::Outside => panic!("centroid not found"),
        }
        let node = 12;
        match m.locate_point(m.nodes()[node]) {
            Location::Inside { element, weights } => {
                let local = m.elements()[element].iter().position(|&k| k == node).unwrap();
                assert!((weights[local] - 1.0).abs() < 1e-12);
            }
            Location::Outside => panic!("node not found"),
        }
        assert_eq!(m.locate_point([2.0, 2.0]), Location::Outside);
    }

    #[test]
    fn interpolation_cases() {
        let m = mesh_polygon(&Polygon::unit_square(), 0.8).unwrap();
        let sq: Vec<f64> = m.nodes().iter().map(|p| p[0] * p[0]).collect();
        assert_eq!(m.interpolate(&sq, [0.5, 0.0]).unwrap(), 0.5);
        let lin: Vec<f64> = m.nodes().iter().map(|p| p[0] + p[1]).collect();
        let v = m.interpolate(&lin, [0.3, 0.45]).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
        assert!(matches!(m.interpolate(&lin, [1.5, 0.2]), Err(DomainError::Outside(..))));
    }
}
