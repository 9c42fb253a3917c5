//! Legacy ASCII VTK output (unstructured grid, triangle cells of type 5).

use std::io::{self, Write};

use crate::domain::TriMesh;
use crate::Point;

const VTK_TRIANGLE: u8 = 5;

pub(crate) fn write_header<W: Write>(out: &mut W, mesh: &TriMesh, title: &str) -> io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    // the title line must be a single line of at most 256 characters
    let title: String = title.lines().next().unwrap_or("").chars().take(255).collect();
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_nodes())?;
    for p in mesh.nodes() {
        writeln!(out, "{:e} {:e} 0", p[0], p[1])?;
    }
    let m = mesh.num_elements();
    writeln!(out, "CELLS {} {}", m, 4 * m)?;
    for tri in mesh.elements() {
        writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(out, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(out, "{VTK_TRIANGLE}")?;
    }
    Ok(())
}

/// Mesh plus named nodal scalars and per-element vectors.
pub fn write_vtk<W: Write>(
    out: &mut W,
    mesh: &TriMesh,
    title: &str,
    point_scalars: &[(&str, &[f64])],
    cell_vectors: &[(&str, &[Point])],
) -> io::Result<()> {
    write_header(out, mesh, title)?;
    if !point_scalars.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_nodes())?;
        for (name, values) in point_scalars {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(out, "{v:e}")?;
            }
        }
    }
    if !cell_vectors.is_empty() {
        writeln!(out, "CELL_DATA {}", mesh.num_elements())?;
        for (name, values) in cell_vectors {
            writeln!(out, "VECTORS {name} double")?;
            for v in values.iter() {
                writeln!(out, "{:e} {:e} 0", v[0], v[1])?;
            }
        }
    }
    Ok(())
}
