//! Legacy ASCII VTK (version 2.0) unstructured grids.

use std::io::{self, Write};

use ncvd_core::{FieldState, Mesh};

const VTK_TRIANGLE: u8 = 5;

fn write_grid(w: &mut impl Write, mesh: &Mesh, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 2.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for [x, y] in mesh.vertices() {
        writeln!(w, "{x:e} {y:e} 0")?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for [a, b, c] in mesh.triangles() {
        writeln!(w, "3 {a} {b} {c}")?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    Ok(())
}

fn write_scalars(w: &mut impl Write, name: &str, values: impl Iterator<Item = f64>) -> io::Result<()> {
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

/// Mesh only.
pub fn write_mesh(mut w: impl Write, mesh: &Mesh) -> io::Result<()> {
    write_grid(&mut w, mesh, "ncvd mesh")
}

/// Vertex values of one state. Velocity bubbles vanish at vertices, so the
/// vertex DOFs are the point values of the mini field.
pub fn write_fields(mut w: impl Write, mesh: &Mesh, state: &FieldState, time: f64) -> io::Result<()> {
    write_grid(&mut w, mesh, &format!("ncvd fields step {} t={time}", state.time_index))?;
    let nv = mesh.n_vertices();
    writeln!(w, "POINT_DATA {nv}")?;
    write_scalars(&mut w, "sigma", state.sigma.iter().copied())?;
    write_scalars(&mut w, "rho", state.sigma.iter().map(|s| s * s))?;
    write_scalars(&mut w, "theta", state.theta.iter().copied())?;
    write_scalars(&mut w, "p", state.p.iter().copied())?;
    writeln!(w, "VECTORS u double")?;
    for i in 0..nv {
        writeln!(w, "{:e} {:e} 0", state.u[0][i], state.u[1][i])?;
    }
    Ok(())
}
