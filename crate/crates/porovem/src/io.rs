//! File formats: the plain-text `poly-mesh v1` exchange format, legacy ASCII
//! VTK output (POLYDATA) for meshes and solution snapshots, CSV tables, and
//! Matrix Market dumps of assembled blocks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::{BoundaryTag, PolyMesh};
use crate::stepper::FieldState;

fn tag_to_str(tag: BoundaryTag) -> String {
    match tag {
        BoundaryTag::GammaClamped => "clamped".to_string(),
        BoundaryTag::SigmaTraction => "traction".to_string(),
        BoundaryTag::User(n) => format!("user:{n}"),
    }
}

fn tag_from_str(s: &str) -> Result<BoundaryTag> {
    match s {
        "clamped" => Ok(BoundaryTag::GammaClamped),
        "traction" => Ok(BoundaryTag::SigmaTraction),
        other => other
            .strip_prefix("user:")
            .and_then(|n| n.parse().ok())
            .map(BoundaryTag::User)
            .ok_or_else(|| Error::Configuration(format!("unknown boundary tag '{other}'"))),
    }
}

/// Serialize a mesh in the `poly-mesh v1` format: header, vertex block,
/// cell block, boundary-edge tag block.
pub fn write_poly_mesh(mesh: &PolyMesh) -> String {
    let mut out = String::new();
    out.push_str("poly-mesh v1\n");
    let _ = writeln!(out, "{}", mesh.vertex_count());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.17e} {:.17e}", v.x, v.y);
    }
    let _ = writeln!(out, "{}", mesh.cell_count());
    for cell in &mesh.cells {
        let _ = write!(out, "{}", cell.len());
        for &v in cell {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let boundary: Vec<_> = mesh.boundary_edges().collect();
    let _ = writeln!(out, "{}", boundary.len());
    for (e, tag) in boundary {
        let [a, b] = mesh.edges[e].vertices;
        let _ = writeln!(out, "{a} {b} {}", tag_to_str(tag));
    }
    out
}

pub fn save_poly_mesh(mesh: &PolyMesh, path: &Path) -> Result<()> {
    fs::write(path, write_poly_mesh(mesh))?;
    Ok(())
}

/// Parse the `poly-mesh v1` format.
pub fn read_poly_mesh(text: &str) -> Result<PolyMesh> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |what: &str| Error::Configuration(format!("poly-mesh parse error: {what}"));
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    if header.trim() != "poly-mesh v1" {
        return Err(bad("expected 'poly-mesh v1' header"));
    }
    let nv: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| bad("vertex count"))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let l = lines.next().ok_or_else(|| bad("vertex line"))?;
        let mut it = l.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("vertex x"))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("vertex y"))?;
        vertices.push(Point2::new(x, y));
    }
    let nc: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| bad("cell count"))?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let l = lines.next().ok_or_else(|| bad("cell line"))?;
        let mut it = l.split_whitespace();
        let k: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("cell size"))?;
        let loop_: Vec<usize> = it.take(k).map(|t| t.parse().unwrap_or(usize::MAX)).collect();
        if loop_.len() != k || loop_.iter().any(|&v| v >= nv) {
            return Err(bad("cell indices"));
        }
        cells.push(loop_);
    }
    let nb: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| bad("boundary count"))?;
    let mut tags = Vec::with_capacity(nb);
    for _ in 0..nb {
        let l = lines.next().ok_or_else(|| bad("boundary line"))?;
        let mut it = l.split_whitespace();
        let a: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("boundary vertex"))?;
        let b: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("boundary vertex"))?;
        let tag = tag_from_str(it.next().ok_or_else(|| bad("boundary tag"))?)?;
        tags.push(((a.min(b), a.max(b)), tag));
    }
    let mesh = PolyMesh::build(vertices, cells, |_| BoundaryTag::GammaClamped)?;
    let mut mesh = mesh;
    for ((a, b), tag) in tags {
        let found = mesh
            .edges
            .iter()
            .position(|e| e.vertices == [a, b])
            .ok_or_else(|| bad("tagged edge not in mesh"))?;
        if !mesh.edges[found].is_boundary() {
            return Err(bad("tagged edge is interior"));
        }
        mesh.boundary_tags[found] = Some(tag);
    }
    mesh.validate()?;
    Ok(mesh)
}

/// Legacy ASCII VTK POLYDATA of the mesh geometry alone.
pub fn mesh_to_vtk(mesh: &PolyMesh, title: &str) -> String {
    vtk_polydata(mesh, title, None, 0.0)
}

/// Legacy ASCII VTK POLYDATA with solution fields: point vectors
/// `displacement`, point scalars `pressure`, cell scalars `total_pressure`,
/// geometry warped by `warp * u`.
pub fn state_to_vtk(mesh: &PolyMesh, state: &FieldState, title: &str, warp: f64) -> String {
    vtk_polydata(mesh, title, Some(state), warp)
}

fn vtk_polydata(mesh: &PolyMesh, title: &str, state: Option<&FieldState>, warp: f64) -> String {
    let nv = mesh.vertex_count();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "{title}");
    out.push_str("ASCII\nDATASET POLYDATA\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for (i, v) in mesh.vertices.iter().enumerate() {
        let (mut x, mut y) = (v.x, v.y);
        if let Some(s) = state {
            x += warp * s.u[2 * i];
            y += warp * s.u[2 * i + 1];
        }
        let _ = writeln!(out, "{x:.12e} {y:.12e} 0.0");
    }
    let size: usize = mesh.cells.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(out, "POLYGONS {} {size}", mesh.cell_count());
    for cell in &mesh.cells {
        let _ = write!(out, "{}", cell.len());
        for &v in cell {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    if let Some(s) = state {
        let _ = writeln!(out, "POINT_DATA {nv}");
        out.push_str("VECTORS displacement double\n");
        for i in 0..nv {
            let _ = writeln!(out, "{:.9e} {:.9e} 0.0", s.u[2 * i], s.u[2 * i + 1]);
        }
        out.push_str("SCALARS displacement_magnitude double 1\nLOOKUP_TABLE default\n");
        for i in 0..nv {
            let m = (s.u[2 * i].powi(2) + s.u[2 * i + 1].powi(2)).sqrt();
            let _ = writeln!(out, "{m:.9e}");
        }
        out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for i in 0..nv {
            let _ = writeln!(out, "{:.9e}", s.p[i]);
        }
        let _ = writeln!(out, "CELL_DATA {}", mesh.cell_count());
        out.push_str("SCALARS total_pressure double 1\nLOOKUP_TABLE default\n");
        for c in 0..mesh.cell_count() {
            let _ = writeln!(out, "{:.9e}", s.psi[c]);
        }
    }
    out
}

/// Final-state CSV: vertex table (position, displacement, pressure) followed
/// by a cell table (centroid, total pressure).
pub fn state_to_csv(mesh: &PolyMesh, state: &FieldState) -> String {
    let mut out = String::from("# vertices: x,y,ux,uy,p\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            v.x,
            v.y,
            state.u[2 * i],
            state.u[2 * i + 1],
            state.p[i]
        );
    }
    out.push_str("# cells: cx,cy,psi\n");
    for c in 0..mesh.cell_count() {
        let g = mesh.element_geometry(c).expect("valid mesh");
        let _ = writeln!(
            out,
            "{:.9e},{:.9e},{:.9e}",
            g.centroid.x, g.centroid.y, state.psi[c]
        );
    }
    out
}

/// Matrix Market coordinate format of a CSR block.
pub fn csr_to_matrix_market(m: &CsrMatrix, comment: &str) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "% {comment}");
    let nnz = m.vals.len();
    let _ = writeln!(out, "{} {} {nnz}", m.nrows, m.ncols);
    for i in 0..m.nrows {
        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
            let _ = writeln!(out, "{} {} {:.16e}", i + 1, m.cols[k] + 1, m.vals[k]);
        }
    }
    out
}

/// Per-element projector dump (one CSV per matrix) for cross-implementation
/// diffing.
pub fn projector_dump(pack: &crate::projectors::ProjectorPack, cell: usize) -> String {
    let mut out = String::new();
    let mut emit = |name: &str, m: &nalgebra::DMatrix<f64>| {
        let _ = writeln!(out, "# cell {cell} {name} {}x{}", m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
    };
    emit("pi_nabla", &pack.pi_nabla);
    emit("pi0", &pack.pi0);
    emit("pi_eps", &pack.pi_eps);
    emit("pi00", &pack.pi00);
    emit(
        "div_row",
        &nalgebra::DMatrix::from_row_slice(1, pack.div_row.len(), pack.div_row.as_slice()),
    );
    emit("moments", &pack.h_mat);
    out
}

/// Debug dump of the moment matrix and quadrature rule of one cell.
pub fn quadrature_dump(pack: &crate::projectors::ProjectorPack) -> String {
    let mut out = String::from("# quadrature points: x,y,w\n");
    for (p, w) in pack.quad.points.iter().zip(&pack.quad.weights) {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", p.x, p.y, w);
    }
    out
}

/// Write a generated field state sequence as numbered VTK snapshot files.
pub fn write_snapshots(
    mesh: &PolyMesh,
    history: &[FieldState],
    dir: &Path,
    warp: f64,
) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (k, state) in history.iter().enumerate() {
        let path = dir.join(format!("snapshot_{:04}.vtk", k + 1));
        fs::write(
            &path,
            state_to_vtk(mesh, state, &format!("t = {:.6}", state.t), warp),
        )?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators;
    use nalgebra::DVector;

    #[test]
    fn poly_mesh_roundtrip() {
        let mut mesh = generators::generate_hexagons(3).unwrap();
        mesh.retag_boundary(|mid| {
            if mid.y > 0.5 {
                BoundaryTag::SigmaTraction
            } else {
                BoundaryTag::User(7)
            }
        });
        let text = write_poly_mesh(&mesh);
        let back = read_poly_mesh(&text).unwrap();
        assert_eq!(back.vertex_count(), mesh.vertex_count());
        assert_eq!(back.cell_count(), mesh.cell_count());
        for (a, b) in mesh.vertices.iter().zip(&back.vertices) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        let tags_a: Vec<_> = mesh.boundary_edges().collect();
        let tags_b: Vec<_> = back.boundary_edges().collect();
        assert_eq!(tags_a.len(), tags_b.len());
        for ((ea, ta), (eb, tb)) in tags_a.iter().zip(&tags_b) {
            assert_eq!(mesh.edges[*ea].vertices, back.edges[*eb].vertices);
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn malformed_mesh_rejected() {
        assert!(read_poly_mesh("nonsense").is_err());
        assert!(read_poly_mesh("poly-mesh v1\n2\n0 0\n1 1\n").is_err());
    }

    #[test]
    fn vtk_structure() {
        let mesh = generators::generate_triangles(2).unwrap();
        let vtk = mesh_to_vtk(&mesh, "test");
        assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
        assert!(vtk.contains("DATASET POLYDATA"));
        assert!(vtk.contains(&format!("POINTS {} double", mesh.vertex_count())));
        assert!(vtk.contains(&format!("POLYGONS {} ", mesh.cell_count())));

        let state = FieldState {
            u: DVector::zeros(2 * mesh.vertex_count() + mesh.edge_count()),
            p: DVector::from_element(mesh.vertex_count(), 2.0),
            psi: DVector::from_element(mesh.cell_count(), -1.0),
            t: 0.3,
        };
        let vtk = state_to_vtk(&mesh, &state, "fields", 1.0);
        assert!(vtk.contains("VECTORS displacement double"));
        assert!(vtk.contains("SCALARS pressure double 1"));
        assert!(vtk.contains("SCALARS total_pressure double 1"));
    }

    #[test]
    fn matrix_market_roundtrippable_shape() {
        let mut t = crate::linalg::Triplets::new(2, 3);
        t.push(0, 1, 2.5);
        t.push(1, 2, -1.0);
        let mm = csr_to_matrix_market(&t.to_csr(), "test block");
        let lines: Vec<_> = mm.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[2], "2 3 2");
    }
}
