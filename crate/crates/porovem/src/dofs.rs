//! Global degree-of-freedom numbering for the three fields, boundary
//! condition classification, and interpolation of given functions into the
//! discrete spaces.
//!
//! Displacement: two dofs per vertex plus one normal value per edge midpoint
//! (referring to the canonical global edge normal; the per-cell sign is part
//! of the gather table). Pressure: one dof per vertex. Total pressure: one
//! dof per cell, never constrained.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DVector, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, PolyMesh};
use crate::projectors::ProjectorPack;

pub type VectorFn = Arc<dyn Fn(&Point2<f64>, f64) -> Vector2<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&Point2<f64>, f64) -> f64 + Send + Sync>;
/// Boundary data that depends on the outward normal (tractions, fluxes).
pub type BoundaryVectorFn =
    Arc<dyn Fn(&Point2<f64>, &Vector2<f64>, f64) -> Vector2<f64> + Send + Sync>;
pub type BoundaryScalarFn = Arc<dyn Fn(&Point2<f64>, &Vector2<f64>, f64) -> f64 + Send + Sync>;

/// Displacement condition attached to a boundary tag.
#[derive(Clone)]
pub enum DispBc {
    /// Trace prescribed (vertex values and midpoint normal values).
    Dirichlet(VectorFn),
    /// Traction prescribed; enters the load vector.
    Traction(BoundaryVectorFn),
}

/// Fluid-pressure condition attached to a boundary tag.
#[derive(Clone)]
pub enum PressureBc {
    Dirichlet(ScalarFn),
    /// Prescribed normal flux; enters the load vector.
    Flux(BoundaryScalarFn),
}

/// Boundary data for one experiment: a condition per boundary tag and field.
#[derive(Clone, Default)]
pub struct BcSpec {
    pub displacement: HashMap<BoundaryTag, DispBc>,
    pub pressure: HashMap<BoundaryTag, PressureBc>,
}

impl BcSpec {
    pub fn zero_dirichlet_everywhere(tags: &[BoundaryTag]) -> BcSpec {
        let mut spec = BcSpec::default();
        for &t in tags {
            spec.displacement
                .insert(t, DispBc::Dirichlet(Arc::new(|_, _| Vector2::zeros())));
            spec.pressure
                .insert(t, PressureBc::Dirichlet(Arc::new(|_, _| 0.0)));
        }
        spec
    }
}

/// Where a constrained displacement dof takes its value from.
#[derive(Clone, Copy, Debug)]
enum UDirSource {
    /// Component `comp` of the trace at vertex `vertex`.
    Vertex { vertex: usize, comp: usize },
    /// Normal component of the trace at the midpoint of `edge`.
    EdgeNormal { edge: usize },
}

/// Global dof layout and constraint table.
pub struct DofMap {
    pub n_u: usize,
    pub n_p: usize,
    pub n_z: usize,
    /// Dirichlet source per u-dof (`None` = free).
    u_dirichlet: Vec<Option<(BoundaryTag, UDirSource)>>,
    /// Dirichlet source per p-dof.
    p_dirichlet: Vec<Option<(BoundaryTag, usize)>>,
    /// Per cell: global u-dof indices with orientation signs, local order.
    pub cell_u_dofs: Vec<Vec<(usize, f64)>>,
    /// Per cell: global p-dof (vertex) indices.
    pub cell_p_dofs: Vec<Vec<usize>>,
    /// Boundary edges carrying a traction condition.
    pub traction_edges: Vec<(usize, BoundaryVectorFn)>,
    /// Boundary edges carrying a flux condition.
    pub flux_edges: Vec<(usize, BoundaryScalarFn)>,
    bc: BcSpec,
}

impl DofMap {
    pub fn total(&self) -> usize {
        self.n_u + self.n_p + self.n_z
    }

    pub fn u_offset(&self) -> usize {
        0
    }

    pub fn p_offset(&self) -> usize {
        self.n_u
    }

    pub fn z_offset(&self) -> usize {
        self.n_u + self.n_p
    }

    pub fn is_u_constrained(&self, dof: usize) -> bool {
        self.u_dirichlet[dof].is_some()
    }

    pub fn is_p_constrained(&self, dof: usize) -> bool {
        self.p_dirichlet[dof].is_some()
    }

    /// Global constrained mask over [u | p | z].
    pub fn constrained_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total()];
        for (i, c) in self.u_dirichlet.iter().enumerate() {
            mask[i] = c.is_some();
        }
        for (i, c) in self.p_dirichlet.iter().enumerate() {
            mask[self.n_u + i] = c.is_some();
        }
        mask
    }

    pub fn free_count(&self) -> usize {
        self.constrained_mask().iter().filter(|&&c| !c).count()
    }

    /// Evaluate all Dirichlet values at time `t` into a full-length vector
    /// (zeros at free dofs).
    pub fn boundary_values(&self, mesh: &PolyMesh, t: f64) -> DVector<f64> {
        let mut vals = DVector::zeros(self.total());
        for (dof, c) in self.u_dirichlet.iter().enumerate() {
            if let Some((tag, source)) = c {
                let g = match self.bc.displacement.get(tag) {
                    Some(DispBc::Dirichlet(g)) => g,
                    _ => unreachable!("constraint recorded without dirichlet data"),
                };
                vals[dof] = match *source {
                    UDirSource::Vertex { vertex, comp } => {
                        let v = g(&mesh.vertices[vertex], t);
                        if comp == 0 {
                            v.x
                        } else {
                            v.y
                        }
                    }
                    UDirSource::EdgeNormal { edge } => {
                        let mid = mesh.edge_midpoint(edge);
                        g(&mid, t).dot(&mesh.edge_global_normal(edge))
                    }
                };
            }
        }
        for (dof, c) in self.p_dirichlet.iter().enumerate() {
            if let Some((tag, vertex)) = c {
                let g = match self.bc.pressure.get(tag) {
                    Some(PressureBc::Dirichlet(g)) => g,
                    _ => unreachable!("constraint recorded without dirichlet data"),
                };
                vals[self.n_u + dof] = g(&mesh.vertices[*vertex], t);
            }
        }
        vals
    }
}

/// Number the global dofs and classify constraints from the boundary
/// specification. Fails if a boundary tag has no condition for either field.
pub fn build_dofmap(mesh: &PolyMesh, bc: &BcSpec) -> Result<DofMap> {
    let nv = mesh.vertex_count();
    let ne = mesh.edge_count();
    let nc = mesh.cell_count();
    let n_u = 2 * nv + ne;
    let n_p = nv;

    let mut u_dirichlet: Vec<Option<(BoundaryTag, UDirSource)>> = vec![None; n_u];
    let mut p_dirichlet: Vec<Option<(BoundaryTag, usize)>> = vec![None; n_p];
    let mut traction_edges = Vec::new();
    let mut flux_edges = Vec::new();

    for (edge, tag) in mesh.boundary_edges() {
        let dbc = bc.displacement.get(&tag).ok_or_else(|| {
            Error::Configuration(format!("no displacement condition for tag {tag:?}"))
        })?;
        let pbc = bc.pressure.get(&tag).ok_or_else(|| {
            Error::Configuration(format!("no pressure condition for tag {tag:?}"))
        })?;
        let [a, b] = mesh.edges[edge].vertices;
        match dbc {
            DispBc::Dirichlet(_) => {
                // Dirichlet wins over traction at shared corners, so we
                // overwrite nothing but always set the constraint.
                for v in [a, b] {
                    for comp in 0..2 {
                        u_dirichlet[2 * v + comp]
                            .get_or_insert((tag, UDirSource::Vertex { vertex: v, comp }));
                    }
                }
                u_dirichlet[2 * nv + edge] = Some((tag, UDirSource::EdgeNormal { edge }));
            }
            DispBc::Traction(h) => traction_edges.push((edge, h.clone())),
        }
        match pbc {
            PressureBc::Dirichlet(_) => {
                for v in [a, b] {
                    p_dirichlet[v].get_or_insert((tag, v));
                }
            }
            PressureBc::Flux(g) => flux_edges.push((edge, g.clone())),
        }
    }

    // Per-cell gather tables in the local ordering used by the projectors.
    let mut cell_u_dofs = Vec::with_capacity(nc);
    let mut cell_p_dofs = Vec::with_capacity(nc);
    for c in 0..nc {
        let loop_ = &mesh.cells[c];
        let k = loop_.len();
        let mut u = Vec::with_capacity(3 * k);
        for &v in loop_ {
            u.push((2 * v, 1.0));
            u.push((2 * v + 1, 1.0));
        }
        for (local, &edge) in mesh.cell_edges[c].iter().enumerate() {
            u.push((2 * nv + edge, mesh.edge_sign(c, local)));
        }
        cell_u_dofs.push(u);
        cell_p_dofs.push(loop_.clone());
    }

    Ok(DofMap {
        n_u,
        n_p,
        n_z: nc,
        u_dirichlet,
        p_dirichlet,
        cell_u_dofs,
        cell_p_dofs,
        traction_edges,
        flux_edges,
        bc: bc.clone(),
    })
}

/// Vertex values and midpoint global-normal values of a vector field.
pub fn interpolate_into_vh(
    mesh: &PolyMesh,
    dofmap: &DofMap,
    t: f64,
    f: impl Fn(&Point2<f64>, f64) -> Vector2<f64>,
) -> DVector<f64> {
    let nv = mesh.vertex_count();
    let mut dofs = DVector::zeros(dofmap.n_u);
    for (v, p) in mesh.vertices.iter().enumerate() {
        let val = f(p, t);
        dofs[2 * v] = val.x;
        dofs[2 * v + 1] = val.y;
    }
    for e in 0..mesh.edge_count() {
        let mid = mesh.edge_midpoint(e);
        dofs[2 * nv + e] = f(&mid, t).dot(&mesh.edge_global_normal(e));
    }
    dofs
}

/// Vertex values of a scalar field.
pub fn interpolate_into_qh(
    mesh: &PolyMesh,
    dofmap: &DofMap,
    t: f64,
    f: impl Fn(&Point2<f64>, f64) -> f64,
) -> DVector<f64> {
    debug_assert_eq!(dofmap.n_p, mesh.vertex_count());
    DVector::from_iterator(dofmap.n_p, mesh.vertices.iter().map(|p| f(p, t)))
}

/// Cell averages of a scalar field by polygon quadrature.
pub fn project_into_zh(
    packs: &[ProjectorPack],
    t: f64,
    f: impl Fn(&Point2<f64>, f64) -> f64,
) -> DVector<f64> {
    DVector::from_iterator(
        packs.len(),
        packs
            .iter()
            .map(|pack| pack.quad.integrate(|p| f(p, t)) / pack.geom.area),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generators;
    use crate::projectors::ProjectorPack;
    use std::f64::consts::PI;

    fn dirichlet_everywhere(_mesh: &PolyMesh) -> BcSpec {
        BcSpec::zero_dirichlet_everywhere(&[BoundaryTag::GammaClamped])
    }

    #[test]
    fn dof_counts_two_triangle_mesh() {
        let mesh = generators::generate_triangles(1).unwrap();
        let bc = dirichlet_everywhere(&mesh);
        let dm = build_dofmap(&mesh, &bc).unwrap();
        // 2 vertices-dofs * 4 + 5 edges = 13 displacement dofs.
        assert_eq!(dm.n_u, 13);
        assert_eq!(dm.n_p, 4);
        assert_eq!(dm.n_z, 2);
        // All boundary dofs constrained: 8 vertex + 4 boundary edges.
        let mask = dm.constrained_mask();
        let con = mask.iter().filter(|&&c| c).count();
        assert_eq!(con, 8 + 4 + 4); // u-vertex + u-edge + p-vertex
    }

    #[test]
    fn dof_counts_general() {
        for mesh in [
            generators::generate_triangles(4).unwrap(),
            generators::generate_hexagons(3).unwrap(),
            generators::generate_distorted_quads(5, 0.15, 3).unwrap(),
        ] {
            let bc = dirichlet_everywhere(&mesh);
            let dm = build_dofmap(&mesh, &bc).unwrap();
            assert_eq!(dm.n_u, 2 * mesh.vertex_count() + mesh.edge_count());
            assert_eq!(dm.n_p, mesh.vertex_count());
            assert_eq!(dm.n_z, mesh.cell_count());
        }
    }

    #[test]
    fn gather_scatter_roundtrip() {
        let mesh = generators::generate_hexagons(2).unwrap();
        let bc = dirichlet_everywhere(&mesh);
        let dm = build_dofmap(&mesh, &bc).unwrap();
        let global = DVector::from_fn(dm.n_u, |i, _| (i as f64 * 0.37).sin());
        for c in 0..mesh.cell_count() {
            let local: Vec<f64> = dm.cell_u_dofs[c]
                .iter()
                .map(|&(g, s)| s * global[g])
                .collect();
            // Scatter back: local values with signs reproduce the global ones.
            for (k, &(g, s)) in dm.cell_u_dofs[c].iter().enumerate() {
                assert_eq!(s * local[k], global[g]);
            }
        }
    }

    #[test]
    fn interpolation_consistency_chain() {
        let mesh = generators::generate_hexagons(2).unwrap();
        let bc = dirichlet_everywhere(&mesh);
        let dm = build_dofmap(&mesh, &bc).unwrap();
        // Zero stays zero.
        let z = interpolate_into_vh(&mesh, &dm, 0.0, |_, _| Vector2::zeros());
        assert_eq!(z.abs().max(), 0.0);
        // A vector P1 field is reproduced by the strain projection of its
        // interpolant on every cell.
        let f = |p: &Point2<f64>, _: f64| Vector2::new(0.2 * p.x - p.y + 0.3, p.x + 0.5 * p.y);
        let dofs = interpolate_into_vh(&mesh, &dm, 0.0, f);
        for c in 0..mesh.cell_count() {
            let pack = ProjectorPack::build(&mesh, c).unwrap();
            let local = DVector::from_iterator(
                dm.cell_u_dofs[c].len(),
                dm.cell_u_dofs[c].iter().map(|&(g, s)| s * dofs[g]),
            );
            let coeffs = &pack.pi_eps * &local;
            for &v in &mesh.cells[c] {
                let got = pack.eval_vec_poly(&coeffs, &mesh.vertices[v]);
                let want = f(&mesh.vertices[v], 0.0);
                assert!((got - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn qh_interpolation() {
        let mesh = generators::generate_triangles(4).unwrap();
        let bc = dirichlet_everywhere(&mesh);
        let dm = build_dofmap(&mesh, &bc).unwrap();
        let c = interpolate_into_qh(&mesh, &dm, 0.0, |_, _| 2.5);
        assert!(c.iter().all(|&v| v == 2.5));
        let f = |p: &Point2<f64>, _: f64| (PI * p.x).sin().powi(2) * (PI * p.y).sin().powi(2);
        let dofs = interpolate_into_qh(&mesh, &dm, 0.0, f);
        // Vertex (0.5, 0.5) exists on the n=4 mesh and carries value 1.
        let idx = mesh
            .vertices
            .iter()
            .position(|p| (p.x - 0.5).abs() < 1e-14 && (p.y - 0.5).abs() < 1e-14)
            .unwrap();
        assert!((dofs[idx] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zh_projection() {
        let mesh = generators::generate_hexagons(2).unwrap();
        let packs: Vec<_> = (0..mesh.cell_count())
            .map(|c| ProjectorPack::build(&mesh, c).unwrap())
            .collect();
        let threes = project_into_zh(&packs, 0.0, |_, _| 3.0);
        assert!(threes.iter().all(|&v| (v - 3.0).abs() < 1e-13));
        // f = x on any cell gives the centroid x-coordinate.
        let xs = project_into_zh(&packs, 0.0, |p, _| p.x);
        for (k, pack) in packs.iter().enumerate() {
            assert!((xs[k] - pack.geom.centroid.x).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_sets_match_hand_enumeration_mixed_layout() {
        // One-square triangle mesh, clamped/no-flux on bottom+left,
        // traction/pressure-Dirichlet on top+right. Vertices: 0=(0,0),
        // 1=(1,0), 2=(1,1), 3=(0,1).
        let mut mesh = generators::generate_triangles(1).unwrap();
        mesh.retag_boundary(|mid| {
            if mid.x < 1e-12 || mid.y < 1e-12 {
                BoundaryTag::GammaClamped
            } else {
                BoundaryTag::SigmaTraction
            }
        });
        let mut bc = BcSpec::default();
        bc.displacement.insert(
            BoundaryTag::GammaClamped,
            DispBc::Dirichlet(Arc::new(|_, _| Vector2::zeros())),
        );
        bc.pressure.insert(
            BoundaryTag::GammaClamped,
            PressureBc::Flux(Arc::new(|_, _, _| 0.0)),
        );
        bc.displacement.insert(
            BoundaryTag::SigmaTraction,
            DispBc::Traction(Arc::new(|_, _, _| Vector2::zeros())),
        );
        bc.pressure.insert(
            BoundaryTag::SigmaTraction,
            PressureBc::Dirichlet(Arc::new(|_, _| 0.0)),
        );
        let dm = build_dofmap(&mesh, &bc).unwrap();
        // Displacement: vertices 0, 1, 3 clamped (both components).
        let u_vertices: Vec<usize> = (0..4)
            .filter(|&v| dm.is_u_constrained(2 * v) && dm.is_u_constrained(2 * v + 1))
            .collect();
        assert_eq!(u_vertices, vec![0, 1, 3]);
        // Edge-normal dofs: exactly the bottom and left edges.
        let nv = mesh.vertex_count();
        let constrained_edges: Vec<usize> = (0..mesh.edge_count())
            .filter(|&e| dm.is_u_constrained(2 * nv + e))
            .collect();
        for &e in &constrained_edges {
            let mid = mesh.edge_midpoint(e);
            assert!(mid.x < 1e-12 || mid.y < 1e-12);
        }
        assert_eq!(constrained_edges.len(), 2);
        // Pressure: vertices on the closed top+right, i.e. 1, 2, 3.
        let p_vertices: Vec<usize> = (0..4).filter(|&v| dm.is_p_constrained(v)).collect();
        assert_eq!(p_vertices, vec![1, 2, 3]);
        // Natural-condition edge lists.
        assert_eq!(dm.traction_edges.len(), 2);
        assert_eq!(dm.flux_edges.len(), 2);
    }

    #[test]
    fn untagged_condition_is_a_configuration_error() {
        let mesh = generators::generate_triangles(2).unwrap();
        let empty = BcSpec::default();
        assert!(matches!(
            build_dofmap(&mesh, &empty),
            Err(Error::Configuration(_))
        ));
    }
}
