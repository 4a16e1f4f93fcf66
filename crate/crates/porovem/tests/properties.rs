//! Property tests for the structural invariants: mesh generators, the
//! quadrature substrate, and projector consistency under randomized inputs.

use nalgebra::{DVector, Point2, Vector2};
use proptest::prelude::*;
use porovem::mesh::generators;
use porovem::projectors::ProjectorPack;
use porovem::quadrature::{monomial_moments, MonomialBasis, PolygonQuadrature};

fn mesh_strategy() -> impl Strategy<Value = porovem::mesh::PolyMesh> {
    prop_oneof![
        (1usize..10).prop_map(|n| generators::generate_triangles(n).unwrap()),
        (1usize..8, 0.0..0.45f64, any::<u64>())
            .prop_map(|(n, d, s)| generators::generate_distorted_quads(n, d, s).unwrap()),
        (1usize..8).prop_map(|n| generators::generate_hexagons(n).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_meshes_cover_the_square_and_conform(mesh in mesh_strategy()) {
        prop_assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        prop_assert!(mesh.validate().is_ok());
        // Per-cell edge closure.
        for c in 0..mesh.cell_count() {
            let g = mesh.element_geometry(c).unwrap();
            let mut sum = Vector2::zeros();
            for e in &g.edges {
                sum += e.length * e.normal;
            }
            prop_assert!(sum.norm() < 1e-13);
            prop_assert!(g.edges.iter().all(|e| e.length <= g.diameter * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn moment_matrices_are_spd_and_quadrature_sums_to_area(mesh in mesh_strategy()) {
        for c in 0..mesh.cell_count().min(12) {
            let geom = mesh.element_geometry(c).unwrap();
            let pts: Vec<Point2<f64>> =
                mesh.cells[c].iter().map(|&v| mesh.vertices[v]).collect();
            let quad = PolygonQuadrature::build(&geom, &pts).unwrap();
            prop_assert!((quad.total_weight() - geom.area).abs() < 1e-13 * geom.area.max(1e-6));
            let basis = MonomialBasis::new(&geom, 1);
            let h = monomial_moments(&basis, &quad).unwrap();
            let eig = h.symmetric_eigenvalues();
            prop_assert!(eig.min() > 0.0);
        }
    }

    #[test]
    fn projectors_reproduce_linears_on_random_cells(
        mesh in mesh_strategy(),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        c0 in -2.0..2.0f64,
    ) {
        for c in 0..mesh.cell_count().min(8) {
            let pack = ProjectorPack::build(&mesh, c).unwrap();
            let pts: Vec<Point2<f64>> =
                mesh.cells[c].iter().map(|&v| mesh.vertices[v]).collect();
            let f = |p: &Point2<f64>| a * p.x + b * p.y + c0;
            let dofs = DVector::from_iterator(pack.nv, pts.iter().map(&f));
            let coeffs = &pack.pi_nabla * &dofs;
            for p in &pts {
                prop_assert!((pack.eval_scalar_poly(&coeffs, p) - f(p)).abs() < 1e-11);
            }
            // Divergence of the linear field (a x, b y) is a + b.
            let dofs = pack.interpolate_displacement(&pts, |p| {
                Vector2::new(a * p.x, b * p.y)
            });
            prop_assert!((pack.div_row.dot(&dofs) - (a + b)).abs() < 1e-11);
        }
    }

    #[test]
    fn poly_mesh_format_roundtrips(mesh in mesh_strategy()) {
        let text = porovem::io::write_poly_mesh(&mesh);
        let back = porovem::io::read_poly_mesh(&text).unwrap();
        prop_assert_eq!(back.cell_count(), mesh.cell_count());
        prop_assert_eq!(back.edge_count(), mesh.edge_count());
        for (p, q) in mesh.vertices.iter().zip(&back.vertices) {
            prop_assert_eq!(p.x.to_bits(), q.x.to_bits());
            prop_assert_eq!(p.y.to_bits(), q.y.to_bits());
        }
    }
}
