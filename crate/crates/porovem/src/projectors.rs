//! Per-element projector matrices onto (vector) linear polynomials, computed
//! from boundary degrees of freedom alone, plus the dof-based stabilization
//! built from them.
//!
//! The displacement space on a cell carries vertex values and edge-midpoint
//! normal values; its tangential trace is linear and its normal trace is
//! quadratic on every edge. Consequently every boundary integral that the
//! projections need is evaluated exactly by the trapezoid rule (tangential
//! pieces) and the 3-point Gauss-Lobatto rule (normal pieces), whose nodes
//! are precisely the available dofs.
//!
//! The local dof order is: `(v_x, v_y)` per vertex, then one midpoint normal
//! value per edge, all in loop order. The normal dof uses the cell's outward
//! normal; the global orientation sign is applied by the dof map.

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, PolyMesh};
use crate::quadrature::{monomial_moments, MonomialBasis, PolygonQuadrature};

/// The three rigid-body fields spanning the kernel of the strain form:
/// translations and the scaled rotation `(-(y - y_K), (x - x_K)) / h_K`.
#[derive(Clone, Debug)]
pub struct RigidBodyBasis {
    pub centroid: Point2<f64>,
    pub h: f64,
}

impl RigidBodyBasis {
    pub fn eval(&self, mode: usize, p: &Point2<f64>) -> Vector2<f64> {
        match mode {
            0 => Vector2::new(1.0, 0.0),
            1 => Vector2::new(0.0, 1.0),
            2 => Vector2::new(
                -(p.y - self.centroid.y) / self.h,
                (p.x - self.centroid.x) / self.h,
            ),
            _ => panic!("rigid mode out of range"),
        }
    }
}

/// All computable projector and dof-evaluation matrices of one cell.
#[derive(Clone, Debug)]
pub struct ProjectorPack {
    pub nv: usize,
    pub geom: ElementGeometry,
    pub basis: MonomialBasis,
    pub quad: PolygonQuadrature,
    /// Moment matrix `∫ m_a m_b`, 3x3.
    pub h_mat: DMatrix<f64>,
    /// Energy projection of scalar vertex dofs onto P1: 3 x nv.
    pub pi_nabla: DMatrix<f64>,
    /// L2 projection of scalar vertex dofs onto P1 (via the enhanced-space
    /// moments): 3 x nv.
    pub pi0: DMatrix<f64>,
    /// Strain-energy projection of displacement dofs onto vector P1,
    /// coefficients in the basis [(1,0),(0,1),(ξ,0),(0,ξ),(η,0),(0,η)]:
    /// 6 x 3nv.
    pub pi_eps: DMatrix<f64>,
    /// Cell average of a displacement field: 2 x 3nv.
    pub pi00: DMatrix<f64>,
    /// Constant divergence of a displacement field: length 3nv.
    pub div_row: DVector<f64>,
    /// Vertex values of the scalar monomials: nv x 3.
    pub dof_q: DMatrix<f64>,
    /// Dofs of the vector monomial basis: 3nv x 6.
    pub dof_v: DMatrix<f64>,
}

/// Which stabilization matrix to build from a pack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabKind {
    /// Displacement (strain projector kernel).
    S1,
    /// Pressure gradient (energy projector kernel).
    S2,
    /// Pressure mass (L2 projector kernel); carries the cell-area factor.
    S0,
}

/// Strain tensor of each vector monomial basis field, times h (so entries
/// are dimensionless); the true strain is `eps_table(j) / h`.
fn eps_table(j: usize) -> Matrix2<f64> {
    match j {
        0 | 1 => Matrix2::zeros(),
        2 => Matrix2::new(1.0, 0.0, 0.0, 0.0),
        3 => Matrix2::new(0.0, 0.5, 0.5, 0.0),
        4 => Matrix2::new(0.0, 0.5, 0.5, 0.0),
        5 => Matrix2::new(0.0, 0.0, 0.0, 1.0),
        _ => panic!("vector monomial index out of range"),
    }
}

impl ProjectorPack {
    pub fn build(mesh: &PolyMesh, cell: usize) -> Result<ProjectorPack> {
        let geom = mesh.element_geometry(cell)?;
        let pts: Vec<Point2<f64>> = mesh.cells[cell].iter().map(|&v| mesh.vertices[v]).collect();
        Self::build_from_points(&pts, geom).map_err(|e| match e {
            Error::SingularLocal { pivot, .. } => Error::SingularLocal { cell, pivot },
            other => other,
        })
    }

    /// Build from the vertex loop directly (used by tests on synthetic cells).
    pub fn build_from_points(pts: &[Point2<f64>], geom: ElementGeometry) -> Result<ProjectorPack> {
        let nv = pts.len();
        let basis = MonomialBasis::new(&geom, 1);
        let quad = PolygonQuadrature::build(&geom, pts)?;
        let h_mat = monomial_moments(&basis, &quad)?;

        let singular = |pivot: f64| Error::SingularLocal { cell: usize::MAX, pivot };

        // ------------------------------------------------------------------
        // Scalar energy projection.
        // Gradient rows: ∫ ∇(Π q)·∇m_i = ∮ q (∇m_i·n), with q linear on each
        // edge. Constant row: boundary means match.
        // ------------------------------------------------------------------
        let perimeter: f64 = geom.edges.iter().map(|e| e.length).sum();
        let mut g = DMatrix::zeros(3, 3);
        let mut b_n = DMatrix::zeros(3, nv);
        for (i, e) in geom.edges.iter().enumerate() {
            let j = (i + 1) % nv;
            for alpha in 0..3 {
                g[(0, alpha)] += e.length
                    * 0.5
                    * (basis.eval(alpha, &pts[i]) + basis.eval(alpha, &pts[j]))
                    / perimeter;
            }
            b_n[(0, i)] += e.length * 0.5 / perimeter;
            b_n[(0, j)] += e.length * 0.5 / perimeter;
            for gi in 1..3 {
                let gn = basis.grad(gi, &geom.centroid).dot(&e.normal);
                b_n[(gi, i)] += gn * e.length * 0.5;
                b_n[(gi, j)] += gn * e.length * 0.5;
            }
        }
        let gg = geom.area / (geom.diameter * geom.diameter);
        g[(1, 1)] = gg;
        g[(2, 2)] = gg;
        let pi_nabla = crate::linalg::solve_dense(&g, &b_n).map_err(singular)?;

        // L2 projection: on the enhanced space the moments of a virtual
        // function equal the moments of its energy projection.
        let rhs0 = &h_mat * &pi_nabla;
        let pi0 = crate::linalg::solve_dense(&h_mat, &rhs0).map_err(singular)?;

        // ------------------------------------------------------------------
        // Vector strain projection, assembled in the adapted basis
        // [r0, r1, r2, s0, s1, s2] (rigid modes, then unit strain modes)
        // and transformed to the monomial basis afterwards.
        // ------------------------------------------------------------------
        let rigid = RigidBodyBasis { centroid: geom.centroid, h: geom.diameter };
        let h = geom.diameter;
        let eval_adapted = |k: usize, p: &Point2<f64>| -> Vector2<f64> {
            let xi = (p.x - geom.centroid.x) / h;
            let eta = (p.y - geom.centroid.y) / h;
            match k {
                0 => Vector2::new(1.0, 0.0),
                1 => Vector2::new(0.0, 1.0),
                2 => Vector2::new(-eta, xi),
                3 => Vector2::new(xi, 0.0),
                4 => Vector2::new(0.0, eta),
                5 => Vector2::new(eta, xi),
                _ => unreachable!(),
            }
        };
        // Strains of the adapted strain modes s0, s1, s2.
        let strain_modes = [
            Matrix2::new(1.0, 0.0, 0.0, 0.0) / h,
            Matrix2::new(0.0, 0.0, 0.0, 1.0) / h,
            Matrix2::new(0.0, 1.0, 1.0, 0.0) / h,
        ];

        let ndof = 3 * nv;
        let mut a_sys = DMatrix::zeros(6, 6);
        let mut b_sys = DMatrix::zeros(6, ndof);

        // Kernel-fixing rows: vertex averages against the rigid modes.
        let w = 1.0 / nv as f64;
        for l in 0..3 {
            for k in 0..6 {
                let mut acc = 0.0;
                for p in pts.iter() {
                    acc += eval_adapted(k, p).dot(&rigid.eval(l, p));
                }
                a_sys[(l, k)] = w * acc;
            }
            for (i, p) in pts.iter().enumerate() {
                let r = rigid.eval(l, p);
                b_sys[(l, 2 * i)] = w * r.x;
                b_sys[(l, 2 * i + 1)] = w * r.y;
            }
        }
        // Energy rows: ∫ ε(Πv):ε(s_m) = ∮ v·(ε(s_m) n), split into tangential
        // (trapezoid) and normal (Gauss-Lobatto) edge pieces.
        for m in 0..3 {
            let em = &strain_modes[m];
            for k in 3..6 {
                let sk = &strain_modes[k - 3];
                a_sys[(3 + m, k)] = geom.area * (em.transpose() * sk).trace();
            }
            for (i, e) in geom.edges.iter().enumerate() {
                let j = (i + 1) % nv;
                let en = em * e.normal;
                let tn = en.dot(&e.tangent);
                let nn = en.dot(&e.normal);
                // Tangential piece: P1 trace, trapezoid.
                for (vid, _) in [(i, 0), (j, 0)] {
                    b_sys[(3 + m, 2 * vid)] += 0.5 * e.length * tn * e.tangent.x;
                    b_sys[(3 + m, 2 * vid + 1)] += 0.5 * e.length * tn * e.tangent.y;
                }
                // Normal piece: P2 trace, Gauss-Lobatto with the midpoint dof.
                for vid in [i, j] {
                    b_sys[(3 + m, 2 * vid)] += e.length / 6.0 * nn * e.normal.x;
                    b_sys[(3 + m, 2 * vid + 1)] += e.length / 6.0 * nn * e.normal.y;
                }
                b_sys[(3 + m, 2 * nv + i)] += 2.0 * e.length / 3.0 * nn;
            }
        }
        let x_adapted = crate::linalg::solve_dense(&a_sys, &b_sys).map_err(singular)?;

        // Change of basis to [(1,0),(0,1),(ξ,0),(0,ξ),(η,0),(0,η)]:
        // r2 = (0,ξ) - (η,0), s0 = (ξ,0), s1 = (0,η), s2 = (η,0) + (0,ξ).
        let mut t = DMatrix::zeros(6, 6);
        t[(0, 0)] = 1.0;
        t[(1, 1)] = 1.0;
        t[(3, 2)] = 1.0;
        t[(4, 2)] = -1.0;
        t[(2, 3)] = 1.0;
        t[(5, 4)] = 1.0;
        t[(4, 5)] = 1.0;
        t[(3, 5)] = 1.0;
        let pi_eps = &t * &x_adapted;

        // ------------------------------------------------------------------
        // Divergence row: div v = (1/|K|) ∮ v·n, normal trace integrated by
        // Gauss-Lobatto.
        // ------------------------------------------------------------------
        let mut div_row = DVector::zeros(ndof);
        for (i, e) in geom.edges.iter().enumerate() {
            let j = (i + 1) % nv;
            for vid in [i, j] {
                div_row[2 * vid] += e.length / 6.0 * e.normal.x / geom.area;
                div_row[2 * vid + 1] += e.length / 6.0 * e.normal.y / geom.area;
            }
            div_row[2 * nv + i] += 2.0 * e.length / 3.0 / geom.area;
        }

        // ------------------------------------------------------------------
        // Cell average via the divergence identity:
        // ∫ v_c = -(div v) ∫ (x_c - x_Kc) + ∮ (v·n)(x_c - x_Kc).
        // The boundary integrand is P3 on each edge: Gauss-Lobatto is exact.
        // ------------------------------------------------------------------
        let mut pi00 = DMatrix::zeros(2, ndof);
        for comp in 0..2 {
            let phi = |p: &Point2<f64>| {
                if comp == 0 {
                    p.x - geom.centroid.x
                } else {
                    p.y - geom.centroid.y
                }
            };
            let interior_moment = quad.integrate(|p| phi(p));
            for (i, e) in geom.edges.iter().enumerate() {
                let j = (i + 1) % nv;
                let phi_i = phi(&pts[i]);
                let phi_j = phi(&pts[j]);
                let phi_m = phi(&e.midpoint);
                for (vid, ph) in [(i, phi_i), (j, phi_j)] {
                    pi00[(comp, 2 * vid)] += e.length / 6.0 * ph * e.normal.x / geom.area;
                    pi00[(comp, 2 * vid + 1)] += e.length / 6.0 * ph * e.normal.y / geom.area;
                }
                pi00[(comp, 2 * nv + i)] += 2.0 * e.length / 3.0 * phi_m / geom.area;
            }
            for d in 0..ndof {
                let v = div_row[d] * interior_moment / geom.area;
                pi00[(comp, d)] -= v;
            }
        }

        // ------------------------------------------------------------------
        // Dof-evaluation matrices for the stabilizations.
        // ------------------------------------------------------------------
        let mut dof_q = DMatrix::zeros(nv, 3);
        for (i, p) in pts.iter().enumerate() {
            for alpha in 0..3 {
                dof_q[(i, alpha)] = basis.eval(alpha, p);
            }
        }
        let mut dof_v = DMatrix::zeros(ndof, 6);
        for jb in 0..6 {
            let (alpha, comp) = (jb / 2, jb % 2);
            for (i, p) in pts.iter().enumerate() {
                let val = basis.eval(alpha, p);
                if comp == 0 {
                    dof_v[(2 * i, jb)] = val;
                } else {
                    dof_v[(2 * i + 1, jb)] = val;
                }
            }
            for (i, e) in geom.edges.iter().enumerate() {
                let val = basis.eval(alpha, &e.midpoint);
                let vec = if comp == 0 {
                    Vector2::new(val, 0.0)
                } else {
                    Vector2::new(0.0, val)
                };
                dof_v[(2 * nv + i, jb)] = vec.dot(&e.normal);
            }
        }

        Ok(ProjectorPack {
            nv,
            geom,
            basis,
            quad,
            h_mat,
            pi_nabla,
            pi0,
            pi_eps,
            pi00,
            div_row,
            dof_q,
            dof_v,
        })
    }

    /// Unscaled strain-energy Gram matrix `∫ ε(φ_i):ε(φ_j)` of the vector
    /// monomial basis (multiply by 2μ for the elastic form).
    pub fn strain_gram(&self) -> DMatrix<f64> {
        let h2 = self.geom.diameter * self.geom.diameter;
        let mut g = DMatrix::zeros(6, 6);
        for i in 0..6 {
            let ei = eps_table(i);
            for j in 0..6 {
                let ej = eps_table(j);
                g[(i, j)] = self.geom.area * (ei.transpose() * ej).trace() / h2;
            }
        }
        g
    }

    /// σ (I - D Π)^T (I - D Π); `S0` additionally carries the cell area.
    pub fn build_stabilization(&self, kind: StabKind, sigma: f64) -> Result<DMatrix<f64>> {
        if sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "stabilization scale must be positive, got {sigma}"
            )));
        }
        let (proj, dof): (&DMatrix<f64>, &DMatrix<f64>) = match kind {
            StabKind::S1 => (&self.pi_eps, &self.dof_v),
            StabKind::S2 => (&self.pi_nabla, &self.dof_q),
            StabKind::S0 => (&self.pi0, &self.dof_q),
        };
        let n = dof.nrows();
        let mut m = DMatrix::identity(n, n);
        m -= dof * proj;
        let scale = match kind {
            StabKind::S0 => sigma * self.geom.area,
            _ => sigma,
        };
        Ok(scale * m.transpose() * m)
    }

    /// Evaluate the projected displacement field (a vector P1 polynomial)
    /// from its 6 coefficients at a point.
    pub fn eval_vec_poly(&self, coeffs: &DVector<f64>, p: &Point2<f64>) -> Vector2<f64> {
        let mut out = Vector2::zeros();
        for jb in 0..6 {
            let (alpha, comp) = (jb / 2, jb % 2);
            let val = coeffs[jb] * self.basis.eval(alpha, p);
            if comp == 0 {
                out.x += val;
            } else {
                out.y += val;
            }
        }
        out
    }

    /// Constant 2x2 gradient of the projected displacement field.
    pub fn vec_poly_gradient(&self, coeffs: &DVector<f64>) -> Matrix2<f64> {
        let h = self.geom.diameter;
        // Rows: field component; columns: derivative direction.
        Matrix2::new(
            coeffs[2] / h,
            coeffs[4] / h,
            coeffs[3] / h,
            coeffs[5] / h,
        )
    }

    /// Evaluate a scalar P1 polynomial from its 3 coefficients.
    pub fn eval_scalar_poly(&self, coeffs: &DVector<f64>, p: &Point2<f64>) -> f64 {
        (0..3).map(|a| coeffs[a] * self.basis.eval(a, p)).sum()
    }

    /// Constant gradient of a scalar P1 polynomial.
    pub fn scalar_poly_gradient(&self, coeffs: &DVector<f64>) -> Vector2<f64> {
        let h = self.geom.diameter;
        Vector2::new(coeffs[1] / h, coeffs[2] / h)
    }

    pub fn rigid_basis(&self) -> RigidBodyBasis {
        RigidBodyBasis {
            centroid: self.geom.centroid,
            h: self.geom.diameter,
        }
    }

    /// Local displacement dof vector of a smooth field: vertex values and
    /// midpoint outward-normal values.
    pub fn interpolate_displacement(
        &self,
        pts: &[Point2<f64>],
        f: impl Fn(&Point2<f64>) -> Vector2<f64>,
    ) -> DVector<f64> {
        let nv = self.nv;
        let mut dofs = DVector::zeros(3 * nv);
        for (i, p) in pts.iter().enumerate() {
            let v = f(p);
            dofs[2 * i] = v.x;
            dofs[2 * i + 1] = v.y;
        }
        for (i, e) in self.geom.edges.iter().enumerate() {
            dofs[2 * nv + i] = f(&e.midpoint).dot(&e.normal);
        }
        dofs
    }
}
