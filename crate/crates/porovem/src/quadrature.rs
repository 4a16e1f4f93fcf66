//! Scaled monomial bases and polygon/edge quadrature.
//!
//! Every projector and bilinear form integrates products of low-degree
//! polynomials, so a single fixed rule of exactness 4 on polygons (centroid
//! fan with a degree-4 symmetric triangle rule) covers the whole solver.
//! Edge integrals use the trapezoid rule for P1 traces and the 3-point
//! Gauss-Lobatto rule for P2/P3 traces; both include the edge endpoints as
//! nodes, which is what makes virtual functions integrable from their
//! degrees of freedom.

use nalgebra::{DMatrix, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::ElementGeometry;

/// Monomials `m_a(x) = ((x - x_K)/h_K)^a` ordered `[1, ξ, η, ξ², ξη, η²]`.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    pub centroid: Point2<f64>,
    pub h: f64,
    pub degree: usize,
}

impl MonomialBasis {
    pub fn new(geom: &ElementGeometry, degree: usize) -> Self {
        assert!(degree <= 2, "only degrees 0..=2 are supported");
        MonomialBasis {
            centroid: geom.centroid,
            h: geom.diameter,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        match self.degree {
            0 => 1,
            1 => 3,
            _ => 6,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn local(&self, p: &Point2<f64>) -> (f64, f64) {
        ((p.x - self.centroid.x) / self.h, (p.y - self.centroid.y) / self.h)
    }

    pub fn eval(&self, alpha: usize, p: &Point2<f64>) -> f64 {
        let (xi, eta) = self.local(p);
        match alpha {
            0 => 1.0,
            1 => xi,
            2 => eta,
            3 => xi * xi,
            4 => xi * eta,
            5 => eta * eta,
            _ => panic!("monomial index out of range"),
        }
    }

    /// Gradient of `m_alpha`; constant for the linear monomials.
    pub fn grad(&self, alpha: usize, p: &Point2<f64>) -> Vector2<f64> {
        let (xi, eta) = self.local(p);
        let h = self.h;
        match alpha {
            0 => Vector2::zeros(),
            1 => Vector2::new(1.0 / h, 0.0),
            2 => Vector2::new(0.0, 1.0 / h),
            3 => Vector2::new(2.0 * xi / h, 0.0),
            4 => Vector2::new(eta / h, xi / h),
            5 => Vector2::new(0.0, 2.0 * eta / h),
            _ => panic!("monomial index out of range"),
        }
    }
}

/// Quadrature over a polygonal cell: triangulate (centroid fan when the fan
/// is valid, ear clipping otherwise) and place a degree-4 symmetric rule on
/// each triangle.
#[derive(Clone, Debug)]
pub struct PolygonQuadrature {
    pub points: Vec<Point2<f64>>,
    pub weights: Vec<f64>,
}

/// Degree-4 symmetric triangle rule (6 points), weights relative to area.
const TRI_RULE_4: [(f64, f64, f64); 6] = [
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
    (0.091576213509771, 0.816847572980459, 0.109951743655322),
    (0.091576213509771, 0.091576213509771, 0.109951743655322),
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.445948490915965, 0.108103018168070, 0.223381589678011),
    (0.445948490915965, 0.445948490915965, 0.223381589678011),
];

fn triangle_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

fn push_triangle_rule(
    a: &Point2<f64>,
    b: &Point2<f64>,
    c: &Point2<f64>,
    points: &mut Vec<Point2<f64>>,
    weights: &mut Vec<f64>,
) {
    let area = triangle_area(a, b, c);
    for &(l1, l2, w) in &TRI_RULE_4 {
        let l3 = 1.0 - l1 - l2;
        points.push(Point2::new(
            l1 * a.x + l2 * b.x + l3 * c.x,
            l1 * a.y + l2 * b.y + l3 * c.y,
        ));
        weights.push(w * area);
    }
}

/// Triangulate a simple polygon by ear clipping. Used when the centroid fan
/// would create inverted triangles (non-convex cells).
fn ear_clip(vertices: &[Point2<f64>]) -> Result<Vec<[Point2<f64>; 3]>> {
    let mut idx: Vec<usize> = (0..vertices.len()).collect();
    let mut triangles = Vec::with_capacity(vertices.len() - 2);
    let mut guard = 0usize;
    while idx.len() > 3 {
        guard += 1;
        if guard > 10_000 {
            return Err(Error::MeshIntegrity("ear clipping failed to terminate".into()));
        }
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let a = vertices[idx[(i + n - 1) % n]];
            let b = vertices[idx[i]];
            let c = vertices[idx[(i + 1) % n]];
            if triangle_area(&a, &b, &c) <= 0.0 {
                continue;
            }
            // An ear must not contain any other polygon vertex.
            let contains_other = idx.iter().enumerate().any(|(k, &v)| {
                if k == (i + n - 1) % n || k == i || k == (i + 1) % n {
                    return false;
                }
                let p = vertices[v];
                let d1 = triangle_area(&a, &b, &p);
                let d2 = triangle_area(&b, &c, &p);
                let d3 = triangle_area(&c, &a, &p);
                d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
            });
            if contains_other {
                continue;
            }
            triangles.push([a, b, c]);
            idx.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(Error::MeshIntegrity("polygon could not be ear-clipped".into()));
        }
    }
    triangles.push([vertices[idx[0]], vertices[idx[1]], vertices[idx[2]]]);
    Ok(triangles)
}

impl PolygonQuadrature {
    /// Rule of exactness 4 on the polygon with the given vertex loop.
    pub fn build(geom: &ElementGeometry, vertices: &[Point2<f64>]) -> Result<PolygonQuadrature> {
        let n = vertices.len();
        let fan_ok = (0..n).all(|i| {
            triangle_area(&geom.centroid, &vertices[i], &vertices[(i + 1) % n]) > 0.0
        });
        let mut points = Vec::with_capacity(6 * n);
        let mut weights = Vec::with_capacity(6 * n);
        if fan_ok {
            for i in 0..n {
                push_triangle_rule(
                    &geom.centroid,
                    &vertices[i],
                    &vertices[(i + 1) % n],
                    &mut points,
                    &mut weights,
                );
            }
        } else {
            for tri in ear_clip(vertices)? {
                push_triangle_rule(&tri[0], &tri[1], &tri[2], &mut points, &mut weights);
            }
        }
        Ok(PolygonQuadrature { points, weights })
    }

    pub fn integrate(&self, f: impl Fn(&Point2<f64>) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Moment matrix `H_ab = ∫_K m_a m_b`. Symmetric positive definite for a
/// valid cell and rule.
pub fn monomial_moments(basis: &MonomialBasis, quad: &PolygonQuadrature) -> Result<DMatrix<f64>> {
    let k = basis.len();
    let mut h = DMatrix::zeros(k, k);
    for (p, w) in quad.points.iter().zip(&quad.weights) {
        for a in 0..k {
            let ma = basis.eval(a, p);
            for b in a..k {
                let v = w * ma * basis.eval(b, p);
                h[(a, b)] += v;
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    // H must be SPD; a failure here means the geometry or rule is broken.
    if h.clone().cholesky().is_none() {
        return Err(Error::MeshIntegrity(
            "moment matrix is not positive definite".into(),
        ));
    }
    Ok(h)
}

/// Edge quadrature rules on the reference interval [0, 1]. Both rules place
/// nodes at the endpoints; Gauss-Lobatto adds the midpoint, matching exactly
/// the boundary degrees of freedom of the displacement space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRule {
    /// Exact for P1 traces.
    Trapezoid,
    /// Three-point Gauss-Lobatto rule, exact for P3 traces.
    GaussLobatto3,
}

impl EdgeRule {
    pub fn nodes_weights(&self) -> (&'static [f64], &'static [f64]) {
        match self {
            EdgeRule::Trapezoid => (&[0.0, 1.0], &[0.5, 0.5]),
            EdgeRule::GaussLobatto3 => (&[0.0, 0.5, 1.0], &[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
        }
    }
}

/// Integrate a scalar function along the segment `p0 -> p1`.
pub fn edge_integral(
    p0: &Point2<f64>,
    p1: &Point2<f64>,
    rule: EdgeRule,
    f: impl Fn(&Point2<f64>) -> f64,
) -> f64 {
    let (nodes, weights) = rule.nodes_weights();
    let length = (p1 - p0).norm();
    let mut acc = 0.0;
    for (t, w) in nodes.iter().zip(weights) {
        let p = Point2::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y));
        acc += w * f(&p);
    }
    acc * length
}
