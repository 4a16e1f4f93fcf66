//! Polygonal mesh representation and per-element geometry.
//!
//! A [`PolyMesh`] stores vertices, counter-clockwise cell loops, and a
//! deduplicated edge table with cell adjacency. Boundary edges carry a
//! [`BoundaryTag`] that downstream modules map to boundary conditions.
//! Meshes are immutable after construction (re-tagging excepted) and safe
//! to share across threads.

use std::collections::HashMap;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};

pub mod generators;

/// Label attached to each boundary edge. The meaning (clamped displacement,
/// prescribed traction, ...) is assigned per experiment by a boundary-condition
/// specification; the mesh only stores the partition of the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Clamped-type boundary piece (displacement fixed, no fluid flux).
    GammaClamped,
    /// Traction-type boundary piece (stress prescribed, pressure fixed).
    SigmaTraction,
    /// Experiment-specific label.
    User(u32),
}

/// Deduplicated edge: canonical vertex pair (`vertices[0] < vertices[1]`)
/// plus the one or two adjacent cells.
#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub cells: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells[1].is_none()
    }
}

/// Conforming polygonal mesh of a planar domain.
#[derive(Clone, Debug)]
pub struct PolyMesh {
    pub vertices: Vec<Point2<f64>>,
    /// Counter-clockwise vertex loops, one per cell.
    pub cells: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    /// Per cell: edge index for the loop edge `(v_i, v_{i+1})`.
    pub cell_edges: Vec<Vec<usize>>,
    /// Tag per edge; `None` on interior edges, `Some` on every boundary edge.
    pub boundary_tags: Vec<Option<BoundaryTag>>,
}

/// Geometry of one cell: area, centroid, diameter, and per-edge frames.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    pub centroid: Point2<f64>,
    pub diameter: f64,
    /// One entry per loop edge `(v_i, v_{i+1})`.
    pub edges: Vec<EdgeGeometry>,
    pub vertex_count: usize,
}

/// Length, outward unit normal, unit tangent, and midpoint of one cell edge.
#[derive(Clone, Copy, Debug)]
pub struct EdgeGeometry {
    pub length: f64,
    pub normal: Vector2<f64>,
    pub tangent: Vector2<f64>,
    pub midpoint: Point2<f64>,
}

/// Output of [`PolyMesh::check_regularity`].
#[derive(Clone, Debug)]
pub struct MeshRegularityReport {
    /// Per cell: shortest edge divided by the cell diameter.
    pub min_edge_to_diameter: Vec<f64>,
    /// Per cell: true when the polygon is convex.
    pub convex: Vec<bool>,
    /// Largest cell diameter.
    pub h: f64,
    /// Cells whose edge ratio falls below the threshold.
    pub violations: Vec<usize>,
    pub threshold: f64,
}

impl MeshRegularityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn signed_area(vertices: &[Point2<f64>], loop_: &[usize]) -> f64 {
    let n = loop_.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = vertices[loop_[i]];
        let q = vertices[loop_[(i + 1) % n]];
        a += p.x * q.y - q.x * p.y;
    }
    0.5 * a
}

/// Proper segment-intersection test for polygon simplicity. Cells are small,
/// so the quadratic pair loop is fine.
fn is_simple(vertices: &[Point2<f64>], loop_: &[usize]) -> bool {
    let n = loop_.len();
    if n < 3 {
        return false;
    }
    let seg = |i: usize| {
        (
            vertices[loop_[i]],
            vertices[loop_[(i + 1) % n]],
        )
    };
    let orient = |a: Point2<f64>, b: Point2<f64>, c: Point2<f64>| {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    };
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip adjacent segments (they share an endpoint).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            let d1 = orient(a, b, c);
            let d2 = orient(a, b, d);
            let d3 = orient(c, d, a);
            let d4 = orient(c, d, b);
            if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                return false;
            }
        }
    }
    true
}

impl PolyMesh {
    /// Build a mesh from vertices and counter-clockwise cell loops, deriving
    /// the edge table, and tag boundary edges with `tagger(midpoint)`.
    pub fn build(
        vertices: Vec<Point2<f64>>,
        cells: Vec<Vec<usize>>,
        tagger: impl Fn(Point2<f64>) -> BoundaryTag,
    ) -> Result<PolyMesh> {
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());

        for (c, loop_) in cells.iter().enumerate() {
            if loop_.len() < 3 {
                return Err(Error::MeshIntegrity(format!(
                    "cell {c} has fewer than 3 vertices"
                )));
            }
            let mut ids = Vec::with_capacity(loop_.len());
            for i in 0..loop_.len() {
                let a = loop_[i];
                let b = loop_[(i + 1) % loop_.len()];
                if a == b || a >= vertices.len() || b >= vertices.len() {
                    return Err(Error::MeshIntegrity(format!(
                        "cell {c} has an invalid edge ({a}, {b})"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cells: [None, None],
                    });
                    edges.len() - 1
                });
                let e = &mut edges[id];
                if e.cells[0].is_none() {
                    e.cells[0] = Some(c);
                } else if e.cells[1].is_none() {
                    e.cells[1] = Some(c);
                } else {
                    return Err(Error::MeshIntegrity(format!(
                        "edge ({}, {}) has more than two adjacent cells",
                        key.0, key.1
                    )));
                }
                ids.push(id);
            }
            cell_edges.push(ids);
        }

        let boundary_tags = edges
            .iter()
            .map(|e| {
                if e.is_boundary() {
                    let mid = Point2::from(
                        (vertices[e.vertices[0]].coords + vertices[e.vertices[1]].coords) * 0.5,
                    );
                    Some(tagger(mid))
                } else {
                    None
                }
            })
            .collect();

        let mesh = PolyMesh {
            vertices,
            cells,
            edges,
            cell_edges,
            boundary_tags,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Reassign boundary tags (the geometry is untouched).
    pub fn retag_boundary(&mut self, tagger: impl Fn(Point2<f64>) -> BoundaryTag) {
        for (i, e) in self.edges.iter().enumerate() {
            if e.is_boundary() {
                let mid = Point2::from(
                    (self.vertices[e.vertices[0]].coords + self.vertices[e.vertices[1]].coords)
                        * 0.5,
                );
                self.boundary_tags[i] = Some(tagger(mid));
            }
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        (self.vertices[e.vertices[1]] - self.vertices[e.vertices[0]]).norm()
    }

    pub fn edge_midpoint(&self, edge: usize) -> Point2<f64> {
        let e = &self.edges[edge];
        Point2::from(
            (self.vertices[e.vertices[0]].coords + self.vertices[e.vertices[1]].coords) * 0.5,
        )
    }

    /// Unit normal of the canonical edge direction `v0 -> v1` rotated to the
    /// right. Every global edge degree of freedom refers to this normal; the
    /// per-cell outward normal differs from it by the sign returned from
    /// [`PolyMesh::edge_sign`].
    pub fn edge_global_normal(&self, edge: usize) -> Vector2<f64> {
        let e = &self.edges[edge];
        let t = (self.vertices[e.vertices[1]] - self.vertices[e.vertices[0]]).normalize();
        Vector2::new(t.y, -t.x)
    }

    /// +1 when cell `c` traverses edge `local` in canonical direction (so its
    /// outward normal equals the global normal), -1 otherwise.
    pub fn edge_sign(&self, cell: usize, local: usize) -> f64 {
        let loop_ = &self.cells[cell];
        let a = loop_[local];
        let b = loop_[(local + 1) % loop_.len()];
        if a < b {
            1.0
        } else {
            -1.0
        }
    }

    /// Per-cell geometric quantities. Fails on degenerate (non-positive area)
    /// polygons.
    pub fn element_geometry(&self, cell: usize) -> Result<ElementGeometry> {
        let loop_ = self
            .cells
            .get(cell)
            .ok_or_else(|| Error::InvalidArgument(format!("cell index {cell} out of range")))?;
        let n = loop_.len();
        let area = signed_area(&self.vertices, loop_);
        if area <= 0.0 {
            return Err(Error::MeshIntegrity(format!(
                "cell {cell} has non-positive area {area:.3e}"
            )));
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.vertices[loop_[i]];
            let q = self.vertices[loop_[(i + 1) % n]];
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        let centroid = Point2::new(cx / (6.0 * area), cy / (6.0 * area));
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                diameter =
                    diameter.max((self.vertices[loop_[i]] - self.vertices[loop_[j]]).norm());
            }
        }
        let edges = (0..n)
            .map(|i| {
                let p = self.vertices[loop_[i]];
                let q = self.vertices[loop_[(i + 1) % n]];
                let d = q - p;
                let length = d.norm();
                let tangent = d / length;
                EdgeGeometry {
                    length,
                    // Outward normal of a ccw loop.
                    normal: Vector2::new(tangent.y, -tangent.x),
                    tangent,
                    midpoint: Point2::from((p.coords + q.coords) * 0.5),
                }
            })
            .collect();
        Ok(ElementGeometry {
            area,
            centroid,
            diameter,
            edges,
            vertex_count: n,
        })
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        (0..self.cell_count())
            .map(|c| self.element_geometry(c).map(|g| g.diameter).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.cell_count())
            .map(|c| signed_area(&self.vertices, &self.cells[c]))
            .sum()
    }

    /// Edge-ratio regularity check; convexity is reported alongside as an
    /// inexpensive star-shapedness proxy. Violations are reported, not fatal.
    pub fn check_regularity(&self, threshold: f64) -> MeshRegularityReport {
        let mut min_ratio = Vec::with_capacity(self.cell_count());
        let mut convex = Vec::with_capacity(self.cell_count());
        let mut violations = Vec::new();
        let mut h: f64 = 0.0;
        for c in 0..self.cell_count() {
            let geom = self.element_geometry(c).expect("validated mesh");
            let shortest = geom
                .edges
                .iter()
                .map(|e| e.length)
                .fold(f64::INFINITY, f64::min);
            let ratio = shortest / geom.diameter;
            min_ratio.push(ratio);
            if ratio < threshold {
                violations.push(c);
            }
            h = h.max(geom.diameter);

            let loop_ = &self.cells[c];
            let n = loop_.len();
            let mut is_convex = true;
            for i in 0..n {
                let a = self.vertices[loop_[i]];
                let b = self.vertices[loop_[(i + 1) % n]];
                let d = self.vertices[loop_[(i + 2) % n]];
                let cross = (b.x - a.x) * (d.y - b.y) - (b.y - a.y) * (d.x - b.x);
                if cross < -1e-12 * geom.diameter * geom.diameter {
                    is_convex = false;
                    break;
                }
            }
            convex.push(is_convex);
        }
        MeshRegularityReport {
            min_edge_to_diameter: min_ratio,
            convex,
            h,
            violations,
            threshold,
        }
    }

    /// Integrity checks: simple positively-oriented cells, two cells per
    /// interior edge with opposite induced orientation, tagged boundary.
    pub fn validate(&self) -> Result<()> {
        for (c, loop_) in self.cells.iter().enumerate() {
            if signed_area(&self.vertices, loop_) <= 0.0 {
                return Err(Error::MeshIntegrity(format!(
                    "cell {c} is not counter-clockwise or is degenerate"
                )));
            }
            if !is_simple(&self.vertices, loop_) {
                return Err(Error::MeshIntegrity(format!("cell {c} self-intersects")));
            }
        }
        // Interior edges must be traversed once in each direction.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for loop_ in &self.cells {
            let n = loop_.len();
            for i in 0..n {
                let key = (loop_[i], loop_[(i + 1) % n]);
                *directed.entry(key).or_insert(0) += 1;
                if directed[&key] > 1 {
                    return Err(Error::MeshIntegrity(format!(
                        "directed edge ({}, {}) appears twice; inconsistent orientation",
                        key.0, key.1
                    )));
                }
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            match e.cells {
                [Some(_), Some(_)] => {
                    let fwd = directed.contains_key(&(e.vertices[0], e.vertices[1]));
                    let bwd = directed.contains_key(&(e.vertices[1], e.vertices[0]));
                    if !(fwd && bwd) {
                        return Err(Error::MeshIntegrity(format!(
                            "interior edge {i} lacks opposite orientations"
                        )));
                    }
                }
                [Some(_), None] => {
                    if self.boundary_tags[i].is_none() {
                        return Err(Error::MeshIntegrity(format!(
                            "boundary edge {i} is untagged"
                        )));
                    }
                }
                _ => {
                    return Err(Error::MeshIntegrity(format!("edge {i} has no adjacent cell")));
                }
            }
        }
        Ok(())
    }

    /// Boundary edges with their tags.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, BoundaryTag)> + '_ {
        self.edges.iter().enumerate().filter_map(|(i, e)| {
            if e.is_boundary() {
                Some((i, self.boundary_tags[i].expect("validated mesh")))
            } else {
                None
            }
        })
    }
}
