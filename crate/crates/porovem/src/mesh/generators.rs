//! Generators for the three mesh families used by the verification studies:
//! uniform triangles, randomly distorted quadrilaterals, and a hexagonal
//! tiling clipped to the unit square. All generators are deterministic in
//! their inputs.

use std::collections::HashMap;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, PolyMesh};

fn all_clamped(_: Point2<f64>) -> BoundaryTag {
    BoundaryTag::GammaClamped
}

/// Uniform triangulation of the unit square: an `n` by `n` grid of squares,
/// each split along the same diagonal. Produces `2n^2` triangles on
/// `(n+1)^2` vertices.
pub fn generate_triangles(n: usize) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("subdivision count must be >= 1".into()));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            // Diagonal from lower-left to upper-right in every square.
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            cells.push(vec![vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    PolyMesh::build(vertices, cells, all_clamped)
}

/// SplitMix64: a counter-based generator keyed by (seed, counter) so vertex
/// perturbations are reproducible across platforms and thread counts.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn unit_uniform(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(counter));
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// `n` by `n` quadrilateral grid on the unit square with interior vertices
/// displaced by a deterministic pseudo-random offset bounded by
/// `distortion / n`. Boundary vertices stay in place. If a perturbation
/// tangles a cell the offsets are halved and the mesh rebuilt, up to ten
/// times.
pub fn generate_distorted_quads(n: usize, distortion: f64, seed: u64) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("subdivision count must be >= 1".into()));
    }
    if !(0.0..0.5).contains(&distortion) {
        return Err(Error::InvalidArgument(format!(
            "distortion must lie in [0, 0.5), got {distortion}"
        )));
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut scale = distortion / n as f64;
    for _attempt in 0..10 {
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let mut p = Point2::new(i as f64 / n as f64, j as f64 / n as f64);
                let interior = i > 0 && i < n && j > 0 && j < n;
                if interior && scale > 0.0 {
                    let idx = vid(i, j) as u64;
                    p.x += scale * (2.0 * unit_uniform(seed, 2 * idx) - 1.0);
                    p.y += scale * (2.0 * unit_uniform(seed, 2 * idx + 1) - 1.0);
                }
                vertices.push(p);
            }
        }
        let mut cells = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        match PolyMesh::build(vertices, cells, all_clamped) {
            Ok(mesh) => return Ok(mesh),
            Err(_) if scale > 0.0 => scale *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::MeshIntegrity(
        "distorted quad generation kept producing tangled cells after 10 retries".into(),
    ))
}

/// Hexagonal tiling of the unit square, with boundary cells clipped by the
/// square. `n` counts hexagon rows across the height; the interior cell
/// diameter is `4 / (3 n)`.
///
/// The tiling is laid out so the rows at `y = 0` and `y = 1` are cut through
/// their centers, which keeps every clipped cell between a triangle and a
/// hexagon. Vertices shared between neighboring hexagons are generated from
/// one integer lattice so the mesh is exactly conforming.
pub fn generate_hexagons(n: usize) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("resolution must be >= 1".into()));
    }
    let s = 2.0 / (3.0 * n as f64); // hexagon side
    let half_w = 3.0_f64.sqrt() * s / 2.0;
    // Pre-clip vertices live on the lattice (ix * half_w, iy * s / 2); using
    // integer indices makes shared vertices bit-identical across cells.
    let coord = |ix: i64, iy: i64| Point2::new(ix as f64 * half_w, iy as f64 * s * 0.5);

    // Point-up hexagon centered at lattice (cx, cy): vertex offsets in
    // (ix, iy) units.
    const OFFSETS: [(i64, i64); 6] = [(0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1), (1, 1)];

    let cols = (1.0 / (2.0 * half_w)).ceil() as i64 + 2;
    let mut raw_cells: Vec<Vec<Point2<f64>>> = Vec::new();
    for row in 0..=(n as i64) {
        let cy = 3 * row;
        let x_shift = if row % 2 == 0 { 0 } else { 1 };
        for col in -2..=cols {
            let cx = 2 * col + x_shift;
            let hex: Vec<Point2<f64>> = OFFSETS
                .iter()
                .map(|&(dx, dy)| coord(cx + dx, cy + dy))
                .collect();
            if let Some(clipped) = clip_to_unit_square(&hex) {
                raw_cells.push(clipped);
            }
        }
    }

    // Weld identical coordinates into shared vertex ids.
    let mut vertex_ids: HashMap<(u64, u64), usize> = HashMap::new();
    let mut vertices: Vec<Point2<f64>> = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for poly in raw_cells {
        let mut loop_ = Vec::with_capacity(poly.len());
        for p in poly {
            let key = (p.x.to_bits(), p.y.to_bits());
            let id = *vertex_ids.entry(key).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            });
            loop_.push(id);
        }
        cells.push(loop_);
    }
    PolyMesh::build(vertices, cells, all_clamped)
}

/// Sutherland-Hodgman clip of a convex polygon against the unit square.
/// Returns `None` for empty intersections. Intersections with the clip lines
/// are computed from lexicographically sorted segment endpoints so the two
/// cells sharing a cut edge produce bit-identical cut points.
fn clip_to_unit_square(poly: &[Point2<f64>]) -> Option<Vec<Point2<f64>>> {
    #[derive(Clone, Copy)]
    enum Side {
        XMin,
        XMax,
        YMin,
        YMax,
    }
    let inside = |p: &Point2<f64>, side: Side| match side {
        Side::XMin => p.x >= 0.0,
        Side::XMax => p.x <= 1.0,
        Side::YMin => p.y >= 0.0,
        Side::YMax => p.y <= 1.0,
    };
    let intersect = |a: &Point2<f64>, b: &Point2<f64>, side: Side| {
        // Canonical endpoint order keeps the computation identical for the
        // neighbor traversing the same segment in reverse.
        let (p, q) = if (a.x, a.y) <= (b.x, b.y) { (a, b) } else { (b, a) };
        match side {
            Side::XMin => {
                let t = (0.0 - p.x) / (q.x - p.x);
                Point2::new(0.0, p.y + t * (q.y - p.y))
            }
            Side::XMax => {
                let t = (1.0 - p.x) / (q.x - p.x);
                Point2::new(1.0, p.y + t * (q.y - p.y))
            }
            Side::YMin => {
                let t = (0.0 - p.y) / (q.y - p.y);
                Point2::new(p.x + t * (q.x - p.x), 0.0)
            }
            Side::YMax => {
                let t = (1.0 - p.y) / (q.y - p.y);
                Point2::new(p.x + t * (q.x - p.x), 1.0)
            }
        }
    };

    let mut current = poly.to_vec();
    for side in [Side::XMin, Side::XMax, Side::YMin, Side::YMax] {
        if current.is_empty() {
            return None;
        }
        let mut next = Vec::with_capacity(current.len() + 1);
        for i in 0..current.len() {
            let a = current[i];
            let b = current[(i + 1) % current.len()];
            let a_in = inside(&a, side);
            let b_in = inside(&b, side);
            match (a_in, b_in) {
                (true, true) => next.push(b),
                (true, false) => next.push(intersect(&a, &b, side)),
                (false, true) => {
                    next.push(intersect(&a, &b, side));
                    next.push(b);
                }
                (false, false) => {}
            }
        }
        current = next;
    }
    // Remove consecutive duplicates (a vertex exactly on a clip line is
    // emitted twice).
    current.dedup_by(|a, b| a == b);
    if current.len() > 1 && current.first() == current.last() {
        current.pop();
    }
    if current.len() < 3 {
        return None;
    }
    // Discard degenerate slivers produced by grazing intersections.
    let mut area = 0.0;
    for i in 0..current.len() {
        let p = current[i];
        let q = current[(i + 1) % current.len()];
        area += p.x * q.y - q.x * p.y;
    }
    if area.abs() < 1e-14 {
        return None;
    }
    Some(current)
}
