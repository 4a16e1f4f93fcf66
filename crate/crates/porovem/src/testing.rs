//! Independent reference computations used by the test suites: brute-force
//! refinement quadrature and high-order segment quadrature. These deliberately
//! avoid the solver's own quadrature shortcuts so they can serve as oracles.

#![doc(hidden)]

use nalgebra::Point2;

fn tri_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

/// Integrate `f` over a simple polygon by splitting every fan (or ear)
/// triangle into `m^2` congruent sub-triangles and applying a degree-4 rule
/// on each. With `m = 100` a convex cell is covered by 60000 points.
pub fn subdivided_integral(
    polygon: &[Point2<f64>],
    m: usize,
    f: impl Fn(&Point2<f64>) -> f64,
) -> f64 {
    let triangles = triangulate(polygon);
    let rule: [(f64, f64, f64); 6] = [
        (0.816847572980459, 0.091576213509771, 0.109951743655322),
        (0.091576213509771, 0.816847572980459, 0.109951743655322),
        (0.091576213509771, 0.091576213509771, 0.109951743655322),
        (0.108103018168070, 0.445948490915965, 0.223381589678011),
        (0.445948490915965, 0.108103018168070, 0.223381589678011),
        (0.445948490915965, 0.445948490915965, 0.223381589678011),
    ];
    // Kahan summation: the plain running sum loses ~1e-11 over the ~1e5
    // summands, which would mask the differences the oracle exists to catch.
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut add = |v: f64, total: &mut f64| {
        let y = v - comp;
        let t = *total + y;
        comp = (t - *total) - y;
        *total = t;
    };
    for tri in &triangles {
        let [a, b, c] = tri;
        // Barycentric refinement into m^2 sub-triangles.
        for i in 0..m {
            for j in 0..(m - i) {
                let corners = |di: usize, dj: usize| {
                    let l1 = (i + di) as f64 / m as f64;
                    let l2 = (j + dj) as f64 / m as f64;
                    let l3 = 1.0 - l1 - l2;
                    Point2::new(
                        l1 * a.x + l2 * b.x + l3 * c.x,
                        l1 * a.y + l2 * b.y + l3 * c.y,
                    )
                };
                let mut subs = vec![[corners(1, 0), corners(0, 1), corners(0, 0)]];
                if j < m - i - 1 {
                    subs.push([corners(1, 0), corners(1, 1), corners(0, 1)]);
                }
                for sub in subs {
                    let area = tri_area(&sub[0], &sub[1], &sub[2]).abs();
                    for &(l1, l2, w) in &rule {
                        let l3 = 1.0 - l1 - l2;
                        let p = Point2::new(
                            l1 * sub[0].x + l2 * sub[1].x + l3 * sub[2].x,
                            l1 * sub[0].y + l2 * sub[1].y + l3 * sub[2].y,
                        );
                        add(w * area * f(&p), &mut total);
                    }
                }
            }
        }
    }
    total
}

fn triangulate(polygon: &[Point2<f64>]) -> Vec<[Point2<f64>; 3]> {
    let n = polygon.len();
    let cx = polygon.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let cy = polygon.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let c = Point2::new(cx, cy);
    let fan_ok = (0..n).all(|i| tri_area(&c, &polygon[i], &polygon[(i + 1) % n]) > 0.0);
    if fan_ok {
        (0..n)
            .map(|i| [c, polygon[i], polygon[(i + 1) % n]])
            .collect()
    } else {
        // Simple ear clipping; test polygons are small.
        let mut idx: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        while idx.len() > 3 {
            let k = idx.len();
            let mut done = false;
            for i in 0..k {
                let a = polygon[idx[(i + k - 1) % k]];
                let b = polygon[idx[i]];
                let cc = polygon[idx[(i + 1) % k]];
                if tri_area(&a, &b, &cc) <= 0.0 {
                    continue;
                }
                let contains = idx.iter().enumerate().any(|(t, &v)| {
                    if t == (i + k - 1) % k || t == i || t == (i + 1) % k {
                        return false;
                    }
                    let p = polygon[v];
                    tri_area(&a, &b, &p) >= 0.0
                        && tri_area(&b, &cc, &p) >= 0.0
                        && tri_area(&cc, &a, &p) >= 0.0
                });
                if !contains {
                    out.push([a, b, cc]);
                    idx.remove(i);
                    done = true;
                    break;
                }
            }
            assert!(done, "triangulation failed");
        }
        out.push([polygon[idx[0]], polygon[idx[1]], polygon[idx[2]]]);
        out
    }
}

/// 16-point Gauss-Legendre quadrature along the segment `p0 -> p1`,
/// for boundary-integral oracles.
pub fn dense_edge_integral(
    p0: &Point2<f64>,
    p1: &Point2<f64>,
    f: impl Fn(&Point2<f64>) -> f64,
) -> f64 {
    // Nodes/weights on [-1, 1].
    const X: [f64; 8] = [
        0.0950125098376374,
        0.2816035507792589,
        0.4580167776572274,
        0.6178762444026438,
        0.755404408355003,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ];
    const W: [f64; 8] = [
        0.1894506104550685,
        0.1826034150449236,
        0.1691565193950025,
        0.1495959888165767,
        0.1246289712555339,
        0.0951585116824928,
        0.0622535239386479,
        0.0271524594117541,
    ];
    let mid = Point2::new(0.5 * (p0.x + p1.x), 0.5 * (p0.y + p1.y));
    let half = Point2::new(0.5 * (p1.x - p0.x), 0.5 * (p1.y - p0.y));
    let length = (p1 - p0).norm();
    let mut acc = 0.0;
    for k in 0..8 {
        for s in [-1.0, 1.0] {
            let t = s * X[k];
            let p = Point2::new(mid.x + t * half.x, mid.y + t * half.y);
            acc += W[k] * f(&p);
        }
    }
    acc * 0.5 * length
}

/// Central-difference gradient of a scalar field, for cross-checking
/// hand-coded derivatives in manufactured solutions.
pub fn fd_gradient(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> (f64, f64) {
    (
        (f(x + h, y) - f(x - h, y)) / (2.0 * h),
        (f(x, y + h) - f(x, y - h)) / (2.0 * h),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subdivision_integrates_polynomials() {
        let square = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let v = subdivided_integral(&square, 10, |p| p.x * p.y);
        assert!((v - 0.25).abs() < 1e-13);
    }

    #[test]
    fn dense_edge_rule_is_accurate() {
        let v = dense_edge_integral(
            &Point2::new(0.0, 0.0),
            &Point2::new(1.0, 0.0),
            |p| (3.0 * p.x).sin(),
        );
        let exact = (1.0 - 3.0_f64.cos()) / 3.0;
        assert!((v - exact).abs() < 1e-14);
    }
}
