//! Small 2D toolkit for support polygons: convex hulls, signed distances,
//! closest boundary points and inradius.

use nalgebra::Vector2;

pub type Vec2 = Vector2<f64>;

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain. Returns indices into `points` in counter-clockwise
/// order with collinear points dropped. Degenerate inputs yield one index
/// (all points coincide) or two (all points collinear).
pub fn convex_hull_2d(points: &[Vec2], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .x
            .total_cmp(&points[j].x)
            .then(points[i].y.total_cmp(&points[j].y))
            .then(i.cmp(&j))
    });
    order.dedup_by(|a, b| (points[*a] - points[*b]).norm() <= tol);
    if order.len() < 3 {
        return order;
    }

    let mut hull: Vec<usize> = Vec::with_capacity(order.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> =
            if pass == 0 { Box::new(order.iter()) } else { Box::new(order.iter().rev()) };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(&points[hull[hull.len() - 2]], &points[hull[hull.len() - 1]], &points[i])
                    <= tol * tol
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // collinear: keep the two extremes
        return vec![order[0], *order.last().unwrap()];
    }
    hull
}

/// Closest point to `p` on segment `a`–`b`.
pub fn closest_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Convex support region: a point, a segment or a CCW polygon.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexRegion {
    pub vertices: Vec<Vec2>,
}

impl ConvexRegion {
    pub fn from_points(points: &[Vec2], tol: f64) -> Self {
        let idx = convex_hull_2d(points, tol);
        ConvexRegion { vertices: idx.into_iter().map(|i| points[i]).collect() }
    }

    pub fn is_polygon(&self) -> bool {
        self.vertices.len() >= 3
    }

    /// Edges as vertex pairs; a segment has one edge, a point none.
    pub fn edges(&self) -> Vec<(Vec2, Vec2)> {
        let n = self.vertices.len();
        match n {
            0 | 1 => Vec::new(),
            2 => vec![(self.vertices[0], self.vertices[1])],
            _ => (0..n).map(|i| (self.vertices[i], self.vertices[(i + 1) % n])).collect(),
        }
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        self.is_polygon() && self.edges().iter().all(|(a, b)| cross(a, b, p) >= 0.0)
    }

    /// Closest boundary point and the index of the edge it lies on (lowest
    /// index wins ties). For a single point the index is 0.
    pub fn closest_boundary_point(&self, p: &Vec2) -> Option<(Vec2, usize)> {
        match self.vertices.len() {
            0 => None,
            1 => Some((self.vertices[0], 0)),
            _ => {
                let mut best: Option<(Vec2, usize, f64)> = None;
                for (i, (a, b)) in self.edges().iter().enumerate() {
                    let q = closest_on_segment(p, a, b);
                    let d = (p - q).norm();
                    if best.map_or(true, |(_, _, bd)| d < bd) {
                        best = Some((q, i, d));
                    }
                }
                best.map(|(q, i, _)| (q, i))
            }
        }
    }

    /// Distance to the boundary, positive strictly inside a polygon and
    /// non-positive otherwise. Points and segments have no interior.
    pub fn signed_distance(&self, p: &Vec2) -> f64 {
        let Some((q, _)) = self.closest_boundary_point(p) else {
            return f64::NEG_INFINITY;
        };
        let d = (p - q).norm();
        if self.contains(p) {
            d
        } else {
            -d
        }
    }

    pub fn area(&self) -> f64 {
        if !self.is_polygon() {
            return 0.0;
        }
        let o = self.vertices[0];
        self.vertices
            .windows(2)
            .skip(1)
            .map(|w| cross(&o, &w[0], &w[1]))
            .sum::<f64>()
            * 0.5
    }

    /// Radius of the largest inscribed circle. Exhaustive over edge triples:
    /// the optimum of the inscribed-circle LP is pinned by three edge lines.
    pub fn inradius(&self) -> f64 {
        if !self.is_polygon() {
            return 0.0;
        }
        // each edge as n·x <= c with unit outward normal n
        let lines: Vec<(Vec2, f64)> = self
            .edges()
            .iter()
            .filter_map(|(a, b)| {
                let e = b - a;
                let len = e.norm();
                (len > 0.0).then(|| {
                    let n = Vec2::new(e.y, -e.x) / len;
                    (n, n.dot(a))
                })
            })
            .collect();
        let feasible = |x: &Vec2, r: f64| lines.iter().all(|(n, c)| n.dot(x) + r <= c + 1e-12);
        let mut best = 0.0f64;
        let k = lines.len();
        for i in 0..k {
            for j in (i + 1)..k {
                for l in (j + 1)..k {
                    let rows = [lines[i], lines[j], lines[l]];
                    let m = nalgebra::Matrix3::from_fn(|r, c| match c {
                        0 => rows[r].0.x,
                        1 => rows[r].0.y,
                        _ => 1.0,
                    });
                    let rhs = nalgebra::Vector3::new(rows[0].1, rows[1].1, rows[2].1);
                    if let Some(sol) = m.lu().solve(&rhs) {
                        let x = Vec2::new(sol.x, sol.y);
                        if sol.z.is_finite() && sol.z > best && feasible(&x, sol.z) {
                            best = sol.z;
                        }
                    }
                }
            }
        }
        best
    }
}
