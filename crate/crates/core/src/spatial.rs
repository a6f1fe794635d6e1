//! Exact spatial queries over 3D point sets.
//!
//! A balanced kd-tree supporting inclusive-radius ball queries and
//! capsule (segment) queries. Results are exact: a point is reported iff
//! its squared distance to the query ball center (or segment) is `<= r*r`,
//! with no approximation. Returned indices are sorted ascending so
//! downstream consumers are deterministic regardless of tree shape.

use nalgebra::Point3;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// Child node ids; `u32::MAX` marks a leaf.
    left: u32,
    right: u32,
    /// Range into `order` covered by this node.
    start: u32,
    end: u32,
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.left == u32::MAX
    }

    /// Squared distance from a point to this node's bounding box.
    fn dist2_to_point(&self, p: &[f64; 3]) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = p[k];
            let d = if v < self.min[k] {
                self.min[k] - v
            } else if v > self.max[k] {
                v - self.max[k]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }

    /// Lower bound on the distance between this box and a segment:
    /// the largest per-axis gap between the box interval and the
    /// segment's projection interval.
    fn gap_to_segment(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..3 {
            let (lo, hi) = if a[k] <= b[k] { (a[k], b[k]) } else { (b[k], a[k]) };
            let gap = if hi < self.min[k] {
                self.min[k] - hi
            } else if lo > self.max[k] {
                lo - self.max[k]
            } else {
                0.0
            };
            worst = worst.max(gap);
        }
        worst
    }
}

/// Balanced kd-tree over a fixed point set.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

impl KdTree {
    /// Builds the tree. Points must be finite.
    pub fn build(points: &[Point3<f64>]) -> Self {
        let pts: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<u32> = (0..pts.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = if pts.is_empty() {
            u32::MAX
        } else {
            let n = pts.len();
            build_node(&pts, &mut order, 0, n, &mut nodes)
        };
        KdTree {
            points: pts,
            order,
            nodes,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all points with ||p - center||^2 <= radius^2, ascending.
    pub fn radius_query(&self, center: &Point3<f64>, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if self.root == u32::MAX {
            return out;
        }
        let c = [center.x, center.y, center.z];
        let r2 = radius * radius;
        self.radius_rec(self.root, &c, r2, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node_id: u32, c: &[f64; 3], r2: f64, out: &mut Vec<u32>) {
        let node = &self.nodes[node_id as usize];
        if node.dist2_to_point(c) > r2 {
            return;
        }
        if node.is_leaf() {
            for &i in &self.order[node.start as usize..node.end as usize] {
                let p = &self.points[i as usize];
                let dx = p[0] - c[0];
                let dy = p[1] - c[1];
                let dz = p[2] - c[2];
                if dx * dx + dy * dy + dz * dz <= r2 {
                    out.push(i);
                }
            }
        } else {
            self.radius_rec(node.left, c, r2, out);
            self.radius_rec(node.right, c, r2, out);
        }
    }

    /// Indices of all points within `radius` of the segment [a, b], ascending.
    pub fn segment_query(&self, a: &Point3<f64>, b: &Point3<f64>, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if self.root == u32::MAX {
            return out;
        }
        let pa = [a.x, a.y, a.z];
        let pb = [b.x, b.y, b.z];
        self.segment_rec(self.root, &pa, &pb, radius, &mut out);
        out.sort_unstable();
        out
    }

    fn segment_rec(&self, node_id: u32, a: &[f64; 3], b: &[f64; 3], r: f64, out: &mut Vec<u32>) {
        let node = &self.nodes[node_id as usize];
        if node.gap_to_segment(a, b) > r {
            return;
        }
        if node.is_leaf() {
            let r2 = r * r;
            for &i in &self.order[node.start as usize..node.end as usize] {
                if point_segment_dist2(&self.points[i as usize], a, b) <= r2 {
                    out.push(i);
                }
            }
        } else {
            self.segment_rec(node.left, a, b, r, out);
            self.segment_rec(node.right, a, b, r, out);
        }
    }
}

/// Squared distance from point p to segment [a, b].
pub fn point_segment_dist2(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = ap[0] - t * ab[0];
    let dy = ap[1] - t * ab[1];
    let dz = ap[2] - t * ab[2];
    dx * dx + dy * dy + dz * dz
}

fn build_node(
    pts: &[[f64; 3]],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for &i in &order[start..end] {
        let p = &pts[i as usize];
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let id = nodes.len() as u32;
    nodes.push(Node {
        min,
        max,
        left: u32::MAX,
        right: u32::MAX,
        start: start as u32,
        end: end as u32,
    });
    let count = end - start;
    if count > LEAF_SIZE {
        // Split on the widest axis at the median.
        let mut axis = 0;
        for k in 1..3 {
            if max[k] - min[k] > max[axis] - min[axis] {
                axis = k;
            }
        }
        if max[axis] > min[axis] {
            let mid = start + count / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
                pts[i as usize][axis]
                    .partial_cmp(&pts[j as usize][axis])
                    .unwrap()
                    .then(i.cmp(&j))
            });
            let left = build_node(pts, order, start, mid, nodes);
            let right = build_node(pts, order, mid, end, nodes);
            nodes[id as usize].left = left;
            nodes[id as usize].right = right;
        }
        // Zero-extent nodes (all points coincident) stay leaves.
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, extent: f64, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-extent..extent),
                    rng.gen_range(-extent..extent),
                    rng.gen_range(-extent..extent),
                )
            })
            .collect()
    }

    #[test]
    fn radius_matches_linear_scan() {
        let pts = random_cloud(5000, 50.0, 7);
        let tree = KdTree::build(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let c = Point3::new(
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-50.0..50.0),
            );
            let r = rng.gen_range(0.1..30.0);
            let got = tree.radius_query(&c, r);
            let r2 = r * r;
            let want: Vec<u32> = pts
                .iter()
                .enumerate()
                .filter(|(_, p)| (*p - c).norm_squared() <= r2)
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn segment_matches_linear_scan() {
        let pts = random_cloud(3000, 20.0, 11);
        let tree = KdTree::build(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let a = Point3::new(
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
            );
            let b = Point3::new(
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
            );
            let r = rng.gen_range(0.05..5.0);
            let got = tree.segment_query(&a, &b, r);
            let pa = [a.x, a.y, a.z];
            let pb = [b.x, b.y, b.z];
            let want: Vec<u32> = pts
                .iter()
                .enumerate()
                .filter(|(_, p)| point_segment_dist2(&[p.x, p.y, p.z], &pa, &pb) <= r * r)
                .map(|(i, _)| i as u32)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_and_coincident() {
        let tree = KdTree::build(&[]);
        assert!(tree.radius_query(&Point3::origin(), 1.0).is_empty());

        let pts = vec![Point3::new(1.0, 1.0, 1.0); 100];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.radius_query(&Point3::new(1.0, 1.0, 1.0), 0.1).len(), 100);
        assert!(tree.radius_query(&Point3::origin(), 0.5).is_empty());
    }
}
