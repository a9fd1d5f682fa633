//! Static 3D kd-tree for nearest-neighbor and radius queries.
//!
//! Built once over a point slice; queries return indices into that slice.
//! Used by the outlier filter, normal estimation, region growing and ICP.

use std::collections::BinaryHeap;

use crate::geometry::Point3;

#[derive(Debug, Clone)]
struct Node {
    point: [f64; 3],
    index: u32,
    axis: u8,
    left: u32,
    right: u32,
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct KdTree {
    nodes: Vec<Node>,
    root: u32,
}

fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn build(points: &[Point3]) -> Self {
        let mut items: Vec<([f64; 3], u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ([p.x, p.y, p.z], i as u32))
            .collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(&mut items, 0, &mut nodes);
        Self { nodes, root }
    }

    fn build_rec(items: &mut [([f64; 3], u32)], depth: usize, nodes: &mut Vec<Node>) -> u32 {
        if items.is_empty() {
            return NONE;
        }
        let axis = depth % 3;
        let mid = items.len() / 2;
        items.sort_unstable_by(|a, b| {
            a.0[axis]
                .partial_cmp(&b.0[axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        let (point, index) = items[mid];
        let slot = nodes.len() as u32;
        nodes.push(Node {
            point,
            index,
            axis: axis as u8,
            left: NONE,
            right: NONE,
        });
        let (left_items, rest) = items.split_at_mut(mid);
        let right_items = &mut rest[1..];
        let left = Self::build_rec(left_items, depth + 1, nodes);
        let right = Self::build_rec(right_items, depth + 1, nodes);
        nodes[slot as usize].left = left;
        nodes[slot as usize].right = right;
        slot
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index and squared distance of the nearest point, or `None` if empty.
    pub fn nearest(&self, query: Point3) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let q = [query.x, query.y, query.z];
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(self.root, q, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: u32, q: [f64; 3], best: &mut (usize, f64)) {
        if node == NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        let d = dist_sq(n.point, q);
        if d < best.1 || (d == best.1 && (n.index as usize) < best.0) {
            *best = (n.index as usize, d);
        }
        let axis = n.axis as usize;
        let diff = q[axis] - n.point[axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.nearest_rec(near, q, best);
        if diff * diff <= best.1 {
            self.nearest_rec(far, q, best);
        }
    }

    /// The `k` nearest points to `query`, closest first. Ties broken by
    /// lower index so results are deterministic.
    pub fn k_nearest(&self, query: Point3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let q = [query.x, query.y, query.z];
        // max-heap of (dist, index) keeping the k best
        let mut heap: BinaryHeap<(ordered::F64, usize)> = BinaryHeap::with_capacity(k + 1);
        self.k_nearest_rec(self.root, q, k, &mut heap);
        let mut out: Vec<(usize, f64)> = heap.into_iter().map(|(d, i)| (i, d.0)).collect();
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn k_nearest_rec(
        &self,
        node: u32,
        q: [f64; 3],
        k: usize,
        heap: &mut BinaryHeap<(ordered::F64, usize)>,
    ) {
        if node == NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        let d = dist_sq(n.point, q);
        heap.push((ordered::F64(d), n.index as usize));
        if heap.len() > k {
            heap.pop();
        }
        let axis = n.axis as usize;
        let diff = q[axis] - n.point[axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.k_nearest_rec(near, q, k, heap);
        let worst = if heap.len() < k {
            f64::INFINITY
        } else {
            heap.peek().map(|(d, _)| d.0).unwrap_or(f64::INFINITY)
        };
        if diff * diff <= worst {
            self.k_nearest_rec(far, q, k, heap);
        }
    }

    /// Indices of all points within `radius` of `query`, ascending.
    pub fn within_radius(&self, query: Point3, radius: f64) -> Vec<usize> {
        let q = [query.x, query.y, query.z];
        let mut out = Vec::new();
        self.radius_rec(self.root, q, radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: u32, q: [f64; 3], r_sq: f64, out: &mut Vec<usize>) {
        if node == NONE {
            return;
        }
        let n = &self.nodes[node as usize];
        if dist_sq(n.point, q) <= r_sq {
            out.push(n.index as usize);
        }
        let axis = n.axis as usize;
        let diff = q[axis] - n.point[axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.radius_rec(near, q, r_sq, out);
        if diff * diff <= r_sq {
            self.radius_rec(far, q, r_sq, out);
        }
    }
}

mod ordered {
    /// f64 wrapper ordered for heap use; inputs are finite distances.
    #[derive(PartialEq, Clone, Copy)]
    pub struct F64(pub f64);

    impl Eq for F64 {}

    impl PartialOrd for F64 {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for F64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.partial_cmp(&other.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                )
            })
            .collect()
    }

    fn brute_k_nearest(points: &[Point3], q: Point3, k: usize) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p.to_vector() - q.to_vector()).norm_squared()))
            .collect();
        d.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        d.truncate(k);
        d
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = random_points(500, 7);
        let tree = KdTree::build(&pts);
        for q in random_points(50, 8) {
            let (bi, bd) = brute_k_nearest(&pts, q, 1)[0];
            let (i, d) = tree.nearest(q).unwrap();
            assert_eq!(i, bi);
            assert!((d - bd).abs() < 1e-12);
        }
    }

    #[test]
    fn k_nearest_matches_brute_force() {
        let pts = random_points(300, 9);
        let tree = KdTree::build(&pts);
        for q in random_points(20, 10) {
            let expect = brute_k_nearest(&pts, q, 12);
            let got = tree.k_nearest(q, 12);
            let ei: Vec<usize> = expect.iter().map(|e| e.0).collect();
            let gi: Vec<usize> = got.iter().map(|g| g.0).collect();
            assert_eq!(ei, gi);
        }
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = random_points(400, 11);
        let tree = KdTree::build(&pts);
        for q in random_points(20, 12) {
            let r = 3.0;
            let mut expect: Vec<usize> = pts
                .iter()
                .enumerate()
                .filter(|(_, p)| (p.to_vector() - q.to_vector()).norm_squared() <= r * r)
                .map(|(i, _)| i)
                .collect();
            expect.sort_unstable();
            assert_eq!(tree.within_radius(q, r), expect);
        }
    }

    #[test]
    fn empty_tree_queries() {
        let tree = KdTree::build(&[]);
        assert!(tree.nearest(Point3::new(0.0, 0.0, 0.0)).is_none());
        assert!(tree.k_nearest(Point3::new(0.0, 0.0, 0.0), 3).is_empty());
        assert!(tree.within_radius(Point3::new(0.0, 0.0, 0.0), 1.0).is_empty());
    }
}
