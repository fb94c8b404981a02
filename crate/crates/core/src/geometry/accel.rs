//! Spatial acceleration structures: an AABB tree over triangles and a
//! kd-tree over points. Both answer exact nearest queries.

use nalgebra::Point3;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Aabb {
    pub lo: Point3<f64>,
    pub hi: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        for i in 0..3 {
            self.lo[i] = self.lo[i].min(p[i]);
            self.hi[i] = self.hi[i].max(p[i]);
        }
    }

    /// Squared distance from a point to this box (0 inside).
    fn dist2(&self, p: &Point3<f64>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let d = (self.lo[i] - p[i]).max(0.0).max(p[i] - self.hi[i]);
            d2 += d * d;
        }
        d2
    }
}

#[derive(Debug, Clone)]
enum BvhNode {
    Leaf {
        start: usize,
        count: usize,
    },
    Inner {
        left: usize,
        right: usize,
    },
}

/// Binary AABB tree over triangles, median-split on the longest axis.
///
/// Built once per mesh; queries are read-only and safe to run in parallel.
#[derive(Debug, Clone)]
pub(crate) struct TriBvh {
    nodes: Vec<(Aabb, BvhNode)>,
    /// Triangle indices, permuted so leaves reference contiguous runs.
    order: Vec<usize>,
}

const LEAF_SIZE: usize = 4;

impl TriBvh {
    pub fn build(centroids: &[Point3<f64>], tri_aabbs: &[Aabb]) -> Self {
        let mut order: Vec<usize> = (0..centroids.len()).collect();
        let mut nodes = Vec::new();
        if order.is_empty() {
            nodes.push((Aabb::empty(), BvhNode::Leaf { start: 0, count: 0 }));
            return TriBvh { nodes, order };
        }
        Self::build_node(&mut nodes, &mut order, 0, centroids.len(), centroids, tri_aabbs);
        TriBvh { nodes, order }
    }

    fn build_node(
        nodes: &mut Vec<(Aabb, BvhNode)>,
        order: &mut [usize],
        start: usize,
        end: usize,
        centroids: &[Point3<f64>],
        tri_aabbs: &[Aabb],
    ) -> usize {
        let mut bb = Aabb::empty();
        for &t in &order[start..end] {
            bb.grow(&tri_aabbs[t].lo);
            bb.grow(&tri_aabbs[t].hi);
        }
        let idx = nodes.len();
        nodes.push((bb, BvhNode::Leaf { start, count: 0 }));

        let count = end - start;
        if count <= LEAF_SIZE {
            nodes[idx].1 = BvhNode::Leaf { start, count };
            return idx;
        }

        // Longest axis of the centroid extent.
        let mut cb = Aabb::empty();
        for &t in &order[start..end] {
            cb.grow(&centroids[t]);
        }
        let ext = cb.hi - cb.lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };

        let mid = start + count / 2;
        order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
            centroids[a][axis]
                .partial_cmp(&centroids[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let left = Self::build_node(nodes, order, start, mid, centroids, tri_aabbs);
        let right = Self::build_node(nodes, order, mid, end, centroids, tri_aabbs);
        nodes[idx].1 = BvhNode::Inner { left, right };
        idx
    }

    /// Visit candidate triangles in best-first order. `visit` receives a
    /// triangle index and the current squared-distance bound, and returns
    /// the possibly improved bound.
    pub fn nearest<F: FnMut(usize, f64) -> f64>(&self, p: &Point3<f64>, mut visit: F) {
        let mut best = f64::INFINITY;
        // (lower bound, node index) min-heap via sorted stack.
        let mut stack: Vec<(f64, usize)> = vec![(self.nodes[0].0.dist2(p), 0)];
        while let Some((bound, idx)) = stack.pop() {
            if bound > best {
                continue;
            }
            match self.nodes[idx].1 {
                BvhNode::Leaf { start, count } => {
                    for &t in &self.order[start..start + count] {
                        best = visit(t, best);
                    }
                }
                BvhNode::Inner { left, right } => {
                    let dl = self.nodes[left].0.dist2(p);
                    let dr = self.nodes[right].0.dist2(p);
                    // Push the farther child first so the nearer pops first.
                    if dl <= dr {
                        if dr <= best {
                            stack.push((dr, right));
                        }
                        if dl <= best {
                            stack.push((dl, left));
                        }
                    } else {
                        if dl <= best {
                            stack.push((dl, left));
                        }
                        if dr <= best {
                            stack.push((dr, right));
                        }
                    }
                }
            }
        }
    }
}

/// Exact nearest-neighbor kd-tree over a fixed point set.
#[derive(Debug, Clone)]
pub struct KdTree3 {
    points: Vec<Point3<f64>>,
    /// Point indices arranged as an implicit median tree.
    order: Vec<usize>,
}

impl KdTree3 {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let pts = points.to_vec();
        if !order.is_empty() {
            Self::build_rec(&pts, &mut order, 0, points.len(), 0);
        }
        KdTree3 { points: pts, order }
    }

    fn build_rec(points: &[Point3<f64>], order: &mut [usize], start: usize, end: usize, depth: usize) {
        let count = end - start;
        if count <= 1 {
            return;
        }
        let axis = depth % 3;
        let mid = start + count / 2;
        order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self::build_rec(points, order, start, mid, depth + 1);
        Self::build_rec(points, order, mid + 1, end, depth + 1);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The stored point with the given original index.
    pub fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    /// Index and squared distance of the nearest stored point.
    /// Returns `None` for an empty tree.
    pub fn nearest(&self, query: &Point3<f64>) -> Option<(usize, f64)> {
        if self.order.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(query, 0, self.order.len(), 0, &mut best);
        Some(best)
    }

    fn nearest_rec(
        &self,
        query: &Point3<f64>,
        start: usize,
        end: usize,
        depth: usize,
        best: &mut (usize, f64),
    ) {
        if start >= end {
            return;
        }
        let count = end - start;
        let mid = start + count / 2;
        let idx = self.order[mid];
        let d2 = (self.points[idx] - query).norm_squared();
        if d2 < best.1 {
            *best = (idx, d2);
        }
        if count == 1 {
            return;
        }
        let axis = depth % 3;
        let delta = query[axis] - self.points[idx][axis];
        let (near, far) = if delta < 0.0 {
            ((start, mid), (mid + 1, end))
        } else {
            ((mid + 1, end), (start, mid))
        };
        self.nearest_rec(query, near.0, near.1, depth + 1, best);
        if delta * delta < best.1 {
            self.nearest_rec(query, far.0, far.1, depth + 1, best);
        }
    }
}
