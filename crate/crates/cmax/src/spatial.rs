//! A small KD-tree over fixed-dimension points supporting radius queries.
//!
//! Inserts land in a linear pending buffer and the tree is rebuilt in bulk
//! once the pending count reaches the built size (inserts are rare relative
//! to queries in every caller). Pruning assumes the Euclidean metric.

/// Spatial index over points of one fixed dimension.
#[derive(Clone, Debug, Default)]
pub struct KdIndex {
    points: Vec<Vec<f64>>,
    /// Binary tree over indices into `points`; median-split, built in bulk.
    tree: Vec<KdNode>,
    root: Option<usize>,
    /// Points inserted since the last rebuild, scanned linearly.
    pending: Vec<usize>,
    built: usize,
}

#[derive(Clone, Debug)]
struct KdNode {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdIndex {
    pub fn new() -> Self {
        KdIndex::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn insert(&mut self, point: Vec<f64>) -> usize {
        let index = self.points.len();
        self.points.push(point);
        self.pending.push(index);
        if self.pending.len() >= self.built.max(1) {
            self.rebuild();
        }
        index
    }

    fn rebuild(&mut self) {
        self.tree.clear();
        self.pending.clear();
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        self.root = self.build(&mut order, 0);
        self.built = self.points.len();
    }

    fn build(&mut self, order: &mut [usize], depth: usize) -> Option<usize> {
        if order.is_empty() {
            return None;
        }
        let dim = self.points[order[0]].len();
        let axis = depth % dim;
        order.sort_by(|&a, &b| self.points[a][axis].total_cmp(&self.points[b][axis]));
        let mid = order.len() / 2;
        let point = order[mid];
        let node = self.tree.len();
        self.tree.push(KdNode {
            point,
            axis,
            left: None,
            right: None,
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build(lo, depth + 1);
        let right = self.build(&mut hi[1..], depth + 1);
        self.tree[node].left = left;
        self.tree[node].right = right;
        Some(node)
    }

    /// Is any stored point within `radius` (inclusive) of `query`?
    pub fn any_within(&self, query: &[f64], radius: f64) -> bool {
        let r2 = radius * radius;
        if self
            .pending
            .iter()
            .any(|&i| dist2(&self.points[i], query) <= r2)
        {
            return true;
        }
        match self.root {
            Some(root) => self.probe(root, query, radius, r2),
            None => false,
        }
    }

    fn probe(&self, node: usize, query: &[f64], radius: f64, r2: f64) -> bool {
        let n = &self.tree[node];
        if dist2(&self.points[n.point], query) <= r2 {
            return true;
        }
        let gap = query[n.axis] - self.points[n.point][n.axis];
        let (near, far) = if gap <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(child) = near {
            if self.probe(child, query, radius, r2) {
                return true;
            }
        }
        if gap.abs() <= radius {
            if let Some(child) = far {
                if self.probe(child, query, radius, r2) {
                    return true;
                }
            }
        }
        false
    }

    /// Indices of every stored point within `radius` (inclusive) of `query`.
    pub fn neighbors_within(&self, query: &[f64], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut hits: Vec<usize> = self
            .pending
            .iter()
            .copied()
            .filter(|&i| dist2(&self.points[i], query) <= r2)
            .collect();
        if let Some(root) = self.root {
            self.collect(root, query, radius, r2, &mut hits);
        }
        hits.sort_unstable();
        hits
    }

    fn collect(&self, node: usize, query: &[f64], radius: f64, r2: f64, hits: &mut Vec<usize>) {
        let n = &self.tree[node];
        if dist2(&self.points[n.point], query) <= r2 {
            hits.push(n.point);
        }
        let gap = query[n.axis] - self.points[n.point][n.axis];
        let (near, far) = if gap <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(child) = near {
            self.collect(child, query, radius, r2, hits);
        }
        if gap.abs() <= radius {
            if let Some(child) = far {
                self.collect(child, query, radius, r2, hits);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear_within(points: &[Vec<f64>], query: &[f64], radius: f64) -> Vec<usize> {
        points
            .iter()
            .enumerate()
            .filter(|(_, p)| dist2(p, query) <= radius * radius)
            .map(|(i, _)| i)
            .collect()
    }

    #[test]
    fn boundary_is_inclusive() {
        let mut index = KdIndex::new();
        index.insert(vec![0.0, 0.0]);
        assert!(index.any_within(&[3.0, 4.0], 5.0));
        assert!(!index.any_within(&[3.0, 4.0], 5.0 - 1e-9));
    }

    proptest! {
        #[test]
        fn matches_linear_scan_in_dims_2_through_7(
            dim in 2usize..=7,
            seed in 0u64..500,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..120);
            let mut index = KdIndex::new();
            let mut points = Vec::new();
            for _ in 0..n {
                let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                index.insert(p.clone());
                points.push(p);
            }
            for _ in 0..40 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                let radius = rng.gen_range(0.0..0.6);
                let expected = linear_within(&points, &q, radius);
                prop_assert_eq!(index.neighbors_within(&q, radius), expected.clone());
                prop_assert_eq!(index.any_within(&q, radius), !expected.is_empty());
            }
        }
    }
}
