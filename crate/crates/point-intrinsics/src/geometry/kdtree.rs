//! Exact k-nearest-neighbor search over 3-D points.
//!
//! A median-split KD-tree built once per cloud. Queries walk the tree with
//! a bounded max-heap, pruning subtrees farther than the current k-th best.

use std::collections::BinaryHeap;

pub struct KdTree {
    points: Vec<[f64; 3]>,
    // Indices into `points`, reordered so each subtree is contiguous.
    order: Vec<u32>,
}

struct Candidate {
    dist_sq: f64,
    index: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.dist_sq == other.dist_sq && self.index == other.index
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on distance; index breaks exact-distance ties so results
        // are deterministic regardless of build order.
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then_with(|| self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn build(points: Vec<[f64; 3]>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut tree = Self { points, order: Vec::new() };
        build_recursive(&tree.points, &mut order, 0);
        tree.order = order;
        tree
    }

    /// Indices of the `k` nearest points to `query`, excluding `exclude`
    /// (typically the query point itself). Ordered nearest-first.
    pub fn nearest(&self, query: [f64; 3], k: usize, exclude: Option<u32>) -> Vec<u32> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.search(&self.order, 0, query, k, exclude, &mut heap);
        let mut result: Vec<Candidate> = heap.into_vec();
        result.sort_by(|a, b| a.cmp(b));
        result.into_iter().map(|c| c.index).collect()
    }

    fn search(
        &self,
        slab: &[u32],
        axis: usize,
        query: [f64; 3],
        k: usize,
        exclude: Option<u32>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        if slab.is_empty() {
            return;
        }
        let mid = slab.len() / 2;
        let idx = slab[mid];
        let p = self.points[idx as usize];
        if Some(idx) != exclude {
            let dist_sq = dist_sq(p, query);
            if heap.len() < k {
                heap.push(Candidate { dist_sq, index: idx });
            } else if dist_sq < heap.peek().unwrap().dist_sq {
                heap.pop();
                heap.push(Candidate { dist_sq, index: idx });
            }
        }
        let delta = query[axis] - p[axis];
        let (near, far) =
            if delta < 0.0 { (&slab[..mid], &slab[mid + 1..]) } else { (&slab[mid + 1..], &slab[..mid]) };
        let next_axis = (axis + 1) % 3;
        self.search(near, next_axis, query, k, exclude, heap);
        if heap.len() < k || delta * delta < heap.peek().unwrap().dist_sq {
            self.search(far, next_axis, query, k, exclude, heap);
        }
    }
}

fn build_recursive(points: &[[f64; 3]], slab: &mut [u32], axis: usize) {
    if slab.len() <= 1 {
        return;
    }
    let mid = slab.len() / 2;
    slab.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then_with(|| a.cmp(&b))
    });
    let next_axis = (axis + 1) % 3;
    let (lo, rest) = slab.split_at_mut(mid);
    build_recursive(points, lo, next_axis);
    build_recursive(points, &mut rest[1..], next_axis);
}

fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
