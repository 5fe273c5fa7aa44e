//! Static k-d tree over 6D points for k-nearest-neighbour queries.
//!
//! Neighbours are ranked by `(squared distance, point index)`, so results
//! are fully determined by the point order given at build time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub const DIM: usize = 6;
const LEAF: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; DIM]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Cand(f64, usize);

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[inline]
fn dist2(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    let mut s = 0.0;
    for i in 0..DIM {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

impl KdTree {
    pub fn build(points: Vec<[f64; DIM]>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            let n = points.len();
            Self::build_rec(&points, &mut order, 0, n, &mut nodes);
        }
        Self { points, order, nodes }
    }

    fn build_rec(pts: &[[f64; DIM]], order: &mut [usize], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        if end - start <= LEAF {
            nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut order[start..end];
        let axis = (0..DIM)
            .map(|a| {
                let (lo, hi) = slice
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(pts[i][a]), hi.max(pts[i][a])));
                (a, hi - lo)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
            .map(|(a, _)| a)
            .unwrap_or(0);
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b)));
        let value = pts[slice[mid]][axis];
        nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = Self::build_rec(pts, order, start, start + mid, nodes);
        let right = Self::build_rec(pts, order, start + mid, end, nodes);
        nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Up to `k` nearest points as `(squared distance, index)`, nearest first.
    pub fn nearest(&self, q: &[f64; DIM], k: usize) -> Vec<(f64, usize)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, q, k, &mut heap);
        }
        let mut out: Vec<(f64, usize)> = heap.into_iter().map(|Cand(d, i)| (d, i)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    fn search(&self, node: usize, q: &[f64; DIM], k: usize, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Cand(dist2(q, &self.points[i]), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, k, heap);
                let worst = heap.peek().map_or(f64::INFINITY, |c| c.0);
                if heap.len() < k || diff * diff <= worst {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<[f64; DIM]> = (0..3000).map(|_| [0; DIM].map(|_| rng.random_range(0.0..100.0))).collect();
        let tree = KdTree::build(pts.clone());
        for _ in 0..200 {
            let q = [0; DIM].map(|_| rng.random_range(-10.0..110.0));
            let mut brute: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, p)| (dist2(&q, p), i)).collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            brute.truncate(8);
            assert_eq!(tree.nearest(&q, 8), brute);
        }
    }

    #[test]
    fn fewer_points_than_k() {
        let tree = KdTree::build(vec![[1.0; DIM], [2.0; DIM]]);
        assert_eq!(tree.nearest(&[0.0; DIM], 8).len(), 2);
        assert!(KdTree::build(vec![]).nearest(&[0.0; DIM], 3).is_empty());
    }
}
