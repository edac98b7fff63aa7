//! Nearest-neighbor queries over 3D point sets.

use std::collections::BinaryHeap;

use nalgebra::Vector3;

const LEAF_SIZE: usize = 12;

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { dim: u8, value: f64, left: u32, right: u32 },
}

/// Static kd-tree over a point slice. Query results carry indices into
/// the slice the index was built from.
///
/// Splits are made at the median by count, so any number of coincident
/// points is fine.
#[derive(Clone, Debug, Default)]
pub struct SpatialIndex {
    coords: Vec<[f64; 3]>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(PartialEq)]
struct Candidate(f64, u32);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl SpatialIndex {
    pub fn build<'a, I>(points: I) -> Self
    where
        I: IntoIterator<Item = &'a Vector3<f64>>,
    {
        let coords: Vec<[f64; 3]> = points.into_iter().map(|p| [p.x, p.y, p.z]).collect();
        Self::from_coords(&coords)
    }

    pub fn from_coords(coords: &[[f64; 3]]) -> Self {
        let mut ids: Vec<u32> = (0..coords.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * coords.len() / LEAF_SIZE + 1);
        if !coords.is_empty() {
            build_node(coords, &mut ids, 0, coords.len(), &mut nodes);
        }
        let ordered = ids.iter().map(|&i| coords[i as usize]).collect();
        SpatialIndex {
            coords: ordered,
            ids,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Closest point and its Euclidean distance.
    pub fn nearest(&self, q: &Vector3<f64>) -> Option<(usize, f64)> {
        self.nearest_within(q, f64::INFINITY)
    }

    pub fn nearest_within(&self, q: &Vector3<f64>, radius: f64) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let q = [q.x, q.y, q.z];
        let mut best = (radius * radius, u32::MAX);
        // Inclusive bound: nudge so points exactly at `radius` are found.
        if best.0.is_finite() {
            best.0 = best.0 * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        }
        self.nearest_rec(0, &q, &mut best);
        if best.1 == u32::MAX {
            return None;
        }
        Some((self.ids[best.1 as usize] as usize, best.0.sqrt()))
    }

    fn nearest_rec(&self, node: usize, q: &[f64; 3], best: &mut (f64, u32)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let d = dist2(&self.coords[slot as usize], q);
                    let better = d < best.0
                        || (d == best.0
                            && best.1 != u32::MAX
                            && self.ids[slot as usize] < self.ids[best.1 as usize]);
                    if better {
                        *best = (d, slot);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near as usize, q, best);
                if diff * diff <= best.0 {
                    self.nearest_rec(far as usize, q, best);
                }
            }
        }
    }

    /// Up to `k` nearest points within `radius`, closest first.
    pub fn k_nearest_within(&self, q: &Vector3<f64>, k: usize, radius: f64) -> Vec<(usize, f64)> {
        if self.is_empty() || k == 0 {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, &q, k, radius * radius, &mut heap);
        let mut out: Vec<(usize, f64)> = heap
            .into_iter()
            .map(|Candidate(d, slot)| (self.ids[slot as usize] as usize, d.sqrt()))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn knn_rec(
        &self,
        node: usize,
        q: &[f64; 3],
        k: usize,
        r2: f64,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let bound = |heap: &BinaryHeap<Candidate>| {
            if heap.len() == k {
                heap.peek().map_or(r2, |c| c.0)
            } else {
                r2
            }
        };
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    let d = dist2(&self.coords[slot as usize], q);
                    if d > r2 {
                        continue;
                    }
                    let cand = Candidate(d, slot);
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|top| {
                        d < top.0
                            || (d == top.0
                                && self.ids[slot as usize] < self.ids[top.1 as usize])
                    }) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near as usize, q, k, r2, heap);
                if diff * diff <= bound(heap) {
                    self.knn_rec(far as usize, q, k, r2, heap);
                }
            }
        }
    }

    /// All points within `radius`, in index order.
    pub fn within(&self, q: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        self.within_rec(0, &[q.x, q.y, q.z], radius * radius, &mut out);
        out.sort_unstable();
        out
    }

    fn within_rec(&self, node: usize, q: &[f64; 3], r2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start..end {
                    if dist2(&self.coords[slot as usize], q) <= r2 {
                        out.push(self.ids[slot as usize] as usize);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim as usize] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.within_rec(left as usize, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.within_rec(right as usize, q, r2, out);
                }
            }
        }
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_node(
    coords: &[[f64; 3]],
    ids: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return me as u32;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in &ids[start..end] {
        let c = coords[i as usize];
        for d in 0..3 {
            lo[d] = lo[d].min(c[d]);
            hi[d] = hi[d].max(c[d]);
        }
    }
    let dim = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = (end - start) / 2;
    ids[start..end].select_nth_unstable_by(mid, |&a, &b| {
        coords[a as usize][dim].total_cmp(&coords[b as usize][dim])
    });
    let value = coords[ids[start + mid] as usize][dim];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build_node(coords, ids, start, start + mid, nodes);
    let right = build_node(coords, ids, start + mid, end, nodes);
    nodes[me] = Node::Split {
        dim: dim as u8,
        value,
        left,
        right,
    };
    me as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        let pts = random_points(2000, 3);
        let index = SpatialIndex::build(&pts);
        for q in random_points(100, 4) {
            let (i, d) = index.nearest(&q).unwrap();
            let best = pts
                .iter()
                .map(|p| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((d - best).abs() < 1e-12);
            assert!(((pts[i] - q).norm() - best).abs() < 1e-12);

            let mut brute: Vec<usize> = (0..pts.len())
                .filter(|&j| (pts[j] - q).norm() <= 1.5)
                .collect();
            brute.sort_unstable();
            assert_eq!(index.within(&q, 1.5), brute);

            let knn = index.k_nearest_within(&q, 10, 1.5);
            assert_eq!(knn.len(), brute.len().min(10));
            assert!(knn.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }

    #[test]
    fn handles_degenerate_layouts() {
        let empty = SpatialIndex::build(&[]);
        assert!(empty.nearest(&Vector3::zeros()).is_none());
        assert!(empty.within(&Vector3::zeros(), 1.0).is_empty());

        // Thousands of points sharing z = 0 and duplicated positions.
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
                pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        let index = SpatialIndex::build(&pts);
        assert_eq!(index.len(), pts.len());
        let (_, d) = index.nearest(&Vector3::new(0.3, 0.3, 1.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }
}
