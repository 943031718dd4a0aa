//! Kd-tree spatial index with brute-force-equivalent query semantics.
//!
//! Results are sorted by nondecreasing distance with ties broken by lower
//! point id, exactly matching a full linear scan.

use std::collections::BinaryHeap;

use super::{CloudError, Point3, PointCloud};

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf {
        start: u32,
        len: u32,
    },
    Inner {
        dim: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Spatial index over the points of a [`PointCloud`].
pub struct NeighborIndex {
    points: Vec<Point3>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
    root: u32,
}

/// Candidate ordered worst-first: larger distance, then larger id.
#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl NeighborIndex {
    /// Builds the index; empty clouds are rejected.
    pub fn build(cloud: &PointCloud) -> Result<Self, CloudError> {
        if cloud.is_empty() {
            return Err(CloudError::EmptyIndex);
        }
        let points = cloud.points().to_vec();
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let n = ids.len();
        let root = build_node(&points, &mut ids, 0, n, &mut nodes);
        Ok(Self {
            points,
            ids,
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query`, sorted by (distance, id).
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>, CloudError> {
        if k > self.points.len() {
            return Err(CloudError::KExceedsSize {
                k,
                size: self.points.len(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        self.knn_node(self.root, query, k, &mut heap);
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| (c.id as usize, c.dist2.sqrt()))
            .collect())
    }

    /// All points within `radius` of `query` (inclusive), sorted by (distance, id).
    pub fn radius_search(&self, query: &Point3, radius: f64) -> Vec<(usize, f64)> {
        if radius.is_nan() || radius <= 0.0 {
            return Vec::new();
        }
        let mut hits: Vec<Candidate> = Vec::new();
        self.radius_node(self.root, query, radius * radius, &mut hits);
        hits.sort_unstable();
        hits.into_iter()
            .map(|c| (c.id as usize, c.dist2.sqrt()))
            .collect()
    }

    fn knn_node(&self, node: u32, query: &Point3, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, len } => {
                for &id in &self.ids[*start as usize..(*start + *len) as usize] {
                    let d2 = dist2(query, &self.points[id as usize]);
                    let cand = Candidate { dist2: d2, id };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("heap nonempty") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Inner {
                dim,
                value,
                left,
                right,
            } => {
                let delta = query.coords[*dim as usize] - value;
                let (near, far) = if delta < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.knn_node(near, query, k, heap);
                let worst = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().expect("heap nonempty").dist2
                };
                // <= keeps equal-distance candidates reachable so id ties stay exact
                if delta * delta <= worst {
                    self.knn_node(far, query, k, heap);
                }
            }
        }
    }

    fn radius_node(&self, node: u32, query: &Point3, r2: f64, hits: &mut Vec<Candidate>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, len } => {
                for &id in &self.ids[*start as usize..(*start + *len) as usize] {
                    let d2 = dist2(query, &self.points[id as usize]);
                    if d2 <= r2 {
                        hits.push(Candidate { dist2: d2, id });
                    }
                }
            }
            Node::Inner {
                dim,
                value,
                left,
                right,
            } => {
                let delta = query.coords[*dim as usize] - value;
                let (near, far) = if delta < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.radius_node(near, query, r2, hits);
                if delta * delta <= r2 {
                    self.radius_node(far, query, r2, hits);
                }
            }
        }
    }
}

fn build_node(
    points: &[Point3],
    ids: &mut [u32],
    offset: usize,
    len: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            len: len as u32,
        });
        return (nodes.len() - 1) as u32;
    }
    // split along the widest axis of this subset
    let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
    for &id in ids[..len].iter() {
        let p = &points[id as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p.coords[a]);
            hi[a] = hi[a].max(p.coords[a]);
        }
    }
    let dim = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .expect("three axes");
    ids[..len].sort_unstable_by(|&a, &b| {
        points[a as usize].coords[dim]
            .total_cmp(&points[b as usize].coords[dim])
            .then(a.cmp(&b))
    });
    let mid = len / 2;
    let value = points[ids[mid] as usize].coords[dim];
    let placeholder = nodes.len();
    nodes.push(Node::Leaf { start: 0, len: 0 });
    let (left_ids, right_ids) = ids.split_at_mut(mid);
    let left = build_node(points, left_ids, offset, mid, nodes);
    let right = build_node(points, right_ids, offset + mid, len - mid, nodes);
    nodes[placeholder] = Node::Inner {
        dim: dim as u8,
        value,
        left,
        right,
    };
    placeholder as u32
}
